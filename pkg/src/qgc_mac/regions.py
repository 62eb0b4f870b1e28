"""Achievable-rate expressions for the MAC with states, their search and hulls."""

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .channels import ChannelSpec, builtin_example1
from .errors import AssignmentLoadError, DocumentError, DomainError, InfeasibleAssignmentError
from .loader import (
    BUILTIN_ASSIGNMENTS,
    load_assignment_document,
    parse_array,
    parse_stochastic,
    read_document,
    require_fields,
)
from .modrings import RingSpec, Z4
from .probinfo import (
    ConditionalPmf,
    JointPmf,
    Pmf,
    UQPair,
    conditional_entropy,
    mutual_information,
    mutual_information_direct,
)

logger = logging.getLogger(__name__)

# Entropies at or below this are treated as zero in ratio terms.
ZERO_ENTROPY = 1e-12

COST_TOLERANCE = 1e-9
STOCHASTIC_TOLERANCE = 1e-9
DOCUMENT_TOLERANCE = 1e-6

INNER_APPROXIMATION = "best found (inner approximation)"

R2_LABEL_NOTE = "the combined region's second inequality is applied to R2"

# einsum letters for the induced joint of a combined assignment
_AXIS_LETTERS = {"Q": "q", "S1": "s", "S2": "t", "U1": "a", "U2": "b", "V1": "i", "V2": "j", "Y": "y"}


def _stochastic(table: Any, label: str, ndim: int, axes: tuple[int, ...]) -> np.ndarray:
    t = np.array(table, dtype=float)
    if t.ndim != ndim:
        raise DomainError(f"{label} must be {ndim}-D, got shape {t.shape}")
    if np.any(t < -1e-12):
        raise DomainError(f"{label} has negative entries")
    if not np.allclose(t.sum(axis=axes), 1.0, atol=STOCHASTIC_TOLERANCE):
        raise DomainError(f"{label} is not a conditional law over axes {axes}")
    t = np.clip(t, 0.0, None)
    t.flags.writeable = False
    return t


def _require_budgets(ch: ChannelSpec, costs: tuple[float, float]) -> None:
    for i, (cost, tau) in enumerate(zip(costs, ch.budgets()), start=1):
        if cost > tau + COST_TOLERANCE:
            raise InfeasibleAssignmentError(
                f"encoder {i} average cost {cost:.6g} exceeds budget {tau:.6g}"
            )


def _check_shape(label: str, actual: int, expected: int) -> None:
    if actual != expected:
        raise DomainError(f"{label}: assignment uses {actual} symbols, channel has {expected}")


@dataclass(frozen=True, eq=False)
class GpAssignment:
    """
    Auxiliary law p(q) p(u1, x1 | s1, q) p(u2, x2 | s2, q).

    Attributes:
        q: Law of the time-sharing variable Q
        aux1: p(u1, x1 | s1, q) indexed [q, s1, u1, x1]
        aux2: p(u2, x2 | s2, q) indexed [q, s2, u2, x2]
    """

    q: Pmf
    aux1: np.ndarray
    aux2: np.ndarray

    def __post_init__(self):
        for name in ("aux1", "aux2"):
            table = _stochastic(getattr(self, name), name, 4, (2, 3))
            if table.shape[0] != self.q.size:
                raise DomainError(f"{name} has {table.shape[0]} Q values, q-law has {self.q.size}")
            object.__setattr__(self, name, table)

    def swapped(self) -> "GpAssignment":
        return GpAssignment(self.q, self.aux2, self.aux1)

    def check_channel(self, ch: ChannelSpec) -> None:
        _check_shape("S1", self.aux1.shape[1], ch.s1_size)
        _check_shape("S2", self.aux2.shape[1], ch.s2_size)
        _check_shape("X1", self.aux1.shape[3], ch.x1_size)
        _check_shape("X2", self.aux2.shape[3], ch.x2_size)

    def expected_costs(self, ch: ChannelSpec) -> tuple[float, float]:
        q = self.q.weights
        c1 = np.einsum("q,s,qsux,xs->", q, ch.state1.weights, self.aux1, ch.cost1)
        c2 = np.einsum("q,s,qsux,xs->", q, ch.state2.weights, self.aux2, ch.cost2)
        return float(c1), float(c2)


@dataclass(frozen=True, eq=False)
class CombinedAssignment:
    """
    Auxiliary law for the combined region.

    Attributes:
        ring: Ring carrying V and W
        q: Law of Q
        w1: p(w1 | q) indexed [q, w]
        w2: p(w2 | q) indexed [q, w]
        joint1: p(u1, v1, x1 | q, s1) indexed [q, s1, u1, v1, x1]
        joint2: p(u2, v2, x2 | q, s2) indexed [q, s2, u2, v2, x2]
    """

    ring: RingSpec
    q: Pmf
    w1: np.ndarray
    w2: np.ndarray
    joint1: np.ndarray
    joint2: np.ndarray

    def __post_init__(self):
        m = self.ring.modulus
        for name in ("w1", "w2"):
            table = _stochastic(getattr(self, name), name, 2, (1,))
            if table.shape != (self.q.size, m):
                raise DomainError(f"{name} must have shape ({self.q.size}, {m}), got {table.shape}")
            object.__setattr__(self, name, table)
        for name in ("joint1", "joint2"):
            table = _stochastic(getattr(self, name), name, 5, (2, 3, 4))
            if table.shape[0] != self.q.size or table.shape[3] != m:
                raise DomainError(f"{name} must be indexed [q, s, u, v in Z_{m}, x]")
            object.__setattr__(self, name, table)

    def gp_part(self) -> GpAssignment:
        """Drop V: p(u, x | s, q) = sum_v p(u, v, x | s, q)."""
        return GpAssignment(self.q, self.joint1.sum(axis=3), self.joint2.sum(axis=3))

    def check_channel(self, ch: ChannelSpec) -> None:
        _check_shape("S1", self.joint1.shape[1], ch.s1_size)
        _check_shape("S2", self.joint2.shape[1], ch.s2_size)
        _check_shape("X1", self.joint1.shape[4], ch.x1_size)
        _check_shape("X2", self.joint2.shape[4], ch.x2_size)

    def expected_costs(self, ch: ChannelSpec) -> tuple[float, float]:
        return self.gp_part().expected_costs(ch)


@dataclass(frozen=True, eq=False)
class QgcAssignment:
    """
    Auxiliary law p(q) prod_i p(w_i | q) p(v_i | q, s_i) p(x_i | q, v_i, s_i).

    Attributes:
        ring: Ring carrying V and W
        q: Law of Q
        w1, w2: p(w_i | q) indexed [q, w]
        v1, v2: p(v_i | q, s_i) indexed [q, s, v]
        x1, x2: p(x_i | q, v_i, s_i) indexed [q, v, s, x]
    """

    ring: RingSpec
    q: Pmf
    w1: np.ndarray
    w2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        m = self.ring.modulus
        for name in ("w1", "w2"):
            table = _stochastic(getattr(self, name), name, 2, (1,))
            if table.shape != (self.q.size, m):
                raise DomainError(f"{name} must have shape ({self.q.size}, {m}), got {table.shape}")
            object.__setattr__(self, name, table)
        for i in (1, 2):
            v = _stochastic(getattr(self, f"v{i}"), f"v{i}", 3, (2,))
            x = _stochastic(getattr(self, f"x{i}"), f"x{i}", 4, (3,))
            if v.shape[0] != self.q.size or v.shape[2] != m:
                raise DomainError(f"v{i} must be indexed [q, s, v in Z_{m}]")
            if x.shape[:3] != (self.q.size, m, v.shape[1]):
                raise DomainError(f"x{i} must be indexed [q, v, s, x] matching v{i}")
            object.__setattr__(self, f"v{i}", v)
            object.__setattr__(self, f"x{i}", x)

    def as_combined(self) -> CombinedAssignment:
        """The same law with constant U_1 and U_2."""
        joints = [
            np.einsum("qsv,qvsx->qsvx", getattr(self, f"v{i}"), getattr(self, f"x{i}"))[:, :, None]
            for i in (1, 2)
        ]
        return CombinedAssignment(self.ring, self.q, self.w1, self.w2, joints[0], joints[1])

    def v_marginal(self, i: int, state: Pmf) -> np.ndarray:
        """p(v_i | q) indexed [q, v]."""
        return np.einsum("s,qsv->qv", state.weights, getattr(self, f"v{i}"))


def lemma4_assignment() -> QgcAssignment:
    """
    Example-1 nested-QGC assignment achieving sum-rate 1.

    W_i is uniform on {0, 1}; V_1 is uniform on {-s_1, -s_1 + 2} and V_2 on
    {s_2, s_2 + 1}, so X_i = V_i - S_i meets both zero budgets.
    """
    m = 4
    w = np.array([[0.5, 0.5, 0.0, 0.0]])
    v1 = np.zeros((1, m, m))
    v2 = np.zeros((1, m, m))
    x = np.zeros((1, m, m, m))
    for s in range(m):
        v1[0, s, (-s) % m] += 0.5
        v1[0, s, (2 - s) % m] += 0.5
        v2[0, s, s] += 0.5
        v2[0, s, (s + 1) % m] += 0.5
        for v in range(m):
            x[0, v, s, (v - s) % m] = 1.0
    return QgcAssignment(Z4, Pmf([1.0]), w, w, v1, v2, x, x)


@dataclass(frozen=True)
class RateBounds:
    """Raw (possibly negative) bounds on R1, R2 and R1 + R2."""

    r1: float
    r2: float
    sum_rate: float
    terms: dict[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def vertices(self) -> list[tuple[float, float]]:
        """Corner points of the pentagon cut out by the three bounds, clamped at 0."""
        c = max(self.sum_rate, 0.0)
        a = min(max(self.r1, 0.0), c)
        b = min(max(self.r2, 0.0), c)
        return [
            (0.0, 0.0),
            (a, 0.0),
            (0.0, b),
            (a, max(0.0, min(b, c - a))),
            (max(0.0, min(a, c - b)), b),
        ]

    def max_sum(self) -> float:
        return max(x + y for x, y in self.vertices())

    def to_dict(self) -> dict[str, Any]:
        return {
            "R1": self.r1,
            "R2": self.r2,
            "R1+R2": self.sum_rate,
            "terms": dict(self.terms),
            "notes": list(self.notes),
        }


def _gp_joint(ch: ChannelSpec, a: GpAssignment) -> JointPmf:
    w = np.einsum(
        "q,s,t,qsax,qtbz,stxzy->qstaby",
        a.q.weights,
        ch.state1.weights,
        ch.state2.weights,
        a.aux1,
        a.aux2,
        ch.kernel,
        optimize=True,
    )
    names = ("Q", "S1", "S2", "U1", "U2", "Y")
    return JointPmf(tuple(zip(names, w.shape)), w)


def _combined_joint(ch: ChannelSpec, a: CombinedAssignment, names: tuple[str, ...]) -> JointPmf:
    out = "".join(_AXIS_LETTERS[name] for name in names)
    w = np.einsum(
        f"q,s,t,qsaix,qtbjz,stxzy->{out}",
        a.q.weights,
        ch.state1.weights,
        ch.state2.weights,
        a.joint1,
        a.joint2,
        ch.kernel,
        optimize=True,
    )
    return JointPmf(tuple(zip(names, w.shape)), w)


def _gp_terms(j: JointPmf) -> dict[str, float]:
    return {
        "I(U1;Y|U2,Q)": mutual_information(j, "U1", "Y", ("U2", "Q")),
        "I(U2;Y|U1,Q)": mutual_information(j, "U2", "Y", ("U1", "Q")),
        "I(U1,U2;Y|Q)": mutual_information(j, ("U1", "U2"), "Y", "Q"),
        "I(U1;S1|Q)": mutual_information(j, "U1", "S1", "Q"),
        "I(U2;S2|Q)": mutual_information(j, "U2", "S2", "Q"),
    }


def _gp_bounds(ch: ChannelSpec, a: GpAssignment, costs: tuple[float, float]) -> RateBounds:
    terms = _gp_terms(_gp_joint(ch, a))
    terms["E[c1]"], terms["E[c2]"] = costs
    return RateBounds(
        r1=terms["I(U1;Y|U2,Q)"] - terms["I(U1;S1|Q)"],
        r2=terms["I(U2;Y|U1,Q)"] - terms["I(U2;S2|Q)"],
        sum_rate=terms["I(U1,U2;Y|Q)"] - terms["I(U1;S1|Q)"] - terms["I(U2;S2|Q)"],
        terms=terms,
    )


def gp_rates(ch: ChannelSpec, a: GpAssignment) -> RateBounds:
    """
    Evaluate the Gel'fand-Pinsker extension bounds for one assignment.

    Args:
        ch: Channel with independent states
        a: Auxiliary assignment

    Returns:
        R1 <= I(U1;Y|U2Q) - I(U1;S1|Q), R2 <= I(U2;Y|U1Q) - I(U2;S2|Q) and
        R1 + R2 <= I(U1U2;Y|Q) - I(U1;S1|Q) - I(U2;S2|Q), unclamped

    Raises:
        UnsupportedChannelError: If the states are correlated
        InfeasibleAssignmentError: If a cost budget is exceeded
    """
    ch.require_independent_states()
    a.check_channel(ch)
    costs = a.expected_costs(ch)
    _require_budgets(ch, costs)
    return _gp_bounds(ch, a, costs)


def gp_rates_audit(ch: ChannelSpec, a: GpAssignment) -> dict[str, tuple[float, float]]:
    """Every mutual-information term of gp_rates by the chain rule and by direct summation."""
    j = _gp_joint(ch, a)
    chain = _gp_terms(j)
    direct = {
        "I(U1;Y|U2,Q)": mutual_information_direct(j, "U1", "Y", ("U2", "Q")),
        "I(U2;Y|U1,Q)": mutual_information_direct(j, "U2", "Y", ("U1", "Q")),
        "I(U1,U2;Y|Q)": mutual_information_direct(j, ("U1", "U2"), "Y", "Q"),
        "I(U1;S1|Q)": mutual_information_direct(j, "U1", "S1", "Q"),
        "I(U2;S2|Q)": mutual_information_direct(j, "U2", "S2", "Q"),
    }
    return {key: (chain[key], direct[key]) for key in chain}


def _ratio_term(numerator: float, denominator: float, factor: float) -> float:
    # Zero denominators: +inf for a positive co-factor, otherwise no contribution.
    if denominator <= ZERO_ENTROPY:
        return math.inf if factor > ZERO_ENTROPY else 0.0
    return numerator / denominator * factor


def _with_level(j: JointPmf, axis: str, t: int, ring: RingSpec) -> tuple[JointPmf, str]:
    name = f"[{axis}]_{t}"
    step = ring.p**t
    return j.derive(name, axis, lambda a: a % step, step), name


@dataclass(frozen=True)
class ThresholdReport:
    """A covering or packing threshold with its per-level terms."""

    value: float
    feasible: bool
    terms: tuple[dict[str, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "feasible": self.feasible, "terms": [dict(t) for t in self.terms]}


def _check_ring_alphabet(label: str, size: int, ring: RingSpec) -> None:
    if size != ring.modulus:
        raise DomainError(f"{label} must range over {ring}, got an alphabet of size {size}")


def covering_threshold(uq: UQPair, hatx_given_x: ConditionalPmf, ring: RingSpec) -> ThresholdReport:
    """
    Minimal bin rate for a QGC to cover a source.

    max over t in [1, r] of (H(U|Q) / H([U]_t|Q)) (t log2 p - H([Xhat]_t|X)).
    A zero denominator with a positive co-factor makes the threshold
    infinite and the report infeasible.
    """
    _check_ring_alphabet("U", uq.alphabet_size, ring)
    _check_ring_alphabet("Xhat", hatx_given_x.output_size, ring)
    ju = uq.joint()
    jx = hatx_given_x.joint(("X", "Xhat"))
    h_u = conditional_entropy(ju, "U", "Q")

    rows = []
    for t in range(1, ring.r + 1):
        jut, u_level = _with_level(ju, "U", t, ring)
        jxt, x_level = _with_level(jx, "Xhat", t, ring)
        denominator = conditional_entropy(jut, u_level, "Q")
        factor = t * math.log2(ring.p) - conditional_entropy(jxt, x_level, "X")
        rows.append(
            {
                "t": t,
                "H(U|Q)": h_u,
                "H([U]_t|Q)": denominator,
                "factor": factor,
                "term": _ratio_term(h_u, denominator, factor),
            }
        )
    value = max(row["term"] for row in rows)
    return ThresholdReport(value, math.isfinite(value), tuple(rows))


def packing_threshold(uq: UQPair, y_given_x: ConditionalPmf, ring: RingSpec) -> ThresholdReport:
    """
    Maximal rate for a QGC to be decodable from Y.

    min over t in [0, r-1] of (H(U|Q) / H(U|Q,[U]_t)) (log2 p^(r-t) - H(X|Y,[X]_t)),
    dropping levels whose denominator vanishes. With every level dropped the
    threshold is +inf and the report is flagged unbounded.
    """
    _check_ring_alphabet("U", uq.alphabet_size, ring)
    _check_ring_alphabet("X", y_given_x.source.size, ring)
    ju = uq.joint()
    jx = y_given_x.joint(("X", "Y"))
    h_u = conditional_entropy(ju, "U", "Q")

    rows = []
    for t in range(ring.r):
        if t == 0:
            # [.]_0 is constant
            denominator = h_u
            h_x = conditional_entropy(jx, "X", "Y")
        else:
            jut, u_level = _with_level(ju, "U", t, ring)
            jxt, x_level = _with_level(jx, "X", t, ring)
            denominator = conditional_entropy(jut, "U", ("Q", u_level))
            h_x = conditional_entropy(jxt, "X", ("Y", x_level))
        factor = (ring.r - t) * math.log2(ring.p) - h_x
        dropped = denominator <= ZERO_ENTROPY
        rows.append(
            {
                "t": t,
                "H(U|Q)": h_u,
                "H(U|Q,[U]_t)": denominator,
                "factor": factor,
                "term": math.inf if dropped else h_u / denominator * factor,
                "dropped": dropped,
            }
        )
    kept = [row["term"] for row in rows if not row["dropped"]]
    value = min(kept) if kept else math.inf
    return ThresholdReport(value, bool(kept), tuple(rows))


@dataclass(frozen=True)
class StructuredRate:
    """
    Nested-QGC rate term with every intermediate entropy.

    ``value`` is the general formula; ``simplified_value`` is the closed form
    used for the Example-1 achievability argument; ``v_reading_value`` uses
    H(V1+V2|Q) / H([V_i]_t|Q) in place of the W ratio.
    """

    value: float
    simplified_value: float
    v_reading_value: float
    entropies: dict[str, float]
    terms: tuple[dict[str, float], ...]

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)

    @property
    def discrepancy(self) -> float:
        return self.simplified_value - self.value

    def terms_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.terms))

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "simplified_value": self.simplified_value,
            "discrepancy": self.discrepancy,
            "v_reading_value": self.v_reading_value,
            "feasible": self.feasible,
            "entropies": dict(self.entropies),
            "terms": [dict(t) for t in self.terms],
        }


def _w_joint(a: CombinedAssignment) -> JointPmf:
    w = a.q.weights[:, None, None] * a.w1[:, :, None] * a.w2[:, None, :]
    m = a.ring.modulus
    j = JointPmf((("Q", a.q.size), ("W1", m), ("W2", m)), w)
    return j.derive("W1+W2", ("W1", "W2"), lambda x, y: (x + y) % m, m)


def _structured_rate(ch: ChannelSpec, a: CombinedAssignment) -> StructuredRate:
    ring = a.ring
    m = ring.modulus
    log_p = math.log2(ring.p)

    jw = _w_joint(a)
    jv = _combined_joint(ch, a, ("Q", "U1", "U2", "V1", "V2", "Y"))
    jv = jv.derive("V1+V2", ("V1", "V2"), lambda x, y: (x + y) % m, m)

    entropies = {
        "H(W1+W2|Q)": conditional_entropy(jw, "W1+W2", "Q"),
        "H(V1+V2|Q)": conditional_entropy(jv, "V1+V2", "Q"),
        "H(V1+V2|Y,U1,U2,Q)": conditional_entropy(jv, "V1+V2", ("Y", "U1", "U2", "Q")),
    }
    h_wsum = entropies["H(W1+W2|Q)"]
    h_vsum = entropies["H(V1+V2|Q)"]

    rows = []
    simplified_candidates = []
    for i in (1, 2):
        given = (f"U{i}", "Q", f"S{i}")
        ji = _combined_joint(ch, a, ("Q", f"S{i}", f"U{i}", f"V{i}"))
        h_wi = conditional_entropy(jw, f"W{i}", "Q")
        h_vi = conditional_entropy(ji, f"V{i}", given)
        entropies[f"H(W{i}|Q)"] = h_wi
        entropies[f"H(V{i}|U{i},Q,S{i})"] = h_vi
        simplified_candidates.append(_ratio_term(h_wsum, h_wi, h_vi) - (h_wsum - h_wi))

        for t in range(1, ring.r + 1):
            jwt, w_level = _with_level(jw, f"W{i}", t, ring)
            jit, v_level = _with_level(ji, f"V{i}", t, ring)
            h_wit = conditional_entropy(jwt, w_level, "Q")
            h_vit = conditional_entropy(jit, v_level, given)
            h_vit_q = conditional_entropy(jit, v_level, "Q")
            factor = t * log_p - h_vit
            rows.append(
                {
                    "encoder": i,
                    "t": t,
                    "H([W_i]_t|Q)": h_wit,
                    "H([V_i]_t|U_i,Q,S_i)": h_vit,
                    "factor": factor,
                    "term": _ratio_term(h_wsum, h_wit, factor),
                    "H([V_i]_t|Q)": h_vit_q,
                    "term_v_reading": _ratio_term(h_vsum, h_vit_q, factor),
                }
            )

    base = ring.r * log_p - entropies["H(V1+V2|Y,U1,U2,Q)"]
    return StructuredRate(
        value=base - max(row["term"] for row in rows),
        simplified_value=min(simplified_candidates) - entropies["H(V1+V2|Y,U1,U2,Q)"],
        v_reading_value=base - max(row["term_v_reading"] for row in rows),
        entropies=entropies,
        terms=tuple(rows),
    )


def _validated_combined(ch: ChannelSpec, a: CombinedAssignment) -> None:
    ch.require_independent_states()
    a.check_channel(ch)
    _require_budgets(ch, a.expected_costs(ch))


def validate_assignment(ch: ChannelSpec, a: GpAssignment | CombinedAssignment | QgcAssignment) -> list[str]:
    """Check an assignment against a channel without raising."""
    errors = []
    if not ch.states_independent():
        errors.append(f"channel {ch.name!r} has correlated states")

    if isinstance(a, QgcAssignment):
        a = a.as_combined()
    gp = a.gp_part() if isinstance(a, CombinedAssignment) else a
    shape_errors = [
        f"{label}: assignment uses {actual} symbols, channel has {expected}"
        for label, actual, expected in (
            ("S1", gp.aux1.shape[1], ch.s1_size),
            ("S2", gp.aux2.shape[1], ch.s2_size),
            ("X1", gp.aux1.shape[3], ch.x1_size),
            ("X2", gp.aux2.shape[3], ch.x2_size),
        )
        if actual != expected
    ]
    if shape_errors:
        # costs are undefined on mismatched alphabets
        return errors + shape_errors

    for i, (cost, tau) in enumerate(zip(gp.expected_costs(ch), ch.budgets()), start=1):
        if cost > tau + COST_TOLERANCE:
            errors.append(f"encoder {i} average cost {cost:.6g} exceeds budget {tau:.6g}")
    return errors


def qgc_sum_rate(ch: ChannelSpec, a: QgcAssignment) -> StructuredRate:
    """
    Nested-QGC achievable sum rate for one assignment.

    Returns the general value r log2 p - H(V1+V2|Y,Q) - max_{i,t} rho_{i,t},
    the closed-form specialization, the V-ratio reading and the full term
    table. A mismatch between the general and closed forms is logged.
    """
    combined = a.as_combined()
    _validated_combined(ch, combined)
    result = _structured_rate(ch, combined)
    if abs(result.discrepancy) > 1e-9:
        logger.warning(
            "General nested-QGC sum rate %.12g differs from the simplified expression %.12g by %.12g",
            result.value,
            result.simplified_value,
            result.discrepancy,
        )
    return result


def sum_output_law(ch: ChannelSpec, a: QgcAssignment) -> JointPmf:
    """Joint law of (V1 + V2, Y) induced by a nested-QGC assignment."""
    m = a.ring.modulus
    j = _combined_joint(ch, a.as_combined(), ("V1", "V2", "Y"))
    return j.derive("V1+V2", ("V1", "V2"), lambda x, y: (x + y) % m, m).marginal(("V1+V2", "Y"))


@dataclass(frozen=True)
class GroupCodeRate:
    """Group-code sum-rate bound with its entropy terms."""

    value: float
    terms: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "terms": dict(self.terms)}


def group_code_sum_rate(ch: ChannelSpec, a: QgcAssignment) -> GroupCodeRate:
    """
    min_{i,t} H([V_i]_t|Q,S_i) - H(V1+V2|Y,Q) for uniform V_i.

    Raises:
        DomainError: If some V_i is not uniform on the ring given Q
    """
    m = a.ring.modulus
    for i, state in ((1, ch.state1), (2, ch.state2)):
        marginal = a.v_marginal(i, state)[a.q.weights > 0]
        if not np.allclose(marginal, 1.0 / m, atol=1e-9):
            raise DomainError(f"group-code bound needs V{i} uniform on {a.ring}")

    combined = a.as_combined()
    _validated_combined(ch, combined)
    jv = _combined_joint(ch, combined, ("Q", "V1", "V2", "Y"))
    jv = jv.derive("V1+V2", ("V1", "V2"), lambda x, y: (x + y) % m, m)
    terms = {"H(V1+V2|Y,Q)": conditional_entropy(jv, "V1+V2", ("Y", "Q"))}
    for i in (1, 2):
        ji = _combined_joint(ch, combined, ("Q", f"S{i}", f"V{i}"))
        for t in range(1, a.ring.r + 1):
            jit, level = _with_level(ji, f"V{i}", t, a.ring)
            terms[f"H([V{i}]_{t}|Q,S{i})"] = conditional_entropy(jit, level, ("Q", f"S{i}"))
    level_terms = [v for k, v in terms.items() if k.startswith("H([V")]
    return GroupCodeRate(min(level_terms) - terms["H(V1+V2|Y,Q)"], terms)


def gamma_qgc(ch: ChannelSpec, a: CombinedAssignment) -> StructuredRate:
    """Structured-coding bonus of the combined region, conditioned on U_1 and U_2."""
    _validated_combined(ch, a)
    return _structured_rate(ch, a)


def combined_rates(ch: ChannelSpec, a: CombinedAssignment) -> RateBounds:
    """
    Bounds of the combined GP + nested-QGC region.

    R1 <= I(U1;Y|U2Q) - I(U1;S1|Q) + Gamma, R2 <= I(U2;Y|U1Q) - I(U2;S2|Q) + Gamma,
    R1 + R2 <= I(U1U2;Y|Q) - I(U1U2;S1S2|Q) + Gamma.
    """
    _validated_combined(ch, a)
    gamma = _structured_rate(ch, a)
    j = _combined_joint(ch, a, ("Q", "S1", "S2", "U1", "U2", "Y"))
    terms = _gp_terms(j)
    terms["I(U1,U2;S1,S2|Q)"] = mutual_information(j, ("U1", "U2"), ("S1", "S2"), "Q")
    terms["I(U1;U2|Q)"] = mutual_information(j, "U1", "U2", "Q")
    terms["Gamma_QGC"] = gamma.value
    logger.info(R2_LABEL_NOTE)
    return RateBounds(
        r1=terms["I(U1;Y|U2,Q)"] - terms["I(U1;S1|Q)"] + gamma.value,
        r2=terms["I(U2;Y|U1,Q)"] - terms["I(U2;S2|Q)"] + gamma.value,
        sum_rate=terms["I(U1,U2;Y|Q)"] - terms["I(U1,U2;S1,S2|Q)"] + gamma.value,
        terms=terms,
        notes=(R2_LABEL_NOTE,),
    )


@dataclass(frozen=True)
class RateRegion:
    """
    A rate region given by generating points and its Pareto frontier.

    The region is the convex hull of the points, their axis projections and
    the origin; ``frontier`` lists its Pareto-optimal vertices by increasing R1.
    """

    points: tuple[tuple[float, float], ...]
    frontier: tuple[tuple[float, float], ...]
    label: str = "exact"

    @property
    def max_r1(self) -> float:
        return self.frontier[-1][0]

    @property
    def max_r2(self) -> float:
        return self.frontier[0][1]

    def max_sum_rate(self) -> float:
        return max(r1 + r2 for r1, r2 in self.frontier)

    def contains(self, point: tuple[float, float], tol: float = 1e-9) -> bool:
        r1, r2 = point
        if r1 < -tol or r2 < -tol or r1 > self.max_r1 + tol:
            return False
        xs = [x for x, _ in self.frontier]
        ys = [y for _, y in self.frontier]
        if xs[0] > 0:
            xs.insert(0, 0.0)
            ys.insert(0, ys[0])
        return r2 <= float(np.interp(min(r1, self.max_r1), xs, ys)) + tol

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.frontier), columns=["R1", "R2"])


def _cross(o: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def region_hull(points: Iterable[tuple[float, float]], label: str = "exact") -> RateRegion:
    """
    Convex hull with time sharing and axis projections, reduced to its Pareto frontier.

    Args:
        points: Rate pairs; negative coordinates are clamped to 0
        label: Provenance label carried by the region

    Returns:
        RateRegion
    """
    clamped = sorted({(max(0.0, float(r1)), max(0.0, float(r2))) for r1, r2 in points})
    if not clamped:
        clamped = [(0.0, 0.0)]
    max_r1 = max(x for x, _ in clamped)
    max_r2 = max(y for _, y in clamped)

    tallest: dict[float, float] = {}
    for x, y in clamped + [(0.0, max_r2), (max_r1, 0.0)]:
        tallest[x] = max(tallest.get(x, 0.0), y)

    upper: list[tuple[float, float]] = []
    for point in sorted(tallest.items()):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], point) >= 0:
            upper.pop()
        upper.append(point)

    frontier = [
        v for v in upper if not any(w != v and w[0] >= v[0] and w[1] >= v[1] for w in upper)
    ]
    return RateRegion(tuple(clamped), tuple(frontier), label)


@dataclass(frozen=True)
class GpSearchConfig:
    """
    Budget for the seeded Gel'fand-Pinsker region search.

    U-alphabet sizes default to |X_i| |S_i|. ``iterations`` counts moves per
    restart, the first being the evaluation of the starting point.
    """

    q_size: int = 2
    u1_size: int | None = None
    u2_size: int | None = None
    restarts: int = 8
    iterations: int = 300
    step: float = 1.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.q_size < 1 or self.restarts < 1:
            raise DomainError("q_size and restarts must be >= 1")
        if self.iterations < 0:
            raise DomainError("iterations must be >= 0")
        for size in (self.u1_size, self.u2_size):
            if size is not None and size < 1:
                raise DomainError("auxiliary alphabet sizes must be >= 1")
        if self.step <= 0 or self.workers < 1:
            raise DomainError("step must be positive and workers >= 1")


@dataclass(frozen=True, eq=False)
class GpSearchResult:
    region: RateRegion
    best_sum_rate: float
    best_assignment: GpAssignment | None
    best_bounds: RateBounds | None
    evaluations: int


@dataclass
class _SearchState:
    q_logits: np.ndarray
    u_logits: list[np.ndarray]
    maps: list[np.ndarray]

    def copy(self) -> "_SearchState":
        return _SearchState(
            self.q_logits.copy(),
            [z.copy() for z in self.u_logits],
            [f.copy() for f in self.maps],
        )


@dataclass
class _RestartOutcome:
    triples: list[tuple[float, float, float]]
    best_sum: float
    best_assignment: GpAssignment | None
    best_bounds: RateBounds | None
    evaluations: int


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _allowed_inputs(cost: np.ndarray, tau: float) -> list[list[int]]:
    """Per state, the inputs a search may map to; zero budgets keep only free inputs."""
    x_size, s_size = cost.shape
    allowed = []
    for s in range(s_size):
        choices = list(range(x_size))
        if tau <= COST_TOLERANCE:
            free = [x for x in choices if cost[x, s] <= COST_TOLERANCE]
            choices = free or choices
        allowed.append(choices)
    return allowed


class _GpSearcher:
    """One restart of the coordinate-ascent search."""

    def __init__(self, ch: ChannelSpec, cfg: GpSearchConfig, weight: float, rng: np.random.Generator):
        self.ch = ch
        self.cfg = cfg
        self.weight = weight
        self.rng = rng
        self.s_sizes = (ch.s1_size, ch.s2_size)
        self.x_sizes = (ch.x1_size, ch.x2_size)
        self.u_sizes = (
            cfg.u1_size or ch.x1_size * ch.s1_size,
            cfg.u2_size or ch.x2_size * ch.s2_size,
        )
        self.allowed = (_allowed_inputs(ch.cost1, ch.tau1), _allowed_inputs(ch.cost2, ch.tau2))
        self.outcome = _RestartOutcome([], -math.inf, None, None, 0)

    def initial_state(self, deterministic: bool) -> _SearchState:
        nq = self.cfg.q_size
        if deterministic:
            # uniform laws, inputs cycled through the allowed set
            maps = [
                np.array(
                    [[[allowed[s][u % len(allowed[s])] for s in range(s_size)] for u in range(u_size)]] * nq
                )
                for allowed, s_size, u_size in zip(self.allowed, self.s_sizes, self.u_sizes)
            ]
            return _SearchState(
                np.zeros(nq),
                [np.zeros((nq, s, u)) for s, u in zip(self.s_sizes, self.u_sizes)],
                maps,
            )
        maps = [
            np.array(
                [[[self.rng.choice(allowed[s]) for s in range(s_size)] for _ in range(u_size)] for _ in range(nq)]
            )
            for allowed, s_size, u_size in zip(self.allowed, self.s_sizes, self.u_sizes)
        ]
        return _SearchState(
            self.rng.standard_normal(nq),
            [self.rng.standard_normal((nq, s, u)) for s, u in zip(self.s_sizes, self.u_sizes)],
            maps,
        )

    def assignment(self, state: _SearchState) -> GpAssignment:
        aux = []
        for i in (0, 1):
            pu = _softmax(state.u_logits[i])
            onehot = np.eye(self.x_sizes[i])[state.maps[i]]
            aux.append(np.einsum("qsu,qusx->qsux", pu, onehot))
        return GpAssignment(Pmf(_softmax(state.q_logits)), aux[0], aux[1])

    def evaluate(self, state: _SearchState) -> float:
        self.outcome.evaluations += 1
        a = self.assignment(state)
        costs = a.expected_costs(self.ch)
        if any(c > tau + COST_TOLERANCE for c, tau in zip(costs, self.ch.budgets())):
            return -math.inf
        bounds = _gp_bounds(self.ch, a, costs)
        self.outcome.triples.append((bounds.r1, bounds.r2, bounds.sum_rate))
        if bounds.max_sum() > self.outcome.best_sum:
            self.outcome.best_sum = bounds.max_sum()
            self.outcome.best_assignment = a
            self.outcome.best_bounds = bounds
        return max(self.weight * x + (1 - self.weight) * y for x, y in bounds.vertices())

    def run(self, deterministic_start: bool) -> _RestartOutcome:
        if self.cfg.iterations == 0:
            return self.outcome
        state = self.initial_state(deterministic_start)
        current = self.evaluate(state)
        step = self.cfg.step
        nq = self.cfg.q_size

        for _ in range(self.cfg.iterations - 1):
            i = int(self.rng.integers(2))
            q = int(self.rng.integers(nq))
            s = int(self.rng.integers(self.s_sizes[i]))
            if self.rng.random() < 0.4:
                u = int(self.rng.integers(self.u_sizes[i]))
                best_value, best_state = current, None
                for x in self.allowed[i][s]:
                    if x == state.maps[i][q, u, s]:
                        continue
                    candidate = state.copy()
                    candidate.maps[i][q, u, s] = x
                    value = self.evaluate(candidate)
                    if value > best_value + 1e-12:
                        best_value, best_state = value, candidate
                if best_state is not None:
                    state, current = best_state, best_value
                continue

            candidate = state.copy()
            if nq > 1 and self.rng.random() < 0.2:
                candidate.q_logits += step * self.rng.standard_normal(nq)
            else:
                candidate.u_logits[i][q, s] += step * self.rng.standard_normal(self.u_sizes[i])
            value = self.evaluate(candidate)
            if value > current + 1e-12:
                state, current = candidate, value
                step = min(step * 1.2, 4.0)
            else:
                step = max(step * 0.8, 0.05)
        return self.outcome


def _run_restart(task: tuple) -> _RestartOutcome:
    ch, cfg, index, seed_seq, weight = task
    searcher = _GpSearcher(ch, cfg, weight, np.random.default_rng(seed_seq))
    return searcher.run(deterministic_start=index == 0)


def _restart_weights(restarts: int) -> list[float]:
    if restarts == 1:
        return [0.5]
    return [0.5] + [float(w) for w in np.linspace(0.0, 1.0, restarts - 1)]


def gp_search(ch: ChannelSpec, cfg: GpSearchConfig | None = None) -> GpSearchResult:
    """
    Seeded random-restart coordinate ascent over Gel'fand-Pinsker assignments.

    Each restart maximizes a weighted rate lambda R1 + (1 - lambda) R2 over
    p(q), p(u_i | s_i, q) and deterministic maps x_i = f_i(q, u_i, s_i).
    Zero budgets restrict the maps to free inputs; other budgets are enforced
    by rejection. The result is a one-sided inner approximation.

    Args:
        ch: Channel with independent states
        cfg: Search budget; defaults to GpSearchConfig()

    Returns:
        GpSearchResult holding the best-found region and assignment
    """
    cfg = cfg or GpSearchConfig()
    ch.require_independent_states()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    weights = _restart_weights(cfg.restarts)
    tasks = [(ch, cfg, i, seeds[i], weights[i]) for i in range(cfg.restarts)]

    if cfg.workers > 1:
        with Pool(min(cfg.workers, cfg.restarts)) as pool:
            outcomes = pool.map(_run_restart, tasks)
    else:
        outcomes = [_run_restart(task) for task in tasks]

    points = [
        vertex
        for outcome in outcomes
        for r1, r2, total in outcome.triples
        for vertex in RateBounds(r1, r2, total).vertices()
    ]
    region = region_hull(points, label=INNER_APPROXIMATION)
    best = max(outcomes, key=lambda o: o.best_sum)
    evaluations = sum(o.evaluations for o in outcomes)
    logger.info(
        "GP search on %s: %d evaluations over %d restarts, best sum rate %.6f",
        ch.name,
        evaluations,
        cfg.restarts,
        region.max_sum_rate(),
    )
    return GpSearchResult(region, region.max_sum_rate(), best.best_assignment, best.best_bounds, evaluations)


def gp_region_search(ch: ChannelSpec, cfg: GpSearchConfig | None = None) -> RateRegion:
    """Best-found Gel'fand-Pinsker region, labeled as an inner approximation."""
    return gp_search(ch, cfg).region


def separation_report(cfg: GpSearchConfig | None = None) -> dict[str, Any]:
    """Best-found GP sum rate against the nested-QGC sum rate on Example 1."""
    ch = builtin_example1()
    search = gp_search(ch, cfg)
    qgc = qgc_sum_rate(ch, lemma4_assignment())
    return {
        "channel": ch.name,
        "gp_best_sum_rate": search.best_sum_rate,
        "gp_label": INNER_APPROXIMATION,
        "gp_evaluations": search.evaluations,
        "qgc_simplified_sum_rate": qgc.simplified_value,
        "qgc_general_sum_rate": qgc.value,
        "qgc_discrepancy": qgc.discrepancy,
        "gap": qgc.simplified_value - search.best_sum_rate,
    }


def _nested_shape(value: Any) -> tuple[int, ...]:
    shape = []
    node = value
    while isinstance(node, (list, tuple)):
        shape.append(len(node))
        if not node:
            break
        node = node[0]
    return tuple(shape)


def _table(document: Mapping[str, Any], key: str, ndim: int, stochastic: bool = True) -> np.ndarray:
    if key not in document:
        raise AssignmentLoadError(key, "missing required field")
    shape = _nested_shape(document[key])
    if len(shape) != ndim:
        raise AssignmentLoadError(key, f"expected a {ndim}-level nested array, got shape {shape}")
    if stochastic:
        return parse_stochastic(document[key], key, shape, DOCUMENT_TOLERANCE, AssignmentLoadError)
    return parse_array(document[key], key, shape, AssignmentLoadError)


def _map_table(document: Mapping[str, Any], key: str, x_size: int) -> np.ndarray:
    """Expand a deterministic input map to one-hot conditional laws."""
    indices = _table(document, key, 3, stochastic=False)
    if np.any(indices != np.round(indices)) or indices.min() < 0 or indices.max() >= x_size:
        raise AssignmentLoadError(key, f"map entries must be integers in [0, {x_size})")
    return np.eye(x_size)[indices.astype(np.int64)]


def _x_size(document: Mapping[str, Any], i: int) -> int:
    sizes = document.get("x_sizes")
    if not isinstance(sizes, list) or len(sizes) != 2:
        raise AssignmentLoadError("x_sizes", "required as [|X1|, |X2|] when input maps are used")
    return int(sizes[i - 1])


def _ring(document: Mapping[str, Any]) -> RingSpec:
    ring = document.get("ring")
    if not isinstance(ring, Mapping) or "p" not in ring:
        raise AssignmentLoadError("ring", "expected a mapping with p and r")
    try:
        return RingSpec(ring["p"], ring.get("r", 1))
    except DomainError as exc:
        raise AssignmentLoadError("ring", str(exc)) from exc


def load_assignment(document: Mapping[str, Any]) -> GpAssignment | QgcAssignment | CombinedAssignment:
    """
    Build an assignment from a document of kind ``gp``, ``qgc`` or ``combined``.

    Conditional input laws may be given in full (``aux1``, ``x1``, ``joint1``)
    or as deterministic maps (``x1_map`` plus ``x_sizes``).
    """
    require_fields(document, ("kind", "q"), AssignmentLoadError)
    kind = document["kind"]
    q_shape = _nested_shape(document["q"])
    if len(q_shape) != 1:
        raise AssignmentLoadError("q", "expected a probability vector")
    q = Pmf(parse_stochastic(document["q"], "q", q_shape, DOCUMENT_TOLERANCE, AssignmentLoadError))

    try:
        if kind == "gp":
            aux = []
            for i in (1, 2):
                if f"aux{i}" in document:
                    aux.append(_table(document, f"aux{i}", 4, stochastic=False))
                else:
                    pu = _table(document, f"u{i}", 3)
                    onehot = _map_table(document, f"x{i}_map", _x_size(document, i))
                    aux.append(np.einsum("qsu,qusx->qsux", pu, onehot))
            return GpAssignment(q, aux[0], aux[1])

        ring = _ring(document)
        w = [_table(document, f"w{i}", 2) for i in (1, 2)]
        if kind == "qgc":
            v = [_table(document, f"v{i}", 3) for i in (1, 2)]
            x = [
                _table(document, f"x{i}", 4)
                if f"x{i}" in document
                else _map_table(document, f"x{i}_map", _x_size(document, i))
                for i in (1, 2)
            ]
            return QgcAssignment(ring, q, w[0], w[1], v[0], v[1], x[0], x[1])

        if kind == "combined":
            joints = []
            for i in (1, 2):
                if f"joint{i}" in document:
                    joints.append(_table(document, f"joint{i}", 5, stochastic=False))
                else:
                    uv = _table(document, f"uv{i}", 4, stochastic=False)
                    onehot = _map_table(document, f"x{i}_map", _x_size(document, i))
                    joints.append(np.einsum("qsuv,qvsx->qsuvx", uv, onehot))
            return CombinedAssignment(ring, q, w[0], w[1], joints[0], joints[1])
    except AssignmentLoadError:
        raise
    except DomainError as exc:
        raise AssignmentLoadError("$", str(exc)) from exc

    raise AssignmentLoadError("kind", f"expected gp, qgc or combined, got {kind!r}")


def assignment_to_document(a: GpAssignment | QgcAssignment | CombinedAssignment) -> dict[str, Any]:
    """Serialize an assignment with full conditional tables."""
    doc: dict[str, Any] = {"q": a.q.weights.tolist()}
    if isinstance(a, GpAssignment):
        doc.update(kind="gp", aux1=a.aux1.tolist(), aux2=a.aux2.tolist())
        return doc
    doc.update(ring={"p": a.ring.p, "r": a.ring.r}, w1=a.w1.tolist(), w2=a.w2.tolist())
    if isinstance(a, QgcAssignment):
        doc.update(kind="qgc", v1=a.v1.tolist(), v2=a.v2.tolist(), x1=a.x1.tolist(), x2=a.x2.tolist())
    else:
        doc.update(kind="combined", joint1=a.joint1.tolist(), joint2=a.joint2.tolist())
    return doc


def resolve_assignment(name_or_path: str | Path) -> GpAssignment | QgcAssignment | CombinedAssignment:
    """Load a built-in assignment by name or an assignment document from disk."""
    if str(name_or_path) in BUILTIN_ASSIGNMENTS:
        return load_assignment(load_assignment_document(str(name_or_path)))
    try:
        document = read_document(name_or_path)
    except DocumentError as exc:
        raise AssignmentLoadError(exc.path, str(exc)) from exc
    return load_assignment(document)
