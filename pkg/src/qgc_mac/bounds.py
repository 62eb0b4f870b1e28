"""Brute-force checks of the Example-1 outer-bound analysis."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from multiprocessing import Pool
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import circulant
from scipy.special import entr

from .channels import ChannelSpec, builtin_example1
from .errors import DomainError, UnsupportedChannelError, VerificationError
from .modrings import circular_convolve
from .probinfo import Pmf, entropy

logger = logging.getLogger(__name__)

MODULUS = 4

# Zero-cost inputs of Example 1.
X1_VALUES = (0, 2)
X2_VALUES = (0, 1)

BOUND_SLACK = 1e-6
OUTER_BOUND = 0.32
OUTER_SLACK = 1e-3
RECONSTRUCTION_TOLERANCE = 1e-12
CONCAVITY_TOLERANCE = 1e-12

MAX_RESOLUTION = 200
DEFAULT_RESOLUTION = 100
DEFAULT_REFINE_STEPS = 3
REFINE_FACTOR = 10
REFINE_RADIUS = 5

CASE2_EVEN_VERTICES = ((2 / 3, 0.0, 1 / 3, 0.0), (1 / 3, 0.0, 2 / 3, 0.0))
CASE2_ADJACENT_VERTICES = ((2 / 3, 1 / 3, 0.0, 0.0), (1 / 3, 2 / 3, 0.0, 0.0))
CASE3_VERTICES = (
    (2 / 4, 1 / 4, 1 / 4, 0.0),
    (1 / 4, 2 / 4, 1 / 4, 0.0),
    (1 / 4, 1 / 4, 2 / 4, 0.0),
)

PATTERN_VERTICES = {
    "case2-even": CASE2_EVEN_VERTICES,
    "case2-adjacent": CASE2_ADJACENT_VERTICES,
    "case3": CASE3_VERTICES,
}

# circulant index: _CIRCULANT[k, j] = (k - j) mod 4
_CIRCULANT = (np.arange(MODULUS)[:, None] - np.arange(MODULUS)[None, :]) % MODULUS


def _bits_rows(w: np.ndarray) -> np.ndarray:
    return entr(w).sum(axis=-1) / np.log(2)


def _weights(p: Pmf | Sequence[float], label: str) -> np.ndarray:
    w = Pmf(np.asarray(getattr(p, "weights", p), dtype=float)).weights
    if w.size != MODULUS:
        raise DomainError(f"{label} must be a pmf over Z_4, got {w.size} entries")
    return w


def _map(fn: Callable, tasks: list, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with Pool(min(workers, len(tasks))) as pool:
            return pool.map(fn, tasks)
    return [fn(task) for task in tasks]


@dataclass(frozen=True)
class PtpBoundCase:
    """One row of the point-to-point inequality table: H(S) - H(X + S + N) <= bound."""

    name: str
    noise: tuple[float, ...]
    bound: float
    allowed_x: tuple[int, ...] = X1_VALUES

    def __post_init__(self):
        _weights(self.noise, f"noise of {self.name}")
        if not self.allowed_x or any(x not in range(MODULUS) for x in self.allowed_x):
            raise DomainError(f"allowed inputs of {self.name} must be a non-empty subset of Z_4")


PTP_TABLE = (
    PtpBoundCase("noise-free", (1.0, 0.0, 0.0, 0.0), 1.0),
    PtpBoundCase("(1/3,0,2/3,0)", (1 / 3, 0.0, 2 / 3, 0.0), 0.1),
    PtpBoundCase("(2/3,0,1/3,0)", (2 / 3, 0.0, 1 / 3, 0.0), 0.1),
    PtpBoundCase("(1/3,2/3,0,0)", (1 / 3, 2 / 3, 0.0, 0.0), 0.5),
    PtpBoundCase("(2/3,1/3,0,0)", (2 / 3, 1 / 3, 0.0, 0.0), 0.5),
    PtpBoundCase("(2/4,1/4,1/4,0)", (2 / 4, 1 / 4, 1 / 4, 0.0), 0.32),
    PtpBoundCase("(1/4,2/4,1/4,0)", (1 / 4, 2 / 4, 1 / 4, 0.0), 0.32),
    PtpBoundCase("(1/4,1/4,2/4,0)", (1 / 4, 1 / 4, 2 / 4, 0.0), 0.32),
)


def x_functions(allowed: Sequence[int] = X1_VALUES) -> list[tuple[int, ...]]:
    """All maps s -> x from Z_4 into ``allowed``, as value tuples indexed by s."""
    return list(product(allowed, repeat=MODULUS))


def _shift_matrix(xfun: Sequence[int]) -> np.ndarray:
    """M with M[s, (x(s) + s) mod 4] = 1, so the law of X + S is p_s @ M."""
    m = np.zeros((MODULUS, MODULUS))
    for s, x in enumerate(xfun):
        m[s, (x + s) % MODULUS] = 1.0
    return m


def ptp_objective(
    p_s: Pmf | Sequence[float],
    xfun: Sequence[int],
    noise: Pmf | Sequence[float],
    allowed: Sequence[int] = X1_VALUES,
) -> float:
    """
    H(S) - H(X + S + N) for a deterministic input map.

    Args:
        p_s: State law over Z_4
        xfun: Input x(s) for s = 0..3
        noise: Law of N over Z_4, independent of S
        allowed: Admissible inputs

    Returns:
        Objective in bits
    """
    if len(xfun) != MODULUS or any(x not in allowed for x in xfun):
        raise DomainError(f"x(s) must map Z_4 into {tuple(allowed)}, got {tuple(xfun)}")
    p = _weights(p_s, "p_s")
    law = p @ _shift_matrix(xfun)
    return entropy(p) - entropy(circular_convolve(law, _weights(noise, "noise")))


def _objective_rows(points: np.ndarray, xfun: Sequence[int], noise: np.ndarray) -> np.ndarray:
    law = points @ _shift_matrix(xfun)
    return _bits_rows(points) - _bits_rows(law @ circulant(noise).T)


def _check_resolution(resolution: int) -> None:
    if int(resolution) != resolution or not 1 <= resolution <= MAX_RESOLUTION:
        raise DomainError(f"grid resolution must be an integer in [1, {MAX_RESOLUTION}], got {resolution}")


def simplex_grid(resolution: int, dim: int = MODULUS) -> np.ndarray:
    """
    All pmfs over ``dim`` symbols with entries in multiples of 1/resolution.

    Returns:
        Array of shape (C(resolution + dim - 1, dim - 1), dim), lexicographic in bar positions
    """
    if resolution < 1 or dim < 1:
        raise DomainError(f"need resolution >= 1 and dim >= 1, got {resolution}, {dim}")
    slots = resolution + dim - 1
    bars = list(combinations(range(slots), dim - 1))
    bars = np.array(bars, dtype=np.int64).reshape(len(bars), dim - 1)
    edges = np.hstack(
        [np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), slots)]
    )
    return (np.diff(edges, axis=1) - 1) / resolution


@lru_cache(maxsize=4)
def _cached_grid(resolution: int, dim: int) -> np.ndarray:
    grid = simplex_grid(resolution, dim)
    grid.flags.writeable = False
    return grid


@dataclass(frozen=True)
class PtpMaximum:
    value: float
    p_s: tuple[float, ...]
    xfun: tuple[int, ...]


def _local_refine(
    start: np.ndarray, xfun: Sequence[int], noise: np.ndarray, resolution: int, refine_steps: int
) -> tuple[float, np.ndarray]:
    best = start
    best_value = float(_objective_rows(start[None, :], xfun, noise)[0])
    offsets = np.array(list(product(range(-REFINE_RADIUS, REFINE_RADIUS + 1), repeat=MODULUS - 1)))
    step = 1.0 / resolution
    for _ in range(refine_steps):
        step /= REFINE_FACTOR
        head = best[: MODULUS - 1] + offsets * step
        candidates = np.hstack([head, 1.0 - head.sum(axis=1, keepdims=True)])
        candidates = np.clip(candidates[(candidates >= -1e-15).all(axis=1)], 0.0, None)
        values = _objective_rows(candidates, xfun, noise)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value, best = float(values[i]), candidates[i]
    return best_value, best


def _function_max(task: tuple) -> PtpMaximum:
    noise, xfun, resolution, refine_steps = task
    grid = _cached_grid(resolution, MODULUS)
    values = _objective_rows(grid, xfun, noise)
    start = grid[int(np.argmax(values))]
    value, point = _local_refine(start, xfun, noise, resolution, refine_steps)
    return PtpMaximum(value, tuple(float(v) for v in point), tuple(xfun))


def ptp_max(
    noise: Pmf | Sequence[float],
    resolution: int = DEFAULT_RESOLUTION,
    refine_steps: int = DEFAULT_REFINE_STEPS,
    allowed: Sequence[int] = X1_VALUES,
    workers: int = 1,
) -> PtpMaximum:
    """
    Maximize the point-to-point objective over all input maps and a refined simplex grid.

    Each map is scored on the grid, then the best grid point is refined
    ``refine_steps`` times on a lattice REFINE_FACTOR times finer.
    """
    _check_resolution(resolution)
    if refine_steps < 0:
        raise DomainError(f"refine_steps must be >= 0, got {refine_steps}")
    w = _weights(noise, "noise")
    tasks = [(w, xfun, resolution, refine_steps) for xfun in x_functions(allowed)]
    results = _map(_function_max, tasks, workers)
    return max(results, key=lambda r: r.value)


@dataclass(frozen=True)
class PtpRow:
    case: PtpBoundCase
    maximum: PtpMaximum

    @property
    def margin(self) -> float:
        return self.case.bound - self.maximum.value

    @property
    def passed(self) -> bool:
        return self.maximum.value <= self.case.bound + BOUND_SLACK

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.case.name,
            "noise": list(self.case.noise),
            "bound": self.case.bound,
            "max_found": self.maximum.value,
            "margin": self.margin,
            "passed": self.passed,
            "argmax_p_s": list(self.maximum.p_s),
            "argmax_function": list(self.maximum.xfun),
        }


@dataclass(frozen=True)
class PtpReport:
    rows: tuple[PtpRow, ...]
    resolution: int
    refine_steps: int

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failures(self) -> list[PtpRow]:
        return [row for row in self.rows if not row.passed]

    def case_bounds(self) -> dict[str, float]:
        """
        Per-case bounds on R(u2, .) derived from the row maxima.

        Case 2 with adjacent shifts uses H(S2|u2) <= log2 of the largest
        reachable state support.
        """
        found = [row.maximum.value for row in self.rows]
        bounds = {
            "case1": found[0] - 1.0,
            "case2-even": max(found[1:3]),
            "case2-adjacent": max(found[3:5]) + math.log2(adjacent_class_max_support()) - 2.0,
            "case3": max(found[5:8]),
            "case4": 0.0,
        }
        bounds["overall"] = max(bounds.values())
        return bounds

    def to_frame(self) -> pd.DataFrame:
        records = [row.to_dict() for row in self.rows]
        for record in records:
            record["noise"] = ",".join(f"{v:.12g}" for v in record["noise"])
            record["argmax_p_s"] = ",".join(f"{v:.12g}" for v in record["argmax_p_s"])
            record["argmax_function"] = ",".join(str(v) for v in record["argmax_function"])
        return pd.DataFrame(records)

    def to_dict(self) -> dict[str, Any]:
        return {
            "grid_resolution": self.resolution,
            "refine_steps": self.refine_steps,
            "passed": self.passed,
            "rows": [row.to_dict() for row in self.rows],
            "case_bounds": self.case_bounds(),
            "outer_bound": OUTER_BOUND,
        }


def verify_ptp_table(
    resolution: int = DEFAULT_RESOLUTION,
    refine_steps: int = DEFAULT_REFINE_STEPS,
    cases: Iterable[PtpBoundCase] = PTP_TABLE,
    workers: int = 1,
) -> PtpReport:
    """Maximize every row of the inequality table and compare with its bound."""
    rows = []
    for case in cases:
        maximum = ptp_max(case.noise, resolution, refine_steps, case.allowed_x, workers)
        row = PtpRow(case, maximum)
        if row.passed:
            logger.info("Row %s: max %.9f <= %.4g", case.name, maximum.value, case.bound)
        else:
            logger.error(
                "Row %s violated: max %.9f > %.4g at p_s=%s, x=%s",
                case.name,
                maximum.value,
                case.bound,
                maximum.p_s,
                maximum.xfun,
            )
        rows.append(row)
    return PtpReport(tuple(rows), resolution, refine_steps)


def assert_ptp_table(report: PtpReport) -> None:
    """Raise VerificationError carrying the first violated row."""
    failures = report.failures()
    if failures:
        row = failures[0]
        raise VerificationError(
            f"{len(failures)} inequality row(s) violated, first {row.case.name}", row.to_dict()
        )


def shift_invariance_gap(resolution: int = 20, refine_steps: int = 0) -> float:
    """
    Largest change in the maximized objective when noise on {a, b} is shifted to {0, b - a}.
    """
    gap = 0.0
    for a, b in product(range(MODULUS), repeat=2):
        if a == b:
            continue
        for p0 in (1 / 3, 1 / 2, 2 / 3):
            noise = np.zeros(MODULUS)
            noise[a], noise[b] = p0, 1 - p0
            direct = ptp_max(noise, resolution, refine_steps).value
            shifted = ptp_max(np.roll(noise, -a), resolution, refine_steps).value
            gap = max(gap, abs(direct - shifted))
    return gap


@dataclass(frozen=True)
class CaseClass:
    """An encoder-2 map u -> f(., u) with its shift set L_u = {f(s) + s}."""

    function: tuple[int, ...]
    shifts: frozenset[int]
    support: tuple[int, ...] = tuple(range(MODULUS))

    @property
    def class_index(self) -> int:
        return len(self.shifts)


def classify_u2(f: Sequence[int], support: Iterable[int] | None = None) -> CaseClass:
    """
    Classify an encoder-2 map by |L_u| over the states in ``support``.

    Args:
        f: Values f(s) in {0, 1} for s = 0..3
        support: States with positive probability; all of Z_4 when None

    Returns:
        CaseClass with class_index = |{f(s) + s mod 4 : s in support}|
    """
    f = tuple(int(v) for v in f)
    if len(f) != MODULUS:
        raise DomainError(f"f must give one value per state of Z_4, got {len(f)}")
    bad = [v for v in f if v not in X2_VALUES]
    if bad:
        raise DomainError(f"f takes value {bad[0]} outside the zero-cost set {X2_VALUES}")
    states = tuple(sorted(set(range(MODULUS) if support is None else support)))
    if not states or any(s not in range(MODULUS) for s in states):
        raise DomainError(f"support must be a non-empty subset of Z_4, got {states}")
    return CaseClass(f, frozenset((f[s] + s) % MODULUS for s in states), states)


def enumerate_case_classes(support: Iterable[int] | None = None) -> dict[int, list[CaseClass]]:
    """Partition the 16 admissible encoder-2 maps into classes B_1..B_4."""
    support = None if support is None else tuple(support)
    classes: dict[int, list[CaseClass]] = {i: [] for i in range(1, MODULUS + 1)}
    for f in x_functions(X2_VALUES):
        case = classify_u2(f, support)
        classes[case.class_index].append(case)
    return classes


def adjacent_class_max_support() -> int:
    """Most states that can reach a shift set {a, a + 1} with inputs in {0, 1}."""
    best = 0
    for a in range(MODULUS):
        shifts = {a, (a + 1) % MODULUS}
        reachable = {s for s in range(MODULUS) if any((s + x) % MODULUS in shifts for x in X2_VALUES)}
        best = max(best, len(reachable))
    return best


@dataclass(frozen=True)
class Decomposition:
    """Convex weights writing a pmf as a mix of fixed pattern vertices."""

    pattern: str
    coefficients: tuple[float, ...]
    residual: float

    @property
    def vertices(self) -> tuple[tuple[float, ...], ...]:
        return PATTERN_VERTICES[self.pattern]

    @property
    def feasible(self) -> bool:
        return all(-RECONSTRUCTION_TOLERANCE <= c <= 1 + RECONSTRUCTION_TOLERANCE for c in self.coefficients)

    def reconstruct(self) -> np.ndarray:
        return np.asarray(self.coefficients) @ np.asarray(self.vertices)


def _pattern_of(w: np.ndarray) -> str:
    if w[3] > RECONSTRUCTION_TOLERANCE:
        raise DomainError(f"pmf {w.tolist()} has p(3) > 0 and matches no decomposition pattern")
    if w[1] <= RECONSTRUCTION_TOLERANCE:
        return "case2-even"
    if w[2] <= RECONSTRUCTION_TOLERANCE:
        return "case2-adjacent"
    return "case3"


def _coefficients(points: np.ndarray, pattern: str) -> np.ndarray:
    if pattern == "case3":
        return 4 * points[:, :3] - 1
    beta = 3 * points[:, 0] - 1
    return np.stack([beta, 1 - beta], axis=1)


def decomposition_coefficients(p: Pmf | Sequence[float]) -> Decomposition:
    """
    Convex weights for a Case-2 or Case-3 pmf.

    (p0, 0, 1-p0, 0) and (p0, 1-p0, 0, 0) use beta = 3 p0 - 1 on the two
    1/3-patterned vertices; (p0, p1, p2, 0) uses beta_i = 4 p_i - 1 on the three
    1/4-patterned vertices. Weights outside [0, 1] make the result infeasible.
    """
    w = _weights(p, "p")
    pattern = _pattern_of(w)
    coefficients = _coefficients(w[None, :], pattern)[0]
    residual = float(np.abs(coefficients @ np.asarray(PATTERN_VERTICES[pattern]) - w).max())
    return Decomposition(pattern, tuple(float(c) for c in coefficients), residual)


def _pattern_points(pattern: str, resolution: int) -> np.ndarray:
    if pattern == "case3":
        grid = simplex_grid(resolution, 3)
        grid = grid[(grid[:, 1] > 0) & (grid[:, 2] > 0)]
        return np.hstack([grid, np.zeros((len(grid), 1))])
    p0 = np.arange(resolution + 1) / resolution
    points = np.zeros((len(p0), MODULUS))
    points[:, 0] = p0
    points[:, 1 if pattern == "case2-adjacent" else 2] = 1 - p0
    return points


@dataclass(frozen=True)
class DecompositionReport:
    rows: tuple[dict[str, Any], ...]
    resolution: int

    @property
    def passed(self) -> bool:
        return all(
            row["max_residual"] <= RECONSTRUCTION_TOLERANCE
            and row["min_concavity_gap"] >= -CONCAVITY_TOLERANCE
            for row in self.rows
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows))

    def to_dict(self) -> dict[str, Any]:
        return {"grid_resolution": self.resolution, "passed": self.passed, "rows": [dict(r) for r in self.rows]}


def verify_decompositions(resolution: int = DEFAULT_RESOLUTION, noise_resolution: int = 8) -> DecompositionReport:
    """
    Check reconstruction and the concavity step for every gridded Case-2/3 pmf.

    For feasible pmfs p = sum_i beta_i v_i and every noise q on a coarse grid,
    the gap H(p * q) - sum_i beta_i H(v_i * q) must be non-negative.
    Infeasible pmfs are counted and left to the direct search.
    """
    _check_resolution(resolution)
    noises = simplex_grid(noise_resolution, MODULUS)
    rows = []
    for pattern, vertices in PATTERN_VERTICES.items():
        points = _pattern_points(pattern, resolution)
        coefficients = _coefficients(points, pattern)
        v = np.asarray(vertices)
        residual = float(np.abs(coefficients @ v - points).max())
        feasible = np.all(
            (coefficients >= -RECONSTRUCTION_TOLERANCE) & (coefficients <= 1 + RECONSTRUCTION_TOLERANCE),
            axis=1,
        )
        p, beta = points[feasible], coefficients[feasible]
        gap = math.inf
        for q in noises:
            c = circulant(q).T
            direct = _bits_rows(p @ c)
            mixed = beta @ _bits_rows(v @ c)
            gap = min(gap, float((direct - mixed).min()))
        rows.append(
            {
                "pattern": pattern,
                "pmfs": len(points),
                "infeasible": int((~feasible).sum()),
                "max_residual": residual,
                "min_concavity_gap": gap,
            }
        )
        if residual > RECONSTRUCTION_TOLERANCE or gap < -CONCAVITY_TOLERANCE:
            logger.error("Decomposition check failed for %s: residual %.3g, gap %.3g", pattern, residual, gap)
        logger.info("%s: %d of %d gridded pmfs lie outside the decomposition range", pattern, rows[-1]["infeasible"], len(points))
    return DecompositionReport(tuple(rows), resolution)


def _transformed_laws(p: np.ndarray, keep: np.ndarray, shift: int) -> np.ndarray:
    """Law of X + S when X = 0 with probability keep[s] and X = shift otherwise."""
    return p * keep + np.roll(p * (1 - keep), shift, axis=-1)


def _outer_rows(p1: np.ndarray, t1: np.ndarray, p2: np.ndarray, t2: np.ndarray) -> np.ndarray:
    y = np.einsum("nj,nkj->nk", t1, t2[:, _CIRCULANT])
    return _bits_rows(p1) + _bits_rows(p2) - _bits_rows(y) - 2.0


def _outer_block(p1: np.ndarray, t1: np.ndarray, p2: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """R over all pairs (row of encoder-1 grid, row of encoder-2 grid)."""
    y = np.einsum("aj,bkj->abk", t1, t2[:, _CIRCULANT])
    return _bits_rows(p1)[:, None] + _bits_rows(p2)[None, :] - _bits_rows(y) - 2.0


def _input_law(law: Sequence[int] | np.ndarray, allowed: tuple[int, int], label: str) -> np.ndarray:
    """Probability of the first allowed input per state, from a map or a p(x|s) table."""
    arr = np.asarray(law, dtype=float)
    if arr.ndim == 1:
        if arr.size != MODULUS or any(x not in allowed for x in arr):
            raise DomainError(f"{label} must map Z_4 into {allowed}")
        return (arr == allowed[0]).astype(float)
    if arr.shape != (MODULUS, MODULUS) or not np.allclose(arr.sum(axis=1), 1.0):
        raise DomainError(f"{label} must be a 4 x 4 conditional law p(x|s)")
    outside = [x for x in range(MODULUS) if x not in allowed]
    if np.any(arr[:, outside] > 1e-12):
        raise DomainError(f"{label} puts mass on inputs with positive cost")
    return arr[:, allowed[0]]


def outer_objective(
    p_s1: Pmf | Sequence[float],
    x1_law: Sequence[int] | np.ndarray,
    p_s2: Pmf | Sequence[float],
    x2_law: Sequence[int] | np.ndarray,
) -> float:
    """
    R(u1, u2, P) = H(S1|u1) + H(S2|u2) - H(Y|u1, u2) - 2 on Example 1.

    Args:
        p_s1, p_s2: State laws given u1 and u2
        x1_law, x2_law: Input maps s -> x or 4 x 4 tables p(x|s) on zero-cost inputs
    """
    p1 = _weights(p_s1, "p_s1")
    p2 = _weights(p_s2, "p_s2")
    t1 = _transformed_laws(p1, _input_law(x1_law, X1_VALUES, "x1_law"), 2)
    t2 = _transformed_laws(p2, _input_law(x2_law, X2_VALUES, "x2_law"), 1)
    return float(_outer_rows(p1[None], t1[None], p2[None], t2[None])[0])


@dataclass(frozen=True)
class OuterSearchConfig:
    """Budget for the outer-bound search; ``resolution`` sets the deterministic grid."""

    resolution: int = 8
    random_candidates: int = 100_000
    ascent_starts: int = 16
    ascent_steps: int = 400
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        _check_resolution(self.resolution)
        if self.random_candidates < 0 or self.ascent_starts < 1 or self.ascent_steps < 0:
            raise DomainError("candidate counts must be non-negative and ascent_starts >= 1")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")


@dataclass(frozen=True)
class OuterWitness:
    value: float
    p_s1: tuple[float, ...]
    keep1: tuple[float, ...]
    p_s2: tuple[float, ...]
    keep2: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        # keep_i[s] is P(X_i = 0 | s); the other input is 2 for encoder 1 and 1 for encoder 2
        return {
            "value": self.value,
            "p_s1": list(self.p_s1),
            "p_x1_zero_given_s1": list(self.keep1),
            "p_s2": list(self.p_s2),
            "p_x2_zero_given_s2": list(self.keep2),
        }


def _witness(value: float, p1, k1, p2, k2) -> OuterWitness:
    return OuterWitness(
        float(value),
        tuple(float(v) for v in p1),
        tuple(float(v) for v in k1),
        tuple(float(v) for v in p2),
        tuple(float(v) for v in k2),
    )


def _deterministic_task(task: tuple) -> OuterWitness:
    """Best pair over one encoder-1 map, every encoder-2 map and both grids."""
    f1, grid1, grid2 = task
    keep1 = (np.asarray(f1) == 0).astype(float)
    t1 = _transformed_laws(grid1, keep1, 2)
    best = None
    for f2 in x_functions(X2_VALUES):
        keep2 = (np.asarray(f2) == 0).astype(float)
        values = _outer_block(grid1, t1, grid2, _transformed_laws(grid2, keep2, 1))
        a, b = np.unravel_index(int(np.argmax(values)), values.shape)
        if best is None or values[a, b] > best.value:
            best = _witness(values[a, b], grid1[a], keep1, grid2[b], keep2)
    return best


def outer_max_given_u2(
    f2: Sequence[int], support: Iterable[int] | None = None, resolution: int = 8
) -> OuterWitness:
    """Max of R over encoder-1 maps and both state grids with encoder 2 fixed to ``f2``."""
    case = classify_u2(f2, support)
    grid1 = _cached_grid(resolution, MODULUS)
    sub = simplex_grid(resolution, len(case.support))
    grid2 = np.zeros((len(sub), MODULUS))
    grid2[:, list(case.support)] = sub
    keep2 = (np.asarray(case.function) == 0).astype(float)
    t2 = _transformed_laws(grid2, keep2, 1)
    best = None
    for f1 in x_functions(X1_VALUES):
        keep1 = (np.asarray(f1) == 0).astype(float)
        values = _outer_block(grid1, _transformed_laws(grid1, keep1, 2), grid2, t2)
        a, b = np.unravel_index(int(np.argmax(values)), values.shape)
        if best is None or values[a, b] > best.value:
            best = _witness(values[a, b], grid1[a], keep1, grid2[b], keep2)
    return best


def _ascend(starts: np.ndarray, steps: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, int]:
    """
    Random local ascent on the stacked parameters [p1, keep1, p2, keep2].

    Returns:
        Best values, best parameters and the number of evaluations
    """

    def evaluate(params: np.ndarray) -> np.ndarray:
        p1, k1, p2, k2 = np.split(params, 4, axis=1)
        return _outer_rows(p1, _transformed_laws(p1, k1, 2), p2, _transformed_laws(p2, k2, 1))

    params = starts.copy()
    values = evaluate(params)
    scale = np.full(len(params), 0.3)
    for _ in range(steps):
        proposal = params.copy()
        noise = rng.standard_normal(proposal.shape)
        for block in (0, 2):
            cols = slice(block * MODULUS, (block + 1) * MODULUS)
            w = proposal[:, cols] * np.exp(scale[:, None] * noise[:, cols])
            proposal[:, cols] = w / w.sum(axis=1, keepdims=True)
        for block in (1, 3):
            cols = slice(block * MODULUS, (block + 1) * MODULUS)
            proposal[:, cols] = np.clip(proposal[:, cols] + 0.5 * scale[:, None] * noise[:, cols], 0.0, 1.0)
        candidate = evaluate(proposal)
        better = candidate > values
        params[better] = proposal[better]
        values[better] = candidate[better]
        scale = np.where(better, np.minimum(scale * 1.3, 1.0), np.maximum(scale * 0.85, 1e-3))
    return values, params, len(starts) * (steps + 1)


@dataclass(frozen=True)
class OuterReport:
    deterministic: OuterWitness
    stochastic: OuterWitness
    candidates: int
    config: OuterSearchConfig

    @property
    def value(self) -> float:
        return max(self.deterministic.value, self.stochastic.value)

    @property
    def passed(self) -> bool:
        return self.value <= OUTER_BOUND + OUTER_SLACK

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_found": self.value,
            "bound": OUTER_BOUND,
            "passed": self.passed,
            "candidates": self.candidates,
            "deterministic_max": self.deterministic.value,
            "stochastic_max": self.stochastic.value,
            "deterministic_witness": self.deterministic.to_dict(),
            "stochastic_witness": self.stochastic.to_dict(),
            "grid_resolution": self.config.resolution,
            "seed": self.config.seed,
        }


def gp_outer_max(ch: ChannelSpec, cfg: OuterSearchConfig | None = None) -> OuterReport:
    """
    Maximize R(u1, u2, P) over per-u conditional laws on Example 1.

    The deterministic pass crosses all 16 x 16 zero-cost input maps with
    simplex grids on both state laws; the stochastic pass draws random
    conditional laws p(s, x | u) and runs local ascent from the best of them
    and from the deterministic maximizer.

    Raises:
        UnsupportedChannelError: If ``ch`` is not the Example-1 channel
    """
    cfg = cfg or OuterSearchConfig()
    if ch != builtin_example1():
        raise UnsupportedChannelError("the outer-bound search is defined for the Example-1 channel only")

    grid = _cached_grid(cfg.resolution, MODULUS)
    tasks = [(f1, grid, grid) for f1 in x_functions(X1_VALUES)]
    deterministic = max(_map(_deterministic_task, tasks, cfg.workers), key=lambda w: w.value)
    candidates = len(grid) ** 2 * len(tasks) * len(x_functions(X2_VALUES))
    logger.info("Deterministic outer search: max %.9f over %d candidates", deterministic.value, candidates)

    rng = np.random.default_rng(cfg.seed)
    n = cfg.random_candidates
    p1 = rng.dirichlet(np.ones(MODULUS), size=n)
    p2 = rng.dirichlet(np.ones(MODULUS), size=n)
    k1 = rng.random((n, MODULUS))
    k2 = rng.random((n, MODULUS))
    values = _outer_rows(p1, _transformed_laws(p1, k1, 2), p2, _transformed_laws(p2, k2, 1))
    candidates += n

    top = np.argsort(values)[::-1][: cfg.ascent_starts - 1]
    seed_row = np.concatenate([deterministic.p_s1, deterministic.keep1, deterministic.p_s2, deterministic.keep2])
    starts = np.vstack([seed_row[None, :], np.hstack([p1, k1, p2, k2])[top]])
    best_values, best_params, evaluations = _ascend(starts, cfg.ascent_steps, rng)
    candidates += evaluations

    i = int(np.argmax(best_values))
    stochastic = _witness(best_values[i], *np.split(best_params[i], 4))
    report = OuterReport(deterministic, stochastic, candidates, cfg)
    if report.passed:
        logger.info("Outer search: max %.9f <= %.2f over %d candidates", report.value, OUTER_BOUND, candidates)
    else:
        logger.error("Outer bound exceeded: %.9f > %.2f, witness %s", report.value, OUTER_BOUND, stochastic.to_dict())
    return report


def assert_outer_bound(report: OuterReport) -> None:
    """Raise VerificationError when the outer search beats the claimed bound."""
    if not report.passed:
        raise VerificationError(
            f"R(u1, u2, P) reaches {report.value:.9f} > {OUTER_BOUND}", report.stochastic.to_dict()
        )
