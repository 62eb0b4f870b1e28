"""MAC-with-states model, built-in channels and the channel document loader."""

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ChannelLoadError, DocumentError, DomainError, UnsupportedChannelError
from .loader import parse_array, parse_number, parse_stochastic, read_document, require_fields
from .probinfo import Pmf, sample_categorical

logger = logging.getLogger(__name__)

# Kernel rows must sum to 1 within this tolerance once stored.
ROW_TOLERANCE = 1e-9

# Documents are renormalized when their rows are this close to stochastic.
LOAD_TOLERANCE = 1e-6

# Slack on the average-cost budget check.
COST_TOLERANCE = 1e-9

ALPHABET_KEYS = ("x1", "x2", "s1", "s2", "y")

REQUIRED_FIELDS = ("alphabets", "kernel", "state1", "state2", "cost1", "cost2", "tau1", "tau2")

DEFAULT_BINARY_BUDGETS = (0.25, 0.25)


@dataclass(frozen=True)
class CostReport:
    """Average cost of one encoder against its budget."""

    cost: float
    budget: float

    @property
    def satisfied(self) -> bool:
        return self.cost <= self.budget + COST_TOLERANCE


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """
    Two-user MAC with states known non-causally at the encoders.

    Attributes:
        kernel: p(y | x1, x2, s1, s2) as an array indexed [s1, s2, x1, x2, y]
        state1: Law of S1
        state2: Law of S2
        cost1: c1(x, s) indexed [x, s]
        cost2: c2(x, s) indexed [x, s]
        tau1: Cost budget of encoder 1
        tau2: Cost budget of encoder 2
        name: Label used in reports
        state_joint: Correlated law p(s1, s2); None for independent states
    """

    kernel: np.ndarray
    state1: Pmf
    state2: Pmf
    cost1: np.ndarray
    cost2: np.ndarray
    tau1: float
    tau2: float
    name: str = "custom"
    state_joint: np.ndarray | None = None

    def __post_init__(self):
        kernel = np.array(self.kernel, dtype=float)
        if kernel.ndim != 5:
            raise DomainError(f"kernel must be 5-D [s1,s2,x1,x2,y], got shape {kernel.shape}")
        s1, s2, x1, x2, _ = kernel.shape
        if (self.state1.size, self.state2.size) != (s1, s2):
            raise DomainError("state laws do not match the kernel's state alphabets")
        if np.any(kernel < 0) or not np.allclose(kernel.sum(axis=-1), 1.0, atol=ROW_TOLERANCE):
            raise DomainError("every kernel row must be a probability vector")
        kernel.flags.writeable = False

        costs = []
        for label, table, shape in (("cost1", self.cost1, (x1, s1)), ("cost2", self.cost2, (x2, s2))):
            table = np.array(table, dtype=float)
            if table.shape != shape:
                raise DomainError(f"{label} must have shape {shape}, got {table.shape}")
            if not np.all(np.isfinite(table)) or np.any(table < 0):
                raise DomainError(f"{label} must be finite and non-negative")
            table.flags.writeable = False
            costs.append(table)

        if self.tau1 < 0 or self.tau2 < 0:
            raise DomainError("cost budgets must be non-negative")

        joint = self.state_joint
        if joint is not None:
            joint = np.array(joint, dtype=float)
            if joint.shape != (s1, s2) or abs(joint.sum() - 1.0) > ROW_TOLERANCE:
                raise DomainError("state_joint must be a probability table of shape (|S1|, |S2|)")
            if not np.allclose(joint.sum(axis=1), self.state1.weights, atol=ROW_TOLERANCE) or not np.allclose(
                joint.sum(axis=0), self.state2.weights, atol=ROW_TOLERANCE
            ):
                raise DomainError("state_joint marginals must equal state1 and state2")
            joint.flags.writeable = False

        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "cost1", costs[0])
        object.__setattr__(self, "cost2", costs[1])
        object.__setattr__(self, "tau1", float(self.tau1))
        object.__setattr__(self, "tau2", float(self.tau2))
        object.__setattr__(self, "state_joint", joint)

    @property
    def s1_size(self) -> int:
        return self.kernel.shape[0]

    @property
    def s2_size(self) -> int:
        return self.kernel.shape[1]

    @property
    def x1_size(self) -> int:
        return self.kernel.shape[2]

    @property
    def x2_size(self) -> int:
        return self.kernel.shape[3]

    @property
    def y_size(self) -> int:
        return self.kernel.shape[4]

    def states_independent(self) -> bool:
        if self.state_joint is None:
            return True
        product = np.outer(self.state1.weights, self.state2.weights)
        return bool(np.allclose(self.state_joint, product, atol=1e-12))

    def require_independent_states(self) -> None:
        if not self.states_independent():
            raise UnsupportedChannelError(
                f"channel {self.name!r} has correlated states; region formulas assume S1 and S2 independent"
            )

    def transition(self, x1: int, x2: int, s1: int, s2: int) -> Pmf:
        """p(. | x1, x2, s1, s2)."""
        return Pmf(self.kernel[s1, s2, x1, x2])

    def sample_output(
        self,
        x1: np.ndarray,
        x2: np.ndarray,
        s1: np.ndarray,
        s2: np.ndarray,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Pass n-length sequences through the memoryless channel."""
        lengths = {len(x1), len(x2), len(s1), len(s2)}
        if len(lengths) != 1:
            raise DomainError("input and state sequences must have equal length")
        return sample_categorical(self.kernel[s1, s2, x1, x2], rng)

    def budgets(self) -> tuple[float, float]:
        return self.tau1, self.tau2

    def swapped(self) -> "ChannelSpec":
        """Channel with the roles of the two encoders exchanged."""
        return ChannelSpec(
            kernel=self.kernel.transpose(1, 0, 3, 2, 4),
            state1=self.state2,
            state2=self.state1,
            cost1=self.cost2,
            cost2=self.cost1,
            tau1=self.tau2,
            tau2=self.tau1,
            name=f"{self.name}-swapped",
            state_joint=None if self.state_joint is None else self.state_joint.T,
        )

    def to_document(self) -> dict[str, Any]:
        """Serialize to the channel document schema."""
        doc: dict[str, Any] = {
            "name": self.name,
            "alphabets": dict(
                zip(ALPHABET_KEYS, (self.x1_size, self.x2_size, self.s1_size, self.s2_size, self.y_size))
            ),
            "kernel": [float(v) for v in self.kernel.ravel()],
            "state1": [float(v) for v in self.state1.weights],
            "state2": [float(v) for v in self.state2.weights],
            "cost1": self.cost1.tolist(),
            "cost2": self.cost2.tolist(),
            "tau1": self.tau1,
            "tau2": self.tau2,
        }
        if self.state_joint is not None:
            doc["state_joint"] = self.state_joint.tolist()
        return doc

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChannelSpec):
            return NotImplemented
        arrays_equal = all(
            np.array_equal(a, b)
            for a, b in (
                (self.kernel, other.kernel),
                (self.cost1, other.cost1),
                (self.cost2, other.cost2),
            )
        )
        joint_equal = (self.state_joint is None and other.state_joint is None) or (
            self.state_joint is not None
            and other.state_joint is not None
            and np.array_equal(self.state_joint, other.state_joint)
        )
        return (
            arrays_equal
            and joint_equal
            and self.state1 == other.state1
            and self.state2 == other.state2
            and (self.tau1, self.tau2, self.name) == (other.tau1, other.tau2, other.name)
        )

    __hash__ = None


def average_cost(
    x_seq: Sequence[int],
    s_seq: Sequence[int],
    cost_fn: np.ndarray | Callable[[int, int], float],
) -> float:
    """
    Per-symbol average cost (1/n) sum_j c(x_j, s_j).

    Args:
        x_seq: Input sequence
        s_seq: State sequence of the same length
        cost_fn: Cost table indexed [x, s] or a callable c(x, s)

    Returns:
        Average cost
    """
    x = np.asarray(x_seq, dtype=np.int64)
    s = np.asarray(s_seq, dtype=np.int64)
    if x.shape != s.shape:
        raise DomainError(f"sequence length mismatch: {x.size} vs {s.size}")
    if x.size == 0:
        raise DomainError("sequences must be non-empty")
    if callable(cost_fn):
        costs = np.array([cost_fn(int(a), int(b)) for a, b in zip(x, s)], dtype=float)
    else:
        costs = np.asarray(cost_fn, dtype=float)[x, s]
    return float(costs.mean())


def cost_report(x_seq, s_seq, cost_fn, budget: float) -> CostReport:
    return CostReport(average_cost(x_seq, s_seq, cost_fn), float(budget))


def _additive_kernel(
    s_sizes: tuple[int, int],
    x_sizes: tuple[int, int],
    y_size: int,
    output: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    s1, s2, x1, x2 = np.indices(s_sizes + x_sizes)
    y = output(x1, x2, s1, s2)
    kernel = np.zeros(s_sizes + x_sizes + (y_size,))
    np.put_along_axis(kernel, y[..., None], 1.0, axis=-1)
    return kernel


def builtin_example1() -> ChannelSpec:
    """Quaternary doubly-dirty MAC Y = X1 + S1 + X2 + S2 mod 4 with zero budgets."""
    x = np.arange(4)[:, None] * np.ones((1, 4))
    return ChannelSpec(
        kernel=_additive_kernel((4, 4), (4, 4), 4, lambda x1, x2, s1, s2: (x1 + s1 + x2 + s2) % 4),
        state1=Pmf.uniform(4),
        state2=Pmf.uniform(4),
        cost1=np.isin(x, (1, 3)).astype(float),
        cost2=np.isin(x, (2, 3)).astype(float),
        tau1=0.0,
        tau2=0.0,
        name="example1",
    )


def builtin_binary_dirty(tau1: float, tau2: float) -> ChannelSpec:
    """Binary doubly-dirty MAC Y = X1 + S1 + X2 + S2 mod 2 with Hamming-weight costs."""
    hamming = np.array([[0.0, 0.0], [1.0, 1.0]])
    return ChannelSpec(
        kernel=_additive_kernel((2, 2), (2, 2), 2, lambda x1, x2, s1, s2: (x1 + s1 + x2 + s2) % 2),
        state1=Pmf.uniform(2),
        state2=Pmf.uniform(2),
        cost1=hamming,
        cost2=hamming,
        tau1=tau1,
        tau2=tau2,
        name="binary-dirty",
    )


def builtin_binary_adder() -> ChannelSpec:
    """State-free noiseless adder Y = X1 + X2 over the integers, binary inputs."""
    return ChannelSpec(
        kernel=_additive_kernel((1, 1), (2, 2), 3, lambda x1, x2, s1, s2: x1 + x2),
        state1=Pmf.uniform(1),
        state2=Pmf.uniform(1),
        cost1=np.zeros((2, 1)),
        cost2=np.zeros((2, 1)),
        tau1=0.0,
        tau2=0.0,
        name="binary-adder",
    )


def builtin_modular_adder(m: int) -> ChannelSpec:
    """State-free noiseless adder Y = X1 + X2 mod m."""
    return ChannelSpec(
        kernel=_additive_kernel((1, 1), (m, m), m, lambda x1, x2, s1, s2: (x1 + x2) % m),
        state1=Pmf.uniform(1),
        state2=Pmf.uniform(1),
        cost1=np.zeros((m, 1)),
        cost2=np.zeros((m, 1)),
        tau1=0.0,
        tau2=0.0,
        name=f"adder-mod{m}",
    )


def _parse_pmf(value: Any, path: str, size: int) -> Pmf:
    w = parse_array(value, path, (size,), ChannelLoadError)
    if np.any(w < 0) or abs(w.sum() - 1.0) > LOAD_TOLERANCE:
        raise ChannelLoadError(path, f"not a probability vector (sums to {w.sum():.9g})")
    return Pmf(w / w.sum())


def _parse_cost(value: Any, path: str, x_size: int, s_size: int) -> np.ndarray:
    if isinstance(value, (list, tuple)) and value and not isinstance(value[0], (list, tuple)):
        # one cost per input symbol, independent of the state
        flat = parse_array(value, path, (x_size,), ChannelLoadError)
        table = np.repeat(flat[:, None], s_size, axis=1)
    else:
        table = parse_array(value, path, (x_size, s_size), ChannelLoadError)
    negative = np.argwhere(table < 0)
    if len(negative):
        x, s = negative[0]
        raise ChannelLoadError(f"{path}[{x}][{s}]", f"negative cost {table[x, s]}")
    return table


def load_channel(document: Mapping[str, Any]) -> ChannelSpec:
    """
    Build a validated ChannelSpec from a channel document.

    Args:
        document: Mapping with alphabets, kernel, state1, state2, cost1,
            cost2, tau1, tau2 and optionally name and state_joint

    Returns:
        ChannelSpec

    Raises:
        ChannelLoadError: On any schema violation, naming the offending field
    """
    require_fields(document, REQUIRED_FIELDS, ChannelLoadError)

    alphabets = document["alphabets"]
    if not isinstance(alphabets, Mapping):
        raise ChannelLoadError("alphabets", "expected a mapping")
    sizes = {}
    for key in ALPHABET_KEYS:
        if key not in alphabets:
            raise ChannelLoadError(f"alphabets.{key}", "missing required field")
        size = alphabets[key]
        if isinstance(size, bool) or not isinstance(size, int) or size < 1:
            raise ChannelLoadError(f"alphabets.{key}", f"expected a positive integer, got {size!r}")
        sizes[key] = size

    shape = (sizes["s1"], sizes["s2"], sizes["x1"], sizes["x2"], sizes["y"])
    kernel = parse_stochastic(
        document["kernel"], "kernel", shape, LOAD_TOLERANCE, ChannelLoadError, axes=("s1", "s2", "x1", "x2")
    )

    state1 = _parse_pmf(document["state1"], "state1", sizes["s1"])
    state2 = _parse_pmf(document["state2"], "state2", sizes["s2"])
    cost1 = _parse_cost(document["cost1"], "cost1", sizes["x1"], sizes["s1"])
    cost2 = _parse_cost(document["cost2"], "cost2", sizes["x2"], sizes["s2"])

    budgets = []
    for key in ("tau1", "tau2"):
        tau = parse_number(document[key], key, ChannelLoadError)
        if tau < 0:
            raise ChannelLoadError(key, f"budget must be non-negative, got {tau}")
        budgets.append(tau)

    state_joint = None
    if document.get("state_joint") is not None:
        state_joint = parse_array(
            document["state_joint"], "state_joint", (sizes["s1"], sizes["s2"]), ChannelLoadError
        )
        if np.any(state_joint < 0) or abs(state_joint.sum() - 1.0) > LOAD_TOLERANCE:
            raise ChannelLoadError("state_joint", "not a probability table")
        state_joint = state_joint / state_joint.sum()

    try:
        return ChannelSpec(
            kernel=kernel,
            state1=state1,
            state2=state2,
            cost1=cost1,
            cost2=cost2,
            tau1=budgets[0],
            tau2=budgets[1],
            name=str(document.get("name", "custom")),
            state_joint=state_joint,
        )
    except ChannelLoadError:
        raise
    except DomainError as exc:
        raise ChannelLoadError("$", str(exc)) from exc


def load_channel_file(path: str | Path) -> ChannelSpec:
    """Load a channel document from a YAML or JSON file."""
    logger.debug("Loading channel document %s", path)
    try:
        document = read_document(path)
    except DocumentError as exc:
        raise ChannelLoadError(exc.path, str(exc)) from exc
    return load_channel(document)


def resolve_channel(
    name_or_path: str,
    budgets: tuple[float, float] = DEFAULT_BINARY_BUDGETS,
) -> ChannelSpec:
    """
    Resolve a built-in channel name or a document path.

    Args:
        name_or_path: ``example1``, ``binary-dirty``, ``binary-adder`` or a file path
        budgets: Budgets for ``binary-dirty``

    Returns:
        ChannelSpec
    """
    if name_or_path == "example1":
        return builtin_example1()
    if name_or_path == "binary-dirty":
        return builtin_binary_dirty(*budgets)
    if name_or_path == "binary-adder":
        return builtin_binary_adder()
    return load_channel_file(name_or_path)


BUILTIN_CHANNELS = ("example1", "binary-dirty", "binary-adder")
