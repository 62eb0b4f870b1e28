"""Finite distributions with named axes, information measures in bits, typical sets."""

import itertools
import logging
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from .errors import DomainError, ResourceCapError

logger = logging.getLogger(__name__)

# Construction renormalizes any weight vector whose mass is this close to 1.
MASS_TOLERANCE = 1e-6

# Inclusive slack on the robust typicality comparison.
TYPICALITY_SLACK = 1e-12

DEFAULT_ENUMERATION_CAP = 1 << 20

# Rows tested per block by typical_rows.
_TYPICALITY_CHUNK = 1 << 16

# Above this many raw sequences a component is enumerated type by type.
_DENSE_ENUMERATION_LIMIT = 1 << 22

AxisNames = str | Sequence[str]


def _normalize(weights, label: str) -> np.ndarray:
    w = np.array(weights, dtype=float)
    if w.size == 0:
        raise DomainError(f"{label} has no entries")
    if not np.all(np.isfinite(w)):
        raise DomainError(f"{label} has non-finite weights")
    if np.any(w < -1e-12):
        raise DomainError(f"{label} has negative weights")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if abs(total - 1.0) > MASS_TOLERANCE:
        raise DomainError(f"{label} has total mass {total:.9g}, expected 1")
    w = w / total
    w.flags.writeable = False
    return w


def _bits(weights: np.ndarray) -> float:
    return float(entr(weights).sum() / np.log(2))


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector over {0, ..., m-1}."""

    weights: np.ndarray

    def __post_init__(self):
        w = _normalize(self.weights, "pmf")
        if w.ndim != 1:
            raise DomainError(f"pmf weights must be 1-D, got shape {w.shape}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, m: int) -> "Pmf":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def point(cls, m: int, a: int) -> "Pmf":
        w = np.zeros(m)
        w[a] = 1.0
        return cls(w)

    @classmethod
    def on_support(cls, m: int, support: Sequence[int]) -> "Pmf":
        """Uniform law on ``support`` inside an alphabet of size m."""
        w = np.zeros(m)
        w[list(support)] = 1.0 / len(support)
        return cls(w)

    @property
    def size(self) -> int:
        return self.weights.size

    def support(self) -> tuple[int, ...]:
        return tuple(int(a) for a in np.flatnonzero(self.weights > 0))

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, a: int) -> float:
        return float(self.weights[a])

    def __eq__(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"Pmf({np.array2string(self.weights, precision=6, separator=', ')})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Dense joint law over named finite axes."""

    axes: tuple[tuple[str, int], ...]
    weights: np.ndarray

    def __post_init__(self):
        axes = tuple((str(name), int(size)) for name, size in self.axes)
        names = [name for name, _ in axes]
        if len(set(names)) != len(names):
            raise DomainError(f"axis names must be unique, got {names}")
        w = _normalize(self.weights, "joint pmf")
        expected = tuple(size for _, size in axes)
        if w.shape != expected:
            raise DomainError(f"weights shape {w.shape} does not match axes {expected}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "weights", w)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.axes)

    def size_of(self, name: str) -> int:
        return self.axes[self._index([name])[0]][1]

    def _index(self, names: Sequence[str]) -> list[int]:
        lookup = {name: i for i, (name, _) in enumerate(self.axes)}
        missing = [name for name in names if name not in lookup]
        if missing:
            raise DomainError(f"unknown axis {missing[0]!r}; axes are {list(self.names)}")
        return [lookup[name] for name in names]

    def _marginal_weights(self, names: Sequence[str]) -> np.ndarray:
        keep = set(self._index(names))
        drop = tuple(i for i in range(len(self.axes)) if i not in keep)
        return self.weights.sum(axis=drop)

    def marginal(self, names: AxisNames) -> "JointPmf":
        """Marginal law of ``names``, with axes in the order given."""
        names = _axis_tuple(names)
        idx = self._index(names)
        kept = sorted(idx)
        w = np.transpose(self._marginal_weights(names), [kept.index(i) for i in idx])
        return JointPmf(tuple(self.axes[i] for i in idx), w)

    def entropy(self, names: AxisNames | None = None) -> float:
        """Joint entropy in bits of ``names`` (all axes when None)."""
        if names is None:
            return _bits(self.weights)
        return _bits(self._marginal_weights(_axis_tuple(names)))

    def derive(
        self,
        name: str,
        sources: AxisNames,
        fn: Callable[..., int],
        size: int,
    ) -> "JointPmf":
        """
        Append an axis holding a deterministic function of existing axes.

        Args:
            name: Name of the new axis
            sources: Axes the function reads, in argument order
            fn: Map from source symbols to a symbol in [0, size)
            size: Alphabet size of the new axis

        Returns:
            Joint law with the extra axis last
        """
        if name in self.names:
            raise DomainError(f"axis {name!r} already exists")
        sources = _axis_tuple(sources)
        idx = self._index(sources)
        sizes = [self.axes[i][1] for i in idx]

        table = np.zeros(sizes + [size])
        for combo in itertools.product(*(range(s) for s in sizes)):
            value = int(fn(*combo))
            if not 0 <= value < size:
                raise DomainError(f"derived value {value} outside [0, {size})")
            table[combo + (value,)] = 1.0

        order = list(np.argsort(idx))
        table = np.transpose(table, order + [len(idx)])
        shape = [1] * len(self.axes) + [size]
        for i in idx:
            shape[i] = self.axes[i][1]
        w = self.weights[..., None] * table.reshape(shape)
        return JointPmf(self.axes + ((name, size),), w)


def _axis_tuple(names: AxisNames) -> tuple[str, ...]:
    if isinstance(names, str):
        return (names,)
    return tuple(names)


@dataclass(frozen=True, eq=False)
class ConditionalPmf:
    """Source law p(x) together with a kernel p(y|x), one row per source symbol."""

    source: Pmf
    kernel: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 2 or k.shape[0] != self.source.size:
            raise DomainError(
                f"kernel must have {self.source.size} rows, got shape {k.shape}"
            )
        rows = np.stack([_normalize(row, f"kernel row {a}") for a, row in enumerate(k)])
        rows.flags.writeable = False
        object.__setattr__(self, "kernel", rows)

    @property
    def output_size(self) -> int:
        return self.kernel.shape[1]

    def row(self, a: int) -> Pmf:
        return Pmf(self.kernel[a])

    def joint(self, names: tuple[str, str] = ("X", "Y")) -> JointPmf:
        w = self.source.weights[:, None] * self.kernel
        return JointPmf(((names[0], self.source.size), (names[1], self.output_size)), w)


def _as_pmf(p) -> Pmf:
    return p if isinstance(p, Pmf) else Pmf(p)


def entropy(p: Pmf | Sequence[float]) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    return _bits(_as_pmf(p).weights)


def _check_disjoint(*groups: tuple[str, ...]) -> None:
    seen: set[str] = set()
    for group in groups:
        overlap = seen.intersection(group)
        if overlap:
            raise DomainError(f"axis sets must be disjoint, {sorted(overlap)} repeated")
        seen.update(group)


def conditional_entropy(j: JointPmf, target: AxisNames, given: AxisNames = ()) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target, given = _axis_tuple(target), _axis_tuple(given)
    _check_disjoint(target, given)
    return j.entropy(target + given) - j.entropy(given)


def mutual_information(
    j: JointPmf, a: AxisNames, b: AxisNames, given: AxisNames = ()
) -> float:
    """I(A;B|C) = H(A|C) - H(A|B,C)."""
    a, b, given = _axis_tuple(a), _axis_tuple(b), _axis_tuple(given)
    _check_disjoint(a, b, given)
    return (
        j.entropy(a + given)
        + j.entropy(b + given)
        - j.entropy(a + b + given)
        - j.entropy(given)
    )


def mutual_information_direct(
    j: JointPmf, a: AxisNames, b: AxisNames, given: AxisNames = ()
) -> float:
    """I(A;B|C) by direct summation of p log p(abc)p(c) / (p(ac)p(bc))."""
    a, b, given = _axis_tuple(a), _axis_tuple(b), _axis_tuple(given)
    _check_disjoint(a, b, given)
    def size(names: tuple[str, ...]) -> int:
        return math.prod(j.size_of(name) for name in names)

    p = j.marginal(a + b + given).weights.reshape(size(a), size(b), size(given))
    p_ac = p.sum(axis=1, keepdims=True)
    p_bc = p.sum(axis=0, keepdims=True)
    p_c = p.sum(axis=(0, 1), keepdims=True)
    mask = p > 0
    ratio = (p * p_c)[mask] / (p_ac * p_bc)[mask]
    return float(np.sum(p[mask] * np.log2(ratio)))


def typical_rows(symbols: np.ndarray, weights: np.ndarray, epsilon: float) -> np.ndarray:
    """
    Robust typicality test applied to every row of ``symbols``.

    Args:
        symbols: Integer array of shape (N, n), entries in [0, len(weights))
        weights: Probability vector of the reference law
        epsilon: Typicality slack, > 0

    Returns:
        Boolean array of shape (N,)
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.ndim != 2 or symbols.shape[1] == 0:
        raise DomainError(f"expected a non-empty (N, n) symbol array, got {symbols.shape}")
    w = np.asarray(weights, dtype=float).ravel()
    m = w.size
    if symbols.size and (symbols.min() < 0 or symbols.max() >= m):
        raise DomainError(f"symbols outside the alphabet [0, {m})")

    n_rows, n = symbols.shape
    result = np.empty(n_rows, dtype=bool)
    for start in range(0, n_rows, _TYPICALITY_CHUNK):
        block = symbols[start : start + _TYPICALITY_CHUNK]
        offsets = np.arange(len(block))[:, None] * m
        counts = np.bincount((block + offsets).ravel(), minlength=len(block) * m)
        freq = counts.reshape(len(block), m) / n
        ok = np.abs(freq - w) <= epsilon * w + TYPICALITY_SLACK
        result[start : start + len(block)] = ok.all(axis=1)
    return result


def is_typical(seq: Sequence[int], p: Pmf, epsilon: float) -> bool:
    """True iff |freq(a) - p(a)| <= epsilon * p(a) for every symbol a."""
    row = np.asarray(seq, dtype=np.int64)[None, :]
    return bool(typical_rows(row, _as_pmf(p).weights, epsilon)[0])


def is_jointly_typical(
    sequences: Sequence[Sequence[int]], joint: JointPmf, epsilon: float
) -> bool:
    """Robust joint typicality of aligned sequences, one per axis of ``joint``."""
    if len(sequences) != len(joint.axes):
        raise DomainError(f"expected {len(joint.axes)} sequences, got {len(sequences)}")
    arrays = [np.asarray(s, dtype=np.int64) for s in sequences]
    if len({a.size for a in arrays}) != 1:
        raise DomainError("sequences must have equal length")
    sizes = [size for _, size in joint.axes]
    for arr, size in zip(arrays, sizes):
        if arr.size and (arr.min() < 0 or arr.max() >= size):
            raise DomainError(f"symbols outside the alphabet [0, {size})")
    flat = np.ravel_multi_index(tuple(arrays), sizes)
    return bool(typical_rows(flat[None, :], joint.weights.ravel(), epsilon)[0])


@dataclass(frozen=True)
class UQPair:
    """Summary (U, Q) of a Cartesian-product typical set: Q picks the component."""

    q: Pmf
    conditionals: tuple[Pmf, ...]

    def __post_init__(self):
        if len(self.conditionals) != self.q.size:
            raise DomainError(
                f"{self.q.size} Q values but {len(self.conditionals)} conditionals"
            )
        if len({c.size for c in self.conditionals}) != 1:
            raise DomainError("all conditionals must share one alphabet")

    @classmethod
    def from_components(cls, components: Sequence[tuple[Pmf, int]]) -> "UQPair":
        total = sum(k for _, k in components)
        return cls(
            Pmf([k / total for _, k in components]),
            tuple(p for p, _ in components),
        )

    @property
    def alphabet_size(self) -> int:
        return self.conditionals[0].size

    def joint(self, names: tuple[str, str] = ("Q", "U")) -> JointPmf:
        w = self.q.weights[:, None] * np.stack([c.weights for c in self.conditionals])
        return JointPmf(((names[0], self.q.size), (names[1], self.alphabet_size)), w)

    def entropy_u_given_q(self) -> float:
        return conditional_entropy(self.joint(), "U", "Q")


@dataclass(frozen=True)
class TypicalSetSpec:
    """Cartesian product of robust typical sets A_eps^(k_i)(U_i)."""

    components: tuple[tuple[Pmf, int], ...]
    epsilon: float

    def __post_init__(self):
        components = tuple((_as_pmf(p), int(k)) for p, k in self.components)
        if not components:
            raise DomainError("a typical-set spec needs at least one component")
        if any(k < 1 for _, k in components):
            raise DomainError("component block lengths must be >= 1")
        if len({p.size for p, _ in components}) != 1:
            raise DomainError("components must share one alphabet")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "components", components)

    @classmethod
    def single(cls, p: Pmf, k: int, epsilon: float) -> "TypicalSetSpec":
        return cls(((p, k),), epsilon)

    @property
    def length(self) -> int:
        return sum(k for _, k in self.components)

    def uq_pair(self) -> UQPair:
        return UQPair.from_components(self.components)


@dataclass(frozen=True, eq=False)
class ProductTypicalSet:
    """Enumerated product typical set, rows in lexicographic order."""

    vectors: np.ndarray
    log2_size: float

    def __len__(self) -> int:
        return len(self.vectors)


def _typical_types(p: Pmf, k: int, epsilon: float) -> Iterator[dict[int, int]]:
    """Count vectors over the support of p admitted by robust typicality."""
    support = p.support()
    bounds = []
    for a in support:
        low = max(0, math.ceil(k * p[a] * (1 - epsilon) - k * TYPICALITY_SLACK))
        high = min(k, math.floor(k * p[a] * (1 + epsilon) + k * TYPICALITY_SLACK))
        bounds.append((low, high))

    def extend(i: int, remaining: int, counts: dict[int, int]):
        if i == len(support):
            if remaining == 0:
                yield dict(counts)
            return
        low, high = bounds[i]
        for c in range(low, min(high, remaining) + 1):
            counts[support[i]] = c
            yield from extend(i + 1, remaining - c, counts)
        counts.pop(support[i], None)

    for counts in extend(0, k, {}):
        freq = np.zeros(p.size)
        for a, c in counts.items():
            freq[a] = c / k
        if np.all(np.abs(freq - p.weights) <= epsilon * p.weights + TYPICALITY_SLACK):
            yield counts


def _type_class_size(counts: dict[int, int]) -> int:
    size, remaining = 1, sum(counts.values())
    for c in counts.values():
        size *= math.comb(remaining, c)
        remaining -= c
    return size


def component_typical_size(p: Pmf, k: int, epsilon: float) -> int:
    """Exact |A_eps^(k)(U)| for U ~ p."""
    return sum(_type_class_size(c) for c in _typical_types(p, k, epsilon))


def product_typical_log2_size(spec: TypicalSetSpec) -> float:
    """log2 of the product typical set cardinality, -inf when it is empty."""
    sizes = [component_typical_size(p, k, spec.epsilon) for p, k in spec.components]
    if any(s == 0 for s in sizes):
        return float("-inf")
    return sum(math.log2(s) for s in sizes)


def _sequences_of_type(counts: dict[int, int], k: int) -> Iterator[tuple[int, ...]]:
    symbols = sorted(counts)
    remaining = dict(counts)
    prefix: list[int] = []

    def extend():
        if len(prefix) == k:
            yield tuple(prefix)
            return
        for a in symbols:
            if remaining[a]:
                remaining[a] -= 1
                prefix.append(a)
                yield from extend()
                prefix.pop()
                remaining[a] += 1

    yield from extend()


def _enumerate_component(p: Pmf, k: int, epsilon: float) -> np.ndarray:
    support = np.asarray(p.support(), dtype=np.int64)
    count = len(support) ** k
    if count <= _DENSE_ENUMERATION_LIMIT:
        codes = np.arange(count)
        digits = np.empty((count, k), dtype=np.int64)
        for pos in range(k - 1, -1, -1):
            codes, digits[:, pos] = np.divmod(codes, len(support))
        grid = support[digits]
        return grid[typical_rows(grid, p.weights, epsilon)]
    rows = [seq for counts in _typical_types(p, k, epsilon) for seq in _sequences_of_type(counts, k)]
    if not rows:
        return np.zeros((0, k), dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    return rows[np.lexsort(rows.T[::-1])]


def enumerate_product_typical(
    spec: TypicalSetSpec, cap: int = DEFAULT_ENUMERATION_CAP
) -> ProductTypicalSet:
    """
    Enumerate all concatenations x_1 || ... || x_m with x_i typical.

    Args:
        spec: Components and slack
        cap: Maximum number of vectors to materialize

    Returns:
        ProductTypicalSet with the vectors and log2 of their count

    Raises:
        ResourceCapError: If the set is larger than ``cap``
    """
    sizes = [component_typical_size(p, k, spec.epsilon) for p, k in spec.components]
    total = math.prod(sizes)
    if total > cap:
        raise ResourceCapError(f"product typical set has {total} vectors, cap is {cap}")
    logger.debug("Enumerating product typical set of size %d", total)

    result = np.zeros((1, 0), dtype=np.int64)
    for p, k in spec.components:
        part = _enumerate_component(p, k, spec.epsilon)
        result = np.hstack(
            [np.repeat(result, len(part), axis=0), np.tile(part, (len(result), 1))]
        )
    log2_size = math.log2(total) if total else float("-inf")
    return ProductTypicalSet(result, log2_size)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Draw one symbol per row of a row-stochastic matrix.

    Args:
        probs: Array of shape (n, m), each row a probability vector
        rng: Random generator

    Returns:
        Integer array of shape (n,)
    """
    probs = np.asarray(probs, dtype=float)
    cumulative = probs.cumsum(axis=1)
    draws = rng.random(len(probs))[:, None]
    return np.minimum((draws >= cumulative).sum(axis=1), probs.shape[1] - 1)
