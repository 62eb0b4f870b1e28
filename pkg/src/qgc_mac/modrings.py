"""Arithmetic over the ring of integers modulo p^r."""

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import circulant

from .errors import DomainError

# Mass tolerance accepted for probability vectors passed to circular_convolve.
PMF_TOLERANCE = 1e-6

# Rows of a pairwise sum block materialized at once by sumset_array.
SUMSET_CHUNK = 1 << 20


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p**0.5) + 1))


@dataclass(frozen=True)
class RingSpec:
    """The ring Z_{p^r} with canonical residues in [0, p^r)."""

    p: int
    r: int = 1
    modulus: int = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.p) != self.p or not _is_prime(int(self.p)):
            raise DomainError(f"p must be a prime, got {self.p}")
        if int(self.r) != self.r or self.r < 1:
            raise DomainError(f"r must be an integer >= 1, got {self.r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "modulus", self.p**self.r)

    def check(self, a: int) -> int:
        """Return ``a`` as an int, raising DomainError if it is not a residue."""
        if int(a) != a or not 0 <= a < self.modulus:
            raise DomainError(f"{a} is not an element of Z_{self.modulus}")
        return int(a)

    def subgroup(self, t: int) -> tuple[int, ...]:
        """Elements of H_t = {p^t * a : a in Z_{p^r}} in increasing order."""
        _check_level(t, self)
        return tuple(range(0, self.modulus, self.p**t))

    def __str__(self) -> str:
        return f"Z_{self.modulus}"


Z4 = RingSpec(2, 2)


def _check_level(t: int, ring: RingSpec) -> None:
    if int(t) != t or not 0 <= t <= ring.r:
        raise DomainError(f"level t must lie in [0, {ring.r}], got {t}")


@dataclass(frozen=True)
class RingVector:
    """A sequence over Z_{p^r}."""

    ring: RingSpec
    entries: tuple[int, ...]

    def __post_init__(self):
        entries = tuple(self.ring.check(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zeros(cls, ring: RingSpec, n: int) -> "RingVector":
        return cls(ring, (0,) * n)

    def __len__(self) -> int:
        return len(self.entries)

    def __add__(self, other: "RingVector") -> "RingVector":
        _check_compatible(self, other)
        return RingVector(
            self.ring,
            tuple(ring_add(a, b, self.ring) for a, b in zip(self.entries, other.entries)),
        )

    def __sub__(self, other: "RingVector") -> "RingVector":
        _check_compatible(self, other)
        return RingVector(
            self.ring,
            tuple(ring_sub(a, b, self.ring) for a, b in zip(self.entries, other.entries)),
        )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.int64)


@dataclass(frozen=True)
class RingMatrix:
    """A k x n matrix over Z_{p^r}, stored row-major."""

    ring: RingSpec
    rows: int
    cols: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise DomainError(f"matrix shape must be non-negative, got {self.rows}x{self.cols}")
        if len(self.entries) != self.rows * self.cols:
            raise DomainError(
                f"expected {self.rows * self.cols} entries for a {self.rows}x{self.cols} "
                f"matrix, got {len(self.entries)}"
            )
        entries = tuple(self.ring.check(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_array(cls, ring: RingSpec, array: np.ndarray) -> "RingMatrix":
        array = np.asarray(array, dtype=np.int64)
        if array.ndim != 2:
            raise DomainError(f"expected a 2-D array, got shape {array.shape}")
        rows, cols = array.shape
        return cls(ring, rows, cols, tuple(int(e) for e in array.ravel()))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.int64).reshape(self.rows, self.cols)


def _check_compatible(a: RingVector, b: RingVector) -> None:
    if a.ring != b.ring:
        raise DomainError(f"ring mismatch: {a.ring} vs {b.ring}")
    if len(a) != len(b):
        raise DomainError(f"length mismatch: {len(a)} vs {len(b)}")


def ring_add(a: int, b: int, ring: RingSpec) -> int:
    """Return (a + b) mod p^r."""
    return (ring.check(a) + ring.check(b)) % ring.modulus


def ring_sub(a: int, b: int, ring: RingSpec) -> int:
    """Return (a - b) mod p^r."""
    return (ring.check(a) - ring.check(b)) % ring.modulus


def project_t(a: int, t: int, ring: RingSpec) -> int:
    """
    Return [a]_t, the residue g in [0, p^t) with a = h + g and h in H_t.

    Args:
        a: Ring element
        t: Level in [0, r]
        ring: Ambient ring

    Returns:
        a mod p^t
    """
    _check_level(t, ring)
    return ring.check(a) % ring.p**t


def mat_apply(u: RingVector, G: RingMatrix, b: RingVector) -> RingVector:
    """Return the codeword uG + b."""
    if not (u.ring == G.ring == b.ring):
        raise DomainError("message, generator and translation must share one ring")
    if len(u) != G.rows:
        raise DomainError(f"message length {len(u)} does not match {G.rows} generator rows")
    if len(b) != G.cols:
        raise DomainError(f"translation length {len(b)} does not match {G.cols} columns")
    word = (u.as_array() @ G.as_array() + b.as_array()) % G.ring.modulus
    return RingVector(G.ring, tuple(int(e) for e in word))


def _as_probability_vector(p, label: str) -> np.ndarray:
    weights = np.asarray(getattr(p, "weights", p), dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise DomainError(f"{label} must be a non-empty 1-D probability vector")
    if np.any(weights < -1e-12):
        raise DomainError(f"{label} has negative weights")
    if abs(weights.sum() - 1.0) > PMF_TOLERANCE:
        raise DomainError(f"{label} sums to {weights.sum():.9g}, not 1")
    return np.clip(weights, 0.0, None)


def circular_convolve(pa, pb) -> np.ndarray:
    """
    Law of A + B mod m for independent A ~ pa and B ~ pb.

    Args:
        pa: Pmf or probability vector over Z_m
        pb: Pmf or probability vector over Z_m

    Returns:
        Vector t with t_k = sum_j pa_j * pb_{(k - j) mod m}
    """
    a = _as_probability_vector(pa, "pa")
    b = _as_probability_vector(pb, "pb")
    if a.shape != b.shape:
        raise DomainError(f"modulus mismatch: {a.size} vs {b.size}")
    # circulant(b)[k, j] = b[(k - j) mod m]
    return circulant(b) @ a


def sumset_array(A: np.ndarray, B: np.ndarray, modulus: int) -> np.ndarray:
    """
    Distinct rows of {a + b mod modulus}, sorted lexicographically.

    Args:
        A: Array of shape (|A|, n)
        B: Array of shape (|B|, n)
        modulus: Ring modulus

    Returns:
        Array of shape (|A + B|, n)
    """
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DomainError(f"sumset operands must share a length, got {A.shape} and {B.shape}")
    n = A.shape[1]
    if len(A) == 0 or len(B) == 0:
        return np.zeros((0, n), dtype=np.int64)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)

    step = max(1, SUMSET_CHUNK // len(B))
    blocks = []
    for start in range(0, len(A), step):
        block = (A[start : start + step, None, :] + B[None, :, :]) % modulus
        blocks.append(np.unique(block.reshape(-1, n), axis=0))
    return np.unique(np.concatenate(blocks), axis=0)


def _stack(vectors: list[RingVector]) -> tuple[RingSpec, np.ndarray]:
    ring = vectors[0].ring
    n = len(vectors[0])
    for v in vectors:
        if v.ring != ring or len(v) != n:
            raise DomainError("all vectors must share one ring and one length")
    return ring, np.array([v.entries for v in vectors], dtype=np.int64).reshape(len(vectors), n)


def _as_vectors(ring: RingSpec, rows: np.ndarray) -> tuple[RingVector, ...]:
    return tuple(RingVector(ring, tuple(int(e) for e in row)) for row in rows)


def sumset(A: Iterable[RingVector], B: Iterable[RingVector]) -> tuple[RingVector, ...]:
    """Return the sorted, deduplicated set {a + b : a in A, b in B}."""
    A = list(A)
    B = list(B)
    if not A or not B:
        return ()
    ring, a = _stack(A + B)
    sums = sumset_array(a[: len(A)], a[len(A) :], ring.modulus)
    return _as_vectors(ring, sums)


def qgc_codewords(
    messages: Iterable[RingVector], G: RingMatrix, b: RingVector
) -> tuple[RingVector, ...]:
    """Return the sorted codeword set {uG + b : u in messages}."""
    messages = list(messages)
    if not messages:
        return ()
    ring, u = _stack(messages)
    if ring != G.ring or ring != b.ring:
        raise DomainError("messages, generator and translation must share one ring")
    if u.shape[1] != G.rows or len(b) != G.cols:
        raise DomainError("message and translation lengths must match the generator shape")
    words = (u @ G.as_array() + b.as_array()) % ring.modulus
    return _as_vectors(ring, np.unique(words, axis=0))
