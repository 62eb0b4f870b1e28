"""Monte-Carlo simulation of the nested quasi-group coding scheme."""

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from multiprocessing import Pool
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .channels import ChannelSpec, average_cost, builtin_example1
from .errors import DocumentError, DomainError, ResourceCapError, VerificationError
from .loader import BUILTIN_EXPERIMENTS, load_experiment_document, parse_number, read_document, require_fields
from .modrings import RingSpec, Z4, sumset_array
from .probinfo import (
    ConditionalPmf,
    JointPmf,
    Pmf,
    TypicalSetSpec,
    UQPair,
    enumerate_product_typical,
    sample_categorical,
    typical_rows,
)
from .regions import QgcAssignment, ThresholdReport, covering_threshold, lemma4_assignment, sum_output_law

logger = logging.getLogger(__name__)

MAX_BLOCK_LENGTH = 24
DECODER_CAP = 1 << 20
DEFAULT_EPSILON_C = 1.5

# Message and bin-index symbols are drawn from {0, 1} inside the ring.
BINARY_SYMBOLS = (0, 1)

EXPERIMENT_FIELDS = ("n_list", "k1", "k2", "l", "epsilon_c", "trials", "seed")


def epsilon_for(length: int, epsilon_c: float) -> float:
    """Typicality slack c / sqrt(length)."""
    return epsilon_c / math.sqrt(length)


def _binary_vectors(length: int) -> np.ndarray:
    rows = list(product(BINARY_SYMBOLS, repeat=length))
    return np.array(rows, dtype=np.int64).reshape(len(rows), length)


@lru_cache(maxsize=16)
def uniform_bin_set(l: int, epsilon: float, modulus: int) -> np.ndarray:
    """Typical set of W uniform on {0, 1} at length l, lexicographic."""
    if l == 0:
        return np.zeros((1, 0), dtype=np.int64)
    spec = TypicalSetSpec.single(Pmf.on_support(modulus, BINARY_SYMBOLS), l, epsilon)
    vectors = enumerate_product_typical(spec, cap=DECODER_CAP).vectors
    vectors.flags.writeable = False
    return vectors


@dataclass(frozen=True, eq=False)
class NestedQgc:
    """
    Nested QGC: inner code {uG + b}, bins {uG + wG~ + b : w in bin_set}.

    Attributes:
        ring: Ring carrying the code
        generator: Inner generator G, shape (k, n)
        shift_generator: Bin generator G~, shape (l, n)
        translation: Translation b, shape (n,)
        messages: Message set, shape (|U|, k), lexicographic
        bin_set: Bin index set, shape (|W|, l), lexicographic
        seed: Seed the random matrices were drawn from
    """

    ring: RingSpec
    generator: np.ndarray
    shift_generator: np.ndarray
    translation: np.ndarray
    messages: np.ndarray
    bin_set: np.ndarray
    seed: Any = None

    def __post_init__(self):
        m = self.ring.modulus
        arrays = {}
        for name in ("generator", "shift_generator", "translation", "messages", "bin_set"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= m):
                raise DomainError(f"{name} has entries outside {self.ring}")
            arrays[name] = arr
        n = arrays["translation"].size
        if arrays["generator"].ndim != 2 or arrays["generator"].shape[1] != n:
            raise DomainError(f"generator must have shape (k, {n})")
        if arrays["shift_generator"].ndim != 2 or arrays["shift_generator"].shape[1] != n:
            raise DomainError(f"shift_generator must have shape (l, {n})")
        if arrays["messages"].ndim != 2 or arrays["messages"].shape[1] != arrays["generator"].shape[0]:
            raise DomainError("message length must equal the generator's row count")
        if arrays["bin_set"].ndim != 2 or arrays["bin_set"].shape[1] != arrays["shift_generator"].shape[0]:
            raise DomainError("bin index length must equal the shift generator's row count")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.translation.size

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def l(self) -> int:
        return self.shift_generator.shape[0]

    @cached_property
    def bin_offsets(self) -> np.ndarray:
        """wG~ for every bin index w, in scan order."""
        return (self.bin_set @ self.shift_generator) % self.ring.modulus

    def message_index(self, u: Sequence[int]) -> int:
        u = np.asarray(u, dtype=np.int64)
        matches = np.flatnonzero((self.messages == u).all(axis=1)) if u.shape == (self.k,) else []
        if len(matches) == 0:
            raise DomainError(f"{u.tolist()} is not in the message set")
        return int(matches[0])

    def inner_codeword(self, u: Sequence[int]) -> np.ndarray:
        return (np.asarray(u, dtype=np.int64) @ self.generator + self.translation) % self.ring.modulus

    def inner_codewords(self) -> np.ndarray:
        return (self.messages @ self.generator + self.translation) % self.ring.modulus

    def outer_codewords(self) -> np.ndarray:
        """Distinct codewords of the union of all bins."""
        m = self.ring.modulus
        words = (self.inner_codewords()[:, None, :] + self.bin_offsets[None, :, :]) % m
        return np.unique(words.reshape(-1, self.n), axis=0)

    def has_message_collision(self) -> bool:
        return len(np.unique(self.inner_codewords(), axis=0)) < len(self.messages)


def build_nested_qgc(
    n: int,
    k: int,
    l: int,
    bin_spec: TypicalSetSpec | None = None,
    seed: Any = None,
    ring: RingSpec = Z4,
    shift_generator: np.ndarray | None = None,
    bin_set: np.ndarray | None = None,
) -> NestedQgc:
    """
    Draw a nested QGC with i.i.d. uniform generator and translation entries.

    Args:
        n: Block length, at most MAX_BLOCK_LENGTH
        k: Message length; messages range over {0, 1}^k
        l: Bin index length
        bin_spec: Typical-set spec for the bin indices; {0, 1}^l when None
        seed: Seed for np.random.default_rng
        ring: Ring carrying the code
        shift_generator: Shared G~ to reuse instead of drawing one
        bin_set: Precomputed bin index set, overriding ``bin_spec``

    Returns:
        NestedQgc

    Raises:
        ResourceCapError: If n exceeds MAX_BLOCK_LENGTH or the code has more than DECODER_CAP codewords
    """
    if n > MAX_BLOCK_LENGTH:
        raise ResourceCapError(f"block length {n} exceeds the cap {MAX_BLOCK_LENGTH}")
    if n < 1 or k < 0 or l < 0:
        raise DomainError(f"need n >= 1 and k, l >= 0, got n={n}, k={k}, l={l}")

    messages = _binary_vectors(k)
    if bin_set is None:
        if bin_spec is None:
            bin_set = _binary_vectors(l)
        else:
            if bin_spec.length != l:
                raise DomainError(f"bin spec has length {bin_spec.length}, expected {l}")
            bin_set = enumerate_product_typical(bin_spec, cap=DECODER_CAP).vectors
    if len(messages) * len(bin_set) > DECODER_CAP:
        raise ResourceCapError(
            f"{len(messages)} messages x {len(bin_set)} bin indices exceeds the cap {DECODER_CAP}"
        )

    m = ring.modulus
    rng = np.random.default_rng(seed)
    generator = rng.integers(0, m, size=(k, n))
    if shift_generator is None:
        shift_generator = rng.integers(0, m, size=(l, n))
    elif np.shape(shift_generator) != (l, n):
        raise DomainError(f"shared shift generator must have shape ({l}, {n})")
    translation = rng.integers(0, m, size=n)
    return NestedQgc(ring, generator, shift_generator, translation, messages, bin_set, seed)


def bin_of(code: NestedQgc, u: Sequence[int]) -> np.ndarray:
    """Codewords uG + wG~ + b of the bin of message ``u``, in scan order."""
    code.message_index(u)
    return (code.inner_codeword(u) + code.bin_offsets) % code.ring.modulus


@dataclass(frozen=True, eq=False)
class EncodeResult:
    codeword: np.ndarray | None
    bin_index: int | None

    @property
    def success(self) -> bool:
        return self.codeword is not None


def encode(
    code: NestedQgc, u: Sequence[int], s: Sequence[int], target: ConditionalPmf, epsilon: float
) -> EncodeResult:
    """
    First codeword of the bin of ``u`` jointly typical with the state sequence.

    Args:
        code: Nested QGC
        u: Message
        s: State sequence of length n
        target: State law with the kernel p(v | s)
        epsilon: Typicality slack

    Returns:
        EncodeResult; a failed result is the covering error event
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    s = np.asarray(s, dtype=np.int64)
    if s.shape != (code.n,):
        raise DomainError(f"state sequence must have length {code.n}")
    if target.output_size != code.ring.modulus:
        raise DomainError(f"target law must range over {code.ring}")
    if s.min() < 0 or s.max() >= target.source.size:
        raise DomainError("state symbols outside the state alphabet")
    candidates = bin_of(code, u)
    symbols = s[None, :] * code.ring.modulus + candidates
    hits = np.flatnonzero(typical_rows(symbols, target.joint(("S", "V")).weights.ravel(), epsilon))
    if hits.size == 0:
        return EncodeResult(None, None)
    return EncodeResult(candidates[hits[0]], int(hits[0]))


def channel_input(v: Sequence[int], s: Sequence[int], x_law: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw x_j ~ p(x | v_j, s_j) independently for every coordinate."""
    v = np.asarray(v, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    if v.shape != s.shape:
        raise DomainError(f"codeword and state lengths differ: {v.size} vs {s.size}")
    return sample_categorical(np.asarray(x_law)[v, s], rng)


@dataclass(frozen=True)
class DecodeResult:
    message_indices: tuple[int, int] | None
    survivors: int
    survivor_pairs: int
    candidates: int

    @property
    def success(self) -> bool:
        return self.message_indices is not None


def decode(
    code1: NestedQgc,
    code2: NestedQgc,
    y: Sequence[int],
    epsilon: float,
    joint: JointPmf,
    sum_bins: np.ndarray | None = None,
) -> DecodeResult:
    """
    Joint-typicality decoding of the message pair over the sum code.

    Every candidate u1G1 + u2G2 + wG~ + b1 + b2, with w ranging over the
    sumset of the two bin index sets, is tested against y under the joint law
    of (V1 + V2, Y). Survivors sharing one message pair decode to it; an empty
    or ambiguous survivor set is the decoding error event.

    Args:
        code1, code2: Codes sharing ring, block length and shift generator
        y: Channel output
        epsilon: Typicality slack
        joint: Law with axes ``V1+V2`` and ``Y``
        sum_bins: Precomputed sumset of the bin index sets

    Returns:
        DecodeResult with the decoded message indices or None
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if code1.ring != code2.ring or code1.n != code2.n:
        raise DomainError("codes must share ring and block length")
    if not np.array_equal(code1.shift_generator, code2.shift_generator):
        raise DomainError("codes must share one shift generator")
    m = code1.ring.modulus
    law = joint.marginal(("V1+V2", "Y"))
    y_size = law.size_of("Y")
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (code1.n,) or y.min() < 0 or y.max() >= y_size:
        raise DomainError(f"output must be a length-{code1.n} sequence over {y_size} symbols")

    if sum_bins is None:
        sum_bins = sumset_array(code1.bin_set, code2.bin_set, m)
    total = len(code1.messages) * len(code2.messages) * len(sum_bins)
    if total > DECODER_CAP:
        raise ResourceCapError(f"{total} decoder candidates exceed the cap {DECODER_CAP}")

    offsets = (sum_bins @ code1.shift_generator + code1.translation + code2.translation) % m
    inner1 = (code1.messages @ code1.generator) % m
    inner2 = (code2.messages @ code2.generator) % m
    weights = law.weights.ravel()

    survivors = 0
    pairs = []
    for i, a in enumerate(inner1):
        for j, b in enumerate(inner2):
            candidates = (a + b + offsets) % m
            hits = int(typical_rows(candidates * y_size + y, weights, epsilon).sum())
            if hits:
                survivors += hits
                pairs.append((i, j))
    unique = pairs[0] if len(pairs) == 1 else None
    return DecodeResult(unique, survivors, len(pairs), total)


@dataclass(frozen=True)
class RateConfig:
    """Message and bin lengths; ``l`` holds one entry per block length or a single shared one."""

    k1: int = 1
    k2: int = 1
    l: tuple[int, ...] = (9,)
    epsilon_c: float = DEFAULT_EPSILON_C

    def __post_init__(self):
        l = (self.l,) if isinstance(self.l, int) else tuple(int(v) for v in self.l)
        if self.k1 < 0 or self.k2 < 0 or not l or min(l) < 0:
            raise DomainError("k1, k2 and every l must be non-negative")
        if self.epsilon_c <= 0:
            raise DomainError(f"epsilon_c must be positive, got {self.epsilon_c}")
        object.__setattr__(self, "l", l)

    def l_for(self, index: int) -> int:
        return self.l[index] if len(self.l) > 1 else self.l[0]


@dataclass(frozen=True)
class ExperimentConfig:
    """Example-1 simulation run: block lengths, rates, trial count and seed."""

    n_list: tuple[int, ...] = (8, 12, 16)
    rates: RateConfig = field(default_factory=RateConfig)
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        n_list = tuple(int(n) for n in self.n_list)
        if self.trials < 0:
            raise DomainError(f"trials must be >= 0, got {self.trials}")
        if len(self.rates.l) not in (1, len(n_list)):
            raise DomainError(f"need one l or one per block length, got {len(self.rates.l)} for {len(n_list)}")
        object.__setattr__(self, "n_list", n_list)

    @classmethod
    def from_document(cls, document: Mapping[str, Any]) -> "ExperimentConfig":
        require_fields(document, EXPERIMENT_FIELDS)
        if not isinstance(document["n_list"], list):
            raise DocumentError("n_list", "expected a list of block lengths")
        l = document["l"]
        l = [_count(v, f"l[{i}]") for i, v in enumerate(l)] if isinstance(l, list) else [_count(l, "l")]
        return cls(
            n_list=tuple(_count(n, f"n_list[{i}]") for i, n in enumerate(document["n_list"])),
            rates=RateConfig(
                k1=_count(document["k1"], "k1"),
                k2=_count(document["k2"], "k2"),
                l=tuple(l),
                epsilon_c=parse_number(document["epsilon_c"], "epsilon_c"),
            ),
            trials=_count(document["trials"], "trials"),
            seed=_count(document["seed"], "seed"),
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "n_list": list(self.n_list),
            "k1": self.rates.k1,
            "k2": self.rates.k2,
            "l": list(self.rates.l),
            "epsilon_c": self.rates.epsilon_c,
            "trials": self.trials,
            "seed": self.seed,
        }


def _count(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise DocumentError(path, f"expected a non-negative integer, got {value!r}")
    return value


def load_experiment(name_or_path: str | Path = "example1") -> ExperimentConfig:
    """Load a bundled experiment config by name or an experiment document from disk."""
    if str(name_or_path) in BUILTIN_EXPERIMENTS:
        return ExperimentConfig.from_document(load_experiment_document(str(name_or_path)))
    return ExperimentConfig.from_document(read_document(name_or_path))


@dataclass(frozen=True)
class TrialStats:
    """
    Error-event counts for one block length.

    ``decoded`` counts trials with no covering error and a unique surviving
    message pair; ``correct`` counts those decoded to the transmitted pair.
    """

    n: int
    l: int
    epsilon: float
    trials: int
    e1: int = 0
    e2: int = 0
    ed: int = 0
    decoded: int = 0
    correct: int = 0
    collisions: int = 0
    max_cost: float = 0.0

    def _rate(self, count: int) -> float:
        return count / self.trials if self.trials else 0.0

    @property
    def e1_rate(self) -> float:
        return self._rate(self.e1)

    @property
    def e2_rate(self) -> float:
        return self._rate(self.e2)

    @property
    def ed_rate(self) -> float:
        return self._rate(self.ed)

    @property
    def conditional_decode_accuracy(self) -> float:
        """NaN when no trial reached a unique decision."""
        return self.correct / self.decoded if self.decoded else math.nan

    @classmethod
    def merge(cls, parts: Sequence["TrialStats"]) -> "TrialStats":
        first = parts[0]
        return cls(
            n=first.n,
            l=first.l,
            epsilon=first.epsilon,
            trials=sum(p.trials for p in parts),
            e1=sum(p.e1 for p in parts),
            e2=sum(p.e2 for p in parts),
            ed=sum(p.ed for p in parts),
            decoded=sum(p.decoded for p in parts),
            correct=sum(p.correct for p in parts),
            collisions=sum(p.collisions for p in parts),
            max_cost=max(p.max_cost for p in parts),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "l": self.l,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "e1_rate": self.e1_rate,
            "e2_rate": self.e2_rate,
            "ed_rate": self.ed_rate,
            "conditional_decode_accuracy": self.conditional_decode_accuracy,
            "decoded": self.decoded,
            "correct": self.correct,
            "collisions": self.collisions,
            "max_cost": self.max_cost,
        }

    @staticmethod
    def to_frame(stats: Iterable["TrialStats"]) -> pd.DataFrame:
        columns = list(TrialStats(0, 0, 0.0, 0).to_dict())
        return pd.DataFrame([s.to_dict() for s in stats], columns=columns)


def e1_trend_batches(batches: Sequence[Sequence[TrialStats]]) -> int:
    """Number of seed batches whose E1 rate is non-increasing in n."""
    count = 0
    for stats in batches:
        rates = [s.e1_rate for s in sorted(stats, key=lambda s: s.n)]
        count += all(b <= a for a, b in zip(rates, rates[1:]))
    return count


@dataclass(frozen=True, eq=False)
class _TrialContext:
    channel: ChannelSpec
    ring: RingSpec
    targets: tuple[ConditionalPmf, ConditionalPmf]
    x_laws: tuple[np.ndarray, np.ndarray]
    sum_law: JointPmf
    n: int
    k1: int
    k2: int
    l: int
    epsilon: float
    bins: np.ndarray
    sum_bins: np.ndarray | None
    seed: int


def _run_trials(task: tuple) -> TrialStats:
    ctx, indices = task
    ch = ctx.channel
    m = ctx.ring.modulus
    counts = dict(e1=0, e2=0, ed=0, decoded=0, correct=0, collisions=0)
    max_cost = 0.0

    for trial in indices:
        rng = np.random.default_rng([ctx.seed, ctx.n, trial])
        code1 = build_nested_qgc(ctx.n, ctx.k1, ctx.l, seed=[ctx.seed, ctx.n, trial, 1], ring=ctx.ring, bin_set=ctx.bins)
        code2 = build_nested_qgc(
            ctx.n,
            ctx.k2,
            ctx.l,
            seed=[ctx.seed, ctx.n, trial, 2],
            ring=ctx.ring,
            shift_generator=code1.shift_generator,
            bin_set=ctx.bins,
        )
        counts["collisions"] += code1.has_message_collision() or code2.has_message_collision()

        s1 = rng.choice(ch.s1_size, size=ctx.n, p=ch.state1.weights)
        s2 = rng.choice(ch.s2_size, size=ctx.n, p=ch.state2.weights)
        i1 = int(rng.integers(len(code1.messages)))
        i2 = int(rng.integers(len(code2.messages)))
        u1, u2 = code1.messages[i1], code2.messages[i2]

        r1 = encode(code1, u1, s1, ctx.targets[0], ctx.epsilon)
        r2 = encode(code2, u2, s2, ctx.targets[1], ctx.epsilon)
        counts["e1"] += not r1.success
        counts["e2"] += not r2.success
        if not (r1.success and r2.success):
            continue

        x1 = channel_input(r1.codeword, s1, ctx.x_laws[0], rng)
        x2 = channel_input(r2.codeword, s2, ctx.x_laws[1], rng)
        max_cost = max(max_cost, average_cost(x1, s1, ch.cost1), average_cost(x2, s2, ch.cost2))
        y = ch.sample_output(x1, x2, s1, s2, rng)

        w_sum = code1.bin_set[r1.bin_index] + code2.bin_set[r2.bin_index]
        formed = (
            u1 @ code1.generator + u2 @ code2.generator + w_sum @ code1.shift_generator
            + code1.translation + code2.translation
        ) % m
        if not np.array_equal(formed, (r1.codeword + r2.codeword) % m):
            raise VerificationError(
                "sum-code word differs from the sum of the transmitted codewords",
                {"n": ctx.n, "trial": trial, "formed": formed.tolist()},
            )

        result = decode(code1, code2, y, ctx.epsilon, ctx.sum_law, ctx.sum_bins)
        if result.message_indices is None:
            counts["ed"] += 1
        else:
            counts["decoded"] += 1
            counts["correct"] += result.message_indices == (i1, i2)
        logger.debug("n=%d trial %d: survivors %d over %d pairs", ctx.n, trial, result.survivors, result.survivor_pairs)

    return TrialStats(ctx.n, ctx.l, ctx.epsilon, len(indices), max_cost=max_cost, **counts)


def _covering_trials(task: tuple) -> int:
    ctx, indices = task
    ch = ctx.channel
    successes = 0
    for trial in indices:
        rng = np.random.default_rng([ctx.seed, ctx.n, ctx.l, trial])
        code = build_nested_qgc(ctx.n, ctx.k1, ctx.l, seed=[ctx.seed, ctx.n, ctx.l, trial, 1], ring=ctx.ring, bin_set=ctx.bins)
        s = rng.choice(ch.s1_size, size=ctx.n, p=ch.state1.weights)
        u = code.messages[int(rng.integers(len(code.messages)))]
        successes += encode(code, u, s, ctx.targets[0], ctx.epsilon).success
    return successes


def _split(trials: int, workers: int) -> list[list[int]]:
    return [batch.tolist() for batch in np.array_split(np.arange(trials), max(1, workers)) if len(batch)]


def _dispatch(fn, ctx: _TrialContext, trials: int, workers: int) -> list:
    tasks = [(ctx, batch) for batch in _split(trials, workers)]
    if workers > 1 and len(tasks) > 1:
        with Pool(len(tasks)) as pool:
            return pool.map(fn, tasks)
    return [fn(task) for task in tasks]


class QgcSimulator:
    """Runs the nested-QGC scheme for one channel and one assignment."""

    def __init__(
        self,
        ch: ChannelSpec | None = None,
        assignment: QgcAssignment | None = None,
        workers: int = 1,
    ):
        """
        Initialize the simulator.

        Args:
            ch: Channel; Example 1 when None
            assignment: Nested-QGC assignment with a trivial Q; the Example-1 one when None
            workers: Processes used to run trials
        """
        self.channel = ch or builtin_example1()
        self.assignment = assignment or lemma4_assignment()
        self.channel.require_independent_states()
        if self.assignment.q.size != 1:
            raise DomainError("the simulator needs a trivial time-sharing variable")
        if workers < 1:
            raise DomainError(f"workers must be >= 1, got {workers}")
        a = self.assignment
        self.ring = a.ring
        self.targets = (
            ConditionalPmf(self.channel.state1, a.v1[0]),
            ConditionalPmf(self.channel.state2, a.v2[0]),
        )
        self.x_laws = (a.x1[0], a.x2[0])
        self.sum_law = sum_output_law(self.channel, a)
        self.workers = workers

    def covering_threshold(self, encoder: int = 1) -> ThresholdReport:
        """Covering threshold of one encoder's bins with W uniform on {0, 1}."""
        uq = UQPair(Pmf([1.0]), (Pmf.on_support(self.ring.modulus, BINARY_SYMBOLS),))
        return covering_threshold(uq, self.targets[encoder - 1], self.ring)

    def _context(self, n: int, k1: int, k2: int, l: int, epsilon_c: float, seed: int, decoding: bool) -> _TrialContext:
        bins = uniform_bin_set(l, epsilon_for(max(l, 1), epsilon_c), self.ring.modulus)
        sum_bins = None
        if decoding:
            sum_bins = _cached_sumset(l, epsilon_for(max(l, 1), epsilon_c), self.ring.modulus)
            total = 2**k1 * 2**k2 * len(sum_bins)
            if total > DECODER_CAP:
                raise ResourceCapError(f"n={n}, l={l}: {total} decoder candidates exceed the cap {DECODER_CAP}")
        return _TrialContext(
            self.channel,
            self.ring,
            self.targets,
            self.x_laws,
            self.sum_law,
            n,
            k1,
            k2,
            l,
            epsilon_for(n, epsilon_c),
            bins,
            sum_bins,
            seed,
        )

    def run_block_length(self, n: int, l: int, config: ExperimentConfig) -> TrialStats:
        rates = config.rates
        ctx = self._context(n, rates.k1, rates.k2, l, rates.epsilon_c, config.seed, decoding=True)
        stats = TrialStats.merge(_dispatch(_run_trials, ctx, config.trials, self.workers))
        logger.info(
            "n=%d l=%d: E1 %.3f, E2 %.3f, Ed %.3f over %d trials",
            n,
            l,
            stats.e1_rate,
            stats.e2_rate,
            stats.ed_rate,
            stats.trials,
        )
        return stats

    def run(self, config: ExperimentConfig) -> list[TrialStats]:
        """
        Simulate every block length of ``config``.

        Returns:
            One TrialStats per block length; empty when config.trials is 0
        """
        if config.trials == 0:
            return []
        return [
            self.run_block_length(n, config.rates.l_for(i), config)
            for i, n in enumerate(config.n_list)
        ]

    def covering_experiment(
        self,
        n_list: Sequence[int] = (8, 12, 16),
        offset: float = 0.1,
        trials: int = 2000,
        seed: int = 0,
        epsilon_c: float = 3.0,
        k: int = 1,
    ) -> pd.DataFrame:
        """
        Encoder-1 covering success with bin rates just above and below the covering threshold.

        Returns:
            DataFrame with one row per n: bin lengths and success rates of both arms
        """
        if not 0 < offset < 1:
            raise DomainError(f"offset must lie in (0, 1), got {offset}")
        threshold = self.covering_threshold(1).value
        rows = []
        for n in n_list:
            row: dict[str, Any] = {"n": n, "threshold": threshold, "trials": trials}
            for arm, factor in (("above", 1 + offset), ("below", 1 - offset)):
                l = max(0, round(n * threshold * factor))
                ctx = self._context(n, k, k, l, epsilon_c, seed, decoding=False)
                successes = sum(_dispatch(_covering_trials, ctx, trials, self.workers)) if trials else 0
                row[f"l_{arm}"] = l
                row[f"success_{arm}"] = successes / trials if trials else 0.0
            logger.info(
                "n=%d: covering success %.3f above vs %.3f below",
                n,
                row["success_above"],
                row["success_below"],
            )
            rows.append(row)
        return pd.DataFrame(rows, columns=["n", "threshold", "trials", "l_above", "success_above", "l_below", "success_below"])


@lru_cache(maxsize=8)
def _cached_sumset(l: int, epsilon: float, modulus: int) -> np.ndarray:
    bins = uniform_bin_set(l, epsilon, modulus)
    sums = sumset_array(bins, bins, modulus)
    sums.flags.writeable = False
    return sums


def run_example1(
    n_list: Sequence[int] = (8, 12, 16),
    rates: RateConfig | None = None,
    trials: int = 100,
    seed: int = 0,
    workers: int = 1,
) -> list[TrialStats]:
    """
    Simulate the nested-QGC scheme on Example 1.

    Example:
        >>> from qgc_mac import run_example1, RateConfig
        >>> stats = run_example1((8,), RateConfig(l=(6,), epsilon_c=3.0), trials=20, seed=1)
        >>> stats[0].e1_rate
    """
    config = ExperimentConfig(tuple(n_list), rates or RateConfig(), trials, seed)
    return QgcSimulator(workers=workers).run(config)


def covering_experiment(
    n_list: Sequence[int] = (8, 12, 16),
    offset: float = 0.1,
    trials: int = 2000,
    seed: int = 0,
    epsilon_c: float = 3.0,
    workers: int = 1,
) -> pd.DataFrame:
    """Covering A/B check on Example 1; see QgcSimulator.covering_experiment."""
    return QgcSimulator(workers=workers).covering_experiment(n_list, offset, trials, seed, epsilon_c)
