"""Method of types: enumeration, typicality, class sizes and in-class ranking.

Also holds executable checks for three classical facts used by the binning
scheme: rows of a type-class matrix share the class type, sampling without
replacement is close to sampling with replacement, and the polynomial lower
bound on type-class size.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DimensionError, SourceDistribution, as_sequence

DEFAULT_CLASS_CAP = 2**24
DEFAULT_ENUM_CAP = 2**20


class CapExceeded(RuntimeError):
    """An exhaustive computation would exceed its configured size cap."""


@dataclass(frozen=True)
class TypeVector:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("type counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    def frequencies(self) -> np.ndarray:
        return np.array(self.counts, dtype=float) / self.n

    def __iter__(self):
        return iter(self.counts)

    def __len__(self):
        return len(self.counts)


@dataclass(frozen=True)
class TypicalFamily:
    n: int
    epsilon: float
    types: tuple[TypeVector, ...]


def empirical_type(x, alphabet_size: int) -> TypeVector:
    x = as_sequence(x, alphabet_size)
    return TypeVector(tuple(np.bincount(x, minlength=alphabet_size).tolist()))


def enumerate_types(n: int, alphabet_size: int) -> list[TypeVector]:
    """All types of length-``n`` sequences, ordered as their smallest sequences sort.

    For two symbols and ``n=2`` this is ``(2,0), (1,1), (0,2)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if alphabet_size < 1:
        raise ValueError("alphabet must be nonempty")

    def rec(remaining, slots):
        if slots == 1:
            yield (remaining,)
            return
        for c in range(remaining, -1, -1):
            for rest in rec(remaining - c, slots - 1):
                yield (c,) + rest

    return [TypeVector(c) for c in rec(n, alphabet_size)]


def _decimal(v: float) -> Fraction:
    # the shortest repr round-trips, so 0.2 means 1/5 and ties stay ties
    return Fraction(repr(float(v)))


def is_epsilon_typical(t: TypeVector, P: SourceDistribution, epsilon: float) -> bool:
    """``|t(x)/n - P(x)| < epsilon`` for every symbol, compared in exact rationals."""
    if len(t) != P.size:
        raise DimensionError(f"type has {len(t)} symbols, source has {P.size}")
    eps = _decimal(epsilon)
    n = t.n
    return all(abs(Fraction(c, n) - _decimal(p)) < eps for c, p in zip(t.counts, P.probs))


def typical_family(P: SourceDistribution, n: int, epsilon: float) -> TypicalFamily:
    types = tuple(t for t in enumerate_types(n, P.size) if is_epsilon_typical(t, P, epsilon))
    return TypicalFamily(n, epsilon, types)


def type_log_probability(t: TypeVector, P: SourceDistribution) -> float:
    """Log-probability of any single sequence of type ``t``."""
    if len(t) != P.size:
        raise DimensionError(f"type has {len(t)} symbols, source has {P.size}")
    total = 0.0
    for c, p in zip(t.counts, P.probs):
        if c:
            if p == 0:
                return -math.inf
            total += c * math.log(p)
    return total


def type_class_size(t: TypeVector) -> int:
    size = 1
    k = 0
    for c in t.counts:
        for i in range(1, c + 1):
            k += 1
            size = size * k // i
    return size


def type_entropy(t: TypeVector, base: float = 2.0) -> float:
    f = t.frequencies()
    f = f[f > 0]
    return float(-(f * np.log(f)).sum() / math.log(base))


def type_class_size_bound(t: TypeVector, base: float = 2.0) -> float:
    """Lower bound ``(n+1)^-|X| * base^(n H(t))`` on the type-class size."""
    if base <= 1:
        raise ValueError("base must exceed 1")
    n = t.n
    log_bound = -len(t) * math.log(n + 1) + n * type_entropy(t, base) * math.log(base)
    return math.exp(log_bound)


def rank_in_type_class(x, alphabet_size: int | None = None) -> int:
    """Lexicographic rank of ``x`` among all sequences with its type."""
    x = as_sequence(x, alphabet_size)
    size = alphabet_size if alphabet_size is not None else (int(x.max()) + 1 if x.size else 1)
    remaining = np.bincount(x, minlength=size).tolist()
    length = len(x)
    count = type_class_size(TypeVector(remaining))
    rank = 0
    for sym in x.tolist():
        # count of completions after placing symbol s is count * remaining[s] / length
        for s in range(sym):
            if remaining[s]:
                rank += count * remaining[s] // length
        count = count * remaining[sym] // length
        remaining[sym] -= 1
        length -= 1
    return rank


def unrank_in_type_class(t: TypeVector, index: int) -> np.ndarray:
    size = type_class_size(t)
    if not 0 <= index < size:
        raise IndexError(f"rank {index} outside type class of size {size}")
    remaining = list(t.counts)
    length = t.n
    count = size
    out = np.empty(length, dtype=np.int64)
    for pos in range(t.n):
        for s, r in enumerate(remaining):
            if not r:
                continue
            block = count * r // length
            if index < block:
                out[pos] = s
                count = block
                remaining[s] -= 1
                length -= 1
                break
            index -= block
    return out


def _class_matrix(counts: tuple[int, ...]) -> np.ndarray:
    memo: dict[tuple[int, ...], np.ndarray] = {}

    def build(c: tuple[int, ...]) -> np.ndarray:
        if c in memo:
            return memo[c]
        if not any(c):
            out = np.zeros((1, 0), dtype=np.uint8)
        else:
            blocks = []
            for s, cs in enumerate(c):
                if cs:
                    sub = build(c[:s] + (cs - 1,) + c[s + 1 :])
                    head = np.full((sub.shape[0], 1), s, dtype=np.uint8)
                    blocks.append(np.hstack([head, sub]))
            out = np.vstack(blocks)
        memo[c] = out
        return out

    return build(tuple(counts))


def type_class_sequences(t: TypeVector, cap: int = DEFAULT_CLASS_CAP) -> np.ndarray:
    """Every sequence of type ``t`` as rows of a ``(|class|, n)`` array, in rank order."""
    size = type_class_size(t)
    if size > cap:
        raise CapExceeded(f"type class {t.counts} has {size} sequences, cap is {cap}")
    if len(t) > 256:
        raise CapExceeded("alphabet too large for uint8 storage")
    return _class_matrix(t.counts)


def variational_distance(P, Q) -> float:
    """Total variation distance, half the L1 distance."""
    p = np.asarray(P, dtype=float)
    q = np.asarray(Q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"shape mismatch: {p.shape} != {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


def rows_have_type(matrix, t: TypeVector) -> bool:
    """True iff every row of ``matrix`` (columns are sequences) has the empirical distribution of ``t``."""
    m = np.asarray(matrix)
    ncols = m.shape[1]
    for row in m:
        counts = np.bincount(row, minlength=len(t))
        if len(counts) != len(t):
            return False
        # counts/ncols == t/n, compared in integers
        if any(c * t.n != ncols * tc for c, tc in zip(counts.tolist(), t.counts)):
            return False
    return True


def check_row_types(t: TypeVector, cap: int = DEFAULT_CLASS_CAP) -> bool:
    """Build the matrix whose columns are the type class of ``t``; check each row has type ``t``."""
    seqs = type_class_sequences(t, cap)
    return rows_have_type(seqs.T, t)


def sampling_tv_check(urn, k: int, cap: int = DEFAULT_ENUM_CAP) -> tuple[float, float, bool]:
    """Exact TV distance between ``k`` ordered draws without and with replacement.

    Returns ``(tv, bound, tv <= bound)`` with ``bound = |S| k / len(urn)``,
    where ``S`` is the set of distinct labels in the urn.
    """
    balls = list(urn)
    N = len(balls)
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= {N}, got {k}")
    labels = sorted(set(balls), key=repr)
    counts = [balls.count(s) for s in labels]
    c = len(labels)
    if c**k > cap:
        raise CapExceeded(f"{c}^{k} outcomes exceed cap {cap}")

    outcomes = np.array(list(itertools.product(range(c), repeat=k)), dtype=np.int64)
    cnt = np.array(counts, dtype=float)
    with_repl = np.prod(cnt[outcomes] / N, axis=1)
    # earlier draws of the same label deplete the urn
    earlier = (outcomes[:, :, None] == outcomes[:, None, :]) & np.tri(k, k, -1, dtype=bool)[None]
    left = cnt[outcomes] - earlier.sum(axis=2)
    without = np.prod(np.clip(left, 0, None) / (N - np.arange(k)), axis=1)
    tv = float(np.abs(without - with_repl).sum())
    tv *= 0.5
    bound = c * k / N
    return tv, bound, tv <= bound
