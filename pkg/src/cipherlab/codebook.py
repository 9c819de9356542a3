"""Seeded partition of the typical set into same-type bins of capacity ``k``."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import SourceDistribution, as_sequence
from .typemethod import (
    DEFAULT_CLASS_CAP,
    CapExceeded,
    TypeVector,
    empirical_type,
    enumerate_types,
    is_epsilon_typical,
    rank_in_type_class,
    type_class_sequences,
    type_log_probability,
    variational_distance,
)

# Bump the version whenever the permutation procedure changes; it is part of
# every manifest so old logs are never silently reinterpreted.
STREAM_NAME = "numpy-pcg64-permutation/v1"

DEFAULT_TYPE_CAP_N = 24


class EmptyTypicalSet(ValueError):
    pass


@dataclass(frozen=True)
class BinAddress:
    J: int
    L: int


class _NotTypical:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotTypical"

    def __bool__(self):
        return False


NotTypical = _NotTypical()


@dataclass(eq=False)
class TypeBlock:
    """Consecutive bins holding sequences of one type.

    ``ordered`` lists the block's sequences in bin order: rows
    ``[j*k, (j+1)*k)`` form the block's ``j``-th bin, the last bin may be short.
    ``perm`` maps bin-order position to class rank when the block is a whole,
    seeded type class; explicit blocks carry ``perm=None`` and a lookup dict.
    """

    type: TypeVector
    ordered: np.ndarray
    first_bin: int
    k: int
    perm: np.ndarray | None = None
    inv_perm: np.ndarray | None = None
    lookup: dict | None = None

    @property
    def size(self) -> int:
        return self.ordered.shape[0]

    @property
    def num_bins(self) -> int:
        return -(-self.size // self.k)

    def bin_sizes(self) -> list[int]:
        full, rest = divmod(self.size, self.k)
        return [self.k] * full + ([rest] if rest else [])

    def position_of(self, x: np.ndarray) -> int | None:
        if self.perm is not None:
            return int(self.inv_perm[rank_in_type_class(x, len(self.type))])
        return self.lookup.get(x.astype(np.uint8).tobytes())


@dataclass(eq=False)
class Codebook:
    n: int
    k: int
    alphabet_size: int
    blocks: list[TypeBlock]
    epsilon: float | None = None
    seed: int | None = None
    stream: str = STREAM_NAME
    _by_type: dict = field(default_factory=dict, repr=False)
    _bin_block: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self._by_type = {}
        owner = []
        for bi, b in enumerate(self.blocks):
            self._by_type.setdefault(b.type.counts, []).append(b)
            owner.extend([bi] * b.num_bins)
        self._bin_block = np.array(owner, dtype=np.int64)

    @classmethod
    def from_bins(cls, bins, k: int | None = None, alphabet_size: int | None = None) -> "Codebook":
        """Codebook with explicitly given bins, each a list of same-type sequences."""
        arrays = [np.atleast_2d(np.asarray(b, dtype=np.int64)) for b in bins]
        if not arrays:
            raise ValueError("need at least one bin")
        n = arrays[0].shape[1]
        if k is None:
            k = max(a.shape[0] for a in arrays)
        if alphabet_size is None:
            alphabet_size = int(max(a.max() for a in arrays)) + 1
        seen = set()
        blocks = []
        for a in arrays:
            if a.shape[1] != n:
                raise ValueError("all sequences must share one length")
            if a.shape[0] > k:
                raise ValueError(f"bin of {a.shape[0]} sequences exceeds capacity {k}")
            t = empirical_type(a[0], alphabet_size)
            lookup = {}
            for pos, row in enumerate(a):
                if empirical_type(row, alphabet_size) != t:
                    raise ValueError("a bin must hold sequences of a single type")
                key = row.astype(np.uint8).tobytes()
                if key in seen:
                    raise ValueError(f"sequence {row.tolist()} appears twice")
                seen.add(key)
                lookup[key] = pos
            blocks.append(TypeBlock(t, a.astype(np.uint8), len(blocks), k, lookup=lookup))
        return cls(n=n, k=k, alphabet_size=alphabet_size, blocks=blocks)

    @property
    def num_bins(self) -> int:
        return int(self._bin_block.size)

    @property
    def message_count(self) -> int:
        return self.num_bins * self.k

    @property
    def types(self) -> list[TypeVector]:
        return [b.type for b in self.blocks]

    def covered_count(self) -> int:
        return sum(b.size for b in self.blocks)

    def block_of_bin(self, J: int) -> tuple[TypeBlock, int]:
        if not 0 <= J < self.num_bins:
            raise IndexError(f"bin {J} outside 0..{self.num_bins - 1}")
        b = self.blocks[self._bin_block[J]]
        return b, J - b.first_bin

    def bin_size(self, J: int) -> int:
        b, j = self.block_of_bin(J)
        return min(self.k, b.size - j * self.k)

    def bin_sizes(self) -> np.ndarray:
        return np.concatenate([b.bin_sizes() for b in self.blocks]).astype(np.int64)

    def bin_starts(self) -> np.ndarray:
        """Row of each bin's first sequence in :meth:`all_sequences`."""
        sizes = self.bin_sizes()
        return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    def all_sequences(self) -> np.ndarray:
        return np.vstack([b.ordered for b in self.blocks]).astype(np.int64)

    def header(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "k": self.k,
            "seed": self.seed,
            "stream": self.stream,
            "alphabet_size": self.alphabet_size,
            "types": [list(b.type.counts) for b in self.blocks],
            "bin_counts": [b.num_bins for b in self.blocks],
            "num_bins": self.num_bins,
            "digest": self.digest(),
        }

    def manifest(self) -> str:
        """Plain-text ``key: value`` manifest of the header, one field per line."""
        return "".join(f"{key}: {json.dumps(val)}\n" for key, val in self.header().items())

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n},{self.k},{self.alphabet_size}".encode())
        for b in self.blocks:
            h.update(repr(b.type.counts).encode())
            h.update(np.ascontiguousarray(b.ordered).tobytes())
        return h.hexdigest()


def _type_rng(seed: int, t: TypeVector) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *t.counts])))


def build_partition(
    P: SourceDistribution,
    n: int,
    epsilon: float,
    k: int,
    seed: int,
    class_cap: int = DEFAULT_CLASS_CAP,
    type_cap_n: int = DEFAULT_TYPE_CAP_N,
) -> Codebook:
    """Partition the epsilon-typical set into same-type bins of capacity ``k``.

    Each admitted type class is shuffled by its own seeded stream (keyed on
    the seed and the type counts) and chunked into consecutive bins; types are
    visited in ``enumerate_types`` order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if n > type_cap_n:
        raise CapExceeded(f"n={n} exceeds the type-enumeration cap {type_cap_n}")
    blocks = []
    first_bin = 0
    for t in enumerate_types(n, P.size):
        if not is_epsilon_typical(t, P, epsilon):
            continue
        seqs = type_class_sequences(t, class_cap)
        perm = _type_rng(seed, t).permutation(seqs.shape[0])
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        block = TypeBlock(t, seqs[perm], first_bin, k, perm=perm, inv_perm=inv)
        blocks.append(block)
        first_bin += block.num_bins
    if not blocks:
        raise EmptyTypicalSet(f"no type of length {n} is within epsilon={epsilon} of {P.probs.tolist()}")
    return Codebook(n=n, k=k, alphabet_size=P.size, blocks=blocks, epsilon=epsilon, seed=seed)


def locate(cb: Codebook, x) -> BinAddress | _NotTypical:
    x = as_sequence(x, cb.alphabet_size)
    if x.size != cb.n:
        return NotTypical
    t = empirical_type(x, cb.alphabet_size)
    for b in cb._by_type.get(t.counts, ()):
        pos = b.position_of(x)
        if pos is not None:
            j, L = divmod(pos, cb.k)
            return BinAddress(b.first_bin + j, L)
    return NotTypical


def sequence_codes(seqs, alphabet_size: int) -> np.ndarray:
    """Base-``alphabet_size`` integer code of each row, first symbol most significant."""
    seqs = np.asarray(seqs, dtype=np.int64)
    weights = alphabet_size ** np.arange(seqs.shape[-1] - 1, -1, -1, dtype=np.int64)
    return seqs @ weights


def address_table(cb: Codebook, cap: int = 2**22) -> np.ndarray:
    """Global bin-order position ``J*k + L`` indexed by sequence code; -1 where not encodable."""
    total = cb.alphabet_size**cb.n
    if total > cap:
        raise CapExceeded(f"{total} sequences exceed the address-table cap {cap}")
    table = np.full(total, -1, dtype=np.int64)
    for b in cb.blocks:
        pos = np.arange(b.size)
        table[sequence_codes(b.ordered, cb.alphabet_size)] = (b.first_bin + pos // cb.k) * cb.k + pos % cb.k
    return table


def bin_contents(cb: Codebook, J: int) -> np.ndarray:
    b, j = cb.block_of_bin(J)
    return b.ordered[j * cb.k : (j + 1) * cb.k].astype(np.int64)


def iter_bins(cb: Codebook):
    """Yield ``(J, type, contents)`` for every bin."""
    for b in cb.blocks:
        for j in range(b.num_bins):
            yield b.first_bin + j, b.type, b.ordered[j * cb.k : (j + 1) * cb.k]


@dataclass(frozen=True)
class RateReport:
    num_bins: int
    message_count: int
    rate: float
    typical_mass: float


def covered_mass(cb: Codebook, P: SourceDistribution) -> float:
    """Probability that the source emits a sequence the codebook encodes uniquely."""
    return float(sum(b.size * math.exp(type_log_probability(b.type, P)) for b in cb.blocks))


def rate_and_counts(cb: Codebook, P: SourceDistribution) -> RateReport:
    m = cb.message_count
    return RateReport(cb.num_bins, m, math.log2(m) / cb.n, covered_mass(cb, P))


@dataclass(frozen=True)
class BinDiagnostics:
    J: int
    size: int
    posterior_ratio: float
    row_types: np.ndarray
    max_row_distance: float


def uniformity_diagnostics(cb: Codebook, P: SourceDistribution) -> list[BinDiagnostics]:
    """Per-bin check of within-bin posterior flatness and of row types against the source.

    ``posterior_ratio`` is max/min of the source probability over the bin;
    ``row_types[i]`` is the empirical distribution of the ``i``-th symbols.
    """
    out = []
    logp = P.log_probs
    for J, _, seqs in iter_bins(cb):
        counts = np.stack([(seqs == a).sum(axis=1) for a in range(P.size)], axis=1)
        with np.errstate(invalid="ignore"):
            lp = np.where(counts > 0, counts * logp, 0.0).sum(axis=1)
        ratio = float(np.exp(lp.max() - lp.min()))
        Q = np.stack([(seqs == a).mean(axis=0) for a in range(P.size)], axis=1)
        dist = max(variational_distance(q, P.probs) for q in Q)
        out.append(BinDiagnostics(J, seqs.shape[0], ratio, Q, dist))
    return out
