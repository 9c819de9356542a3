"""Alice's encoder and Bob's decoder: a one-time pad on the intra-bin offset."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook, address_table, bin_contents, covered_mass, locate, sequence_codes
from .core import SourceDistribution, as_sequence, sample_source
from .typemethod import CapExceeded


@dataclass(frozen=True)
class Message:
    J: int
    C: int

    def to_wire(self) -> str:
        return f"{self.J} {self.C}"

    @classmethod
    def from_wire(cls, line: str) -> "Message":
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"expected two integers, got {line!r}")
        J, C = (int(p) for p in parts)
        if J < 0 or C < 0:
            raise ValueError(f"message fields must be unsigned, got {line!r}")
        return cls(J, C)


def write_messages(messages, fh) -> None:
    for m in messages:
        fh.write(m.to_wire() + "\n")


def read_messages(fh) -> list[Message]:
    return [Message.from_wire(line) for line in fh if line.strip()]


def offset_cipher(L: int, K: int, k: int, pad: bool = True) -> int:
    """Encrypted offset; ``pad=False`` transmits ``L`` in the clear (negative control)."""
    return (L + K) % k if pad else L


def offset_channel(k: int, pad: bool = True) -> np.ndarray:
    """``W[C, L] = P(C | L)`` for a uniform key, obtained by running :func:`offset_cipher` over every key."""
    W = np.zeros((k, k))
    for L in range(k):
        for K in range(k):
            W[offset_cipher(L, K, k, pad), L] += 1.0 / k
    return W


def draw_key(k: int, rng: np.random.Generator) -> int:
    return int(rng.integers(k))


def encode(cb: Codebook, x, key: int, rng: np.random.Generator, pad: bool = True) -> Message:
    if not 0 <= key < cb.k:
        raise ValueError(f"key {key} outside 0..{cb.k - 1}")
    addr = locate(cb, x)
    if not addr:
        return Message(int(rng.integers(cb.num_bins)), int(rng.integers(cb.k)))
    return Message(addr.J, offset_cipher(addr.L, key, cb.k, pad))


def decode(cb: Codebook, m: Message, key: int, pad: bool = True) -> np.ndarray:
    """Total decoder: an offset past a short bin's end wraps around inside the bin."""
    seqs = bin_contents(cb, m.J)
    L = (m.C - key) % cb.k if pad else m.C % cb.k
    return seqs[L % seqs.shape[0]]


def encode_batch(cb: Codebook, xs, keys, rng: np.random.Generator, pad: bool = True):
    """Vectorized :func:`encode` over rows of ``xs``; returns ``(J, C, encodable)`` arrays."""
    xs = np.asarray(xs, dtype=np.int64)
    keys = np.asarray(keys, dtype=np.int64)
    trials = xs.shape[0]
    rand_J = rng.integers(cb.num_bins, size=trials)
    rand_C = rng.integers(cb.k, size=trials)
    try:
        pos = address_table(cb)[sequence_codes(xs, cb.alphabet_size)]
    except CapExceeded:
        pos = np.full(trials, -1, dtype=np.int64)
        for t, x in enumerate(xs):
            addr = locate(cb, x)
            if addr:
                pos[t] = addr.J * cb.k + addr.L
    ok = pos >= 0
    L = pos % cb.k
    C = (L + keys) % cb.k if pad else L
    return np.where(ok, pos // cb.k, rand_J), np.where(ok, C, rand_C), ok


def decode_batch(cb: Codebook, J, C, keys, pad: bool = True) -> np.ndarray:
    J = np.asarray(J, dtype=np.int64)
    L = (np.asarray(C) - np.asarray(keys)) % cb.k if pad else np.asarray(C) % cb.k
    L = L % cb.bin_sizes()[J]
    return cb.all_sequences()[cb.bin_starts()[J] + L]


def decode_error_probability(
    cb: Codebook,
    P: SourceDistribution,
    mode: str = "exact",
    trials: int = 0,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Probability that Bob's output differs from the source sequence, with its standard error.

    Exact mode returns the probability of an unencodable (atypical) source
    sequence and ignores the rare case where a random message decodes to it;
    that slack is at most ``P[atypical] / message_count``.
    """
    if mode == "exact":
        return max(0.0, 1.0 - covered_mass(cb, P)), 0.0
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")
    xs = sample_source(P, cb.n, rng, size=trials)
    keys = rng.integers(cb.k, size=trials)
    J, C, _ = encode_batch(cb, xs, keys, rng)
    xhat = decode_batch(cb, J, C, keys)
    p = float(np.mean(np.any(xhat != xs, axis=1)))
    return p, float(np.sqrt(p * (1 - p) / trials))


def roundtrip_ok(cb: Codebook, x, key: int) -> bool:
    x = as_sequence(x, cb.alphabet_size)
    rng = np.random.default_rng(0)
    return bool(np.array_equal(decode(cb, encode(cb, x, key, rng), key), x))
