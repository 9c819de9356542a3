"""Alphabets, source distributions and per-letter distortion measures."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SourceDistribution:
    """Probability vector over the source alphabet ``{0, ..., size-1}``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("source alphabet must have at least two symbols")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def entropy(self, base: float = 2.0) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(p)).sum() / math.log(base))

    def __repr__(self):
        return f"SourceDistribution({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Nonnegative ``|X| x |Z|`` per-letter distortion matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        d = _frozen(self.matrix)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("distortion matrix must be two-dimensional")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("distortion entries must be finite and nonnegative")
        if not np.all((d == 0).any(axis=1)):
            raise ValueError("every source symbol needs a zero-distortion reproduction")
        object.__setattr__(self, "matrix", d)

    @classmethod
    def hamming(cls, size: int) -> "DistortionMeasure":
        return cls(1.0 - np.eye(size))

    @property
    def source_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def reproduction_size(self) -> int:
        return self.matrix.shape[1]

    def __repr__(self):
        return f"DistortionMeasure({self.matrix.tolist()})"


def as_sequence(x, alphabet_size: int | None = None) -> np.ndarray:
    """Validate and return a symbol sequence as a 1-d integer array."""
    a = np.asarray(x, dtype=np.int64)
    if a.ndim != 1:
        raise ValueError("a symbol sequence must be one-dimensional")
    if a.size and a.min() < 0:
        raise ValueError("symbol indices must be nonnegative")
    if alphabet_size is not None and a.size and a.max() >= alphabet_size:
        raise ValueError(f"symbol index {int(a.max())} outside alphabet of size {alphabet_size}")
    return a


def expected_letter_distortion(P: SourceDistribution, d: DistortionMeasure) -> np.ndarray:
    """``sum_x P(x) d(x, z)`` for every reproduction symbol ``z``."""
    if P.size != d.source_size:
        raise DimensionError(f"source has {P.size} symbols, distortion matrix has {d.source_size} rows")
    return P.probs @ d.matrix


def dmax(P: SourceDistribution, d: DistortionMeasure) -> tuple[int, float]:
    """Best constant reproduction symbol and its expected distortion.

    This is the distortion of an eavesdropper who knows only the source
    distribution. Ties go to the lowest symbol index.
    """
    costs = expected_letter_distortion(P, d)
    z = int(np.argmin(costs))
    return z, float(costs[z])


def sequence_distortion(x, z, d: DistortionMeasure) -> float:
    x = as_sequence(x, d.source_size)
    z = as_sequence(z, d.reproduction_size)
    if x.size != z.size:
        raise DimensionError(f"length mismatch: {x.size} != {z.size}")
    if x.size == 0:
        raise ValueError("sequences must be nonempty")
    return float(d.matrix[x, z].mean())


def sequence_log_probability(P: SourceDistribution, x) -> float:
    """Natural log of the i.i.d. probability of ``x``; ``-inf`` on a zero-probability symbol."""
    x = as_sequence(x, P.size)
    return float(P.log_probs[x].sum())


def sample_source(P: SourceDistribution, n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw i.i.d. sequences of length ``n``; shape ``(n,)`` or ``(size, n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    shape = (n,) if size is None else (size, n)
    # inverse-CDF on uniforms keeps zero-probability symbols unreachable
    cdf = np.cumsum(P.probs)
    cdf[-1] = 1.0
    u = rng.random(shape)
    out = np.searchsorted(cdf, u, side="right")
    return np.minimum(out, P.size - 1).astype(np.int64)
