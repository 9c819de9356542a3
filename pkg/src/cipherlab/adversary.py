"""The eavesdropper: exact posteriors, the per-letter optimal estimate and its distortion.

Eve knows the source, the codebook and the encoder's rules, including the
uniform random message sent for sequences the codebook cannot encode. For
a message ``(J, C)`` her joint weight on a source sequence ``x`` is

* ``p(x) * P(C | L)`` if ``x`` sits at offset ``L`` of bin ``J``,
* ``p(x) / message_count`` if ``x`` is not encodable,
* zero otherwise.

Distortion is additive over positions, so the optimal estimate is chosen
one position at a time; the exact engines accumulate per-position symbol
masses per message instead of materializing posteriors.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .cipher import Message, encode, encode_batch, offset_channel
from .codebook import (
    Codebook,
    address_table,
    bin_contents,
    covered_mass,
    locate,
    sequence_codes,
)
from .core import DistortionMeasure, SourceDistribution, dmax, sample_source
from .typemethod import CapExceeded, enumerate_types, type_class_size, type_log_probability

DEFAULT_MESSAGE_CAP = 2**22
DEFAULT_ORACLE_CAP = 2**22
OBSERVE_MODES = ("full_message", "bin_only")

CSV_COLUMNS = (
    "n", "k", "epsilon", "seed", "observe_mode", "engine",
    "distortion", "stderr", "dmax", "gap", "p_err", "rate",
)

# rows of bins processed per vectorized chunk
_CHUNK_ROWS = 2**15


class ZeroProbabilityMessage(ValueError):
    pass


@dataclass(frozen=True)
class PosteriorTable:
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.support.shape[0] != self.weights.size:
            raise ValueError("support and weights differ in length")
        if abs(self.weights.sum() - 1.0) > 1e-10 or np.any(self.weights < 0):
            raise ValueError("posterior weights must be a probability vector")


@dataclass
class DistortionReport:
    n: int
    k: int
    epsilon: float | None
    seed: int | None
    observe_mode: str
    engine: str
    distortion: float
    stderr: float
    dmax: float
    gap: float
    p_err: float
    rate: float
    mass_deficit: float = 0.0

    def csv_row(self) -> dict:
        row = asdict(self)
        return {c: row[c] for c in CSV_COLUMNS}


def _check_dims(cb: Codebook, P: SourceDistribution, d: DistortionMeasure | None = None):
    if P.size != cb.alphabet_size:
        raise ValueError(f"source has {P.size} symbols, codebook alphabet has {cb.alphabet_size}")
    if d is not None and d.source_size != P.size:
        raise ValueError(f"distortion matrix has {d.source_size} rows, source has {P.size} symbols")


def atypical_position_mass(cb: Codebook, P: SourceDistribution) -> np.ndarray:
    """``A[i, a]``: probability that ``x`` is not encodable and ``x_i = a``.

    Each type class contributes ``|T| * T(a) / n`` sequences with symbol ``a``
    at every position (its rows all have type ``T``); covered bins are
    subtracted position by position in exact integer counts.
    """
    n, X = cb.n, cb.alphabet_size
    covered = {}
    for b in cb.blocks:
        cnt = covered.setdefault(b.type.counts, np.zeros((n, X), dtype=np.int64))
        for a in range(X):
            cnt[:, a] += (b.ordered == a).sum(axis=0)
    A = np.zeros((n, X))
    for t in enumerate_types(n, X):
        logp = type_log_probability(t, P)
        if logp == -math.inf:
            continue
        size = type_class_size(t)
        full = np.array([size * c // n for c in t.counts], dtype=object)
        left = np.tile(full, (n, 1))
        if t.counts in covered:
            left = left - covered[t.counts].astype(object)
        A += np.asarray(left, dtype=float) * math.exp(logp)
    return A


def _chunks(cb: Codebook, P: SourceDistribution):
    """Yield ``(first_bin, prob, onehot)`` with onehot of shape ``(bins, k, n, |X|)``; padding rows are zero."""
    k, n, X = cb.k, cb.n, cb.alphabet_size
    eye = np.eye(X)
    per_chunk = max(1, _CHUNK_ROWS // (k * n))
    for b in cb.blocks:
        prob = math.exp(type_log_probability(b.type, P))
        for j0 in range(0, b.num_bins, per_chunk):
            j1 = min(b.num_bins, j0 + per_chunk)
            rows = b.ordered[j0 * k : j1 * k]
            padded = np.zeros(((j1 - j0) * k, n, X))
            padded[: rows.shape[0]] = eye[rows]
            yield b.first_bin + j0, prob, padded.reshape(j1 - j0, k, n, X)


def message_masses(cb: Codebook, P: SourceDistribution, observe: str = "full_message",
                   pad: bool = True, typical_only: bool = False):
    """Yield ``(first_bin, masses)`` over the codebook in bin order.

    ``masses[b, c, i, a]`` is the joint probability of observing bin
    ``first_bin + b`` (and cipher offset ``c`` under full observation) with
    ``x_i = a``. Under ``bin_only`` the ``c`` axis has length one.
    """
    if observe not in OBSERVE_MODES:
        raise ValueError(f"observe must be one of {OBSERVE_MODES}, got {observe!r}")
    _check_dims(cb, P)
    if typical_only:
        A = np.zeros((cb.n, cb.alphabet_size))
    else:
        A = atypical_position_mass(cb, P)
    W = offset_channel(cb.k, pad)
    for first, prob, onehot in _chunks(cb, P):
        if observe == "full_message":
            masses = prob * np.einsum("cl,blia->bcia", W, onehot) + A / cb.message_count
        else:
            masses = prob * onehot.sum(axis=1, keepdims=True) + A / cb.num_bins
        yield first, masses


def _min_cost(masses: np.ndarray, d: DistortionMeasure) -> tuple[np.ndarray, np.ndarray]:
    cost = masses @ d.matrix
    z = np.argmin(cost, axis=-1)
    return z, np.take_along_axis(cost, z[..., None], axis=-1)[..., 0]


def exact_distortion(cb, P, d, observe="full_message", pad=True, typical_only=False,
                     message_cap=DEFAULT_MESSAGE_CAP) -> float:
    """Minimum over Eve's strategies of the expected sequence distortion."""
    _check_dims(cb, P, d)
    if cb.message_count > message_cap:
        raise CapExceeded(f"{cb.message_count} messages exceed cap {message_cap}")
    total = 0.0
    for _, masses in message_masses(cb, P, observe, pad, typical_only):
        total += _min_cost(masses, d)[1].sum()
    total /= cb.n
    if typical_only:
        total /= covered_mass(cb, P)
    return float(total)


def strategy_table(cb, P, d, observe="full_message", pad=True, typical_only=False) -> np.ndarray:
    """Eve's optimal reproduction for every observation: shape ``(num_bins, C, n)``."""
    _check_dims(cb, P, d)
    width = cb.k if observe == "full_message" else 1
    out = np.empty((cb.num_bins, width, cb.n), dtype=np.int64)
    for first, masses in message_masses(cb, P, observe, pad, typical_only):
        out[first : first + masses.shape[0]] = _min_cost(masses, d)[0]
    return out


def posterior_given_message(cb: Codebook, P: SourceDistribution, m: Message, pad: bool = True,
                            enum_cap: int = 2**20) -> PosteriorTable:
    """Posterior over source sequences after observing ``m``, with atypical sequences enumerated."""
    _check_dims(cb, P)
    if not (0 <= m.J < cb.num_bins and 0 <= m.C < cb.k):
        raise ZeroProbabilityMessage(f"{m} is outside the message space")
    if cb.alphabet_size**cb.n > enum_cap:
        raise CapExceeded(f"{cb.alphabet_size}^{cb.n} sequences exceed cap {enum_cap}")
    logp = P.log_probs
    W = offset_channel(cb.k, pad)
    members = bin_contents(cb, m.J)
    support = [members]
    with np.errstate(divide="ignore"):
        logw = [logp[members].sum(axis=1) + np.log(W[m.C, : members.shape[0]])]
    table = address_table(cb, cap=enum_cap)
    allx = np.array(list(itertools.product(range(cb.alphabet_size), repeat=cb.n)), dtype=np.int64)
    atyp = allx[table[sequence_codes(allx, cb.alphabet_size)] < 0]
    if atyp.size:
        support.append(atyp)
        logw.append(logp[atyp].sum(axis=1) - math.log(cb.message_count))
    support = np.vstack(support)
    logw = np.concatenate(logw)
    keep = np.isfinite(logw)
    if not keep.any():
        raise ZeroProbabilityMessage(f"{m} has zero probability")
    support, logw = support[keep], logw[keep]
    w = np.exp(logw - logw.max())
    return PosteriorTable(support, w / w.sum())


def position_masses(post: PosteriorTable, alphabet_size: int) -> np.ndarray:
    n = post.support.shape[1]
    acc = np.zeros((n, alphabet_size))
    for i in range(n):
        acc[i] = np.bincount(post.support[:, i], weights=post.weights, minlength=alphabet_size)
    return acc


def optimal_reproduction(post: PosteriorTable, d: DistortionMeasure) -> np.ndarray:
    """Per-position argmin of posterior-expected letter distortion, ties to the lowest symbol."""
    if post.support.shape[0] == 0:
        raise ValueError("empty posterior support")
    return np.argmin(position_masses(post, d.source_size) @ d.matrix, axis=1)


def conditional_distortion(post: PosteriorTable, d: DistortionMeasure, z) -> float:
    z = np.asarray(z)
    return float((d.matrix[post.support, z[None, :]].mean(axis=1) * post.weights).sum())


def _mc_distortion(cb, P, d, observe, pad, trials, rng):
    strat = strategy_table(cb, P, d, observe, pad)
    xs = sample_source(P, cb.n, rng, size=trials)
    keys = rng.integers(cb.k, size=trials)
    J, C, _ = encode_batch(cb, xs, keys, rng, pad)
    z = strat[J, C if observe == "full_message" else 0]
    per_trial = d.matrix[xs, z].mean(axis=1)
    mean = float(per_trial.mean())
    stderr = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return mean, stderr


def expected_adversary_distortion(
    cb: Codebook,
    P: SourceDistribution,
    d: DistortionMeasure,
    mode: str = "exact",
    observe: str = "full_message",
    trials: int = 0,
    rng: np.random.Generator | None = None,
    pad: bool = True,
    typical_only: bool = False,
    message_cap: int = DEFAULT_MESSAGE_CAP,
) -> DistortionReport:
    """Distortion of the optimal eavesdropper, exactly or by simulation.

    ``typical_only`` drops the random-message branch from Eve's model and
    reports the distortion conditioned on an encodable source; the
    neglected probability is returned as ``mass_deficit``.
    """
    _check_dims(cb, P, d)
    if observe not in OBSERVE_MODES:
        raise ValueError(f"observe must be one of {OBSERVE_MODES}, got {observe!r}")
    if mode == "exact":
        value = exact_distortion(cb, P, d, observe, pad, typical_only, message_cap)
        stderr = 0.0
        engine = "exact"
    elif mode == "monte_carlo":
        if trials < 1:
            raise ValueError("trials must be at least 1")
        if rng is None:
            raise ValueError("monte_carlo mode needs an rng")
        if typical_only:
            raise ValueError("typical_only applies to the exact engine")
        value, stderr = _mc_distortion(cb, P, d, observe, pad, trials, rng)
        engine = "monte_carlo"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    mass = covered_mass(cb, P)
    _, dm = dmax(P, d)
    return DistortionReport(
        n=cb.n,
        k=cb.k,
        epsilon=cb.epsilon,
        seed=cb.seed,
        observe_mode=observe,
        engine=engine,
        distortion=value,
        stderr=stderr,
        dmax=dm,
        gap=dm - value,
        p_err=max(0.0, 1.0 - mass),
        rate=math.log2(cb.message_count) / cb.n,
        mass_deficit=max(0.0, 1.0 - mass) if typical_only else 0.0,
    )


def brute_force_oracle(cb: Codebook, P: SourceDistribution, d: DistortionMeasure, pad: bool = True,
                       cap: int = DEFAULT_ORACLE_CAP) -> DistortionReport:
    """Exhaustive check of the separable engine.

    Builds the full joint table of (message, source sequence) by running the
    encoder under every key, then searches all ``|Z|^n`` reproductions per
    message for the minimizer of the whole-sequence expected distortion.
    """
    _check_dims(cb, P, d)
    n, X, Z = cb.n, cb.alphabet_size, d.reproduction_size
    M = cb.message_count
    if Z**n * M > cap or X**n * Z**n > cap:
        raise CapExceeded(f"oracle needs {Z}^{n} reproductions against {M} messages and {X}^{n} sources")
    xs = list(itertools.product(range(X), repeat=n))
    zs = list(itertools.product(range(Z), repeat=n))
    joint = np.zeros((M, len(xs)))
    rng = np.random.default_rng(0)
    for col, x in enumerate(xs):
        px = math.prod(P.probs[s] for s in x)
        if px == 0:
            continue
        if not locate(cb, x):
            joint[:, col] = px / M
            continue
        for K in range(cb.k):
            msg = encode(cb, x, K, rng, pad=pad)
            joint[msg.J * cb.k + msg.C, col] += px / cb.k
    seqd = np.array([[sum(d.matrix[a, b] for a, b in zip(x, z)) / n for z in zs] for x in xs])
    total = float((joint @ seqd).min(axis=1).sum())
    _, dm = dmax(P, d)
    mass = covered_mass(cb, P)
    return DistortionReport(
        n=n, k=cb.k, epsilon=cb.epsilon, seed=cb.seed, observe_mode="full_message",
        engine="brute_force", distortion=total, stderr=0.0, dmax=dm, gap=dm - total,
        p_err=max(0.0, 1.0 - mass), rate=math.log2(M) / n,
    )


def suffstat_equivalence_check(cb: Codebook, P: SourceDistribution, d: DistortionMeasure,
                               pad: bool = True, tol: float = 1e-12) -> bool:
    """Whether observing the cipher offset helps Eve at all: full vs bin-only exact distortion."""
    full = exact_distortion(cb, P, d, "full_message", pad)
    binonly = exact_distortion(cb, P, d, "bin_only", pad)
    return abs(full - binonly) <= tol


__all__ = [
    "CSV_COLUMNS",
    "DistortionReport",
    "PosteriorTable",
    "ZeroProbabilityMessage",
    "atypical_position_mass",
    "brute_force_oracle",
    "conditional_distortion",
    "exact_distortion",
    "expected_adversary_distortion",
    "optimal_reproduction",
    "posterior_given_message",
    "strategy_table",
    "suffstat_equivalence_check",
]
