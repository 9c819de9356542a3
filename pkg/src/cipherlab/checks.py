"""Self-check suites exposed through ``cipherlab check``.

Each suite returns a list of :class:`CheckResult`; a suite passes when all
of its results do.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .adversary import brute_force_oracle, exact_distortion, optimal_reproduction, posterior_given_message
from .cipher import Message
from .codebook import Codebook, build_partition
from .core import DistortionMeasure, SourceDistribution, dmax
from .typemethod import (
    TypeVector,
    check_row_types,
    enumerate_types,
    rows_have_type,
    sampling_tv_check,
    type_class_size,
    type_class_size_bound,
)

# A balanced bin of eight ternary sequences of length 4 (one per column):
# every row has empirical distribution (1/2, 1/4, 1/4).
BALANCED_BIN = np.array([
    [0, 0, 1, 0, 0, 1, 2, 2],
    [0, 2, 0, 1, 1, 2, 0, 0],
    [1, 0, 2, 2, 0, 0, 1, 0],
    [2, 1, 0, 0, 2, 0, 0, 1],
])
BALANCED_SOURCE = (0.5, 0.25, 0.25)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def row_type_suite(max_n: int = 8, max_alphabet: int = 3) -> CheckResult:
    bad = []
    count = 0
    for X in range(2, max_alphabet + 1):
        for n in range(1, max_n + 1):
            for t in enumerate_types(n, X):
                count += 1
                if not check_row_types(t):
                    bad.append(t.counts)
    return CheckResult("row types of every type-class matrix", not bad, f"{count} classes, failures={bad[:5]}")


def urns(max_balls: int = 8, max_symbols: int = 3):
    """Every urn (as a sorted label list) with at most ``max_balls`` balls over ``max_symbols`` labels."""
    for N in range(1, max_balls + 1):
        for counts in itertools.product(range(N + 1), repeat=max_symbols):
            if sum(counts) == N:
                yield [s for s, c in enumerate(counts) for _ in range(c)]


def sampling_suite(max_balls: int = 8, max_symbols: int = 3) -> CheckResult:
    bad = []
    count = 0
    worst = 0.0
    for urn in urns(max_balls, max_symbols):
        for k in range(1, len(urn) + 1):
            tv, bound, ok = sampling_tv_check(urn, k)
            count += 1
            worst = max(worst, tv / bound)
            if not ok:
                bad.append((urn, k, tv, bound))
    tv2, _, _ = sampling_tv_check(["a", "b"], 2)
    ok = not bad and abs(tv2 - 0.5) < 1e-12
    return CheckResult("without- vs with-replacement TV bound", ok,
                       f"{count} (urn, k) cases, max tv/bound={worst:.4f}, two-ball tv={tv2:g}")


def type_size_suite(max_n: int = 20, max_alphabet: int = 4) -> CheckResult:
    bad = []
    count = 0
    for X in range(2, max_alphabet + 1):
        for n in range(1, max_n + 1):
            for t in enumerate_types(n, X):
                count += 1
                if type_class_size(t) < type_class_size_bound(t, 2.0):
                    bad.append(t.counts)
    return CheckResult("type-class size lower bound", not bad, f"{count} types, failures={bad[:5]}")


def lemma_suite() -> list[CheckResult]:
    return [row_type_suite(), sampling_suite(), type_size_suite()]


def oracle_suite(seeds=(0, 1), ks=(1, 2, 4), tol: float = 1e-12) -> list[CheckResult]:
    """Brute-force search over all reproductions against the per-letter engine."""
    results = []
    d = DistortionMeasure.hamming(2)
    sources = [(0.5, 0.5), (0.75, 0.25)]
    for probs in sources:
        P = SourceDistribution(probs)
        worst = 0.0
        cases = 0
        for n in range(1, 5):
            for eps in (0.3, 1.0):
                for k in ks:
                    for seed in seeds:
                        try:
                            cb = build_partition(P, n, eps, k, seed)
                        except ValueError:
                            continue
                        a = exact_distortion(cb, P, d)
                        b = brute_force_oracle(cb, P, d).distortion
                        worst = max(worst, abs(a - b))
                        cases += 1
        results.append(CheckResult(f"separable engine vs brute force, source {probs}", worst <= tol,
                                   f"{cases} codebooks, max |diff|={worst:.2e}"))
    return results


def balanced_bin_codebook() -> Codebook:
    return Codebook.from_bins([BALANCED_BIN.T], k=8, alphabet_size=3)


def figure2_suite(tol: float = 1e-12) -> list[CheckResult]:
    P = SourceDistribution(BALANCED_SOURCE)
    d = DistortionMeasure.hamming(3)
    cb = balanced_bin_codebook()
    _, dm = dmax(P, d)
    rows_ok = rows_have_type(BALANCED_BIN, TypeVector((2, 1, 1)))
    post = posterior_given_message(cb, P, Message(0, 0), enum_cap=3**4)
    z = optimal_reproduction(post, d)
    dist = exact_distortion(cb, P, d)
    return [
        CheckResult("balanced bin rows match the source", rows_ok),
        CheckResult("eavesdropper outputs (0,0,0,0)", z.tolist() == [0, 0, 0, 0], f"z={z.tolist()}"),
        CheckResult("exact distortion equals D_max", abs(dist - 0.5) <= tol and abs(dm - 0.5) <= tol,
                    f"distortion={dist!r}, D_max={dm!r}"),
    ]


SUITES = {
    "lemmas": lemma_suite,
    "oracle": oracle_suite,
    "figure2": figure2_suite,
}
