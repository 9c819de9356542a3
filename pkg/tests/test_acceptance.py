"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line (shown in the terminal summary)
and then asserts the criterion at its stated tolerance and time limit.
Running this file as a script prints the same lines.
"""
import itertools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from cipherlab.adversary import (
    brute_force_oracle,
    expected_adversary_distortion,
    exact_distortion,
    optimal_reproduction,
    posterior_given_message,
)
from cipherlab.checks import balanced_bin_codebook, row_type_suite, sampling_suite, type_size_suite
from cipherlab.cipher import Message, decode_batch, decode_error_probability, encode_batch
from cipherlab.codebook import EmptyTypicalSet, build_partition, iter_bins
from cipherlab.core import DistortionMeasure, SourceDistribution, dmax
from cipherlab.typemethod import (
    empirical_type,
    enumerate_types,
    is_epsilon_typical,
    rank_in_type_class,
    type_class_size,
    sampling_tv_check,
    unrank_in_type_class,
)

UNIFORM = SourceDistribution([0.5, 0.5])
BIASED = SourceDistribution([0.75, 0.25])
TERNARY = SourceDistribution([0.5, 0.25, 0.25])
H2 = DistortionMeasure.hamming(2)
H3 = DistortionMeasure.hamming(3)
SEEDS = range(5)

# exact-engine regression values, seed means over seeds 0-4
TREND_PINNED = {4: 0.4375, 8: 0.3916015625000001, 12: 0.3802937825520835, 16: 0.3812622070312504}
PLATEAU_PINNED = {8: 0.41796875, 12: 0.3897786458333334, 16: 0.3812622070312504}


def record(number, title, ok, elapsed, limit, detail=""):
    ok = bool(ok) and elapsed < limit
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title} ({elapsed:.2f}s < {limit:g}s)"
    if detail:
        line += f": {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def seed_mean(n, k, eps=0.2):
    return float(np.mean([exact_distortion(build_partition(UNIFORM, n, eps, k, s), UNIFORM, H2) for s in SEEDS]))


def test_01_figure2_reproduction():
    t0 = time.perf_counter()
    cb = balanced_bin_codebook()
    zs = {tuple(optimal_reproduction(posterior_given_message(cb, TERNARY, Message(0, C)), H3).tolist())
          for C in range(cb.k)}
    dist = exact_distortion(cb, TERNARY, H3)
    _, dm = dmax(TERNARY, H3)
    ok = zs == {(0, 0, 0, 0)} and abs(dist - 0.5) <= 1e-12 and abs(dm - 0.5) <= 1e-12
    assert record(1, "balanced bin forces D_max", ok, time.perf_counter() - t0, 1,
                  f"outputs={sorted(zs)}, distortion={dist!r}")


def test_02_pad_independence():
    t0 = time.perf_counter()
    worst, cells, control_hits = 0.0, 0, 0
    for P in (BIASED, TERNARY):
        d = DistortionMeasure.hamming(P.size)
        for n, k, seed in itertools.product((4, 6, 8), (2, 4, 8), range(3)):
            cb = build_partition(P, n, 0.3, k, seed)
            full = exact_distortion(cb, P, d, "full_message")
            worst = max(worst, abs(full - exact_distortion(cb, P, d, "bin_only")))
            nopad = abs(exact_distortion(cb, P, d, "full_message", pad=False)
                        - exact_distortion(cb, P, d, "bin_only", pad=False))
            control_hits += nopad > 1e-9
            cells += 1
    ok = worst <= 1e-12 and control_hits > 0
    assert record(2, "full message and bin index give equal distortion", ok, time.perf_counter() - t0, 60,
                  f"{cells} cells, max |diff|={worst:.1e}, pad-off cells that differ={control_hits}")


def test_03_separability_oracle():
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for P in (UNIFORM, BIASED):
        for n, eps, k, seed in itertools.product(range(1, 5), (0.3, 1.0), (1, 2, 4), (0, 1)):
            try:
                cb = build_partition(P, n, eps, k, seed)
            except EmptyTypicalSet:
                continue
            worst = max(worst, abs(exact_distortion(cb, P, H2) - brute_force_oracle(cb, P, H2).distortion))
            cases += 1
    assert record(3, "brute force equals the per-letter engine", worst <= 1e-12, time.perf_counter() - t0, 60,
                  f"{cases} codebooks, max |diff|={worst:.1e}")


def test_04_growing_key_trend():
    t0 = time.perf_counter()
    means = {n: seed_mean(n, n) for n in (4, 8, 12, 16)}
    vals = [means[n] for n in sorted(means)]
    monotone = all(b >= a - 0.01 for a, b in zip(vals, vals[1:]))
    gap_shrinks = 0.5 - means[16] < 0.5 - means[8]
    detail = ", ".join(f"n={n}: {v:.4f}" for n, v in means.items())
    detail += f"; nondecreasing within 0.01: {monotone}; gap(16) < gap(8): {gap_shrinks}"
    assert record(4, "distortion rises toward D_max with k=n", monotone and gap_shrinks,
                  time.perf_counter() - t0, 300, detail)


def test_04_trend_regression_values():
    for n, v in TREND_PINNED.items():
        assert seed_mean(n, n) == pytest.approx(v, abs=1e-12)


def test_04_typical_conditional_trend_rises():
    """Supporting evidence: conditioned on a typical source the same sweep does rise."""
    means = []
    for n in (4, 8, 12, 16):
        reps = [expected_adversary_distortion(build_partition(UNIFORM, n, 0.2, n, s), UNIFORM, H2, typical_only=True)
                for s in SEEDS]
        means.append(float(np.mean([r.distortion for r in reps])))
    assert all(b > a for a, b in zip(means, means[1:]))
    assert 0.5 - means[-1] < 0.5 - means[1]


def test_05_constant_key_plateau():
    t0 = time.perf_counter()
    means = {n: seed_mean(n, 16) for n in (8, 12, 16)}
    spread = max(means.values()) - min(means.values())
    k4, k64 = seed_mean(12, 4), seed_mean(12, 64)
    flat = spread < 0.03
    detail = ", ".join(f"n={n}: {v:.4f}" for n, v in means.items())
    detail += f"; spread={spread:.4f} (< 0.03: {flat}); n=12 k=4: {k4:.4f}, k=64: {k64:.4f}"
    assert record(5, "constant key count holds distortion flat in n", flat and k64 > k4,
                  time.perf_counter() - t0, 300, detail)


def test_05_plateau_regression_values():
    for n, v in PLATEAU_PINNED.items():
        assert seed_mean(n, 16) == pytest.approx(v, abs=1e-12)
    assert seed_mean(12, 64) > seed_mean(12, 4)


def test_06_sampling_without_replacement():
    t0 = time.perf_counter()
    res = sampling_suite(8, 3)
    tv2, _, _ = sampling_tv_check(["a", "b"], 2)
    ok = res.ok and abs(tv2 - 0.5) <= 1e-12
    assert record(6, "without-replacement draws stay close to iid draws", ok, time.perf_counter() - t0, 60,
                  res.detail)


def test_07_type_class_size_bound():
    t0 = time.perf_counter()
    res = type_size_suite(20, 4)
    assert record(7, "type class size lower bound", res.ok, time.perf_counter() - t0, 60, res.detail)


def test_08_row_types():
    t0 = time.perf_counter()
    res = row_type_suite(8, 3)
    assert record(8, "rows of a type-class matrix share its type", res.ok, time.perf_counter() - t0, 60, res.detail)


def test_09_cipher_roundtrip_and_error():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    failures, checked = 0, 0
    for P in (UNIFORM, TERNARY):
        for n in range(1, 9):
            for k in range(1, 9):
                try:
                    cb = build_partition(P, n, 0.3, k, seed=n * 10 + k)
                except EmptyTypicalSet:
                    continue
                xs = cb.all_sequences()
                reps = np.repeat(xs, k, axis=0)
                keys = np.tile(np.arange(k), xs.shape[0])
                J, C, ok = encode_batch(cb, reps, keys, rng)
                back = decode_batch(cb, J, C, keys)
                failures += int((~ok).sum()) + int(np.any(back != reps, axis=1).sum())
                checked += reps.shape[0]
    cb = build_partition(UNIFORM, 4, 0.3, 4, seed=0)
    p_exact, _ = decode_error_probability(cb, UNIFORM)
    p_mc, se = decode_error_probability(cb, UNIFORM, "monte_carlo", 10**5, np.random.default_rng(1))
    ok = failures == 0 and abs(p_exact - 0.125) <= 1e-12 and abs(p_mc - p_exact) < 3 * se
    assert record(9, "round trip is exact; error matches atypical mass", ok, time.perf_counter() - t0, 60,
                  f"{checked} (x, key) pairs, failures={failures}, exact={p_exact!r}, mc={p_mc:.4f}±{se:.4f}")


def test_10_rank_and_partition():
    t0 = time.perf_counter()
    bad_rank = 0
    for X in (2, 3):
        for n in range(1, 9):
            for t in enumerate_types(n, X):
                seen = set()
                for r in range(type_class_size(t)):
                    x = unrank_in_type_class(t, r)
                    seen.add(tuple(x))
                    bad_rank += rank_in_type_class(x, X) != r or empirical_type(x, X) != t
                bad_rank += len(seen) != type_class_size(t)
    bad_cover, codebooks = 0, 0
    for P, eps in ((UNIFORM, 0.3), (BIASED, 0.2), (TERNARY, 0.3)):
        for n in range(1, 9):
            typical = {x for x in itertools.product(range(P.size), repeat=n)
                       if is_epsilon_typical(empirical_type(x, P.size), P, eps)}
            for k in (1, 3, 8):
                try:
                    cb = build_partition(P, n, eps, k, seed=n)
                except EmptyTypicalSet:
                    bad_cover += bool(typical)
                    continue
                covered = []
                for _, t, seqs in iter_bins(cb):
                    bad_cover += not (1 <= seqs.shape[0] <= k)
                    bad_cover += any(empirical_type(x, P.size) != t for x in seqs)
                    covered.extend(tuple(int(v) for v in x) for x in seqs)
                bad_cover += len(covered) != len(set(covered)) or set(covered) != typical
                codebooks += 1
    ok = bad_rank == 0 and bad_cover == 0
    assert record(10, "rank/unrank bijection and exact typical-set partition", ok, time.perf_counter() - t0, 60,
                  f"rank failures={bad_rank}, partition failures={bad_cover} over {codebooks} codebooks")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
