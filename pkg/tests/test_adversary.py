import itertools
import math

import numpy as np
import pytest

from cipherlab.adversary import (
    CSV_COLUMNS,
    PosteriorTable,
    ZeroProbabilityMessage,
    atypical_position_mass,
    brute_force_oracle,
    conditional_distortion,
    exact_distortion,
    expected_adversary_distortion,
    optimal_reproduction,
    posterior_given_message,
    strategy_table,
    suffstat_equivalence_check,
)
from cipherlab.checks import balanced_bin_codebook
from cipherlab.cipher import Message, encode
from cipherlab.codebook import Codebook, bin_contents, build_partition, locate
from cipherlab.core import DistortionMeasure, SourceDistribution, dmax, sequence_log_probability
from cipherlab.typemethod import CapExceeded

UNIFORM = SourceDistribution([0.5, 0.5])
BIASED = SourceDistribution([0.75, 0.25])
TERNARY = SourceDistribution([0.5, 0.25, 0.25])
H2 = DistortionMeasure.hamming(2)
H3 = DistortionMeasure.hamming(3)
# asymmetric costs with a zero in every row and a third reproduction letter
SKEW = DistortionMeasure([[0, 2, 0.5], [3, 0, 1], [1, 1, 0]])


def joint_by_enumeration(cb, P, pad=True):
    """Joint law of (message, source) from every (x, key, random message) outcome."""
    xs = list(itertools.product(range(cb.alphabet_size), repeat=cb.n))
    M = cb.message_count
    joint = np.zeros((M, len(xs)))
    rng = np.random.default_rng(0)
    for col, x in enumerate(xs):
        px = math.exp(sequence_log_probability(P, x))
        for K in range(cb.k):
            if locate(cb, x):
                m = encode(cb, x, K, rng, pad=pad)
                joint[m.J * cb.k + m.C, col] += px / cb.k
            else:
                for J in range(cb.num_bins):
                    for C in range(cb.k):
                        joint[J * cb.k + C, col] += px / cb.k / M
    return xs, joint


def test_posterior_without_atypical_mass_is_uniform_bin():
    cb = build_partition(UNIFORM, 6, 1.0, 4, seed=3)
    for J in range(cb.num_bins):
        post = posterior_given_message(cb, UNIFORM, Message(J, 1))
        members = {tuple(x) for x in bin_contents(cb, J)}
        assert {tuple(x) for x in post.support} == members
        assert np.allclose(post.weights, 1 / len(members))


@pytest.mark.parametrize("P, n, eps, k", [(UNIFORM, 4, 0.3, 2), (BIASED, 5, 0.2, 3), (TERNARY, 4, 0.3, 4)])
def test_posterior_matches_joint_enumeration(P, n, eps, k):
    cb = build_partition(P, n, eps, k, seed=1)
    xs, joint = joint_by_enumeration(cb, P)
    for J in range(cb.num_bins):
        for C in range(cb.k):
            row = joint[J * cb.k + C]
            post = posterior_given_message(cb, P, Message(J, C))
            got = dict(zip(map(tuple, post.support), post.weights))
            for x, w in zip(xs, row / row.sum()):
                assert got.get(x, 0.0) == pytest.approx(w, abs=1e-12)


def test_posterior_rejects_bad_messages():
    cb = build_partition(UNIFORM, 4, 1.0, 2, seed=0)
    with pytest.raises(ZeroProbabilityMessage):
        posterior_given_message(cb, UNIFORM, Message(cb.num_bins, 0))
    # no pad, no atypical mass: the unused offset of a short bin is never sent
    short = next(J for J in range(cb.num_bins) if cb.bin_size(J) < 2)
    with pytest.raises(ZeroProbabilityMessage):
        posterior_given_message(cb, UNIFORM, Message(short, 1), pad=False)


def test_posterior_table_validation():
    with pytest.raises(ValueError):
        PosteriorTable(np.zeros((2, 3), dtype=int), np.array([0.5, 0.6]))


def test_optimal_reproduction_examples():
    cb = balanced_bin_codebook()
    post = posterior_given_message(cb, TERNARY, Message(0, 3))
    assert optimal_reproduction(post, H3).tolist() == [0, 0, 0, 0]

    single = PosteriorTable(np.array([[1, 0, 2, 1]]), np.array([1.0]))
    z = optimal_reproduction(single, SKEW)
    assert z.tolist() == [1, 0, 2, 1]
    assert conditional_distortion(single, SKEW, z) == 0.0

    pair = PosteriorTable(np.array([[0, 1], [1, 0]]), np.array([0.5, 0.5]))
    z = optimal_reproduction(pair, H2)
    assert z.tolist() == [0, 0]
    assert conditional_distortion(pair, H2, z) == 0.5


def test_no_single_position_deviation_helps():
    for P, d in [(TERNARY, SKEW), (BIASED, H2)]:
        cb = build_partition(P, 4, 0.3, 3, seed=2)
        for J in range(cb.num_bins):
            for C in range(cb.k):
                post = posterior_given_message(cb, P, Message(J, C))
                z = optimal_reproduction(post, d)
                best = conditional_distortion(post, d, z)
                for i in range(cb.n):
                    for alt in range(d.reproduction_size):
                        zz = z.copy()
                        zz[i] = alt
                        assert conditional_distortion(post, d, zz) >= best - 1e-15


def test_single_key_reveals_everything():
    cb = build_partition(UNIFORM, 8, 1.0, 1, seed=0)
    assert exact_distortion(cb, UNIFORM, H2) == 0.0


def test_whole_class_bin_forces_dmax():
    cb = build_partition(TERNARY, 4, 0.2, 12, seed=0)
    assert cb.num_bins == 1
    rep = expected_adversary_distortion(cb, TERNARY, H3)
    assert rep.distortion == pytest.approx(0.5, abs=1e-12)
    assert rep.gap == pytest.approx(0.0, abs=1e-12)
    post = posterior_given_message(cb, TERNARY, Message(0, 0))
    assert optimal_reproduction(post, H3).tolist() == [0, 0, 0, 0]


@pytest.mark.parametrize("P, d", [(UNIFORM, H2), (BIASED, H2), (TERNARY, H3), (TERNARY, SKEW)])
def test_exact_engine_agrees_with_posterior_path(P, d):
    """Sum of P(m) * E[d | m] over explicit posteriors, against the accumulator engine."""
    for n, eps, k in [(4, 0.3, 2), (5, 0.25, 3), (4, 1.0, 4)]:
        try:
            cb = build_partition(P, n, eps, k, seed=7)
        except ValueError:
            continue
        xs, joint = joint_by_enumeration(cb, P)
        total = 0.0
        for J in range(cb.num_bins):
            for C in range(cb.k):
                pm = joint[J * cb.k + C].sum()
                if pm == 0:
                    continue
                post = posterior_given_message(cb, P, Message(J, C))
                total += pm * conditional_distortion(post, d, optimal_reproduction(post, d))
        assert exact_distortion(cb, P, d) == pytest.approx(total, abs=1e-12)


def test_atypical_position_mass_matches_enumeration():
    for P, n, eps in [(BIASED, 6, 0.2), (TERNARY, 4, 0.3)]:
        cb = build_partition(P, n, eps, 3, seed=0)
        A = np.zeros((n, P.size))
        for x in itertools.product(range(P.size), repeat=n):
            if not locate(cb, x):
                A[np.arange(n), list(x)] += math.exp(sequence_log_probability(P, x))
        assert np.allclose(atypical_position_mass(cb, P), A, atol=1e-15)
    # explicit bins that cover part of a type class
    A = atypical_position_mass(balanced_bin_codebook(), TERNARY)
    assert np.allclose(A.sum(axis=1), 1 - 8 / 64)


@pytest.mark.parametrize("P, d", [(UNIFORM, H2), (BIASED, H2), (TERNARY, SKEW)])
def test_distortion_never_exceeds_dmax(P, d):
    _, dm = dmax(P, d)
    for n in (4, 6, 8):
        for k in (1, 2, 5, 16):
            for eps in (0.15, 0.3, 1.0):
                try:
                    cb = build_partition(P, n, eps, k, seed=n + k)
                except ValueError:
                    continue
                for observe in ("full_message", "bin_only"):
                    assert exact_distortion(cb, P, d, observe) <= dm + 1e-12


def test_full_message_equals_bin_only():
    for P in (UNIFORM, BIASED, TERNARY):
        d = DistortionMeasure.hamming(P.size)
        for n in (4, 6):
            for k in (1, 2, 4):
                cb = build_partition(P, n, 0.3, k, seed=11)
                assert suffstat_equivalence_check(cb, P, d)


def test_disabled_pad_is_detected():
    cb = build_partition(UNIFORM, 6, 0.3, 4, seed=0)
    full = exact_distortion(cb, UNIFORM, H2, "full_message", pad=False)
    binonly = exact_distortion(cb, UNIFORM, H2, "bin_only", pad=False)
    assert full < binonly - 0.05
    assert not suffstat_equivalence_check(cb, UNIFORM, H2, pad=False)
    # with one key there is no offset to hide
    cb1 = build_partition(UNIFORM, 6, 0.3, 1, seed=0)
    assert suffstat_equivalence_check(cb1, UNIFORM, H2, pad=False)


@pytest.mark.parametrize("P, d", [(UNIFORM, H2), (BIASED, H2), (TERNARY, SKEW)])
def test_brute_force_oracle_agrees(P, d):
    for n in range(1, 5):
        for k in (1, 2, 4):
            for seed in (0, 1):
                try:
                    cb = build_partition(P, n, 0.3, k, seed)
                except ValueError:
                    continue
                oracle = brute_force_oracle(cb, P, d)
                assert oracle.distortion == pytest.approx(exact_distortion(cb, P, d), abs=1e-12)
    with pytest.raises(CapExceeded):
        brute_force_oracle(build_partition(UNIFORM, 12, 0.3, 4, 0), UNIFORM, H2)


def test_brute_force_oracle_on_balanced_bin():
    cb = balanced_bin_codebook()
    rep = brute_force_oracle(cb, TERNARY, H3)
    assert rep.distortion == pytest.approx(0.5, abs=1e-12)
    assert brute_force_oracle(build_partition(UNIFORM, 3, 1.0, 1, 0), UNIFORM, H2).distortion == 0.0


def test_brute_force_oracle_sees_broken_pad():
    cb = build_partition(UNIFORM, 4, 0.3, 4, seed=0)
    assert brute_force_oracle(cb, UNIFORM, H2, pad=False).distortion == pytest.approx(
        exact_distortion(cb, UNIFORM, H2, pad=False), abs=1e-12)


@pytest.mark.parametrize("observe", ["full_message", "bin_only"])
def test_monte_carlo_within_three_stderr(observe):
    for P, n, k in [(UNIFORM, 8, 8), (TERNARY, 6, 5)]:
        d = DistortionMeasure.hamming(P.size)
        cb = build_partition(P, n, 0.3, k, seed=4)
        exact = expected_adversary_distortion(cb, P, d, observe=observe)
        mc = expected_adversary_distortion(cb, P, d, "monte_carlo", observe, trials=50000,
                                           rng=np.random.default_rng(n))
        assert abs(mc.distortion - exact.distortion) < 3 * mc.stderr
        assert mc.engine == "monte_carlo" and mc.stderr > 0


def test_monte_carlo_is_seeded():
    cb = build_partition(UNIFORM, 8, 0.3, 4, seed=0)
    a = expected_adversary_distortion(cb, UNIFORM, H2, "monte_carlo", trials=1000, rng=np.random.default_rng(9))
    b = expected_adversary_distortion(cb, UNIFORM, H2, "monte_carlo", trials=1000, rng=np.random.default_rng(9))
    assert a == b
    with pytest.raises(ValueError):
        expected_adversary_distortion(cb, UNIFORM, H2, "monte_carlo", trials=0, rng=np.random.default_rng(9))


def test_strategy_table_matches_posteriors():
    cb = build_partition(TERNARY, 4, 0.3, 3, seed=5)
    table = strategy_table(cb, TERNARY, SKEW)
    for J in range(cb.num_bins):
        for C in range(cb.k):
            post = posterior_given_message(cb, TERNARY, Message(J, C))
            assert table[J, C].tolist() == optimal_reproduction(post, SKEW).tolist()


def test_typical_only_reports_deficit():
    cb = build_partition(UNIFORM, 8, 0.2, 8, seed=0)
    rep = expected_adversary_distortion(cb, UNIFORM, H2, typical_only=True)
    assert rep.mass_deficit == pytest.approx(rep.p_err)
    assert rep.mass_deficit > 0
    full = expected_adversary_distortion(cb, UNIFORM, H2)
    assert full.mass_deficit == 0.0
    assert rep.distortion != full.distortion


def test_report_fields_and_caps():
    cb = build_partition(UNIFORM, 8, 0.3, 4, seed=0)
    rep = expected_adversary_distortion(cb, UNIFORM, H2)
    row = rep.csv_row()
    assert tuple(row) == CSV_COLUMNS
    assert row["dmax"] == 0.5 and row["gap"] == pytest.approx(0.5 - row["distortion"])
    assert row["rate"] == pytest.approx(math.log2(cb.message_count) / 8)
    with pytest.raises(CapExceeded):
        expected_adversary_distortion(cb, UNIFORM, H2, message_cap=4)
    with pytest.raises(ValueError):
        expected_adversary_distortion(cb, UNIFORM, H2, observe="key")
    with pytest.raises(ValueError):
        expected_adversary_distortion(cb, TERNARY, H3)


def test_explicit_codebook_with_short_bin():
    bins = [[[0, 1, 1], [1, 0, 1]], [[1, 1, 0]], [[0, 0, 0]]]
    cb = Codebook.from_bins(bins, k=2, alphabet_size=2)
    assert brute_force_oracle(cb, BIASED, H2).distortion == pytest.approx(exact_distortion(cb, BIASED, H2), abs=1e-12)
