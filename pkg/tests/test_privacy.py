import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbeta.graph import Graph
from dpbeta.privacy import (
    NoiseSchedule,
    _flip_pairs,
    alpha_for_pi,
    jitter,
    load_schedule,
    privacy_level,
    regime_diagnostic,
    save_schedule,
)

from conftest import random_graph


def _random_per_pair(p, rng, cap=0.45):
    a = np.triu(rng.uniform(0, cap, (p, p)), 1)
    b = np.triu(rng.uniform(0, cap, (p, p)), 1)
    return NoiseSchedule.per_pair(a + a.T, b + b.T)


def brute_pi(a, b):
    # direct evaluation of the four likelihood ratios for a single pair
    vals = []
    for num, den in ((a, 1 - b), (b, 1 - a), (1 - a, b), (1 - b, a)):
        vals.append(math.inf if den == 0 else num / den)
    return math.log(max(vals))


# ---------------------------------------------------------------- schedules


def test_schedule_validation():
    with pytest.raises(ValueError):
        NoiseSchedule.constant(-0.1, 0.1)
    with pytest.raises(ValueError):
        NoiseSchedule.constant(0.6, 0.5)
    with pytest.raises(ValueError):
        NoiseSchedule.per_pair(np.array([[0, 0.1], [0.2, 0]]), np.zeros((2, 2)))
    NoiseSchedule.constant(0.5, 0.5)


def test_schedule_size_check():
    s = _random_per_pair(5, np.random.default_rng(0))
    s.check_size(5)
    with pytest.raises(ValueError):
        s.check_size(6)


def test_schedule_file_round_trip(tmp_path, rng):
    s = _random_per_pair(6, rng)
    path = tmp_path / "s.csv"
    save_schedule(s, path)
    t = load_schedule(path, 6)
    np.testing.assert_array_equal(t.alpha_matrix(6), s.alpha_matrix(6))
    np.testing.assert_array_equal(t.beta_matrix(6), s.beta_matrix(6))

    save_schedule(NoiseSchedule.constant(0.1, 0.2), path)
    c = load_schedule(path)
    assert c.is_constant and (c.alpha, c.beta) == (0.1, 0.2)


def test_schedule_file_header_and_gaps(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("# comment\nalpha,beta\n0.1,0.3\n")
    assert load_schedule(path).beta == 0.3
    path.write_text("i,j,alpha,beta\n0,1,0.1,0.1\n0,2,0.1,0.1\n")
    with pytest.raises(ValueError, match="every pair"):
        load_schedule(path, 3)


def test_bootstrap_schedule_composes_flip_rates():
    s = NoiseSchedule.constant(0.1, 0.2).bootstrap(0.05)
    assert s.alpha == pytest.approx(0.05 + 0.1 * 0.9)
    assert s.beta == pytest.approx(0.05 + 0.2 * 0.9)
    # gamma shrinks by 1 - 2 delta
    assert 1 - s.alpha - s.beta == pytest.approx(0.7 * 0.9)


# ---------------------------------------------------------------- jitter


def test_zero_schedule_is_identity(rng):
    x = random_graph(40, rng)
    assert jitter(x, NoiseSchedule.zero(), rng) == x
    # composing two identity releases is still the identity
    assert jitter(jitter(x, NoiseSchedule.zero(), rng), NoiseSchedule.zero(), rng) == x


def test_flip_branches_are_exact():
    u = np.array([0.05, 0.15, 0.25, 0.95, 0.05, 0.15, 0.95])
    x = np.array([0, 0, 0, 0, 1, 1, 1], dtype=bool)
    # alpha=0.1: u<0.1 -> on; 0.1<=u<0.3 -> off; else keep
    out = _flip_pairs(x, 0.1, 0.2, u)
    assert out.tolist() == [True, False, False, False, True, False, True]


def test_max_privacy_never_reads_input():
    u = np.linspace(0, 1, 1001, endpoint=False)
    on_empty = _flip_pairs(np.zeros_like(u, dtype=bool), 0.5, 0.5, u)
    on_full = _flip_pairs(np.ones_like(u, dtype=bool), 0.5, 0.5, u)
    np.testing.assert_array_equal(on_empty, on_full)


def test_max_privacy_edge_frequency(rng):
    x = random_graph(200, rng, density=0.9)
    z = jitter(x, NoiseSchedule.constant(0.5, 0.5), rng)
    n = 200 * 199 // 2
    assert abs(z.n_edges / n - 0.5) < 4 * math.sqrt(0.25 / n)


def test_expected_edge_count_on_empty_graph():
    # 1e5 draws on the empty 4-node graph: count ~ Binomial(6, 0.3)
    rng = np.random.default_rng(7)
    u = rng.random((100_000, 6))
    counts = (u < 0.3).sum(axis=1)
    z = jitter(Graph.empty(4), NoiseSchedule.constant(0.3, 0.2), np.random.default_rng(7))
    assert z.n_edges == int(counts[0])
    se = math.sqrt(6 * 0.3 * 0.7 / 100_000)
    assert abs(counts.mean() - 1.8) < 4 * se


def test_empirical_flip_rates(rng):
    p = 600
    x = random_graph(p, rng)
    z = jitter(x, NoiseSchedule.constant(0.15, 0.25), rng)
    xu, zu = x.upper(), z.upper()
    n0, n1 = (~xu).sum(), xu.sum()
    r01 = (zu & ~xu).sum() / n0
    r10 = (~zu & xu).sum() / n1
    assert abs(r01 - 0.15) < 4 * math.sqrt(0.15 * 0.85 / n0)
    assert abs(r10 - 0.25) < 4 * math.sqrt(0.25 * 0.75 / n1)


def test_jitter_consumes_one_uniform_per_pair_in_order(rng):
    x = random_graph(30, rng)
    s = NoiseSchedule.constant(0.2, 0.1)
    z = jitter(x, s, np.random.default_rng(5))
    u = np.random.default_rng(5).random(30 * 29 // 2)
    np.testing.assert_array_equal(z.upper(), _flip_pairs(x.upper(), 0.2, 0.1, u))


def test_per_pair_schedule_matches_constant_when_flat(rng):
    x = random_graph(25, rng)
    flat = NoiseSchedule.per_pair(np.full((25, 25), 0.1), np.full((25, 25), 0.2))
    assert jitter(x, flat, np.random.default_rng(1)) == jitter(
        x, NoiseSchedule.constant(0.1, 0.2), np.random.default_rng(1)
    )


# ---------------------------------------------------------------- privacy level


def test_privacy_level_examples():
    assert privacy_level(NoiseSchedule.constant(0.5, 0.5)).pi == 0.0
    assert privacy_level(NoiseSchedule.constant(0.1, 0.1)).pi == pytest.approx(math.log(9), abs=1e-12)
    assert privacy_level(NoiseSchedule.zero()).pi == math.inf
    lvl = privacy_level(NoiseSchedule.constant(0.1, 0.2))
    assert lvl.gamma_min == lvl.gamma_max == pytest.approx(0.7)


def test_privacy_level_per_pair_is_worst_pair(rng):
    s = _random_per_pair(8, rng)
    a, b = s.pair_values(8)
    expected = max(brute_pi(x, y) for x, y in zip(a, b))
    assert privacy_level(s).pi == pytest.approx(expected, rel=1e-12)


def test_privacy_level_permutation_invariant(rng):
    s = _random_per_pair(9, rng)
    perm = rng.permutation(9)
    assert privacy_level(s.permute(perm)).pi == privacy_level(s).pi


def test_privacy_monotone_toward_max_privacy():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        a, b = rng.uniform(0, 0.5, 2)
        t1, t2 = np.sort(rng.uniform(0, 1, 2))
        pis = []
        for t in (0.0, t1, t2, 1.0):
            s = NoiseSchedule.constant(a + t * (0.5 - a), b + t * (0.5 - b))
            pis.append(privacy_level(s).pi)
        assert all(pis[k + 1] <= pis[k] + 1e-12 for k in range(3))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_privacy_level_matches_brute_force(a, b):
    assert privacy_level(NoiseSchedule.constant(a, b)).pi == pytest.approx(
        max(brute_pi(a, b), 0.0), rel=1e-12, abs=1e-15
    )


def test_alpha_for_pi_inverts():
    for pi in (0.0, 0.5, math.log(9), 5.0):
        a = alpha_for_pi(pi)
        assert privacy_level(NoiseSchedule.constant(a, a)).pi == pytest.approx(pi, abs=1e-12)


# ---------------------------------------------------------------- regime


def test_regime_examples():
    assert regime_diagnostic(10**6, 0.5).label == "phase-a"
    assert regime_diagnostic(10**6, 0.001).label == "consistency-risk"
    assert regime_diagnostic(10**6, 0.0316).label == "phase-b/boundary"
    assert regime_diagnostic(10**6, 0.012).label == "phase-c"


def test_regime_labels_ordered_in_gamma():
    order = ["consistency-risk", "phase-c", "phase-b/boundary", "phase-a"]
    ranks = [order.index(regime_diagnostic(10**5, g).label) for g in np.geomspace(1e-4, 1, 200)]
    assert ranks == sorted(ranks)
