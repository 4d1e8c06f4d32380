import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit, logit

from dpbeta import betamodel
from dpbeta.betamodel import (
    DegenerateDegreeError,
    MLEConvergenceError,
    corrected_degrees,
    draw_theta,
    edge_prob,
    fitted_degrees,
    mle_fit,
    mle_private_fit,
    population_oracle,
    read_theta,
    sample_graph,
    write_theta,
)
from dpbeta.graph import Graph, degrees
from dpbeta.privacy import NoiseSchedule, jitter


def _per_pair(p, rng, cap=0.4):
    a = np.triu(rng.uniform(0, cap, (p, p)), 1)
    b = np.triu(rng.uniform(0, cap, (p, p)), 1)
    return NoiseSchedule.per_pair(a + a.T, b + b.T)


def naive_population_means(theta, schedule):
    """Expected triple products by explicit loops over l and i<j."""
    p = len(theta)
    a, b = schedule.alpha_matrix(p), schedule.beta_matrix(p)
    e1 = lambda i, j: (1 - a[i, j] - b[i, j]) * expit(theta[i] + theta[j])
    e0 = lambda i, j: (1 - a[i, j] - b[i, j]) * (1 - expit(theta[i] + theta[j]))
    h = (p - 1) * (p - 2) / 2
    mu1, mu2 = np.zeros(p), np.zeros(p)
    for l in range(p):
        for i in range(p):
            for j in range(i + 1, p):
                if l in (i, j):
                    continue
                mu1[l] += e1(i, l) * e0(i, j) * e1(l, j)
                mu2[l] += e0(i, l) * e1(i, j) * e0(l, j)
    return mu1 / h, mu2 / h


# ---------------------------------------------------------------- model


def test_edge_prob_examples():
    assert edge_prob(0, 0) == 0.5
    assert edge_prob(0.3, -1.2) == edge_prob(-1.2, 0.3)
    assert edge_prob(1, 1) == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-6)
    assert edge_prob(1, 1) == pytest.approx(0.880797, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_edge_prob_antisymmetry(a, b):
    assert edge_prob(a, b) + edge_prob(-a, -b) == pytest.approx(1.0, abs=1e-12)


def test_sample_graph_degenerate_limits(rng):
    assert expit(-100) < 1e-40
    assert sample_graph(np.full(30, -50.0), rng) == Graph.empty(30)
    assert sample_graph(np.full(30, 50.0), rng) == Graph.complete(30)


def test_sample_graph_edge_count(rng):
    p = 2000
    g = sample_graph(np.zeros(p), rng)
    n = p * (p - 1) // 2
    assert abs(g.n_edges - 0.5 * n) < 4 * math.sqrt(0.25 * n)


def test_sample_graph_is_seeded(rng):
    th = rng.normal(0, 1, 50)
    assert sample_graph(th, np.random.default_rng(4)) == sample_graph(th, np.random.default_rng(4))


def test_draw_theta_scales():
    a = draw_theta(200_000, np.random.default_rng(0))
    b = draw_theta(200_000, np.random.default_rng(0), var=0.2)
    assert np.std(a) == pytest.approx(0.2, rel=0.01)
    assert np.std(b) == pytest.approx(math.sqrt(0.2), rel=0.01)


def test_theta_csv_round_trip(tmp_path, rng):
    th = rng.normal(size=17)
    write_theta(th, tmp_path / "t.csv")
    np.testing.assert_array_equal(read_theta(tmp_path / "t.csv"), th)


# ---------------------------------------------------------------- oracle


def test_oracle_null_parameters():
    o = population_oracle(np.zeros(12), NoiseSchedule.zero())
    np.testing.assert_allclose(o.mu1, 0.125, rtol=1e-14)
    np.testing.assert_allclose(o.mu2, 0.125, rtol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_oracle_ratio_identity(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(3, 21))
    theta = rng.normal(0, 1, p)
    sched = _per_pair(p, rng) if seed % 2 else NoiseSchedule.constant(*rng.uniform(0, 0.45, 2))
    o = population_oracle(theta, sched)
    np.testing.assert_allclose(o.mu1 / o.mu2, np.exp(2 * theta), rtol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_oracle_matches_naive_loops(seed):
    rng = np.random.default_rng(100 + seed)
    p = 9
    theta = rng.normal(0, 1, p)
    sched = _per_pair(p, rng)
    o = population_oracle(theta, sched)
    m1, m2 = naive_population_means(theta, sched)
    np.testing.assert_allclose(o.mu1, m1, rtol=1e-12)
    np.testing.assert_allclose(o.mu2, m2, rtol=1e-12)


def test_oracle_translation(rng):
    theta = rng.normal(0, 0.5, 15)
    sched = NoiseSchedule.constant(0.1, 0.2)
    c = 0.37
    r0 = population_oracle(theta, sched)
    r1 = population_oracle(theta + c, sched)
    np.testing.assert_allclose(
        (r1.mu1 / r1.mu2) / (r0.mu1 / r0.mu2), math.exp(2 * c), rtol=1e-12
    )


def test_oracle_variance_closed_form(rng):
    theta = rng.normal(0, 1, 6)
    sched = _per_pair(6, rng)
    o = population_oracle(theta, sched)
    a, b = sched.alpha_matrix(6), sched.beta_matrix(6)
    for i in range(6):
        for j in range(6):
            if i == j:
                continue
            e = math.exp(theta[i] + theta[j])
            v = (a[i, j] + (1 - b[i, j]) * e) * (1 - a[i, j] + b[i, j] * e) / (1 + e) ** 2
            assert o.varz[i, j] == pytest.approx(v, rel=1e-12)
            # Bernoulli variance of the released pair
            q = a[i, j] + (1 - a[i, j] - b[i, j]) * expit(theta[i] + theta[j])
            assert o.varz[i, j] == pytest.approx(q * (1 - q), rel=1e-12)


def test_oracle_rejects_signal_free_schedule():
    with pytest.raises(ValueError):
        population_oracle(np.zeros(5), NoiseSchedule.constant(0.5, 0.5))


def test_oracle_means_match_monte_carlo():
    """Average of the per-node triple-product means over 10^7 simulated releases."""
    rng = np.random.default_rng(2718)
    p = 6
    theta = rng.normal(0, 0.7, p)
    sched = _per_pair(p, rng)
    o = population_oracle(theta, sched)
    iu = np.triu_indices(p, 1)
    q = expit(theta[iu[0]] + theta[iu[1]])
    a, b = sched.pair_values(p)
    n_total, chunk = 10_000_000, 250_000
    s = np.zeros((2, p))
    ss = np.zeros((2, p))
    h = (p - 1) * (p - 2) / 2
    for _ in range(n_total // chunk):
        x = rng.random((chunk, q.size)) < q
        u = rng.random((chunk, q.size))
        z = (u < a) | ((u >= a + b) & x)
        phi1 = np.zeros((chunk, p, p))
        phi0 = np.zeros((chunk, p, p))
        phi1[:, iu[0], iu[1]] = z - a
        phi0[:, iu[0], iu[1]] = 1 - b - z
        phi1 += phi1.transpose(0, 2, 1)
        phi0 += phi0.transpose(0, 2, 1)
        g = phi0 @ phi1
        m1 = 0.5 * np.einsum("nil,nil->nl", phi1, g) / h
        m2 = 0.5 * np.einsum("nli,nli->nl", phi0, g) / h
        for k, m in enumerate((m1, m2)):
            s[k] += m.sum(axis=0)
            ss[k] += (m * m).sum(axis=0)
    mean = s / n_total
    se = np.sqrt((ss / n_total - mean**2) / n_total)
    assert np.all(np.abs(mean[0] - o.mu1) < 3 * se[0])
    assert np.all(np.abs(mean[1] - o.mu2) < 3 * se[1])


# ---------------------------------------------------------------- MLE


@pytest.mark.parametrize("p,d", [(4, 2), (10, 3), (50, 40), (200, 1)])
def test_mle_regular_closed_form(p, d):
    th = mle_fit(np.full(p, float(d)))
    np.testing.assert_allclose(th, 0.5 * logit(d / (p - 1)), atol=1e-6)


def test_mle_small_regular_example():
    np.testing.assert_allclose(mle_fit([2, 2, 2, 2]), 0.34657, atol=1e-5)


def test_mle_reproduces_degrees_on_random_instances():
    rng = np.random.default_rng(11)
    done = 0
    while done < 100:
        p = int(rng.integers(5, 201))
        theta = rng.normal(0, 0.5, p)
        u = fitted_degrees(theta)  # solvable by construction
        fit = mle_fit(u)
        assert np.max(np.abs(fitted_degrees(fit) - u)) <= 1e-8
        done += 1


def test_mle_refit_is_fixed_point(rng):
    g = sample_graph(rng.normal(0, 0.3, 80), rng)
    fit = mle_fit(degrees(g))
    refit = mle_fit(fitted_degrees(fit))
    np.testing.assert_allclose(refit, fit, atol=1e-6)


def test_mle_degenerate_degrees():
    with pytest.raises(DegenerateDegreeError) as exc:
        mle_fit([0, 1, 1])
    assert exc.value.nodes.tolist() == [0]
    with pytest.raises(DegenerateDegreeError):
        mle_fit([2, 2, 2])


def test_mle_reports_non_convergence(rng):
    u = fitted_degrees(rng.normal(0, 1.5, 40))
    with pytest.raises(MLEConvergenceError) as exc:
        mle_fit(u, max_sweeps=2)
    assert exc.value.sweeps == 2 and exc.value.residual > 1e-8


def test_private_fit_without_noise_is_plain_fit(rng):
    g = sample_graph(rng.normal(0, 0.2, 60), rng)
    np.testing.assert_array_equal(mle_private_fit(g, NoiseSchedule.zero()), mle_fit(degrees(g)))


def test_corrected_degrees_clamped():
    p, alpha = 20, 0.2
    # every node's released degree equals (p - 1) * alpha: targets collapse to the clamp
    z = Graph.empty(p)
    u = corrected_degrees(z, alpha, 0.1)
    assert np.all(u == betamodel.DEGREE_CLAMP)
    u = corrected_degrees(Graph.complete(p), 0.0, 0.0)
    assert np.all(u == p - 1 - betamodel.DEGREE_CLAMP)


def test_corrected_degrees_unbiased(rng):
    p = 400
    theta = rng.normal(0, 0.2, p)
    x = sample_graph(theta, rng)
    s = NoiseSchedule.constant(0.1, 0.2)
    us = np.mean([corrected_degrees(jitter(x, s, rng), 0.1, 0.2) for _ in range(50)], axis=0)
    d = degrees(x).astype(float)
    # mean over 50 releases; per-node sd of U_Z is below sqrt(p)/2 / gamma
    assert np.max(np.abs(us - d)) < 4 * math.sqrt(p) / 2 / 0.7 / math.sqrt(50)


def test_private_fit_rejects_per_pair(rng):
    with pytest.raises(ValueError):
        mle_private_fit(Graph.empty(5), _per_pair(5, rng))
