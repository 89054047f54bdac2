import math

import numpy as np
import pytest

from qlab import (HannanDivergesError, InnovationDistribution, LinearModel,
                  PastFixture, ProjectionSeries, approximation_gap,
                  derive_stream, evaluate_martingale, hannan_sum,
                  martingale_increment, mc_projection_norm_sq, mw_criterion,
                  projection_norms, sample_quenched_paths, sigma_squared)


# --- closed-form projection norms -------------------------------------------

def test_norms_single_coefficient(identity_model):
    series = projection_norms(identity_model, 3)
    assert np.array_equal(series.norms, [1.0, 0.0, 0.0, 0.0])
    assert np.all(series.bias == 0.0)


def test_norms_geometric(rho_model):
    series = projection_norms(rho_model, 40)
    assert np.allclose(series.norms, 0.5 ** np.arange(41), atol=0, rtol=1e-14)


def test_norms_chain_eigen_oracle(two_state_chain):
    # eigenfunction identity: Pg = 0.4 g gives norms 0.4^k sqrt(0.84); the
    # implementation evaluates the pair double sum, an independent route
    series = projection_norms(two_state_chain, 12)
    oracle = np.sqrt(0.84) * 0.4 ** np.arange(13)
    assert np.allclose(series.norms, oracle, atol=1e-13)


def test_norms_bias_marks_truncation(rho_model):
    series = projection_norms(rho_model, 50)
    assert np.all(series.bias[:41] == 0.0)
    assert np.all(series.bias[41:] == rho_model.tail_bound)
    assert np.all(series.norms[41:] == 0.0)


# --- summability verdicts -----------------------------------------------------

def test_hannan_geometric_series():
    series = ProjectionSeries(norms=0.5 ** np.arange(61),
                              bias=np.zeros(61), K=60)
    rep = hannan_sum(series)
    assert rep.partial_sums[-1] == pytest.approx(2.0, abs=1e-12)
    assert rep.verdict == "summable"


def test_hannan_geometric_fit_on_live_tail():
    # all entries above the rounding floor, so the verdict comes from the
    # geometric extrapolation itself
    series = ProjectionSeries(norms=0.5 ** np.arange(21),
                              bias=np.full(21, 1e-9), K=20)
    rep = hannan_sum(series)
    assert rep.tail_fit == "geometric"
    assert rep.verdict == "summable"
    assert rep.fitted_tail == pytest.approx(0.5**20, rel=0.05)


def test_hannan_harmonic_series():
    norms = 1.0 / (np.arange(201) + 1.0)
    rep = hannan_sum(ProjectionSeries(norms=norms, bias=np.full(201, 1e-9), K=200))
    # oracle: the harmonic partial sum, about ln(201) + gamma = 5.88
    oracle = float(np.sum(norms))
    assert rep.partial_sums[-1] == pytest.approx(oracle)
    assert oracle > 5
    assert rep.verdict == "diverging"
    assert rep.tail_fit == "polynomial"


def test_hannan_finite_support():
    series = ProjectionSeries(norms=np.array([2.5, 0, 0, 0, 0]),
                              bias=np.zeros(5), K=4)
    rep = hannan_sum(series)
    assert rep.partial_sums[-1] == 2.5
    assert rep.verdict == "summable"
    assert rep.tail_fit == "none"


def test_hannan_all_zero_is_summable():
    rep = hannan_sum(ProjectionSeries(norms=np.zeros(8), bias=np.zeros(8), K=7))
    assert rep.verdict == "summable"


def test_hannan_constant_norms_diverge():
    rep = hannan_sum(ProjectionSeries(norms=np.ones(64),
                                      bias=np.full(64, 1e-9), K=63))
    assert rep.verdict == "diverging"


# --- Maxwell-Woodroofe criterion ---------------------------------------------

def test_mw_identity_model(identity_model):
    rep = mw_criterion(identity_model, 50)
    assert np.all(rep.terms == 0.0)
    assert rep.partial_sums[-1] == 0.0
    assert rep.verdict == "summable"


def test_mw_geometric(rho_model):
    rep = mw_criterion(rho_model, 200)
    # oracle: direct numeric series, term(n) = 0.5^n / sqrt(0.75 n)
    ns = np.arange(1, 41)
    oracle_terms = 0.5**ns / np.sqrt(0.75) / np.sqrt(ns)
    # truncated suffix sums deviate from the infinite form only near n = 40
    assert np.allclose(rep.terms[:20], oracle_terms[:20], rtol=1e-10)
    assert rep.partial_sums[-1] < 1.34
    assert rep.verdict == "summable"


def test_mw_chain_eigen_decay(two_state_chain):
    rep = mw_criterion(two_state_chain, 60)
    ns = np.arange(1, 61)
    assert np.allclose(rep.terms, 0.4**ns / np.sqrt(ns), atol=1e-14)
    assert rep.verdict == "summable"


# --- martingale increment ------------------------------------------------------

def test_increment_identity(identity_model):
    approx = martingale_increment(identity_model)
    assert approx.c == 1.0


def test_increment_geometric_sum(rho_model):
    approx = martingale_increment(rho_model)
    assert approx.c == pytest.approx(2.0, abs=2 * 0.5**40)


def test_increment_chain_poisson(two_state_chain):
    approx = martingale_increment(two_state_chain)
    # oracle: direct solve of the augmented linear system
    P, g = two_state_chain.transition, two_state_chain.observable
    A = np.vstack([np.eye(2) - P, two_state_chain.stationary[None, :]])
    oracle, *_ = np.linalg.lstsq(A, np.concatenate([g, [0.0]]), rcond=None)
    assert np.allclose(approx.g_hat, oracle, atol=1e-12)
    assert np.allclose(approx.g_hat, g / 0.6, atol=1e-12)


def test_increment_finite_orders(two_state_chain):
    r2 = martingale_increment(two_state_chain, 2)
    oracle = two_state_chain.observable * (1 + 0.4 + 0.16)
    assert np.allclose(r2.g_hat, oracle, atol=1e-14)


def test_increment_refuses_divergent_norms():
    slow = LinearModel(1.0 / (np.arange(301) + 1.0),
                       InnovationDistribution("gaussian", 1.0),
                       tail_bound=0.1)
    with pytest.raises(HannanDivergesError) as err:
        martingale_increment(slow, math.inf)
    assert err.value.verdict in ("diverging", "inconclusive")
    # finite orders stay available
    assert martingale_increment(slow, 1).c == pytest.approx(1.5)


def test_martingale_conditional_increment_mean_is_zero(two_state_chain):
    # algebraic identity: sum_b P(a, b) m(a, b) = 0 for every previous state
    approx = martingale_increment(two_state_chain)
    P = two_state_chain.transition
    for a in range(2):
        total = sum(P[a, b] * (approx.g_hat[b] - approx.p_g_hat[a])
                    for b in range(2))
        assert abs(total) < 1e-12


def test_evaluate_martingale_identity_model(identity_model):
    fx = PastFixture(innovations=np.array([0.3]))
    real = sample_quenched_paths(identity_model, fx, derive_stream(21, [0]), 30, 5)
    approx = martingale_increment(identity_model)
    mart = evaluate_martingale(identity_model, approx, fx, real, 30)
    sums = np.cumsum(real.values, axis=1)
    assert np.array_equal(mart, sums)


def test_evaluate_martingale_contracts(two_state_chain):
    fx = PastFixture(state=0)
    real = sample_quenched_paths(two_state_chain, fx, derive_stream(21, [1]), 10, 3)
    approx = martingale_increment(two_state_chain)
    assert evaluate_martingale(two_state_chain, approx, fx, real, 0).shape == (3, 0)
    with pytest.raises(ValueError):
        evaluate_martingale(two_state_chain, approx, fx, real, 11)


# --- long-run variance ----------------------------------------------------------

def test_sigma_squared_identity(identity_model):
    assert sigma_squared(identity_model) == 1.0


def test_sigma_squared_geometric(rho_model):
    assert sigma_squared(rho_model) == pytest.approx(4.0, abs=1e-11)


def test_sigma_squared_chain_autocovariance_oracle(two_state_chain):
    # oracle: 1 + 2 sum_k lambda^k of the autocovariances, lambda = 0.4
    oracle = 1.0 + 2.0 * sum(0.4**k for k in range(1, 200))
    assert sigma_squared(two_state_chain) == pytest.approx(oracle, abs=1e-12)
    assert sigma_squared(two_state_chain) == pytest.approx(7.0 / 3.0, abs=1e-12)


def test_sigma_squared_refusal():
    slow = LinearModel(1.0 / (np.arange(301) + 1.0),
                       InnovationDistribution("gaussian", 1.0),
                       tail_bound=0.1)
    with pytest.raises(HannanDivergesError):
        sigma_squared(slow)


# --- approximation gap ------------------------------------------------------------

def test_gap_decreases_and_is_tail_bounded(rho_model, two_state_chain):
    for model in (rho_model, two_state_chain):
        series = projection_norms(model, 64)
        gaps = [approximation_gap(model, r) for r in (0, 2, 8, 16)]
        assert all(b <= a + 1e-14 for a, b in zip(gaps, gaps[1:]))
        for r, gap in zip((0, 2, 8, 16), gaps):
            tail = series.norms[r + 1 :].sum()
            assert gap <= tail + 1e-12


# --- Monte Carlo agreement ----------------------------------------------------------

def test_martingale_property_under_conditional_law(rho_model, two_state_chain):
    # empirical conditional means of the increments given the past stay
    # within four standard errors of zero
    m = 20_000
    fx = PastFixture(state=0)
    real = sample_quenched_paths(two_state_chain, fx, derive_stream(22, [0]), 6, m)
    approx = martingale_increment(two_state_chain)
    mart = evaluate_martingale(two_state_chain, approx, fx, real, 6)
    increments = np.diff(np.concatenate([np.zeros((m, 1)), mart], axis=1), axis=1)
    for l in range(1, 6):
        for prev in range(2):
            group = increments[real.states[:, l - 1] == prev, l - 1]
            if group.size < 2:      # at l = 1 only the frozen state occurs
                continue
            se = group.std(ddof=1) / np.sqrt(group.size)
            assert abs(group.mean()) < 4 * se
    fx_lin = PastFixture(innovations=derive_stream(22, [1]).normal(41))
    real = sample_quenched_paths(rho_model, fx_lin, derive_stream(22, [2]), 4, m)
    approx = martingale_increment(rho_model)
    mart = evaluate_martingale(rho_model, approx, fx_lin, real, 4)
    increments = np.diff(np.concatenate([np.zeros((m, 1)), mart], axis=1), axis=1)
    se = increments.std(ddof=1) / np.sqrt(increments.size)
    assert abs(increments.mean()) < 4 * se


@pytest.mark.parametrize("which", ["linear", "markov"])
def test_mc_projection_norm_matches_closed_form(which, rho_model, two_state_chain):
    model = rho_model if which == "linear" else two_state_chain
    series = projection_norms(model, 5)
    base = derive_stream(23, [0 if which == "linear" else 1])
    for k in range(6):
        est, se = mc_projection_norm_sq(model, k, 20_000, base.child(k))
        assert abs(est - series.norms[k] ** 2) < 4 * se
