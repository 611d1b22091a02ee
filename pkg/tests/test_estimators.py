"""Tests for the speed-accuracy, logistic, boundary, LNR and halfspace estimators"""

import math

import numpy as np
import pytest

from rtpref.exceptions import (
    BracketError,
    DivergenceError,
    InconsistentEstimateError,
    SeparationError,
    ValidationError,
)
from rtpref.models import DdmParams, HalfspaceConfig, LnrParams, SgdConfig, build_dataset, empirical_sigma
from rtpref.services import ddm_math, estimators, simulators


def _ddm_data(w, b, n, d, seed):
    rng = np.random.default_rng(seed)
    X, Y = simulators.uniform_pairs(n, d, rng)
    return simulators.simulate_ddm_dataset(X, Y, DdmParams(w=list(w), b=b), rng)


def test_general_loss_constant_ratio():
    """Test L(c) = t/2 c^2 - z c on a one-row dataset"""
    ds = build_dataset([([1.0], [0.0], 1, 2.0)])
    assert estimators.general_loss(ds, lambda X, Y: 0.5) == pytest.approx(-0.25)
    assert estimators.general_loss(ds, lambda X, Y: 0.0) == 0.0


def test_general_loss_scaling_minimiser():
    """Test that the best scaling c of g is sum z g / sum t g^2"""
    ds = _ddm_data([0.8, -0.4], 1.0, 300, 2, seed=1)
    g = ds.diffs @ np.array([1.0, 0.5])
    c_star = float(np.sum(ds.z * g) / np.sum(ds.t * g ** 2))
    grid = np.linspace(c_star - 1.0, c_star + 1.0, 2001)
    losses = [estimators.general_loss(ds, lambda X, Y, c=c: c * ((X - Y) @ np.array([1.0, 0.5]))) for c in grid]
    assert grid[int(np.argmin(losses))] == pytest.approx(c_star, abs=1e-3)


def test_general_loss_rejects_non_finite_ratio():
    """Test that a non-finite ratio names its row"""
    ds = build_dataset([([1.0], [0.0], 1, 1.0), ([0.0], [1.0], -1, 1.0)])
    with pytest.raises(ValidationError, match="row 2"):
        estimators.general_loss(ds, lambda X, Y: np.array([0.1, np.nan]))


def test_ddm_loss_matches_general_loss():
    """Test the linear DDM loss and its gradient"""
    ds = _ddm_data([0.5, 0.2], 1.2, 100, 2, seed=2)
    u = np.array([0.3, -0.1])
    manual = np.mean(0.5 * ds.t * (ds.diffs @ u) ** 2 - ds.z * (ds.diffs @ u))
    assert estimators.ddm_loss(ds, u) == pytest.approx(manual, rel=1e-13)
    h = 1e-6
    numeric = [
        (estimators.ddm_loss(ds, u + h * e) - estimators.ddm_loss(ds, u - h * e)) / (2 * h) for e in np.eye(2)
    ]
    np.testing.assert_allclose(estimators.ddm_gradient(ds, u), numeric, atol=1e-8)


def test_sgd_single_step():
    """Test that one step from zero is lambda z d"""
    ds = build_dataset([([1.0, 0.0], [0.0, 0.0], 1, 1.0)])
    final = estimators.fit_ddm_sgd(ds, SgdConfig(lam=0.1, average_iterates=False))
    np.testing.assert_allclose(final.estimate, [0.1, 0.0])
    averaged = estimators.fit_ddm_sgd(ds, SgdConfig(lam=0.1))
    np.testing.assert_allclose(averaged.estimate, [0.05, 0.0])
    assert averaged.details["solver"] == "sgd"


def test_sgd_default_step_size():
    """Test that the default step is 1/(8 D^2)"""
    ds = build_dataset([([2.0, 0.0], [0.0, 0.0], 1, 1.0), ([0.0, 1.0], [0.0, 0.0], -1, 1.0)])
    report = estimators.fit_ddm_sgd(ds)
    assert report.details["lambda"] == pytest.approx(1.0 / 32.0)
    np.testing.assert_allclose(report.sigma_hat, empirical_sigma(ds))


def test_sgd_divergence():
    """Test that an absurd step size is reported as divergence"""
    ds = _ddm_data([0.5, -0.5], 1.0, 200, 2, seed=3)
    with np.errstate(all="ignore"), pytest.raises(DivergenceError):
        estimators.fit_ddm_sgd(ds, SgdConfig(lam=1e10))


def test_sgd_initial_iterate_dimension():
    """Test that w0 must match the data dimension"""
    ds = build_dataset([([1.0, 0.0], [0.0, 0.0], 1, 1.0)])
    with pytest.raises(ValidationError):
        estimators.fit_ddm_sgd(ds, SgdConfig(w0=[0.0]))


def test_sgd_meets_error_bound():
    """Test single-pass averaged SGD against the finite-sample bound"""
    u_star = np.array([0.5, -0.3, 0.2])
    b = 1.0
    ds = _ddm_data(u_star * b, b, 20_000, 3, seed=4)
    report = estimators.fit_ddm_sgd(ds)
    err = np.asarray(report.estimate) - u_star
    sigma = np.asarray(report.sigma_hat)
    bound = estimators.sgd_error_bound(ds.n, ds.d, b, ds.D, u_star * b)
    assert err @ sigma @ err <= bound


def test_exact_solver_is_stationary():
    """Test that the closed-form solution zeroes the gradient"""
    ds = _ddm_data([0.5, -0.3, 0.2], 1.0, 500, 3, seed=5)
    report = estimators.fit_ddm_exact(ds)
    assert report.gradient_norm < 1e-10
    sgd = estimators.fit_ddm_sgd(ds, SgdConfig(passes=50))
    np.testing.assert_allclose(sgd.estimate, report.estimate, atol=0.05)


def test_population_minimiser_is_w_over_b():
    """Test that u = w/b solves the normal equations built from closed-form moments"""
    rng = np.random.default_rng(6)
    diffs = rng.uniform(-1, 1, size=(200, 2))
    w, b = np.array([1.2, -0.7]), 1.4
    v = diffs @ w
    A = (diffs * ddm_math.expected_t(v, b)[:, None]).T @ diffs
    c = diffs.T @ ddm_math.expected_z(v, b)
    np.testing.assert_allclose(np.linalg.solve(A, c), w / b, rtol=1e-10)


def test_logistic_loss_at_zero():
    """Test that the logistic loss at m = 0 is log 2"""
    ds = _ddm_data([0.5, -0.5], 1.0, 50, 2, seed=7)
    assert estimators.logistic_loss(ds, [0.0, 0.0]) == pytest.approx(math.log(2.0), rel=1e-14)


def test_logistic_recovers_b_times_w():
    """Test that the choice-only fit estimates m = b w"""
    w, b = np.array([0.4, -0.2]), 1.5
    ds = _ddm_data(w, b, 20_000, 2, seed=8)
    report = estimators.fit_logistic(ds)
    m_hat = np.asarray(report.estimate)
    assert report.model == "ddm-choice-only"
    assert report.gradient_norm < 1e-10
    cov = np.linalg.inv(estimators.logistic_hessian(ds, m_hat)) / ds.n
    assert np.all(np.abs(m_hat - b * w) <= 4 * np.sqrt(np.diag(cov)))


def test_logistic_is_convex_along_lines():
    """Test the chord inequality for the logistic loss"""
    ds = _ddm_data([1.0, 1.0], 1.0, 200, 2, seed=9)
    rng = np.random.default_rng(10)
    for _ in range(20):
        a, c = rng.normal(size=2), rng.normal(size=2)
        mid = estimators.logistic_loss(ds, 0.5 * (a + c))
        assert mid <= 0.5 * (estimators.logistic_loss(ds, a) + estimators.logistic_loss(ds, c)) + 1e-12


def test_logistic_separation():
    """Test that separable choices need a ridge term"""
    ds = build_dataset([([1.0], [0.0], 1, 1.0), ([0.0], [1.0], -1, 1.0), ([2.0], [0.0], 1, 1.0)])
    with pytest.raises(SeparationError):
        estimators.fit_logistic(ds)
    report = estimators.fit_logistic(ds, reg=0.1)
    assert report.estimate[0] > 0
    assert report.gradient_norm < 1e-8


def test_sgd_reparameterisation():
    """Test that (c w, b / c) data give c^2 times the estimate when the step is scaled by c^2"""
    c = 2.0
    w, b = np.array([0.6, -0.3]), 1.2
    X, Y = simulators.uniform_pairs(2_000, 2, np.random.default_rng(30))
    first = simulators.simulate_ddm_dataset(X, Y, DdmParams(w=list(w), b=b), np.random.default_rng(31))
    second = simulators.simulate_ddm_dataset(X, Y, DdmParams(w=list(c * w), b=b / c), np.random.default_rng(31))
    np.testing.assert_array_equal(first.z, second.z)
    lam = 1.0 / (8.0 * first.D ** 2)
    u1 = estimators.fit_ddm_sgd(first, SgdConfig(lam=lam)).estimate
    u2 = estimators.fit_ddm_sgd(second, SgdConfig(lam=c * c * lam)).estimate
    np.testing.assert_allclose(u2, c * c * np.asarray(u1), rtol=1e-12)


def test_combine_recovers_b():
    """Test b = sqrt(m^T u / u^T u) on exact inputs"""
    u = np.array([0.5, -0.25])
    assert estimators.recover_b_combine(u, 4.0 * u) == pytest.approx(2.0, rel=1e-14)
    assert estimators.recover_b_combine(u, u) == pytest.approx(1.0, rel=1e-14)


def test_combine_errors():
    """Test the inconsistent and degenerate cases"""
    u = np.array([0.5, -0.25])
    with pytest.raises(InconsistentEstimateError):
        estimators.recover_b_combine(u, -u)
    with pytest.raises(ValidationError):
        estimators.recover_b_combine([0.0, 0.0], u)


def test_moment_match_with_zero_estimate():
    """Test that u = 0 gives b = sqrt(mean t)"""
    ds = build_dataset([([1.0], [0.0], 1, 0.5), ([0.0], [1.0], -1, 2.5)])
    assert estimators.recover_b_moment_match([0.0], ds) == pytest.approx(math.sqrt(1.5), rel=1e-12)


def test_matched_mean_t_increases_with_b():
    """Test monotonicity of the matched mean response time"""
    ds = _ddm_data([0.6, -0.4], 1.0, 100, 2, seed=11)
    values = [estimators.matched_mean_t(b, [0.6, -0.4], ds) for b in np.linspace(0.1, 5.0, 50)]
    assert np.all(np.diff(values) > 0)


def test_moment_match_recovers_boundary():
    """Test that the true u and simulated data give back b"""
    w, b = np.array([0.5, -0.4]), 1.3
    ds = _ddm_data(w, b, 20_000, 2, seed=12)
    b_hat = estimators.recover_b_moment_match(w / b, ds)
    assert b_hat == pytest.approx(b, rel=0.03)


def test_moment_match_bracket_error():
    """Test that an unreachable mean response time reports the attainable interval"""
    ds = build_dataset([([1.0], [0.0], 1, 100.0)])
    with pytest.raises(BracketError) as info:
        estimators.recover_b_moment_match([0.0], ds, bracket=(0.5, 2.0))
    low, high = info.value.attainable
    assert low == pytest.approx(0.25)
    assert high == pytest.approx(4.0)


def test_recover_b_dispatch():
    """Test the method dispatch"""
    u = np.array([0.5, -0.25])
    assert estimators.recover_b("combine", u, m_hat=u) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        estimators.recover_b("combine", u)
    with pytest.raises(ValidationError):
        estimators.recover_b("least-squares", u)


def test_lnr_fit_recovers_weights():
    """Test that the LNR fit recovers w on simulated race data"""
    w_true = LnrParams(w=[0.3, -0.4])
    rng = np.random.default_rng(13)
    X, Y = rng.uniform(0, 2, size=(20_000, 2)), rng.uniform(0, 2, size=(20_000, 2))
    ds = simulators.simulate_lnr_dataset(X, Y, w_true, rng)
    report = estimators.fit_lnr(ds, restarts=2, seed=1)
    assert report.model == "lnr"
    assert report.lnr is not None
    assert report.final_loss <= report.details["initial_loss"]
    assert report.gradient_norm < estimators.LNR_GTOL
    np.testing.assert_allclose(report.estimate, w_true.w, atol=0.15)


def test_lnr_fit_dimension_check():
    """Test that the initial weights must match the data"""
    ds = build_dataset([([1.0, 0.0], [0.0, 1.0], 1, 1.0)])
    with pytest.raises(ValidationError):
        estimators.fit_lnr(ds, init=LnrParams(w=[0.0]))


def test_halfspace_sample_size():
    """Test the desk-scaled per-batch sample size"""
    cfg = HalfspaceConfig(epsilon=0.1, delta=0.1, gamma=0.2)
    assert estimators.halfspace_sample_size(cfg, d=3, b=1.0) == 2263


def test_majority_single_estimate():
    """Test that k = 1 is the plain sign classifier"""
    rng = np.random.default_rng(14)
    u = np.array([0.3, -1.0])
    X, Y = rng.normal(size=(100, 2)), rng.normal(size=(100, 2))
    clf = estimators.MajorityClassifier(u)
    assert clf.k == 1
    np.testing.assert_array_equal(clf(X, Y), np.where((X - Y) @ u >= 0, 1, -1))


def test_majority_ties_go_positive():
    """Test that a split vote predicts +1"""
    clf = estimators.MajorityClassifier([[1.0], [-1.0]])
    np.testing.assert_array_equal(clf.predict([[1.0], [0.0]], [[0.0], [1.0]]), [1, 1])


def test_majority_unanimous():
    """Test that identical estimates vote as one"""
    u = np.array([1.0, 2.0])
    clf = estimators.MajorityClassifier(np.tile(u, (5, 1)))
    X = np.array([[1.0, 0.0], [0.0, -1.0]])
    np.testing.assert_array_equal(clf.votes(X, np.zeros((2, 2))), [5, -5])


def test_halfspace_batch_errors():
    """Test batch count, size and dimension checks"""
    cfg = HalfspaceConfig(epsilon=0.1, delta=0.1, gamma=0.2, k=2)
    a = _ddm_data([1.0, 0.0], 1.0, 10, 2, seed=15)
    with pytest.raises(ValidationError):
        estimators.fit_halfspace_majority([a], cfg)
    with pytest.raises(ValidationError):
        estimators.fit_halfspace_majority([a, _ddm_data([1.0, 0.0], 1.0, 11, 2, seed=16)], cfg)
    with pytest.raises(ValidationError):
        estimators.fit_halfspace_majority([a, _ddm_data([1.0, 0.0, 0.0], 1.0, 10, 3, seed=17)], cfg)


def test_halfspace_majority_classifies_margin_data():
    """Test the majority vote on clean-margin DDM data"""
    w = np.array([0.6, -0.8])
    cfg = HalfspaceConfig(epsilon=0.1, delta=0.1, gamma=0.2, k=5)
    rng = np.random.default_rng(18)
    batches = []
    for _ in range(cfg.batches):
        X, Y = simulators.margin_pairs(2000, 2, w, cfg.gamma, rng)
        batches.append(simulators.simulate_ddm_dataset(X, Y, DdmParams(w=list(w), b=1.0), rng))
    clf = estimators.fit_halfspace_majority(batches, cfg)
    X, Y = simulators.margin_pairs(5000, 2, w, cfg.gamma, rng)
    truth = np.where((X - Y) @ w >= 0, 1, -1)
    assert np.mean(clf(X, Y) != truth) <= cfg.epsilon


@pytest.mark.slow
def test_sgd_rate():
    """Test the bound and the 1/n rate of single-pass averaged SGD over 20 seeds"""
    w_star = np.array([0.4, -0.4, 0.2])
    b = 1.0
    sizes = [1_000, 10_000, 100_000]
    mean_errors = []
    for n in sizes:
        errors, bounds = [], []
        for seed in range(20):
            ds = _ddm_data(w_star, b, n, 3, seed=1000 * n + seed)
            report = estimators.fit_ddm_sgd(ds)
            err = np.asarray(report.estimate) - w_star / b
            errors.append(err @ np.asarray(report.sigma_hat) @ err)
            bounds.append(estimators.sgd_error_bound(n, 3, b, ds.D, w_star))
        assert np.mean(errors) <= np.mean(bounds)
        mean_errors.append(np.mean(errors))
    slope = np.polyfit(np.log(sizes), np.log(mean_errors), 1)[0]
    assert -1.3 <= slope <= -0.7


@pytest.mark.slow
def test_boundary_recovery_from_fitted_estimates():
    """Test that both recovery methods land within 10% of b from fitted estimates over 20 seeds"""
    w, b = np.array([1.0, -0.5]), 1.5
    for seed in range(20):
        ds = _ddm_data(w, b, 100_000, 2, seed=5000 + seed)
        u_hat = estimators.fit_ddm_sgd(ds).estimate
        m_hat = estimators.fit_logistic(ds).estimate
        assert estimators.recover_b_combine(u_hat, m_hat) == pytest.approx(b, rel=0.1)
        assert estimators.recover_b_moment_match(u_hat, ds) == pytest.approx(b, rel=0.1)


@pytest.mark.slow
def test_halfspace_meta_replications():
    """Test the majority vote at the prescribed sample size over 100 replications"""
    cfg = HalfspaceConfig(epsilon=0.1, delta=0.1, gamma=0.2)
    d, b = 3, 1.0
    w = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
    n = estimators.halfspace_sample_size(cfg, d, b)
    successes = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        batches = []
        for _ in range(cfg.batches):
            X, Y = simulators.margin_pairs(n, d, w, cfg.gamma, rng)
            batches.append(simulators.simulate_ddm_dataset(X, Y, DdmParams(w=list(w * b), b=b), rng))
        clf = estimators.fit_halfspace_majority(batches, cfg)
        X, Y = simulators.margin_pairs(10_000, d, w, cfg.gamma, rng)
        error = np.mean(clf(X, Y) != np.where((X - Y) @ w >= 0, 1, -1))
        successes += error <= cfg.epsilon
    assert successes >= 90
