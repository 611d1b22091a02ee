"""Tests for lognormal race moments"""

import math

import numpy as np
import pytest
from scipy import stats

from rtpref.exceptions import ValidationError
from rtpref.models import LnrParams
from rtpref.services import lnr_math


def test_expected_z_examples():
    """Test E[z] at equal and unequal utilities"""
    assert lnr_math.lnr_expected_z(0.3, 0.3) == 0.0
    assert lnr_math.lnr_expected_z(1.0, 0.0) == pytest.approx(2 * stats.norm.cdf(0.5) - 1, rel=1e-14)
    assert lnr_math.lnr_expected_z(1.0, 0.0, rho=0.5) == pytest.approx(
        2 * stats.norm.cdf(1.0 / math.sqrt(3.0)) - 1, rel=1e-14
    )


def test_expected_t_at_equal_utilities():
    """Test E[t] = 2 e Phi(-1) when both utilities and d0 are zero"""
    expected = 2.0 * math.e * stats.norm.cdf(-1.0)
    assert lnr_math.lnr_expected_t(0.0, 0.0) == pytest.approx(expected, rel=1e-12)
    assert lnr_math.lnr_expected_t(0.0, 0.0) == pytest.approx(0.8625, abs=1e-4)


def test_expected_t_scales_with_d0():
    """Test that d0 multiplies E[t] by exp(d0)"""
    base = lnr_math.lnr_expected_t(0.5, -0.2)
    assert lnr_math.lnr_expected_t(0.5, -0.2, d0=0.7) == pytest.approx(base * math.exp(0.7), rel=1e-13)


def test_j_is_even():
    """Test J(r) = J(-r)"""
    r = np.linspace(-30, 30, 121)
    for rho in [-0.5, 0.0, 0.8]:
        np.testing.assert_allclose(lnr_math.j_rho(r, rho), lnr_math.j_rho(-r, rho), rtol=1e-12)


def test_j_is_finite_for_large_differences():
    """Test that J neither overflows nor underflows for large |r|"""
    values = lnr_math.j_rho(np.array([-500.0, 200.0, 500.0]))
    assert np.all(np.isfinite(values))
    assert np.all(values > 0)


def test_expected_t_matches_monte_carlo():
    """Test E[t] against direct simulation of the race"""
    rng = np.random.default_rng(17)
    n = 200_000
    nu_x, nu_y, rho, d0 = 0.4, -0.3, 0.3, 0.2
    cov = [[1.0, rho], [rho, 1.0]]
    log_v = rng.multivariate_normal([nu_x, nu_y], cov, size=n)
    log_d = d0 + rng.standard_normal((n, 2))
    t = np.exp(np.min(log_d - log_v, axis=1))
    z = np.where(log_d[:, 0] - log_v[:, 0] <= log_d[:, 1] - log_v[:, 1], 1, -1)
    assert abs(t.mean() - lnr_math.lnr_expected_t(nu_x, nu_y, d0, rho)) < 4 * t.std() / math.sqrt(n)
    assert abs(z.mean() - lnr_math.lnr_expected_z(nu_x, nu_y, rho)) < 4 * z.std() / math.sqrt(n)


def test_ratio_vectorised():
    """Test that row-wise ratios match the scalar ratio"""
    params = LnrParams(w=[0.5, -1.0], d0=0.1, rho=0.2)
    x = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    y = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
    ratios = lnr_math.lnr_ratio(x, y, params)
    assert ratios.shape == (3,)
    for i in range(3):
        assert ratios[i] == pytest.approx(lnr_math.lnr_ratio(x[i], y[i], params), rel=1e-14)
    assert ratios[2] == 0.0
    assert ratios[0] == pytest.approx(-ratios[1], rel=1e-12)


def test_ratio_dimension_mismatch():
    """Test that attribute and weight dimensions must agree"""
    with pytest.raises(ValidationError):
        lnr_math.lnr_ratio([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], LnrParams(w=[1.0, 1.0]))


def test_rho_out_of_range():
    """Test that |rho| >= 1 is rejected"""
    with pytest.raises(ValidationError):
        lnr_math.lnr_expected_z(1.0, 0.0, rho=1.0)
    with pytest.raises(ValidationError):
        lnr_math.j_rho(0.0, rho=-1.5)
