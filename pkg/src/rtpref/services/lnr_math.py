"""Closed-form moments of the two-alternative lognormal race.

Each alternative's accumulator starts at distance D ~ Lognormal(d0, 1) from its
threshold and moves with rate V, where (log V_x, log V_y) is bivariate normal
with means (nu_x, nu_y), unit variances and correlation rho. The first to
arrive is chosen.
"""

import math

import numpy as np
from scipy import special

from ..exceptions import ValidationError
from ..models.params import LnrParams


def _check_rho(rho):
    if not -1.0 < rho < 1.0:
        raise ValidationError(f"drift correlation must lie in (-1, 1), got {rho}")


def _out(result, *inputs):
    if all(np.ndim(value) == 0 for value in inputs):
        return float(result)
    return result


def lnr_expected_z(nu_x, nu_y, rho: float = 0.0):
    """E[z] = 2 Phi((nu_x - nu_y) / sqrt(4 - 2 rho)) - 1"""
    _check_rho(rho)
    r = np.asarray(nu_x, dtype=np.float64) - np.asarray(nu_y, dtype=np.float64)
    return _out(2.0 * special.ndtr(r / math.sqrt(4.0 - 2.0 * rho)) - 1.0, nu_x, nu_y)


def j_rho(r, rho: float = 0.0):
    """J(r) = e^{r/2} Phi((-r + rho - 2)/s) + e^{-r/2} Phi((r + rho - 2)/s), s = sqrt(4 - 2 rho)"""
    _check_rho(rho)
    r = np.asarray(r, dtype=np.float64)
    scale = math.sqrt(4.0 - 2.0 * rho)
    # log-space so that large |r| neither overflows nor loses the small factor
    left = np.exp(r / 2.0 + special.log_ndtr((-r + rho - 2.0) / scale))
    right = np.exp(-r / 2.0 + special.log_ndtr((r + rho - 2.0) / scale))
    return _out(left + right, r)


def lnr_expected_t(nu_x, nu_y, d0: float = 0.0, rho: float = 0.0):
    """E[t] = exp(d0 + 1 - (nu_x + nu_y) / 2) J(nu_x - nu_y)"""
    _check_rho(rho)
    nu_x = np.asarray(nu_x, dtype=np.float64)
    nu_y = np.asarray(nu_y, dtype=np.float64)
    result = np.exp(d0 + 1.0 - 0.5 * (nu_x + nu_y)) * j_rho(nu_x - nu_y, rho)
    return _out(result, nu_x, nu_y)


def lnr_ratio(x, y, params: LnrParams):
    """Speed-accuracy ratio E[z] / E[t] with nu(x) = x^T w.

    ``x`` and ``y`` may be single attribute vectors or ``(n, d)`` arrays.
    """
    w = np.asarray(params.w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.shape[-1] != w.shape[0]:
        raise ValidationError(f"dimension mismatch: x{x.shape}, y{y.shape}, w{w.shape}")
    nu_x = x @ w
    nu_y = y @ w
    numerator = lnr_expected_z(nu_x, nu_y, params.rho)
    denominator = lnr_expected_t(nu_x, nu_y, params.d0, params.rho)
    return _out(np.asarray(numerator) / np.asarray(denominator), nu_x)
