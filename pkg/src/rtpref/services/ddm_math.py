"""Closed-form quantities of the symmetric drift-diffusion model.

The process is W_t = B_t + v t started at 0 with absorbing boundaries at +/- b.
Everything here depends on (v, b) mostly through beta = b * v; functions accept
scalars or numpy arrays and return a float when every input is scalar.
"""

import logging
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from ..exceptions import SeriesConvergenceError, ValidationError
from ..models.dataset import Dataset
from ..models.params import DdmParams, SeriesControl

logger = logging.getLogger(__name__)

# |beta| below which Taylor expansions replace the closed forms
TAYLOR_CUTOFF = 1e-4
# t / b^2 above which the eigenfunction (large-time) series is used
LARGE_TIME_SWITCH = 2.0
# t / b^2 below which the density is flagged as inaccurate
SMALL_TIME_FLAG = 1e-3
# above this |beta| the identity is evaluated in its overflow-free form
OVERFLOW_BETA = 300.0


class SeriesResult(NamedTuple):
    """Value of the driftless first-passage density series"""
    value: float
    n_terms: int
    regime: str
    accurate: bool


def _out(result, *inputs):
    if all(np.ndim(value) == 0 for value in inputs):
        return float(np.asarray(result).reshape(-1)[0])
    return result


def _sech2(x):
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def _sinh_minus_x(x):
    """sinh(x) - x without cancellation for small |x|"""
    x = np.asarray(x, dtype=np.float64)
    direct = np.sinh(x) - x
    x2 = x * x
    term = x * x2 / 6.0
    series = term.copy()
    for k in range(2, 9):
        term = term * x2 / ((2 * k) * (2 * k + 1))
        series = series + term
    return np.where(np.abs(x) < 0.5, series, direct)


def tanh_ratio(beta):
    """tanh(beta) / beta, equal to 1 at beta = 0"""
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    small = np.abs(beta) < TAYLOR_CUTOFF
    safe = np.where(small, 1.0, beta)
    b2 = beta * beta
    return np.where(small, 1.0 - b2 / 3.0 + 2.0 * b2 * b2 / 15.0, np.tanh(safe) / safe)


def second_moment_ratio(beta):
    """E[t^2] / b^4 as a function of beta = b v; equals 5/3 at beta = 0"""
    beta = np.abs(np.atleast_1d(np.asarray(beta, dtype=np.float64)))
    out = np.empty_like(beta)

    small = beta < TAYLOR_CUTOFF
    large = beta >= 1.0
    mid = ~small & ~large

    b2 = beta[small] ** 2
    out[small] = 5.0 / 3.0 - 1.2 * b2 + (221.0 / 315.0) * b2 * b2

    bm = beta[mid]
    numerator = _sinh_minus_x(2.0 * bm) + 2.0 * bm * np.sinh(bm) ** 2
    out[mid] = _sech2(bm) * numerator / (2.0 * bm ** 3)

    bl = beta[large]
    out[large] = (np.tanh(bl) + bl - 2.0 * bl * _sech2(bl)) / bl ** 3
    return out


def _check_boundary(b):
    if np.any(np.asarray(b) <= 0):
        raise ValidationError("boundary b must be strictly positive")


def choice_prob(v, b, z):
    """P(choice = z) = 1 / (1 + exp(-2 b z v))"""
    _check_boundary(b)
    return _out(special.expit(2.0 * np.asarray(b) * np.asarray(z) * np.asarray(v)), v, b, z)


def expected_z(v, b):
    """E[z] = tanh(b v)"""
    _check_boundary(b)
    return _out(np.tanh(np.asarray(b) * np.asarray(v)), v, b)


def expected_t(v, b):
    """E[t] = (b / v) tanh(b v), continuous at v = 0 with value b^2"""
    _check_boundary(b)
    b = np.asarray(b, dtype=np.float64)
    beta = b * np.asarray(v, dtype=np.float64)
    return _out(b ** 2 * tanh_ratio(beta).reshape(np.shape(beta)), v, b)


def second_moment_t(v, b):
    """E[t^2] = b sech^2(bv)(-3bv + sinh 2bv + bv cosh 2bv) / (2 v^3); limit 5 b^4 / 3"""
    _check_boundary(b)
    b = np.asarray(b, dtype=np.float64)
    beta = b * np.asarray(v, dtype=np.float64)
    return _out(b ** 4 * second_moment_ratio(beta).reshape(np.shape(beta)), v, b)


def var_t(v, b):
    """Var[t] = E[t^2] - E[t]^2"""
    _check_boundary(b)
    b = np.asarray(b, dtype=np.float64)
    beta = b * np.asarray(v, dtype=np.float64)
    ratio = tanh_ratio(beta).reshape(np.shape(beta))
    variance = b ** 4 * (second_moment_ratio(beta).reshape(np.shape(beta)) - ratio ** 2)
    return _out(np.maximum(variance, 0.0), v, b)


def phi_series(t: float, b: float, ctrl: Optional[SeriesControl] = None) -> SeriesResult:
    """Driftless exit-time density of (-b, b) started at 0.

    Uses the small-time image series for t <= 2 b^2 and the eigenfunction
    series beyond. Terms alternate in sign with decreasing magnitude; the sum
    stops once the next term falls below ``ctrl.tol``.
    """
    ctrl = ctrl or SeriesControl()
    if not t > 0:
        raise ValidationError("response time must be strictly positive")
    _check_boundary(b)

    scaled = t / (b * b)
    if scaled <= LARGE_TIME_SWITCH:
        regime = "small-time"
        prefactor = 2.0 * b / math.sqrt(2.0 * math.pi * t ** 3)

        def term(m: int) -> float:
            k = 2 * m + 1
            return (-1) ** m * k * math.exp(-(k * k) * b * b / (2.0 * t))
    else:
        regime = "large-time"
        prefactor = math.pi / (2.0 * b * b)

        def term(m: int) -> float:
            k = 2 * m + 1
            return (-1) ** m * k * math.exp(-(k * k) * math.pi ** 2 * t / (8.0 * b * b))

    total = 0.0
    current = term(0)
    for m in range(ctrl.max_terms):
        total += current
        following = term(m + 1)
        if abs(prefactor * following) < ctrl.tol and abs(following) <= abs(current):
            accurate = scaled >= SMALL_TIME_FLAG
            if not accurate:
                logger.warning(f"density at t={t:.3g} is below {SMALL_TIME_FLAG} b^2, flagged inaccurate")
            return SeriesResult(max(prefactor * total, 0.0), m + 1, regime, accurate)
        current = following

    raise SeriesConvergenceError(
        f"first-passage series did not reach tol={ctrl.tol:g} within {ctrl.max_terms} terms "
        f"(t={t:g}, b={b:g})"
    )


def rt_density(t: float, v: float, b: float, ctrl: Optional[SeriesControl] = None) -> float:
    """Response-time density f(t) = cosh(bv) exp(-v^2 t / 2) phi(t); identical for both choices"""
    phi = phi_series(t, b, ctrl).value
    if phi == 0.0:
        return 0.0
    return math.exp(_logcosh(b * v) - 0.5 * v * v * t) * phi


def joint_density(z: int, t: float, v: float, b: float, ctrl: Optional[SeriesControl] = None) -> float:
    """Joint density of (z, t): 1/2 exp(b z v - v^2 t / 2) phi(t)"""
    phi = phi_series(t, b, ctrl).value
    return 0.5 * math.exp(b * z * v - 0.5 * v * v * t) * phi


def log_likelihood(ds: Dataset, params: DdmParams, ctrl: Optional[SeriesControl] = None) -> float:
    """Sum of log joint densities over a dataset"""
    drifts = params.drift(ds.X, ds.Y)
    total = 0.0
    for v, z, t in zip(drifts, ds.z, ds.t):
        density = joint_density(int(z), float(t), float(v), params.b, ctrl)
        total += math.log(density) if density > 0 else -math.inf
    return total


def driftless_cdf(t, b, n_terms: int = 12):
    """P(T0 <= t) for the driftless exit time of (-b, b); vectorised"""
    _check_boundary(b)
    scaled = np.atleast_1d(np.asarray(t, dtype=np.float64)) / (b * b)
    out = np.zeros_like(scaled)

    small = (scaled > 0) & (scaled <= LARGE_TIME_SWITCH)
    large = scaled > LARGE_TIME_SWITCH

    s = scaled[small]
    acc = np.zeros_like(s)
    for m in range(n_terms):
        acc += (-1) ** m * special.erfc((2 * m + 1) / np.sqrt(2.0 * s))
    out[small] = 2.0 * acc

    s = scaled[large]
    acc = np.zeros_like(s)
    for m in range(n_terms):
        k = 2 * m + 1
        acc += (-1) ** m / k * np.exp(-(k * k) * math.pi ** 2 * s / 8.0)
    out[large] = 1.0 - 4.0 / math.pi * acc

    return _out(np.clip(out, 0.0, 1.0), t)


def laplace_t(alpha, v, b):
    """E[exp(-alpha t)] = cosh(bv) / cosh(b sqrt(2 alpha + v^2))"""
    _check_boundary(b)
    if np.any(np.asarray(alpha) < 0):
        raise ValidationError("alpha must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    inner = b * np.sqrt(2.0 * np.asarray(alpha, dtype=np.float64) + v * v)
    return _out(np.exp(_logcosh(b * v) - _logcosh(inner)), alpha, v, b)


def check_hyperbolic_identity(beta):
    """Residual of 1 + sech^2(B)(-3B + sinh 2B + B cosh 2B)/(2B) - 2 tanh^2(B) - tanh(B)/B.

    The expression vanishes identically; the residual measures round-off.
    """
    beta_arr = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    out = np.zeros_like(beta_arr)

    small = np.abs(beta_arr) < TAYLOR_CUTOFF
    huge = np.abs(beta_arr) > OVERFLOW_BETA
    direct = ~small & ~huge

    bs = beta_arr[small]
    b2 = bs * bs
    moment_term = b2 * (5.0 / 3.0 - 1.2 * b2)
    tanh_sq = b2 - 2.0 / 3.0 * b2 * b2
    ratio = 1.0 - b2 / 3.0 + 2.0 / 15.0 * b2 * b2
    out[small] = 1.0 + moment_term - 2.0 * tanh_sq - ratio

    bd = beta_arr[direct]
    sech2 = 1.0 / np.cosh(bd) ** 2
    moment_term = sech2 * (-3.0 * bd + np.sinh(2.0 * bd) + bd * np.cosh(2.0 * bd)) / (2.0 * bd)
    tanh = np.tanh(bd)
    out[direct] = 1.0 + moment_term - 2.0 * tanh ** 2 - tanh / bd

    bh = beta_arr[huge]
    tanh = np.tanh(bh)
    sech2 = _sech2(bh)
    # sech^2 sinh 2B = 2 tanh B and sech^2 cosh 2B = 2 - sech^2 B
    moment_term = tanh / bh + 1.0 - 2.0 * sech2
    out[huge] = 1.0 + moment_term - 2.0 * tanh ** 2 - tanh / bh

    return _out(out, beta)


def tanh_lower_bound_gap(beta):
    """tanh(B)/B - 1/sqrt(1 + B^2), nonnegative for all B"""
    beta_arr = np.asarray(beta, dtype=np.float64)
    gap = tanh_ratio(beta_arr).reshape(np.shape(beta_arr)) - 1.0 / np.sqrt(1.0 + beta_arr ** 2)
    return _out(gap, beta)


def moment_ratio(beta):
    """b^2 E[t] / E[t^2] as a function of beta; bounded below by 0.6"""
    beta_arr = np.asarray(beta, dtype=np.float64)
    ratio = tanh_ratio(beta_arr) / second_moment_ratio(beta_arr)
    return _out(ratio.reshape(np.shape(beta_arr)), beta)


def run_identity_suite(n_points: int = 10_000, limit: float = 50.0) -> dict:
    """Evaluate the identity, the tanh bound and the 0.6 moment bound on a grid"""
    grid = np.linspace(-limit, limit, n_points)
    residual = np.abs(check_hyperbolic_identity(grid))
    gap = tanh_lower_bound_gap(grid)
    ratio = moment_ratio(grid)
    result = {
        "n_points": n_points,
        "beta_limit": limit,
        "max_identity_residual": float(residual.max()),
        "min_tanh_gap": float(gap.min()),
        "min_moment_ratio": float(ratio.min()),
    }
    result["passed"] = bool(
        result["max_identity_residual"] < 1e-10
        and result["min_tanh_gap"] >= -1e-14
        and result["min_moment_ratio"] >= 0.6 - 1e-12
    )
    logger.info(f"Identity suite on {n_points} points: {result}")
    return result
