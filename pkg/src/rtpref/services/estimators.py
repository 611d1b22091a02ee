"""Fitting procedures for the speed-accuracy loss, the choice-only logit, the LNR and halfspaces.

The speed-accuracy loss for a ratio function g is

    L(g) = (1/n) sum_i  t_i / 2 * g(x_i, y_i)^2 - z_i * g(x_i, y_i)

and for the linear DDM g(x, y) = (x - y)^T u with u = w / b, so the loss is a
quadratic in u. The choice-only logit identifies m = b w instead; combining
both (or matching the mean response time) recovers b.
"""

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize, special

from ..config import settings
from ..exceptions import (
    BracketError,
    ConvergenceError,
    DivergenceError,
    InconsistentEstimateError,
    SeparationError,
    ValidationError,
)
from ..models.dataset import Dataset, empirical_sigma
from ..models.params import HalfspaceConfig, LnrParams, SgdConfig
from ..schemas.report import FitReport
from .ddm_math import expected_t
from .lnr_math import lnr_ratio

logger = logging.getLogger(__name__)

LOGISTIC_GTOL = 1e-10
LNR_GTOL = 1e-6
# constant applied to the halfspace sample-size formula, chosen by grid search
HALFSPACE_DESK_SCALE = 0.004

RatioFunction = Callable[..., np.ndarray]


def _sigma_list(ds: Dataset):
    return empirical_sigma(ds).tolist()


# Speed-accuracy loss
def general_loss(ds: Dataset, g: RatioFunction, params=None) -> float:
    """Empirical speed-accuracy loss for a ratio function ``g(X, Y[, params])``"""
    values = g(ds.X, ds.Y) if params is None else g(ds.X, ds.Y, params)
    values = np.broadcast_to(np.asarray(values, dtype=np.float64), (ds.n,))
    bad = ~np.isfinite(values)
    if np.any(bad):
        row = int(np.argmax(bad)) + 1
        raise ValidationError(f"ratio function is not finite ({values[row - 1]})", row=row)
    return float(np.mean(0.5 * ds.t * values ** 2 - ds.z * values))


def ddm_ratio(X, Y, u) -> np.ndarray:
    """Linear DDM ratio (x - y)^T u"""
    return (np.asarray(X) - np.asarray(Y)) @ np.asarray(u, dtype=np.float64)


def ddm_loss(ds: Dataset, u) -> float:
    return general_loss(ds, ddm_ratio, np.asarray(u, dtype=np.float64))


def ddm_gradient(ds: Dataset, u) -> np.ndarray:
    """(1/n) sum_i (t_i u^T d_i - z_i) d_i"""
    diffs = ds.diffs
    residual = ds.t * (diffs @ np.asarray(u, dtype=np.float64)) - ds.z
    return diffs.T @ residual / ds.n


def _sgd_core(
    diffs: np.ndarray,
    z: np.ndarray,
    t: np.ndarray,
    lam: np.ndarray,
    w0: np.ndarray,
    passes: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Run independent SGD chains side by side.

    ``diffs`` has shape (k, n, d), ``z`` and ``t`` (k, n), ``lam`` (k,), ``w0`` (k, d).
    Returns the final iterates and the averages over all iterates including w0.
    """
    k, n, _ = diffs.shape
    u = w0.astype(np.float64).copy()
    total = u.copy()
    for sweep in range(passes):
        for i in range(n):
            d_i = diffs[:, i, :]
            residual = t[:, i] * np.einsum("kd,kd->k", u, d_i) - z[:, i]
            u -= (lam * residual)[:, None] * d_i
            total += u
        if not np.all(np.isfinite(u)):
            raise DivergenceError(
                f"SGD iterate became non-finite during pass {sweep + 1}; step size {lam.max():.4g} is too large"
            )
    return u, total / (passes * n + 1)


def fit_ddm_sgd(ds: Dataset, cfg: Optional[SgdConfig] = None) -> FitReport:
    """Averaged SGD on the linear-DDM speed-accuracy loss; estimates u = w / b"""
    cfg = cfg or SgdConfig()
    lam = cfg.step_size(ds.D) if ds.D > 0 else (cfg.lam or 1.0)
    w0 = np.zeros(ds.d) if cfg.w0 is None else np.asarray(cfg.w0, dtype=np.float64)
    if w0.shape != (ds.d,):
        raise ValidationError(f"initial iterate has {w0.size} entries, data have d = {ds.d}")

    final, averaged = _sgd_core(
        ds.diffs[None], ds.z[None], ds.t[None], np.array([lam]), w0[None], cfg.passes
    )
    estimate = averaged[0] if cfg.average_iterates else final[0]
    logger.debug(f"SGD finished: n={ds.n}, passes={cfg.passes}, lambda={lam:.4g}")
    return FitReport(
        model="ddm",
        estimate=estimate.tolist(),
        averaged_iterate=averaged[0].tolist(),
        sigma_hat=_sigma_list(ds),
        final_loss=ddm_loss(ds, estimate),
        n_used=ds.n,
        gradient_norm=float(np.linalg.norm(ddm_gradient(ds, estimate))),
        details={"solver": "sgd", "lambda": lam, "D": ds.D, "passes": cfg.passes},
    )


def fit_ddm_exact(ds: Dataset, reg: float = 0.0) -> FitReport:
    """Closed-form minimiser of the quadratic loss (plus reg/2 ||u||^2)"""
    diffs = ds.diffs
    A = (diffs * ds.t[:, None]).T @ diffs / ds.n + reg * np.eye(ds.d)
    c = diffs.T @ ds.z / ds.n
    try:
        u = linalg.solve(A, c, assume_a="pos")
    except linalg.LinAlgError:
        logger.warning("Speed-accuracy normal equations are singular; using least squares")
        u = linalg.lstsq(A, c)[0]
    return FitReport(
        model="ddm",
        estimate=u.tolist(),
        averaged_iterate=u.tolist(),
        sigma_hat=_sigma_list(ds),
        final_loss=ddm_loss(ds, u),
        n_used=ds.n,
        gradient_norm=float(np.linalg.norm(ddm_gradient(ds, u) + reg * u)),
        details={"solver": "exact", "reg": reg},
    )


def sgd_error_bound(n: int, d: int, b: float, D: float, w_star, w0=None) -> float:
    """Upper bound on E ||u_bar - u*||^2_Sigma for single-pass averaged SGD"""
    w_star = np.asarray(w_star, dtype=np.float64)
    w0 = np.zeros_like(w_star) if w0 is None else np.asarray(w0, dtype=np.float64)
    spread = float(np.sum((w0 - w_star) ** 2))
    return (
        8.0 / (n + 1)
        * math.sqrt(1.0 + b * b * D * D * float(w_star @ w_star))
        * (d / (b * b) + 2.0 * D * D * spread)
    )


# Choice-only logit
def logistic_loss(ds: Dataset, m, reg: float = 0.0) -> float:
    """(1/n) sum log(1 + exp(-2 z m^T d)) + reg/2 ||m||^2"""
    m = np.asarray(m, dtype=np.float64)
    margins = 2.0 * ds.z * (ds.diffs @ m)
    return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * reg * m @ m)


def logistic_gradient(ds: Dataset, m, reg: float = 0.0) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    diffs = ds.diffs
    weights = -2.0 * ds.z * special.expit(-2.0 * ds.z * (diffs @ m))
    return diffs.T @ weights / ds.n + reg * m


def logistic_hessian(ds: Dataset, m, reg: float = 0.0) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    diffs = ds.diffs
    p = special.expit(2.0 * (diffs @ m))
    weights = 4.0 * p * (1.0 - p)
    return (diffs * weights[:, None]).T @ diffs / ds.n + reg * np.eye(ds.d)


def is_separable(ds: Dataset) -> bool:
    """True when some m has z_i m^T d_i >= 1 on every row (LP feasibility)"""
    signed = ds.z[:, None] * ds.diffs
    result = optimize.linprog(
        c=np.zeros(ds.d),
        A_ub=-signed,
        b_ub=-np.ones(ds.n),
        bounds=[(None, None)] * ds.d,
        method="highs",
    )
    return result.status == 0


def fit_logistic(ds: Dataset, reg: float = 0.0) -> FitReport:
    """Choice-only logistic MLE; the estimate is m = b w"""
    if reg < 0:
        raise ValidationError("ridge coefficient must be nonnegative")
    if reg == 0 and is_separable(ds):
        raise SeparationError("choices are perfectly separable; the logistic MLE diverges without a ridge term")

    result = optimize.minimize(
        lambda m: logistic_loss(ds, m, reg),
        np.zeros(ds.d),
        jac=lambda m: logistic_gradient(ds, m, reg),
        hess=lambda m: logistic_hessian(ds, m, reg),
        method="trust-exact",
        options={"gtol": LOGISTIC_GTOL, "maxiter": 500},
    )
    m = result.x
    # Newton polish: trust-exact may stop on its own tolerance just above gtol
    for _ in range(20):
        grad = logistic_gradient(ds, m, reg)
        if np.linalg.norm(grad) < LOGISTIC_GTOL:
            break
        m = m - linalg.solve(logistic_hessian(ds, m, reg), grad, assume_a="pos")

    grad_norm = float(np.linalg.norm(logistic_gradient(ds, m, reg)))
    if not np.all(np.isfinite(m)):
        raise DivergenceError("logistic estimate is not finite")
    if grad_norm >= LOGISTIC_GTOL:
        logger.warning(f"Logistic fit stopped with gradient norm {grad_norm:.3g}")

    return FitReport(
        model="ddm-choice-only",
        estimate=m.tolist(),
        averaged_iterate=m.tolist(),
        sigma_hat=_sigma_list(ds),
        final_loss=logistic_loss(ds, m, reg),
        n_used=ds.n,
        gradient_norm=grad_norm,
        details={"reg": reg, "iterations": int(result.nit)},
    )


# Boundary recovery
def recover_b_combine(u_hat, m_hat) -> float:
    """Least-squares fit of m = b^2 u: b = sqrt(m^T u / u^T u)"""
    u_hat = np.asarray(u_hat, dtype=np.float64)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    uu = float(u_hat @ u_hat)
    if uu <= 0:
        raise ValidationError("speed-accuracy estimate is zero; b cannot be recovered by combination")
    mu = float(m_hat @ u_hat)
    if mu <= 0:
        raise InconsistentEstimateError(
            f"choice-only and speed-accuracy estimates disagree in direction (m^T u = {mu:.4g})"
        )
    return math.sqrt(mu / uu)


def matched_mean_t(b: float, u_hat, ds: Dataset) -> float:
    """Mean over rows of E[t] at v = b u^T d, i.e. tanh(b^2 a) / a with a = u^T d"""
    a = ds.diffs @ np.asarray(u_hat, dtype=np.float64)
    return float(np.mean(expected_t(b * a, b)))


def recover_b_moment_match(u_hat, ds: Dataset, bracket: Optional[Tuple[float, float]] = None) -> float:
    """Choose b so that the model's mean response time matches the data's"""
    lo, hi = bracket or settings.bisection_bracket
    target = float(np.mean(ds.t))

    def gap(b: float) -> float:
        return matched_mean_t(b, u_hat, ds) - target

    low_value, high_value = gap(lo), gap(hi)
    if low_value > 0 or high_value < 0:
        raise BracketError(
            f"mean response time {target:.6g} is outside the range the model can match on [{lo}, {hi}]",
            attainable=(low_value + target, high_value + target),
        )
    if low_value == 0:
        return lo
    if high_value == 0:
        return hi
    b_hat = optimize.bisect(gap, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=400)
    logger.debug(f"Moment-matched b = {b_hat:.6g} (residual {gap(b_hat):.3g})")
    return float(b_hat)


def recover_b(
    method: str,
    u_hat,
    m_hat=None,
    ds: Optional[Dataset] = None,
) -> float:
    """Dispatch to the combination or moment-matching recovery"""
    if method == "combine":
        if m_hat is None:
            raise ValidationError("combination recovery needs the choice-only estimate")
        return recover_b_combine(u_hat, m_hat)
    if method == "moment-match":
        if ds is None:
            raise ValidationError("moment matching needs the training data")
        return recover_b_moment_match(u_hat, ds)
    raise ValidationError(f"unknown boundary recovery method '{method}'")


# Lognormal race
def _central_gradient(fn: Callable[[np.ndarray], float], theta: np.ndarray) -> np.ndarray:
    grad = np.empty_like(theta)
    for j in range(theta.size):
        h = 1e-6 * (1.0 + abs(theta[j]))
        step = np.zeros_like(theta)
        step[j] = h
        grad[j] = (fn(theta + step) - fn(theta - step)) / (2.0 * h)
    return grad


def fit_lnr(
    ds: Dataset,
    init: Optional[LnrParams] = None,
    fix_d0: bool = True,
    fix_rho: bool = True,
    restarts: Optional[int] = None,
    seed: int = 0,
) -> FitReport:
    """Minimise the speed-accuracy loss with g = LNR ratio over w (and optionally d0, rho).

    Gradients are central differences; BFGS runs from ``init`` and from
    ``restarts - 1`` perturbed starts, keeping the lowest loss.
    """
    init = init or LnrParams(w=[0.0] * ds.d)
    if len(init.w) != ds.d:
        raise ValidationError(f"initial LNR weights have {len(init.w)} entries, data have d = {ds.d}")
    restarts = restarts or settings.lnr_restarts
    rng = np.random.default_rng(seed)

    def unpack(theta: np.ndarray) -> LnrParams:
        w = theta[: ds.d]
        offset = ds.d
        d0 = init.d0
        rho = init.rho
        if not fix_d0:
            d0 = float(theta[offset])
            offset += 1
        if not fix_rho:
            rho = float(np.tanh(theta[offset]))
        return LnrParams.model_construct(w=[float(value) for value in w], d0=d0, rho=rho)

    def objective(theta: np.ndarray) -> float:
        try:
            return general_loss(ds, lnr_ratio, unpack(theta))
        except ValidationError:
            return np.inf

    start = list(init.w)
    if not fix_d0:
        start.append(init.d0)
    if not fix_rho:
        start.append(float(np.arctanh(init.rho)))
    start = np.asarray(start, dtype=np.float64)
    initial_loss = objective(start)

    best = None
    best_any = None
    for attempt in range(restarts):
        theta0 = start if attempt == 0 else start + rng.normal(scale=0.5, size=start.size)
        result = optimize.minimize(
            objective,
            theta0,
            jac=lambda theta: _central_gradient(objective, theta),
            method="BFGS",
            options={"gtol": LNR_GTOL, "maxiter": 1000},
        )
        grad_norm = float(np.max(np.abs(_central_gradient(objective, result.x))))
        candidate = (float(result.fun), grad_norm, result.x)
        logger.debug(f"LNR restart {attempt + 1}/{restarts}: loss={result.fun:.6g}, |grad|={grad_norm:.3g}")
        if best_any is None or candidate[0] < best_any[0]:
            best_any = candidate
        if np.isfinite(candidate[0]) and grad_norm < LNR_GTOL and (best is None or candidate[0] < best[0]):
            best = candidate

    if best is None:
        raise ConvergenceError(
            f"none of {restarts} LNR restarts reached gradient norm {LNR_GTOL}",
            best={"loss": best_any[0], "gradient_norm": best_any[1], "theta": best_any[2].tolist()},
        )

    loss, grad_norm, theta = best
    fitted = LnrParams(**unpack(theta).model_dump())
    return FitReport(
        model="lnr",
        estimate=list(fitted.w),
        averaged_iterate=list(fitted.w),
        sigma_hat=_sigma_list(ds),
        final_loss=loss,
        n_used=ds.n,
        lnr=fitted,
        gradient_norm=grad_norm,
        details={"restarts": restarts, "initial_loss": initial_loss},
    )


# Halfspaces under Massart noise
def halfspace_sample_size(cfg: HalfspaceConfig, d: int, b: float = 1.0, scale: float = HALFSPACE_DESK_SCALE) -> int:
    """Per-batch sample size (80 / (gamma^2 eps/4)) sqrt(1 + b^2) (d / b^2 + 2), times ``scale``"""
    raw = 80.0 / (cfg.gamma ** 2 * cfg.epsilon / 4.0) * math.sqrt(1.0 + b * b) * (d / (b * b) + 2.0)
    return max(1, math.ceil(scale * raw))


class MajorityClassifier:
    """Majority vote of sign((x - y)^T u_j) over k estimates; ties go to +1"""

    def __init__(self, estimates: np.ndarray):
        self.estimates = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
        self.estimates.flags.writeable = False

    @property
    def k(self) -> int:
        return self.estimates.shape[0]

    def votes(self, X, Y) -> np.ndarray:
        diffs = np.atleast_2d(np.asarray(X, dtype=np.float64) - np.asarray(Y, dtype=np.float64))
        return np.where(diffs @ self.estimates.T >= 0, 1, -1).sum(axis=1)

    def predict(self, X, Y) -> np.ndarray:
        return np.where(self.votes(X, Y) >= 0, 1, -1)

    def __call__(self, X, Y) -> np.ndarray:
        return self.predict(X, Y)


def fit_halfspace_majority(
    batches: Sequence[Dataset], cfg: HalfspaceConfig, sgd: Optional[SgdConfig] = None
) -> MajorityClassifier:
    """Fit one averaged-SGD estimate per batch and combine them by majority vote"""
    k = cfg.batches
    if len(batches) < k:
        raise ValidationError(f"need {k} batches, got {len(batches)}")
    batches = list(batches[:k])
    n = batches[0].n
    if any(batch.n != n for batch in batches):
        raise ValidationError("halfspace batches must have equal size")
    d = batches[0].d
    if any(batch.d != d for batch in batches):
        raise ValidationError("halfspace batches must share the dimension")

    sgd = sgd or SgdConfig()
    lam = np.array([sgd.step_size(batch.D) for batch in batches])
    w0 = np.zeros(d) if sgd.w0 is None else np.asarray(sgd.w0, dtype=np.float64)
    final, averaged = _sgd_core(
        np.stack([batch.diffs for batch in batches]),
        np.stack([batch.z for batch in batches]),
        np.stack([batch.t for batch in batches]),
        lam,
        np.tile(w0, (k, 1)),
        sgd.passes,
    )
    logger.info(f"Fitted {k} halfspace estimates on batches of {n}")
    return MajorityClassifier(averaged if sgd.average_iterates else final)
