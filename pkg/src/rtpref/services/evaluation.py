"""Held-out evaluation: splits, choice error rates, response-time coverage, discount factors"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate

from ..exceptions import ConvergenceError, NumericalError, ValidationError
from ..models.dataset import Dataset
from ..models.params import DdmParams, LnrParams, SeriesControl, SgdConfig
from ..schemas.report import AgentResult, AgentStatus, SummaryTables
from ..schemas.run import BoundaryMethod, DdmSolver, RunConfig
from . import estimators
from .ddm_math import choice_prob, expected_t, rt_density, var_t
from .lnr_math import lnr_ratio

logger = logging.getLogger(__name__)

Predictor = Callable[[np.ndarray, np.ndarray], np.ndarray]

SUMMARY_METRICS = [
    "error_rate_ddm_rt",
    "error_rate_ddm_choice_only",
    "error_rate_lnr",
    "miscoverage",
    "predicted_miscoverage",
    "discount_ratio",
]
HISTOGRAM_BINS = 10


def split(ds: Dataset, n_train: int) -> Tuple[Dataset, Dataset]:
    """First n_train rows for training, the rest for testing; order preserved"""
    if not 0 < n_train < ds.n:
        raise ValidationError(f"n_train must lie in [1, {ds.n - 1}] for {ds.n} rows, got {n_train}")
    return ds.take(slice(0, n_train)), ds.take(slice(n_train, ds.n))


def linear_predictor(weights) -> Predictor:
    """sign((x - y)^T w), with 0 mapped to +1"""
    weights = np.asarray(weights, dtype=np.float64)
    return lambda X, Y: np.where((np.asarray(X) - np.asarray(Y)) @ weights >= 0, 1, -1)


def lnr_predictor(params: LnrParams) -> Predictor:
    return lambda X, Y: np.where(np.asarray(lnr_ratio(X, Y, params)) >= 0, 1, -1)


def choice_error_rate(test: Dataset, predictor: Predictor) -> float:
    """Fraction of rows whose recorded choice differs from the prediction"""
    predicted = np.asarray(predictor(test.X, test.Y)).reshape(-1)
    return float(np.mean(predicted != test.z))


def expected_error_rate(test: Dataset, params: DdmParams) -> float:
    """Expected error of the oracle predictor sign(v) under the DDM choice law"""
    v = params.drift(test.X, test.Y)
    predicted = np.where(v >= 0, 1.0, -1.0)
    return float(np.mean(choice_prob(v, params.b, -predicted)))


def rt_intervals(v, b: float) -> np.ndarray:
    """Rows of [E[t] - sd, E[t] + sd], lower end clamped at 0"""
    mean = np.atleast_1d(expected_t(v, b))
    sd = np.sqrt(np.atleast_1d(var_t(v, b)))
    return np.column_stack([np.maximum(mean - sd, 0.0), mean + sd])


def rt_coverage(test: Dataset, params: DdmParams) -> Tuple[np.ndarray, float]:
    """Mean +/- one standard deviation intervals and the fraction of times outside them"""
    intervals = rt_intervals(params.drift(test.X, test.Y), params.b)
    outside = (test.t < intervals[:, 0]) | (test.t > intervals[:, 1])
    return intervals, float(np.mean(outside))


def miscoverage_probability(v: float, b: float, ctrl: Optional[SeriesControl] = None) -> float:
    """P(|t - E[t]| > sd) under the DDM, by quadrature of the response-time density"""
    lower, upper = rt_intervals(v, b)[0]
    inside, _ = integrate.quad(lambda t: rt_density(t, v, b, ctrl), lower, upper, limit=200, epsabs=1e-12)
    return float(min(max(1.0 - inside, 0.0), 1.0))


def predicted_miscoverage(test: Dataset, params: DdmParams, ctrl: Optional[SeriesControl] = None) -> float:
    drifts = params.drift(test.X, test.Y)
    return float(np.mean([miscoverage_probability(float(v), params.b, ctrl) for v in drifts]))


def discount_factor(w) -> float:
    """exp(-w_t / w_r) for weights laid out as [w_r, -w_t] over [money, delay]"""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (2,):
        raise ValidationError(f"discount factor needs weights [w_money, -w_time], got {w.size} entries")
    if w[0] <= 0:
        raise ValidationError(f"money weight must be positive, got {w[0]:.4g}")
    return math.exp(w[1] / w[0])


def _discounts(result: AgentResult, u, m):
    """Fill discount fields; anomalous signs are kept but excluded from the ratio summary"""
    if len(u) != 2:
        result.flags.append("discount-undefined-for-d")
        result.discount_excluded = True
        return
    for name, weights in (("ddm-rt", u), ("choice-only", m)):
        if weights[0] <= 0:
            result.flags.append(f"{name}-nonpositive-money-weight")
        elif weights[1] > 0:
            result.flags.append(f"{name}-positive-time-weight")
    if u[0] > 0:
        result.discount_ddm_rt = discount_factor(u)
    if m[0] > 0:
        result.discount_choice_only = discount_factor(m)
    if result.discount_ddm_rt is not None and result.discount_choice_only is not None:
        result.discount_ratio = result.discount_ddm_rt / result.discount_choice_only
    result.discount_excluded = result.discount_ratio is None or any(
        flag.endswith("weight") for flag in result.flags
    )


def _fit_ddm(train: Dataset, cfg: RunConfig) -> np.ndarray:
    if cfg.ddm_solver == DdmSolver.EXACT:
        report = estimators.fit_ddm_exact(train)
    else:
        report = estimators.fit_ddm_sgd(train, SgdConfig(lam=cfg.lam, passes=cfg.passes))
    return np.asarray(report.estimate)


def _fit_lnr(train: Dataset, cfg: RunConfig, seed: int, result: AgentResult) -> Optional[LnrParams]:
    try:
        return estimators.fit_lnr(train, restarts=cfg.lnr_restarts, seed=seed).lnr
    except ConvergenceError as e:
        # keep the lowest loss reached; the flag records that it is not stationary
        logger.warning(f"Agent {result.agent_id}: {e}")
        result.flags.append("lnr-not-stationary")
        return LnrParams(w=e.best["theta"][: train.d])


def evaluate_agent(
    agent_id: str,
    ds: Dataset,
    cfg: RunConfig,
    oracle: Optional[DdmParams] = None,
    seed: int = 0,
) -> AgentResult:
    """Split, fit the three models on the training rows, score them on the test rows.

    With ``oracle`` the DDM parameters are used as given and nothing is fitted;
    the LNR column is then left empty.
    """
    train, test = split(ds, cfg.n_train)
    result = AgentResult(agent_id=agent_id, n_train=train.n, n_test=test.n)

    if oracle is not None:
        u, m, b = oracle.u, oracle.m, oracle.b
        result.flags.append("oracle")
        lnr = None
    else:
        u = _fit_ddm(train, cfg)
        m = np.asarray(estimators.fit_logistic(train, cfg.reg).estimate)
        b = None
        if cfg.b_method != BoundaryMethod.NONE:
            try:
                b = estimators.recover_b(cfg.b_method.value, u, m, train)
            except NumericalError as e:
                logger.warning(f"Agent {agent_id}: boundary not recovered: {e}")
                result.flags.append("boundary-not-recovered")
        lnr = _fit_lnr(train, cfg, seed, result)

    result.error_rate_ddm_rt = choice_error_rate(test, linear_predictor(u))
    result.error_rate_ddm_choice_only = choice_error_rate(test, linear_predictor(m))
    if lnr is not None:
        result.error_rate_lnr = choice_error_rate(test, lnr_predictor(lnr))

    if b is not None:
        params = DdmParams.from_u(u, b)
        result.b_hat = b
        _, result.miscoverage = rt_coverage(test, params)
        result.predicted_miscoverage = predicted_miscoverage(test, params, SeriesControl(tol=cfg.tol))

    _discounts(result, list(u), list(m))
    return AgentResult.model_validate(result.model_dump())


def results_frame(results: List[AgentResult]) -> pd.DataFrame:
    """One row per agent, flags joined by ';'"""
    rows = []
    for result in results:
        row = result.model_dump(mode="json")
        row["flags"] = ";".join(result.flags)
        rows.append(row)
    return pd.DataFrame(rows)


def _ecdf(values: np.ndarray) -> dict:
    ordered = np.sort(values)
    return {"x": ordered.tolist(), "cdf": (np.arange(1, ordered.size + 1) / ordered.size).tolist()}


def _histogram(values: np.ndarray) -> dict:
    span = None
    center = float(values.mean())
    if np.ptp(values) <= 1e-12 * max(1.0, abs(center)):
        # values equal up to rounding
        span = (center - 0.5, center + 0.5)
    counts, edges = np.histogram(values, bins=HISTOGRAM_BINS, range=span)
    return {"edges": edges.tolist(), "counts": counts.astype(float).tolist()}


def summarize(results: List[AgentResult]) -> SummaryTables:
    """Means, empirical CDFs and histograms across agents"""
    if not results:
        raise ValidationError("no agent results to summarize")

    frame = results_frame(results)
    completed = frame[frame["status"] == AgentStatus.COMPLETED.value]
    ratio_rows = completed[~completed["discount_excluded"].astype(bool)]

    means, cdf_grids, histograms = {}, {}, {}
    for metric in SUMMARY_METRICS:
        source = ratio_rows if metric == "discount_ratio" else completed
        values = pd.to_numeric(source[metric], errors="coerce").dropna().to_numpy(dtype=np.float64)
        if values.size == 0:
            means[metric] = None
            continue
        means[metric] = float(values.mean())
        cdf_grids[metric] = _ecdf(values)
        histograms[metric] = _histogram(values)

    above_one = None
    if "discount_ratio" in cdf_grids:
        ratios = np.asarray(cdf_grids["discount_ratio"]["x"])
        above_one = float(np.mean(ratios > 1.0))

    n_excluded = int(completed["discount_excluded"].astype(bool).sum())
    if n_excluded:
        logger.warning(f"{n_excluded} agents excluded from the discount-ratio summary")

    return SummaryTables(
        n_agents=len(results),
        n_failed=len(results) - len(completed),
        n_discount_excluded=n_excluded,
        means=means,
        cdf_grids=cdf_grids,
        histograms=histograms,
        fraction_discount_ratio_above_one=above_one,
    )
