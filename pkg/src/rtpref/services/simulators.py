"""Samplers for the DDM, the extended DDM, the lognormal race and Massart noise.

All samplers draw from ``numpy.random.Generator`` (PCG64). Functions that take
``seed`` accept an integer or an existing generator; batch samplers take the
generator directly so that callers control the stream.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import special

from ..exceptions import RejectionLimitError, StepLimitError, ValidationError
from ..models.dataset import Dataset
from ..models.params import DdmParams, LnrParams, StartDistribution, StartKind
from .ddm_math import driftless_cdf

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, None]

# |b v| above which the exact sampler hands over to path simulation
EXACT_BETA_LIMIT = 8.0
MAX_REJECTION_ROUNDS = 10_000
MAX_PROPOSALS_PER_ROW = 1024
MAX_PROPOSALS_PER_BATCH = 2_000_000
DEFAULT_STEP_CAP = 10**9


def make_rng(seed: Seed) -> np.random.Generator:
    """PCG64 generator for a seed, or the generator itself"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Independent child seeds for parallel streams"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def default_dt(b: float) -> float:
    return 1e-4 * b * b


@lru_cache(maxsize=1)
def _unit_exit_time_table() -> Tuple[np.ndarray, np.ndarray]:
    """Tabulated CDF of the driftless exit time of (-1, 1)"""
    grid = np.geomspace(0.02, 40.0, 20_001)
    cdf = driftless_cdf(grid, 1.0)
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return cdf[keep], grid[keep]


def sample_driftless_exit_time(b, rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF draws of the driftless exit time; scales as b^2"""
    cdf, grid = _unit_exit_time_table()
    return np.asarray(b) ** 2 * np.interp(rng.random(size), cdf, grid)


def _proposal_batches(reps: np.ndarray, limit: int):
    """Slices of consecutive rows whose proposal counts sum to at most limit (one row minimum)"""
    totals = np.cumsum(reps)
    start = 0
    while start < reps.size:
        offset = totals[start - 1] if start else 0
        stop = max(start + 1, int(np.searchsorted(totals, offset + limit, side="right")))
        yield slice(start, stop)
        start = stop


def _rejection_round(rows, v, b, t, rng, reps) -> np.ndarray:
    """One proposal batch for rows; fills t where accepted and returns the rows still pending"""
    owner = np.repeat(np.arange(rows.size), reps)
    proposal = sample_driftless_exit_time(b[rows][owner], rng, owner.size)
    accepted = rng.random(owner.size) < np.exp(-0.5 * v[rows][owner] ** 2 * proposal)

    first = np.full(rows.size, -1)
    hits = np.flatnonzero(accepted)
    # reversed so that the earliest accepted proposal of each row wins
    first[owner[hits[::-1]]] = hits[::-1]
    done = first >= 0
    t[rows[done]] = proposal[first[done]]
    return rows[~done]


def _exact_exit_times(v: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampling: propose T0 from the driftless law, accept with exp(-v^2 T0 / 2)"""
    t = np.empty(v.shape[0])
    pending = np.arange(v.shape[0])
    for _ in range(MAX_REJECTION_ROUNDS):
        if pending.size == 0:
            return t
        # acceptance rate is 1 / cosh(b v); ask for about that many proposals per row
        reps = np.clip(np.ceil(np.cosh(b[pending] * v[pending])), 1, MAX_PROPOSALS_PER_ROW).astype(int)
        pending = np.concatenate(
            [
                _rejection_round(pending[batch], v, b, t, rng, reps[batch])
                for batch in _proposal_batches(reps, MAX_PROPOSALS_PER_BATCH)
            ]
        )
    raise RejectionLimitError(
        f"{pending.size} rows not accepted after {MAX_REJECTION_ROUNDS} rejection rounds"
    )


def _path_exit(
    v: np.ndarray,
    b: np.ndarray,
    zeta0: np.ndarray,
    dt: np.ndarray,
    rng: np.random.Generator,
    max_steps: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Euler walk W += v dt + sqrt(dt) N(0, 1) until |W| >= b.

    Between grid points a Brownian-bridge test catches boundary crossings the
    grid would miss, which removes most of the overshoot bias.
    """
    n = v.shape[0]
    z = np.zeros(n)
    t = np.zeros(n)
    position = zeta0.astype(np.float64).copy()
    active = np.arange(n)
    if max_steps is None:
        max_steps = DEFAULT_STEP_CAP

    step = 0
    while active.size:
        step += 1
        if step > max_steps:
            raise StepLimitError(f"{active.size} paths still inside the boundaries after {max_steps} steps")

        va, ba, dta = v[active], b[active], dt[active]
        old = position[active]
        new = old + va * dta + np.sqrt(dta) * rng.standard_normal(active.size)

        above = new >= ba
        below = new <= -ba
        inside = ~(above | below)

        with np.errstate(over="ignore"):
            p_up = np.where(inside, np.exp(-2.0 * (ba - old) * (ba - new) / dta), 0.0)
            p_down = np.where(inside, np.exp(-2.0 * (ba + old) * (ba + new) / dta), 0.0)
        u_up = rng.random(active.size)
        u_down = rng.random(active.size)
        hit_up = above | (u_up < p_up)
        hit_down = ~hit_up & (below | (u_down < p_down))
        finished = hit_up | hit_down

        done = active[finished]
        z[done] = np.where(hit_up[finished], 1.0, -1.0)
        t[done] = step * dta[finished]

        position[active] = new
        active = active[~finished]
    return z, t


def _broadcast(*arrays) -> List[np.ndarray]:
    return [np.ascontiguousarray(a, dtype=np.float64) for a in np.broadcast_arrays(*arrays)]


def sample_ddm_batch(v, b, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Exact (z, t) draws for arrays of drifts and boundaries.

    Choice and time are independent given (v, b), so z is drawn from the
    logistic choice probability and t from the exit-time law. Rows with
    |b v| > 8 fall back to path simulation with dt = (b / 50)^2.
    """
    v, b = _broadcast(np.atleast_1d(v), np.atleast_1d(b))
    if np.any(b <= 0):
        raise ValidationError("boundary b must be strictly positive")

    n = v.shape[0]
    z = np.where(rng.random(n) < special.expit(2.0 * b * v), 1.0, -1.0)
    t = np.empty(n)

    strong = np.abs(b * v) > EXACT_BETA_LIMIT
    if np.any(~strong):
        t[~strong] = _exact_exit_times(v[~strong], b[~strong], rng)
    if np.any(strong):
        logger.debug(f"{int(strong.sum())} rows with |bv| > {EXACT_BETA_LIMIT} use path simulation")
        bs = b[strong]
        z[strong], t[strong] = _path_exit(v[strong], bs, np.zeros(bs.shape[0]), (bs / 50.0) ** 2, rng)
    return z, t


def sample_ddm(v: float, b: float, seed: Seed = None) -> Tuple[int, float]:
    """One exact DDM draw"""
    z, t = sample_ddm_batch(v, b, make_rng(seed))
    return int(z[0]), float(t[0])


def sample_ddm_path(
    v: float,
    b: float,
    zeta0: float = 0.0,
    dt: Optional[float] = None,
    seed: Seed = None,
    max_steps: Optional[int] = None,
) -> Tuple[int, float]:
    """One path-simulated draw started at zeta0"""
    if b <= 0:
        raise ValidationError("boundary b must be strictly positive")
    if abs(zeta0) >= b:
        raise ValidationError(f"start {zeta0} must lie strictly inside (-{b}, {b})")
    dt = default_dt(b) if dt is None else dt
    if dt <= 0:
        raise ValidationError("time step must be positive")
    z, t = _path_exit(
        np.array([v], dtype=float), np.array([b], dtype=float), np.array([zeta0], dtype=float),
        np.array([dt]), make_rng(seed), max_steps,
    )
    return int(z[0]), float(t[0])


def sample_extended_ddm_batch(
    v,
    b,
    start: StartDistribution,
    rng: np.random.Generator,
    dt: Optional[float] = None,
    max_steps: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Path draws with a random mean-zero starting point"""
    v, b = _broadcast(np.atleast_1d(v), np.atleast_1d(b))
    if np.any(b <= 0):
        raise ValidationError("boundary b must be strictly positive")
    start.check_inside(b)
    steps = default_dt(b) if dt is None else np.full_like(b, dt)
    zeta0 = start.draw(rng, v.shape[0])
    return _path_exit(v, b, zeta0, steps, rng, max_steps)


def sample_extended_ddm(
    v: float,
    b: float,
    start: StartDistribution,
    seed: Seed = None,
    dt: Optional[float] = None,
) -> Tuple[int, float]:
    """One extended-DDM draw"""
    z, t = sample_extended_ddm_batch(v, b, start, make_rng(seed), dt)
    return int(z[0]), float(t[0])


def sample_lnr_batch(nu_x, nu_y, d0: float, rho: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Race draws: tau = D / V per alternative, z = +1 iff tau_x <= tau_y, t = min"""
    if not -1.0 < rho < 1.0:
        raise ValidationError(f"drift correlation must lie in (-1, 1), got {rho}")
    nu_x, nu_y = _broadcast(np.atleast_1d(nu_x), np.atleast_1d(nu_y))
    n = nu_x.shape[0]

    e1 = rng.standard_normal(n)
    e2 = rng.standard_normal(n)
    log_vx = nu_x + e1
    log_vy = nu_y + rho * e1 + math.sqrt(1.0 - rho * rho) * e2
    log_dx = d0 + rng.standard_normal(n)
    log_dy = d0 + rng.standard_normal(n)

    log_tau_x = log_dx - log_vx
    log_tau_y = log_dy - log_vy
    z = np.where(log_tau_x <= log_tau_y, 1.0, -1.0)
    t = np.exp(np.minimum(log_tau_x, log_tau_y))
    return z, t


def sample_lnr(nu_x: float, nu_y: float, d0: float = 0.0, rho: float = 0.0, seed: Seed = None) -> Tuple[int, float]:
    """One lognormal-race draw"""
    z, t = sample_lnr_batch(nu_x, nu_y, d0, rho, make_rng(seed))
    return int(z[0]), float(t[0])


EtaFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def rcn_eta(level: float) -> EtaFunction:
    """Constant flip rate (random classification noise)"""
    return lambda X, Y: np.full(np.atleast_2d(X).shape[0], level)


def ddm_eta(w_true, b: float) -> EtaFunction:
    """Flip rate induced by a linear DDM: 1 / (1 + exp(2 b |(x - y)^T w|))"""
    w_true = np.asarray(w_true, dtype=np.float64)
    return lambda X, Y: special.expit(-2.0 * b * np.abs((np.atleast_2d(X) - np.atleast_2d(Y)) @ w_true))


def sample_massart(x, y, w_true, eta_fn: EtaFunction, seed: Seed = None) -> np.ndarray:
    """Noisy halfspace labels: sign((x - y)^T w) flipped with probability eta(x, y) < 1/2"""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    w_true = np.asarray(w_true, dtype=np.float64)

    eta = np.asarray(eta_fn(X, Y), dtype=np.float64).reshape(-1)
    if np.any(eta < 0) or np.any(eta >= 0.5):
        bad = int(np.argmax((eta < 0) | (eta >= 0.5)))
        raise ValidationError(f"flip probability {eta[bad]:.4g} outside [0, 0.5)", row=bad + 1)

    clean = np.where((X - Y) @ w_true >= 0, 1.0, -1.0)
    flip = make_rng(seed).random(X.shape[0]) < eta
    return np.where(flip, -clean, clean)


def uniform_pairs(n: int, d: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Attribute vectors drawn uniformly from the unit cube"""
    return rng.random((n, d)), rng.random((n, d))


def dated_reward_pairs(n: int, rng: np.random.Generator, delayed_amount: float = 10.0, max_delay: int = 10):
    """Immediate amount [m, 0] against a delayed reward [10, t_d]"""
    amount = np.round(rng.uniform(0.5, delayed_amount, size=n), 2)
    delay = rng.integers(1, max_delay + 1, size=n).astype(float)
    X = np.column_stack([amount, np.zeros(n)])
    Y = np.column_stack([np.full(n, delayed_amount), delay])
    return X, Y


def margin_pairs(n: int, d: int, w_true, gamma: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs with ||x - y|| <= 1 and |(x - y)^T w| >= gamma"""
    w_true = np.asarray(w_true, dtype=np.float64)
    diffs = np.empty((0, d))
    while diffs.shape[0] < n:
        candidate = rng.uniform(-1.0, 1.0, size=(2 * n, d)) / math.sqrt(d)
        keep = np.abs(candidate @ w_true) >= gamma
        diffs = np.vstack([diffs, candidate[keep]])
    diffs = diffs[:n]
    base = rng.random((n, d))
    return base + 0.5 * diffs, base - 0.5 * diffs


def simulate_ddm_dataset(X, Y, params: DdmParams, rng: np.random.Generator) -> Dataset:
    z, t = sample_ddm_batch(params.drift(X, Y), params.b, rng)
    return Dataset.from_arrays(X, Y, z, t)


def simulate_extended_ddm_dataset(
    X, Y, params: DdmParams, start: StartDistribution, rng: np.random.Generator, dt: Optional[float] = None
) -> Dataset:
    z, t = sample_extended_ddm_batch(params.drift(X, Y), params.b, start, rng, dt)
    return Dataset.from_arrays(X, Y, z, t)


def simulate_lnr_dataset(X, Y, params: LnrParams, rng: np.random.Generator) -> Dataset:
    w = np.asarray(params.w)
    z, t = sample_lnr_batch(np.asarray(X) @ w, np.asarray(Y) @ w, params.d0, params.rho, rng)
    return Dataset.from_arrays(X, Y, z, t)


def simulate_dataset(
    model: str,
    X,
    Y,
    params: Union[DdmParams, LnrParams],
    rng: np.random.Generator,
    start: Optional[StartDistribution] = None,
    dt: Optional[float] = None,
) -> Dataset:
    """Draw (z, t) for every row of a design under the named generative model"""
    if model in ("ddm", "ddm-choice-only"):
        return simulate_ddm_dataset(X, Y, params, rng)
    if model == "extended-ddm":
        return simulate_extended_ddm_dataset(X, Y, params, start or StartDistribution(), rng, dt)
    if model == "lnr":
        return simulate_lnr_dataset(X, Y, params, rng)
    raise ValidationError(f"unknown model '{model}'")


def draw_population_params(rng: np.random.Generator) -> DdmParams:
    """Heterogeneous dated-reward agent: w = [w_r, -w_t], boundary b"""
    w_r = rng.uniform(0.15, 0.45)
    w_t = rng.uniform(0.05, 0.30)
    b = rng.uniform(0.8, 1.6)
    return DdmParams(w=[float(w_r), float(-w_t)], b=float(b))


def synthetic_population(
    n_agents: int, n_obs: int, seed: int
) -> List[Tuple[str, Dataset, DdmParams]]:
    """Dated-reward DDM agents with individually drawn parameters"""
    population = []
    for index, child in enumerate(spawn_seeds(seed, n_agents)):
        rng = make_rng(child)
        params = draw_population_params(rng)
        X, Y = dated_reward_pairs(n_obs, rng)
        population.append((f"agent_{index:03d}", simulate_ddm_dataset(X, Y, params, rng), params))
    logger.info(f"Simulated {n_agents} dated-reward agents with {n_obs} trials each")
    return population


def start_for(b: float, half_width_fraction: float) -> StartDistribution:
    """Uniform(-f b, f b) start, or the point mass when f = 0"""
    if half_width_fraction == 0:
        return StartDistribution(kind=StartKind.POINT)
    return StartDistribution(kind=StartKind.UNIFORM, a=half_width_fraction * b)
