"""Experiment manager: per-agent fits and evaluations on a bounded worker pool"""

import asyncio
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from ..config import settings
from ..exceptions import ValidationError
from ..models.dataset import Dataset
from ..models.params import DdmParams, SgdConfig
from ..schemas.report import AgentFitReport, AgentResult, AgentStatus, FitReport
from ..schemas.run import BoundaryMethod, DdmSolver, ModelKind, RunConfig
from . import estimators
from .evaluation import evaluate_agent
from .simulators import spawn_seeds

logger = logging.getLogger(__name__)

Agent = Tuple[str, Dataset]
ResultT = TypeVar("ResultT")


def fit_agent(ds: Dataset, cfg: RunConfig, seed: int = 0) -> FitReport:
    """Fit one agent's data with the configured model"""
    if cfg.model == ModelKind.DDM_CHOICE_ONLY:
        return estimators.fit_logistic(ds, cfg.reg)
    if cfg.model == ModelKind.LNR:
        return estimators.fit_lnr(ds, restarts=cfg.lnr_restarts, seed=seed)

    if cfg.ddm_solver == DdmSolver.EXACT:
        report = estimators.fit_ddm_exact(ds)
    else:
        report = estimators.fit_ddm_sgd(ds, SgdConfig(lam=cfg.lam, passes=cfg.passes))

    b_hat = None
    if cfg.b_method == BoundaryMethod.MOMENT_MATCH:
        b_hat = estimators.recover_b_moment_match(report.estimate, ds)
    elif cfg.b_method == BoundaryMethod.COMBINE:
        m_hat = estimators.fit_logistic(ds, cfg.reg).estimate
        b_hat = estimators.recover_b_combine(report.estimate, m_hat)
    return report.model_copy(update={"model": cfg.model.value, "b_hat": b_hat})


class ExperimentManager:
    """Runs one task per agent, at most ``max_workers`` at a time.

    Each agent gets its own seed spawned from the run seed, so results do not
    depend on scheduling. Failures are recorded per agent and the batch goes on.
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or settings.max_concurrent_fits

    async def _run_all(
        self,
        agents: Sequence[Agent],
        seed: int,
        max_workers: Optional[int],
        task: Callable[[str, Dataset, int], ResultT],
        on_failure: Callable[[str, Exception], ResultT],
    ) -> List[ResultT]:
        semaphore = asyncio.Semaphore(max_workers or self.max_workers)
        seeds = spawn_seeds(seed, len(agents))

        async def run_one(agent_id: str, ds: Dataset, agent_seed: int):
            async with semaphore:
                try:
                    result = await asyncio.to_thread(task, agent_id, ds, agent_seed)
                    logger.info(f"Agent {agent_id} completed")
                    return agent_id, result
                except Exception as e:
                    logger.warning(f"Agent {agent_id} failed: {e}")
                    return agent_id, on_failure(agent_id, e)

        outcomes = await asyncio.gather(
            *(run_one(agent_id, ds, agent_seed) for (agent_id, ds), agent_seed in zip(agents, seeds))
        )
        return [result for _, result in sorted(outcomes, key=lambda item: item[0])]

    async def fit_agents(self, agents: Sequence[Agent], cfg: RunConfig) -> List[AgentFitReport]:
        """Fit every agent; output ordered by agent_id"""
        logger.info(f"Fitting {len(agents)} agents with model {cfg.model.value}")

        def task(agent_id: str, ds: Dataset, agent_seed: int) -> AgentFitReport:
            return AgentFitReport(
                agent_id=agent_id, status=AgentStatus.COMPLETED, report=fit_agent(ds, cfg, agent_seed)
            )

        def failed(agent_id: str, error: Exception) -> AgentFitReport:
            return AgentFitReport(agent_id=agent_id, status=AgentStatus.FAILED, error_message=str(error))

        return await self._run_all(agents, cfg.seed, cfg.max_workers, task, failed)

    async def evaluate_agents(
        self,
        agents: Sequence[Agent],
        cfg: RunConfig,
        oracle: Optional[Dict[str, DdmParams]] = None,
    ) -> List[AgentResult]:
        """Split, fit and score every agent; output ordered by agent_id"""
        logger.info(f"Evaluating {len(agents)} agents (n_train={cfg.n_train})")

        def task(agent_id: str, ds: Dataset, agent_seed: int) -> AgentResult:
            params = None
            if oracle is not None:
                if agent_id not in oracle:
                    raise ValidationError(f"no oracle parameters for agent {agent_id}")
                params = oracle[agent_id]
            return evaluate_agent(agent_id, ds, cfg, oracle=params, seed=agent_seed)

        def failed(agent_id: str, error: Exception) -> AgentResult:
            return AgentResult(agent_id=agent_id, status=AgentStatus.FAILED, error_message=str(error))

        return await self._run_all(agents, cfg.seed, cfg.max_workers, task, failed)


# Global experiment manager instance
experiment_manager = ExperimentManager()
