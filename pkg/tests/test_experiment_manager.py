"""Experiment manager tests"""

import numpy as np
import pytest

from rtpref.models import DdmParams, build_dataset
from rtpref.schemas import AgentStatus, RunConfig
from rtpref.schemas.run import BoundaryMethod, DdmSolver, ModelKind
from rtpref.services import ExperimentManager, fit_agent, simulators


def _agents(count, n=120, seed=0):
    population = simulators.synthetic_population(count, n, seed)
    return [(agent_id, ds) for agent_id, ds, _ in population]


def test_fit_agent_dispatch():
    """Test that each model kind reaches its estimator"""
    _, ds = _agents(1)[0]
    ddm = fit_agent(ds, RunConfig(model=ModelKind.DDM, ddm_solver=DdmSolver.EXACT))
    assert ddm.model == "ddm" and ddm.b_hat > 0
    combined = fit_agent(ds, RunConfig(model=ModelKind.DDM, b_method=BoundaryMethod.COMBINE))
    assert combined.b_hat > 0
    choice_only = fit_agent(ds, RunConfig(model=ModelKind.DDM_CHOICE_ONLY))
    assert choice_only.model == "ddm-choice-only"
    no_boundary = fit_agent(ds, RunConfig(model=ModelKind.EXTENDED_DDM, b_method=BoundaryMethod.NONE))
    assert no_boundary.model == "extended-ddm" and no_boundary.b_hat is None


@pytest.mark.asyncio
async def test_fit_agents_sorted_by_id():
    """Test that results come back ordered by agent_id"""
    agents = list(reversed(_agents(4)))
    reports = await ExperimentManager(max_workers=2).fit_agents(agents, RunConfig(ddm_solver=DdmSolver.EXACT))
    assert [report.agent_id for report in reports] == ["agent_000", "agent_001", "agent_002", "agent_003"]
    assert all(report.status == AgentStatus.COMPLETED for report in reports)


@pytest.mark.asyncio
async def test_failure_is_isolated():
    """Test that one failing agent does not stop the others"""
    rng = np.random.default_rng(1)
    agents = []
    for index in range(2):
        X, Y = simulators.uniform_pairs(200, 2, rng)
        agents.append((f"agent_{index:03d}", simulators.simulate_ddm_dataset(X, Y, DdmParams(w=[0.5, -0.5], b=1.0), rng)))
    separable = build_dataset([([1.0, 0.0], [0.0, 0.0], 1, 1.0), ([0.0, 0.0], [1.0, 0.0], -1, 1.0)])
    agents.append(("agent_bad", separable))
    cfg = RunConfig(model=ModelKind.DDM_CHOICE_ONLY, reg=0.0)
    reports = await ExperimentManager().fit_agents(agents, cfg)
    by_id = {report.agent_id: report for report in reports}
    assert by_id["agent_bad"].status == AgentStatus.FAILED
    assert "separable" in by_id["agent_bad"].error_message
    assert by_id["agent_000"].status == AgentStatus.COMPLETED


@pytest.mark.asyncio
async def test_results_do_not_depend_on_worker_count():
    """Test determinism across worker pool sizes"""
    agents = _agents(3, n=140, seed=8)
    cfg = RunConfig(n_train=100, lnr_restarts=2)
    serial = await ExperimentManager(max_workers=1).evaluate_agents(agents, cfg)
    parallel = await ExperimentManager(max_workers=3).evaluate_agents(agents, cfg)
    assert [r.model_dump() for r in serial] == [r.model_dump() for r in parallel]


@pytest.mark.asyncio
async def test_missing_oracle_agent_fails_that_agent():
    """Test that an agent without oracle parameters is recorded as failed"""
    agents = _agents(2, n=140)
    oracle = {"agent_000": DdmParams(w=[0.3, -0.1], b=1.0)}
    results = await ExperimentManager().evaluate_agents(agents, RunConfig(n_train=100), oracle)
    assert results[0].status == AgentStatus.COMPLETED
    assert results[1].status == AgentStatus.FAILED
    assert "agent_001" in results[1].error_message
    assert np.isfinite(results[0].error_rate_ddm_rt)
