"""Pydantic schemas for configuration and reports"""

from .report import (
    AgentStatus,
    FitReport,
    AgentFitReport,
    AgentResult,
    SummaryTables,
    IdentityCheckReport,
)
from .run import (
    ModelKind,
    DdmSolver,
    BoundaryMethod,
    Design,
    RunConfig,
    EvaluationConfig,
    SimulationConfig,
)

__all__ = [
    "AgentStatus",
    "FitReport",
    "AgentFitReport",
    "AgentResult",
    "SummaryTables",
    "IdentityCheckReport",
    "ModelKind",
    "DdmSolver",
    "BoundaryMethod",
    "Design",
    "RunConfig",
    "EvaluationConfig",
    "SimulationConfig",
]
