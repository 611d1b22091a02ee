"""Pydantic schemas for fit reports, per-agent results and summary tables"""

from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..models.params import LnrParams

PSD_TOLERANCE = 1e-10


class AgentStatus(str, Enum):
    """Outcome of one agent's task"""
    COMPLETED = "completed"
    FAILED = "failed"


class FitReport(BaseModel):
    """Result of one estimator run.

    ``estimate`` is u = w/b for the speed-accuracy fits, m = b w for the
    choice-only logistic fit and w for the LNR fit.
    """

    model: str = Field(..., description="ddm | ddm-choice-only | lnr | extended-ddm")
    estimate: List[float]
    averaged_iterate: List[float]
    sigma_hat: List[List[float]] = Field(..., description="Empirical second moment of x - y")
    final_loss: float
    n_used: int = Field(..., ge=0)

    b_hat: Optional[float] = Field(None, gt=0, description="Recovered boundary, if requested")
    lnr: Optional[LnrParams] = None
    gradient_norm: Optional[float] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "model": "ddm",
                "estimate": [0.31, -0.12],
                "averaged_iterate": [0.31, -0.12],
                "sigma_hat": [[12.5, -1.1], [-1.1, 8.4]],
                "final_loss": -0.043,
                "n_used": 100,
                "b_hat": 1.21,
            }
        }
    )

    @field_validator("sigma_hat")
    @classmethod
    def _symmetric_psd(cls, value: List[List[float]]) -> List[List[float]]:
        sigma = np.asarray(value, dtype=np.float64)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("sigma_hat must be a square matrix")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(sigma).max(initial=0.0)))):
            raise ValueError("sigma_hat must be symmetric")
        if sigma.size and np.linalg.eigvalsh(sigma).min() < -PSD_TOLERANCE:
            raise ValueError("sigma_hat must be positive semidefinite")
        return value


class AgentFitReport(BaseModel):
    """One agent's fit, or the error that stopped it"""
    agent_id: str
    status: AgentStatus
    report: Optional[FitReport] = None
    error_message: Optional[str] = None


class AgentResult(BaseModel):
    """Held-out evaluation of one agent under the three models"""

    agent_id: str
    status: AgentStatus = AgentStatus.COMPLETED
    error_message: Optional[str] = None

    n_train: int = 0
    n_test: int = 0

    error_rate_ddm_rt: Optional[float] = Field(None, ge=0, le=1)
    error_rate_ddm_choice_only: Optional[float] = Field(None, ge=0, le=1)
    error_rate_lnr: Optional[float] = Field(None, ge=0, le=1)
    miscoverage: Optional[float] = Field(None, ge=0, le=1)
    predicted_miscoverage: Optional[float] = Field(None, ge=0, le=1)

    b_hat: Optional[float] = None
    discount_ddm_rt: Optional[float] = Field(None, gt=0)
    discount_choice_only: Optional[float] = Field(None, gt=0)
    discount_ratio: Optional[float] = Field(None, gt=0)
    discount_excluded: bool = False
    flags: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _ratio_consistent(self) -> "AgentResult":
        if self.discount_ratio is not None:
            if self.discount_ddm_rt is None or self.discount_choice_only is None:
                raise ValueError("discount_ratio requires both discount factors")
            expected = self.discount_ddm_rt / self.discount_choice_only
            if not np.isclose(self.discount_ratio, expected, rtol=1e-12, atol=0.0):
                raise ValueError("discount_ratio must equal discount_ddm_rt / discount_choice_only")
        return self


class SummaryTables(BaseModel):
    """Population summary: means, empirical CDF grids and histograms"""

    n_agents: int
    n_failed: int = 0
    n_discount_excluded: int = 0
    means: Dict[str, Optional[float]]
    cdf_grids: Dict[str, Dict[str, List[float]]] = Field(
        default_factory=dict, description="metric -> {x, cdf}"
    )
    histograms: Dict[str, Dict[str, List[float]]] = Field(
        default_factory=dict, description="metric -> {edges, counts}"
    )
    fraction_discount_ratio_above_one: Optional[float] = None


class IdentityCheckReport(BaseModel):
    """Residuals of the closed-form identity and inequality suite"""
    n_points: int
    beta_limit: float
    max_identity_residual: float
    min_tanh_gap: float
    min_moment_ratio: float
    passed: bool
