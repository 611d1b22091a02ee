"""Model parameters and algorithm configuration objects"""

import math
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import settings
from ..exceptions import ValidationError


class DdmParams(BaseModel):
    """Linear-drift DDM: drift v(x, y) = (x - y)^T w, boundaries at +/- b"""

    w: List[float] = Field(..., min_length=1, description="Drift weights")
    b: float = Field(..., gt=0, description="Boundary")

    model_config = ConfigDict(frozen=True)

    @field_validator("w")
    @classmethod
    def _finite(cls, value: List[float]) -> List[float]:
        if not np.all(np.isfinite(value)):
            raise ValueError("drift weights must be finite")
        return value

    @property
    def u(self) -> np.ndarray:
        """Identifiable speed-accuracy weights w / b"""
        return np.asarray(self.w) / self.b

    @property
    def m(self) -> np.ndarray:
        """Identifiable choice-only weights b * w"""
        return np.asarray(self.w) * self.b

    def drift(self, X, Y) -> np.ndarray:
        return (np.asarray(X) - np.asarray(Y)) @ np.asarray(self.w)

    @classmethod
    def from_u(cls, u, b: float) -> "DdmParams":
        return cls(w=[float(value) for value in np.asarray(u) * b], b=b)


class LnrParams(BaseModel):
    """Lognormal race: utility weights w, start log-mean d0, drift correlation rho"""

    w: List[float] = Field(..., min_length=1, description="Utility weights, nu(x) = x^T w")
    d0: float = Field(0.0, description="Log-mean start distance D0")
    rho: float = Field(0.0, gt=-1.0, lt=1.0, description="Drift correlation")

    model_config = ConfigDict(frozen=True)


class SeriesControl(BaseModel):
    """Truncation control for the first-passage density series"""

    tol: float = Field(default_factory=lambda: settings.series_tol, gt=0)
    max_terms: int = Field(default_factory=lambda: settings.series_max_terms, ge=1)

    model_config = ConfigDict(frozen=True)


class StartKind(str, Enum):
    """Starting-point distribution family"""
    POINT = "point-mass-at-0"
    UNIFORM = "uniform"


class StartDistribution(BaseModel):
    """Mean-zero starting point for the extended DDM, support inside (-b, b)"""

    kind: StartKind = StartKind.POINT
    a: float = Field(0.0, ge=0, description="Half-width of the uniform(-a, a) start")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _point_has_no_width(self) -> "StartDistribution":
        if self.kind == StartKind.POINT and self.a != 0:
            raise ValueError("point-mass start must have a = 0")
        return self

    def check_inside(self, b):
        if np.any(self.a >= np.asarray(b)):
            raise ValidationError(f"start half-width {self.a} must be smaller than every boundary")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == StartKind.POINT:
            return np.zeros(size)
        return rng.uniform(-self.a, self.a, size=size)


class SgdConfig(BaseModel):
    """Averaged SGD on the speed-accuracy loss"""

    lam: Optional[float] = Field(None, gt=0, description="Step size; default 1/(8 D^2)")
    passes: int = Field(1, ge=1, description="Number of sweeps over the data")
    w0: Optional[List[float]] = Field(None, description="Initial iterate; default zero")
    average_iterates: bool = True

    model_config = ConfigDict(frozen=True)

    def step_size(self, diameter: float) -> float:
        if self.lam is not None:
            return self.lam
        return settings.sgd_safety_factor / (8.0 * diameter ** 2)


class HalfspaceConfig(BaseModel):
    """Majority vote over independent SGD estimates"""

    epsilon: float = Field(..., gt=0, le=1)
    delta: float = Field(..., gt=0, le=1)
    gamma: float = Field(..., gt=0)
    k: Optional[int] = Field(None, ge=1, description="Batch count; default ceil(23 ln(1/delta))")

    model_config = ConfigDict(frozen=True)

    @property
    def batches(self) -> int:
        if self.k is not None:
            return self.k
        return max(1, math.ceil(23.0 * math.log(1.0 / self.delta)))
