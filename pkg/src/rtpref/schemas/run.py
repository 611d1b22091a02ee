"""Run configuration schemas (JSON config file + CLI flag overrides)"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import settings
from ..exceptions import ValidationError


class ModelKind(str, Enum):
    """Generative / fitted model"""
    DDM = "ddm"
    DDM_CHOICE_ONLY = "ddm-choice-only"
    LNR = "lnr"
    EXTENDED_DDM = "extended-ddm"


class DdmSolver(str, Enum):
    SGD = "sgd"
    EXACT = "exact"


class BoundaryMethod(str, Enum):
    MOMENT_MATCH = "moment-match"
    COMBINE = "combine"
    NONE = "none"


class Design(str, Enum):
    """How attribute pairs are generated by `simulate`"""
    POPULATION = "population"
    DATED_REWARDS = "dated-rewards"
    UNIFORM = "uniform"
    FIXED = "fixed"


ConfigT = TypeVar("ConfigT", bound="FileConfig")


class FileConfig(BaseModel):
    """Base for configs loaded from JSON; unknown keys are rejected"""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    @classmethod
    def load(cls: Type[ConfigT], path: Optional[Path] = None, **overrides: Any) -> ConfigT:
        """Merge a JSON config file with flag overrides (flags win, None means unset)"""
        values: Dict[str, Any] = {}
        if path is not None:
            try:
                values = json.loads(Path(path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ValidationError(f"config file not found: {path}")
            except json.JSONDecodeError as e:
                raise ValidationError(f"config file {path} is not valid JSON: {e.msg}", line=e.lineno)
            if not isinstance(values, dict):
                raise ValidationError(f"config file {path} must contain a JSON object")
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**values)
        except pydantic.ValidationError as e:
            details = "; ".join(
                f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
                for error in e.errors()
            )
            raise ValidationError(f"invalid configuration: {details}")


class RunConfig(FileConfig):
    """Configuration for `fit` and `evaluate`"""

    model: ModelKind = ModelKind.DDM
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, lt=2**64)
    n_train: int = Field(default_factory=lambda: settings.default_n_train, ge=1)

    lam: Optional[float] = Field(None, gt=0, description="SGD step-size override")
    passes: int = Field(1, ge=1)
    ddm_solver: DdmSolver = DdmSolver.SGD
    b_method: BoundaryMethod = BoundaryMethod.MOMENT_MATCH
    reg: float = Field(1e-3, ge=0, description="Ridge coefficient of the logistic fit")
    tol: float = Field(default_factory=lambda: settings.series_tol, gt=0, description="Series tolerance")
    lnr_restarts: int = Field(default_factory=lambda: settings.lnr_restarts, ge=1)
    max_workers: int = Field(default_factory=lambda: settings.max_concurrent_fits, ge=1)

    input_path: Optional[Path] = None
    output_path: Optional[Path] = None
    oracle_params_path: Optional[Path] = None


class EvaluationConfig(RunConfig):
    """Configuration for `evaluate`; the speed-accuracy loss is minimised exactly by default"""

    ddm_solver: DdmSolver = DdmSolver.EXACT


class SimulationConfig(FileConfig):
    """Configuration for `simulate`"""

    model: ModelKind = ModelKind.DDM
    design: Design = Design.POPULATION
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, lt=2**64)

    n_agents: int = Field(1, ge=1)
    n: int = Field(140, ge=0, description="Rows per agent")
    d: int = Field(2, ge=1)

    w: Optional[List[float]] = None
    b: float = Field(1.0, gt=0)
    x: Optional[List[float]] = Field(None, description="Left attributes for the fixed design")
    y: Optional[List[float]] = Field(None, description="Right attributes for the fixed design")

    d0: float = 0.0
    rho: float = Field(0.0, gt=-1.0, lt=1.0)
    start_fraction: float = Field(0.5, ge=0.0, lt=1.0, description="Uniform start half-width as a fraction of b")
    dt: Optional[float] = Field(None, gt=0)

    output_path: Optional[Path] = None

    @model_validator(mode="after")
    def _design_inputs(self) -> "SimulationConfig":
        if self.design == Design.POPULATION:
            if self.model != ModelKind.DDM:
                raise ValueError("the population design generates DDM agents only")
            return self
        if self.w is None:
            raise ValueError(f"design '{self.design.value}' requires weights w")
        if self.design == Design.FIXED:
            if self.x is None or self.y is None:
                raise ValueError("the fixed design requires x and y")
            if not len(self.x) == len(self.y) == len(self.w):
                raise ValueError("x, y and w must have the same length")
        elif self.design == Design.DATED_REWARDS:
            if len(self.w) != 2:
                raise ValueError("dated-rewards weights are [w_money, -w_time]")
        elif len(self.w) != self.d:
            raise ValueError(f"w has {len(self.w)} entries but d = {self.d}")
        return self
