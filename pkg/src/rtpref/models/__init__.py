"""Domain types"""

from .dataset import Observation, Dataset, build_dataset, empirical_sigma
from .params import (
    DdmParams,
    LnrParams,
    SeriesControl,
    StartKind,
    StartDistribution,
    SgdConfig,
    HalfspaceConfig,
)

__all__ = [
    "Observation",
    "Dataset",
    "build_dataset",
    "empirical_sigma",
    "DdmParams",
    "LnrParams",
    "SeriesControl",
    "StartKind",
    "StartDistribution",
    "SgdConfig",
    "HalfspaceConfig",
]
