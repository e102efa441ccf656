"""Data-availability conditions over grouped or per-image cross-validation."""

from .folds import FoldSpec, make_folds, split_assignment
from .plans import (
    ConditionPlan,
    DataCondition,
    RealLevelSizes,
    all_conditions,
    build_condition,
    condition_by_name,
    enumerate_grid,
)
from .presets import ARCHETYPE_RESOLUTIONS, PAPER_DATASETS, DatasetDescriptor

__all__ = [
    "FoldSpec",
    "make_folds",
    "split_assignment",
    "ConditionPlan",
    "DataCondition",
    "RealLevelSizes",
    "all_conditions",
    "build_condition",
    "condition_by_name",
    "enumerate_grid",
    "ARCHETYPE_RESOLUTIONS",
    "PAPER_DATASETS",
    "DatasetDescriptor",
]
