"""Declarative experiment runner and report generator."""

from .config import ExperimentConfig, load_experiment_config
from .report import (
    RunReport,
    SignificanceTable,
    condition_table,
    paired_wilcoxon,
    render,
    significance_table,
)
from .runner import GridResult, RunRecord, RunStore, run_grid, run_id_for

__all__ = [
    "ExperimentConfig",
    "load_experiment_config",
    "RunReport",
    "SignificanceTable",
    "condition_table",
    "paired_wilcoxon",
    "render",
    "significance_table",
    "GridResult",
    "RunRecord",
    "RunStore",
    "run_grid",
    "run_id_for",
]
