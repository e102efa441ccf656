"""Quantitative machinery: Dice, FID over pluggable embedders, bootstrap CIs,
and the normality / paired-significance tests used by the experiment grid."""

from .bootstrap import bootstrap_ci
from .dice import dice, mean_dice, per_image_dice
from .fid import (
    GaussianSummary,
    LinearProjectionEmbedder,
    fid,
    fid_between_image_sets,
    summarize,
)
from .significance import (
    EXACT_ENUMERATION_CUTOFF,
    StatResult,
    shapiro_wilk,
    wilcoxon_signed_rank,
)

__all__ = [
    "bootstrap_ci",
    "dice",
    "mean_dice",
    "per_image_dice",
    "GaussianSummary",
    "LinearProjectionEmbedder",
    "fid",
    "fid_between_image_sets",
    "summarize",
    "EXACT_ENUMERATION_CUTOFF",
    "StatResult",
    "shapiro_wilk",
    "wilcoxon_signed_rank",
]
