"""The ten data-availability conditions and their materialized training plans.

Each condition pairs a real-data level (minimal / low / moderate / full) with
a synthetic policy: nothing, gap fill (synthetic images up to the full real
training size), or a fixed fraction of the full training size (10% / 50% /
100%, full-data rows only).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConditionError
from ..seeding import derive_seed
from ..data.manifest import DatasetManifest
from .folds import FoldSpec

REAL_LEVELS = ("minimal", "low", "moderate", "full")
SYNTH_POLICIES = ("none", "gap", "frac_10", "frac_50", "frac_100")
_FRACTIONS = {"frac_10": 0.10, "frac_50": 0.50, "frac_100": 1.00}


@dataclass(frozen=True)
class DataCondition:
    real_level: str
    synthetic: str

    def __post_init__(self):
        if self.real_level not in REAL_LEVELS:
            raise ConditionError(f"unknown real level {self.real_level!r}")
        if self.synthetic not in SYNTH_POLICIES:
            raise ConditionError(f"unknown synthetic policy {self.synthetic!r}")
        if self.synthetic == "gap" and self.real_level == "full":
            raise ConditionError("gap fill applies only to reduced real levels")
        if self.synthetic in _FRACTIONS and self.real_level != "full":
            raise ConditionError("fixed-fraction augmentation applies only to full real data")

    @property
    def name(self) -> str:
        return f"{self.real_level}_real" if self.synthetic == "none" else \
            f"{self.real_level}_real+{self.synthetic}"

    @property
    def display_name(self) -> str:
        base = f"{self.real_level.capitalize()} real data"
        if self.synthetic == "none":
            return base
        if self.synthetic == "gap":
            return base + " + synthetic gap augmentation"
        level = {"frac_10": "low", "frac_50": "moderate", "frac_100": "full"}[self.synthetic]
        return base + f" + {level} synthetic augmentation"


def all_conditions() -> list[DataCondition]:
    """The ten canonical conditions, in report row order."""
    out = []
    for level in ("minimal", "low", "moderate"):
        out.append(DataCondition(level, "none"))
        out.append(DataCondition(level, "gap"))
    out.append(DataCondition("full", "none"))
    for frac in ("frac_10", "frac_50", "frac_100"):
        out.append(DataCondition("full", frac))
    return out


def condition_by_name(name: str) -> DataCondition:
    for cond in all_conditions():
        if cond.name == name:
            return cond
    raise ConditionError(f"unknown condition {name!r}; valid: {[c.name for c in all_conditions()]}")


@dataclass(frozen=True)
class RealLevelSizes:
    """How many counting units each reduced real level keeps.

    Published datasets carry these verbatim (they are not exact percentages);
    ``moderate=None`` means half the fold's training units.
    """

    minimal: int = 1
    low: int = 2
    moderate: Optional[int] = None


@dataclass(frozen=True)
class ConditionPlan:
    condition: str
    fold_index: int
    real_ids: tuple[str, ...]
    synthetic_count: int
    target_resolution: int
    full_train_images: int

    def __post_init__(self):
        if self.synthetic_count < 0:
            raise ConditionError("synthetic_count must be >= 0")

    def to_json(self) -> str:
        return json.dumps(
            {
                "condition": self.condition,
                "fold_index": self.fold_index,
                "real_ids": list(self.real_ids),
                "synthetic_count": self.synthetic_count,
                "target_resolution": self.target_resolution,
                "full_train_images": self.full_train_images,
            },
            indent=2,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "ConditionPlan":
        d = json.loads(text)
        return ConditionPlan(
            condition=d["condition"],
            fold_index=d["fold_index"],
            real_ids=tuple(d["real_ids"]),
            synthetic_count=d["synthetic_count"],
            target_resolution=d["target_resolution"],
            full_train_images=d["full_train_images"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @staticmethod
    def load(path: str | Path) -> "ConditionPlan":
        return ConditionPlan.from_json(Path(path).read_text())


def build_condition(
    fold: FoldSpec,
    cond: DataCondition,
    manifest: DatasetManifest,
    sizes: RealLevelSizes = RealLevelSizes(),
    target_resolution: Optional[int] = None,
    synthetic_pool_size: Optional[int] = None,
) -> ConditionPlan:
    """Materialize one condition against a frozen fold.

    The real subset is drawn uniformly without replacement from the fold's
    training units, seeded by (fold seed, fold index, condition name). Gap
    conditions fill to the full training image count; fixed fractions are
    rounded from the full training image count.
    """
    members = {u: [] for u in fold.train_units}
    if fold.grouping == "by_group":
        train_id_set = set(fold.train_ids)
        for rec in manifest:
            if rec.id in train_id_set:
                members[rec.group_id].append(rec.id)
    else:
        for u in fold.train_units:
            members[u] = [u]

    full_train_images = len(fold.train_ids)
    n_units = len(fold.train_units)

    if cond.real_level == "full":
        chosen_units = list(fold.train_units)
    else:
        want = {
            "minimal": sizes.minimal,
            "low": sizes.low,
            "moderate": sizes.moderate if sizes.moderate is not None else n_units // 2,
        }[cond.real_level]
        if want > n_units:
            raise ConditionError(
                f"{cond.name}: requested {want} units but fold has {n_units} training units"
            )
        rng = np.random.default_rng(derive_seed(fold.seed, "condition", fold.fold_index, cond.name))
        idx = rng.choice(n_units, size=want, replace=False)
        chosen_units = [fold.train_units[i] for i in sorted(idx)]

    real_ids = tuple(sorted(rid for u in chosen_units for rid in members[u]))

    if cond.synthetic == "none":
        synthetic_count = 0
    elif cond.synthetic == "gap":
        synthetic_count = full_train_images - len(real_ids)
    else:
        synthetic_count = round(_FRACTIONS[cond.synthetic] * full_train_images)

    if synthetic_pool_size is not None and synthetic_count > synthetic_pool_size:
        raise ConditionError(
            f"{cond.name}: needs {synthetic_count} synthetic images but the pool has "
            f"{synthetic_pool_size}"
        )

    resolution = target_resolution or manifest.records[0].spatial_shape[0]
    return ConditionPlan(
        condition=cond.name,
        fold_index=fold.fold_index,
        real_ids=real_ids,
        synthetic_count=synthetic_count,
        target_resolution=resolution,
        full_train_images=full_train_images,
    )


def enumerate_grid(conditions: Optional[list[DataCondition]] = None) -> list[tuple[DataCondition, bool]]:
    """The run grid: every condition with and without synthetic pretraining."""
    conds = conditions if conditions is not None else all_conditions()
    return [(c, pre) for c in conds for pre in (False, True)]
