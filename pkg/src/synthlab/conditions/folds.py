"""Cross-validation folds with frozen validation/test splits.

Folds are drawn by seeded resampling of the counting unit (whole scans under
``by_group``, individual images under ``by_image``); validation and test
membership is frozen per fold so every data condition within a fold sees the
same evaluation images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import FoldError
from ..seeding import derive_seed
from ..data.manifest import DatasetManifest

GROUPINGS = ("by_group", "by_image")


@dataclass(frozen=True)
class FoldSpec:
    """One fold's frozen split, expressed as record ids."""

    k: int
    fold_index: int
    grouping: str
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    train_units: tuple[str, ...]   # group ids under by_group, record ids otherwise
    seed: int

    def __post_init__(self):
        if self.grouping not in GROUPINGS:
            raise FoldError(f"grouping must be one of {GROUPINGS}")
        sets = [set(self.train_ids), set(self.val_ids), set(self.test_ids)]
        for i in range(3):
            for j in range(i + 1, 3):
                if sets[i] & sets[j]:
                    raise FoldError("fold splits overlap")


def make_folds(
    manifest: DatasetManifest,
    k: int = 5,
    grouping: str = "by_group",
    seed: int = 0,
    val_size: Optional[int] = None,
    test_size: Optional[int] = None,
) -> list[FoldSpec]:
    """Build ``k`` folds with ``val_size``/``test_size`` units held out each.

    Sizes are counted in grouping units. Defaults hold out ceil(n/k) units
    for test and ~10% of the remainder for validation; pass explicit sizes to
    reproduce a dataset's published split arithmetic. Whole units never span
    two splits.
    """
    if grouping not in GROUPINGS:
        raise FoldError(f"grouping must be one of {GROUPINGS}")
    if k < 2:
        raise FoldError("k must be >= 2")

    if grouping == "by_group":
        units = manifest.group_ids
        members = {g: [] for g in units}
        for rec in manifest:
            members[rec.group_id].append(rec.id)
    else:
        units = manifest.ids
        members = {i: [i] for i in units}

    n = len(units)
    test_n = test_size if test_size is not None else math.ceil(n / k)
    val_n = val_size if val_size is not None else max(1, round(0.1 * (n - test_n)))
    if val_n + test_n >= n:
        raise FoldError(
            f"cannot hold out {val_n} val + {test_n} test from {n} {grouping} units"
        )

    folds = []
    units = sorted(units)
    for fold in range(k):
        rng = np.random.default_rng(derive_seed(seed, "fold", fold))
        order = [units[i] for i in rng.permutation(n)]
        test_units = order[:test_n]
        val_units = order[test_n : test_n + val_n]
        train_units = sorted(order[test_n + val_n :])
        expand = lambda us: tuple(sorted(rid for u in us for rid in members[u]))
        folds.append(
            FoldSpec(
                k=k,
                fold_index=fold,
                grouping=grouping,
                train_ids=expand(train_units),
                val_ids=expand(val_units),
                test_ids=expand(test_units),
                train_units=tuple(train_units),
                seed=seed,
            )
        )
    return folds


def split_assignment(fold: FoldSpec) -> dict[str, str]:
    """id -> split mapping for stamping a manifest with this fold's roles."""
    out = {i: "train" for i in fold.train_ids}
    out.update({i: "val" for i in fold.val_ids})
    out.update({i: "test" for i in fold.test_ids})
    return out
