"""Published metadata for the four downstream segmentation datasets.

These descriptors carry the exact split arithmetic and reduced-data sizes as
published (they are not recomputable from nominal percentages), plus the
generator class id each task conditions on.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConditionError
from .plans import RealLevelSizes

# Downstream input resolution per dataset archetype; spine-style datasets use
# 320, everything else 512, phantoms are unconstrained.
ARCHETYPE_RESOLUTIONS = {
    "abdomen_ct": 512,
    "abdomen_mri": 512,
    "spine_mri": 320,
    "endoscopy": 512,
    "phantom": None,
}


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    archetype: str
    grouping: str           # by_group (scan-collected) or by_image
    n_units: int            # scans or images
    val_size: int           # held-out units per fold
    test_size: int
    sizes: RealLevelSizes   # reduced real levels, in units
    target_resolution: int
    generator_domain: str   # which production generator serves this task
    generator_class_id: int
    task_labels: tuple[str, ...]

    def __post_init__(self):
        expected = ARCHETYPE_RESOLUTIONS.get(self.archetype)
        if expected is None and self.archetype != "phantom":
            raise ConditionError(f"unknown archetype {self.archetype!r}")
        if expected is not None and self.target_resolution != expected:
            raise ConditionError(
                f"{self.name}: archetype {self.archetype} requires resolution "
                f"{expected}, got {self.target_resolution}"
            )

    @property
    def train_size(self) -> int:
        return self.n_units - self.val_size - self.test_size


PAPER_DATASETS = {
    "btcv_abdomen": DatasetDescriptor(
        name="btcv_abdomen",
        archetype="abdomen_ct",
        grouping="by_group",
        n_units=30,
        val_size=2,
        test_size=6,
        sizes=RealLevelSizes(minimal=1, low=2, moderate=11),
        target_resolution=512,
        generator_domain="ct_mr",
        generator_class_id=0,      # abd_normal
        task_labels=("liver", "kidney"),
    ),
    "chaos_mri": DatasetDescriptor(
        name="chaos_mri",
        archetype="abdomen_mri",
        grouping="by_group",
        n_units=20,
        val_size=2,
        test_size=4,
        sizes=RealLevelSizes(minimal=1, low=2, moderate=7),
        target_resolution=512,
        generator_domain="ct_mr",
        generator_class_id=107,    # mriabd-normal
        task_labels=("liver", "kidney"),
    ),
    "lumbar_spine_mri": DatasetDescriptor(
        name="lumbar_spine_mri",
        archetype="spine_mri",
        grouping="by_image",
        n_units=1545,
        val_size=123,
        test_size=309,
        sizes=RealLevelSizes(minimal=6, low=30, moderate=555),
        target_resolution=320,
        generator_domain="ct_mr",
        generator_class_id=119,    # spine_canal stenosis
        task_labels=("IVD", "TS", "PE"),
    ),
    "cvc_clinicdb": DatasetDescriptor(
        name="cvc_clinicdb",
        archetype="endoscopy",
        grouping="by_image",
        n_units=612,
        val_size=49,
        test_size=123,
        sizes=RealLevelSizes(minimal=5, low=44, moderate=220),
        target_resolution=512,
        generator_domain="gastro",
        generator_class_id=2,      # polyps
        task_labels=("polyp",),
    ),
}
