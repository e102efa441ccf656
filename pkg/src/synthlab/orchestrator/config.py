"""Experiment configuration: one declarative file drives the whole grid."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

from ..errors import ConfigError
from ..seeding import fingerprint
from ..conditions.plans import RealLevelSizes, all_conditions, condition_by_name
from ..conditions.presets import ARCHETYPE_RESOLUTIONS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_ALL_CONDITION_NAMES = tuple(c.name for c in all_conditions())


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run (and exactly reproduce) a grid.

    File format: TOML with [dataset], [artifacts], and [experiment] tables;
    see the README for the field-by-field reference.
    """

    name: str
    manifest_path: str
    grouping: str
    archetype: str
    target_resolution: int
    task_labels: dict[int, str]
    generator_class_id: int
    generator_checkpoint: str
    interpreter_path: str
    output_dir: str
    k: int = 5
    run_folds: tuple[int, ...] = (0,)
    fold_seed: int = 0
    train_seed: int = 0
    val_size: int | None = None
    test_size: int | None = None
    minimal_size: int = 1
    low_size: int = 2
    moderate_size: int | None = None
    conditions: tuple[str, ...] = _ALL_CONDITION_NAMES
    pretrain: tuple[bool, ...] = (False, True)
    epochs: int = 100
    batch_size: int = 8
    bootstrap_resamples: int = 1000
    bootstrap_seed: int = 0

    def __post_init__(self):
        if self.grouping not in ("by_group", "by_image"):
            raise ConfigError(f"unknown grouping {self.grouping!r}")
        expected = ARCHETYPE_RESOLUTIONS.get(self.archetype, "unknown")
        if expected == "unknown":
            raise ConfigError(f"unknown archetype {self.archetype!r}")
        if expected is not None and self.target_resolution != expected:
            raise ConfigError(
                f"archetype {self.archetype!r} requires resolution {expected}, "
                f"got {self.target_resolution}"
            )
        if not self.task_labels:
            raise ConfigError("task_labels must name at least one foreground label")
        for name in self.conditions:
            condition_by_name(name)
        for fold in self.run_folds:
            if not 0 <= fold < self.k:
                raise ConfigError(f"fold {fold} outside k={self.k}")

    @property
    def sizes(self) -> RealLevelSizes:
        return RealLevelSizes(
            minimal=self.minimal_size, low=self.low_size, moderate=self.moderate_size
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task_labels"] = {str(k): v for k, v in self.task_labels.items()}
        for key in ("run_folds", "conditions", "pretrain"):
            d[key] = list(d[key])
        return d

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"experiment config not found: {path}")
    with open(path, "rb") as f:
        raw = tomllib.load(f)
    try:
        dataset = raw["dataset"]
        artifacts = raw["artifacts"]
        experiment = raw["experiment"]
    except KeyError as exc:
        raise ConfigError(f"config missing table {exc}") from exc

    def opt(table, key, default=None):
        return table.get(key, default)

    base = path.parent
    resolve = lambda p: str((base / p).resolve()) if not Path(p).is_absolute() else p
    try:
        return ExperimentConfig(
            name=dataset["name"],
            manifest_path=resolve(dataset["manifest"]),
            grouping=dataset["grouping"],
            archetype=opt(dataset, "archetype", "phantom"),
            target_resolution=dataset["target_resolution"],
            task_labels={int(k): v for k, v in dataset["labels"].items()},
            generator_class_id=dataset["generator_class_id"],
            generator_checkpoint=resolve(artifacts["generator_checkpoint"]),
            interpreter_path=resolve(artifacts["interpreter"]),
            output_dir=resolve(experiment["output_dir"]),
            k=opt(experiment, "k", 5),
            run_folds=tuple(opt(experiment, "folds", [0])),
            fold_seed=opt(experiment, "fold_seed", 0),
            train_seed=opt(experiment, "train_seed", 0),
            val_size=opt(dataset, "val_size"),
            test_size=opt(dataset, "test_size"),
            minimal_size=opt(dataset, "minimal_size", 1),
            low_size=opt(dataset, "low_size", 2),
            moderate_size=opt(dataset, "moderate_size"),
            conditions=tuple(opt(experiment, "conditions", list(_ALL_CONDITION_NAMES))),
            pretrain=tuple(opt(experiment, "pretrain", [False, True])),
            epochs=opt(experiment, "epochs", 100),
            batch_size=opt(experiment, "batch_size", 8),
            bootstrap_resamples=opt(experiment, "bootstrap_resamples", 1000),
            bootstrap_seed=opt(experiment, "bootstrap_seed", 0),
        )
    except KeyError as exc:
        raise ConfigError(f"config missing key {exc}") from exc
