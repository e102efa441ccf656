"""Grid execution over (fold, condition, pretrain) with a resumable run store.

Every run is identified by a content hash of (config fingerprint, fold,
condition, pretrain flag, train seed); per-label records carry the full
per-image Dice lists so any aggregate is recomputable from the store.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import SynthlabError, ReportError
from ..seeding import derive_seed, fingerprint
from ..data.manifest import DatasetManifest, load_manifest, resize_manifest
from ..conditions.folds import FoldSpec, make_folds
from ..conditions.plans import ConditionPlan, build_condition, condition_by_name
from ..gan.checkpoint import load_checkpoint
from ..interpreter.model import generate_labeled, labeled_to_records, load_interpreter
from ..metrics.bootstrap import bootstrap_ci
from ..metrics.dice import per_image_dice
from ..segmentor.planning import plan_and_preprocess
from ..segmentor.train import predict, pretrain_synthetic, train
from .config import ExperimentConfig


@dataclass
class RunRecord:
    """Dice results of one (fold, condition, pretrain) cell for one label."""

    record_id: str
    run_id: str
    dataset: str
    task_label: str
    label_value: int
    condition: str
    pretrain: bool
    fold: int
    status: str                       # "ok" | "failed"
    per_image_dice: list[float] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)
    mean_dice: Optional[float] = None
    ci: Optional[tuple[float, float]] = None
    condition_plan: Optional[dict] = None
    model_fingerprint: str = ""
    wall_time_s: float = 0.0
    error: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.ci is not None:
            d["ci"] = list(self.ci)
        return d

    @staticmethod
    def from_dict(d: dict) -> "RunRecord":
        d = dict(d)
        if d.get("ci") is not None:
            d["ci"] = tuple(d["ci"])
        return RunRecord(**d)


class RunStore:
    """Directory of append-only RunRecord JSON files keyed by record id."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, record_id: str) -> Path:
        return self.root / f"{record_id}.json"

    def save(self, record: RunRecord) -> None:
        self.path(record.record_id).write_text(
            json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n"
        )

    def load(self, record_id: str) -> RunRecord:
        p = self.path(record_id)
        if not p.exists():
            raise ReportError(f"run record {record_id} not found in {self.root}")
        return RunRecord.from_dict(json.loads(p.read_text()))

    def has_ok(self, record_id: str) -> bool:
        p = self.path(record_id)
        if not p.exists():
            return False
        return json.loads(p.read_text()).get("status") == "ok"

    def all_records(self) -> list[RunRecord]:
        return [
            RunRecord.from_dict(json.loads(p.read_text()))
            for p in sorted(self.root.glob("*.json"))
        ]


@dataclass
class GridResult:
    records: list[RunRecord]
    failures: list[tuple[str, str]]     # (run_id, error)
    skipped: int
    executed: int


def run_id_for(config: ExperimentConfig, fold: int, condition: str, pretrain: bool) -> str:
    return fingerprint(
        {
            "config": config.fingerprint,
            "fold": fold,
            "condition": condition,
            "pretrain": pretrain,
            "train_seed": config.train_seed,
        }
    )


def _materialize_training_manifest(
    config: ExperimentConfig,
    plan: ConditionPlan,
    manifest: DatasetManifest,
    fold: FoldSpec,
    ckpt,
    interp,
) -> DatasetManifest:
    records = [
        replace(manifest.by_id(rid), split="train", fold=fold.fold_index)
        for rid in plan.real_ids
    ]
    if plan.synthetic_count > 0:
        synth_seed = derive_seed(config.train_seed, "synthetic-fill", fold.fold_index, plan.condition)
        samples = generate_labeled(
            ckpt, interp, config.generator_class_id, plan.synthetic_count, seed=synth_seed
        )
        records.extend(labeled_to_records(samples, id_prefix="zsynth", split="train"))
    records.extend(
        replace(manifest.by_id(rid), split="val", fold=fold.fold_index)
        for rid in fold.val_ids
    )
    return DatasetManifest(records=records, catalog=manifest.catalog)


def _pretrained_weights(config: ExperimentConfig, folds: list[FoldSpec],
                        manifest: DatasetManifest, ckpt, interp, store_dir: Path):
    """Build (or reuse) the task's pretrained weights: a full-size synthetic
    dataset, one model per fold, best validation Dice wins."""
    import torch

    cache = store_dir / "pretrained.pt"
    meta_path = store_dir / "pretrained.json"
    key = fingerprint({"config": config.fingerprint, "role": "pretrained-weights"})
    if cache.exists() and meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("key") == key:
            return torch.load(cache, weights_only=False), meta
    full_size = len(folds[0].train_ids)
    samples = generate_labeled(
        ckpt, interp, config.generator_class_id, full_size,
        seed=derive_seed(config.train_seed, "pretrain-pool"),
    )
    synth = DatasetManifest(
        records=labeled_to_records(samples, id_prefix="pre", split="train"),
        catalog=manifest.catalog,
    )
    result = pretrain_synthetic(
        folds, synth, manifest, plan=None,
        seed=derive_seed(config.train_seed, "pretrain"),
        epochs=config.epochs,
    )
    meta = {
        "key": key,
        "selected_fold": result.fold_index,
        "val_dice": result.val_dice,
        "candidate_dices": list(result.candidate_dices),
    }
    torch.save(result.weights, cache)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return result.weights, meta


def run_grid(config: ExperimentConfig, manifest: Optional[DatasetManifest] = None) -> GridResult:
    """Execute the configured grid; completed cells are skipped on re-run.

    Per cell: build the condition plan, synthesize the fill, train (optionally
    from the task's pretrained weights), predict the fold's frozen test split,
    and persist one record per task label with per-image Dice and a bootstrap
    CI. Failures are recorded and the grid continues.
    """
    out_dir = Path(config.output_dir)
    store = RunStore(out_dir / "runs")

    if manifest is None:
        manifest = load_manifest(config.manifest_path)
    if manifest.records[0].spatial_shape != (config.target_resolution, config.target_resolution):
        manifest = resize_manifest(manifest, config.target_resolution)

    ckpt = load_checkpoint(config.generator_checkpoint)
    interp = load_interpreter(config.interpreter_path)

    folds = make_folds(
        manifest, k=config.k, grouping=config.grouping, seed=config.fold_seed,
        val_size=config.val_size, test_size=config.test_size,
    )

    needs_pretrain = any(config.pretrain)
    pretrained = None
    if needs_pretrain:
        pretrained, _ = _pretrained_weights(config, folds, manifest, ckpt, interp, out_dir)

    failures: list[tuple[str, str]] = []
    records: list[RunRecord] = []
    skipped = executed = 0

    cells = [
        (fold_idx, cond_name, pre)
        for fold_idx in config.run_folds
        for cond_name in config.conditions
        for pre in config.pretrain
    ]
    for fold_idx, cond_name, pre in cells:
        run_id = run_id_for(config, fold_idx, cond_name, pre)
        record_ids = {
            value: f"{run_id}-{value}" for value in sorted(config.task_labels)
        }
        if all(store.has_ok(rid) for rid in record_ids.values()):
            skipped += 1
            records.extend(store.load(rid) for rid in record_ids.values())
            continue

        fold = folds[fold_idx]
        start = time.time()
        try:
            cond = condition_by_name(cond_name)
            plan = build_condition(
                fold, cond, manifest, sizes=config.sizes,
                target_resolution=config.target_resolution,
            )
            train_manifest = _materialize_training_manifest(
                config, plan, manifest, fold, ckpt, interp
            )
            _, seg_plan = plan_and_preprocess(
                train_manifest, epochs=config.epochs, batch_size=config.batch_size
            )
            init = pretrained if pre else None
            model = train(
                seg_plan, train_manifest, init=init,
                seed=derive_seed(config.train_seed, "cell", fold_idx, cond_name, pre),
            )
            test_records = [manifest.by_id(rid) for rid in fold.test_ids]
            preds = predict(model, [r.pixels for r in test_records])
            elapsed = time.time() - start
            for value, label_name in sorted(config.task_labels.items()):
                gts = [r.mask for r in test_records]
                kept = [
                    (rid, p, g)
                    for rid, p, g in zip(fold.test_ids, preds, gts)
                    if np.any(np.asarray(g) == value)
                ]
                scores = [
                    float(s)
                    for s in per_image_dice(
                        [p for _, p, _ in kept], [g for _, _, g in kept], value,
                        skip_empty_gt=False,
                    )
                ]
                ci = bootstrap_ci(
                    scores, resamples=config.bootstrap_resamples,
                    seed=derive_seed(config.bootstrap_seed, run_id, value),
                ) if scores else None
                rec = RunRecord(
                    record_id=record_ids[value],
                    run_id=run_id,
                    dataset=config.name,
                    task_label=label_name,
                    label_value=value,
                    condition=cond_name,
                    pretrain=pre,
                    fold=fold_idx,
                    status="ok",
                    per_image_dice=scores,
                    test_ids=[rid for rid, _, _ in kept],
                    mean_dice=float(np.mean(scores)) if scores else None,
                    ci=ci,
                    condition_plan=json.loads(plan.to_json()),
                    model_fingerprint=model.fingerprint,
                    wall_time_s=elapsed,
                )
                store.save(rec)
                records.append(rec)
            executed += 1
        except SynthlabError as exc:
            elapsed = time.time() - start
            failures.append((run_id, str(exc)))
            for value, label_name in sorted(config.task_labels.items()):
                rec = RunRecord(
                    record_id=record_ids[value],
                    run_id=run_id,
                    dataset=config.name,
                    task_label=label_name,
                    label_value=value,
                    condition=cond_name,
                    pretrain=pre,
                    fold=fold_idx,
                    status="failed",
                    wall_time_s=elapsed,
                    error=str(exc),
                )
                store.save(rec)
                records.append(rec)

    return GridResult(records=records, failures=failures, skipped=skipped, executed=executed)
