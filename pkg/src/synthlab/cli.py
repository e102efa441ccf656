"""Command-line interface.

Layout: ``synthlab <group> <command>`` for the module-level tools (gan,
interp, conditions, seg, metrics) plus the top-level ``run`` and ``report``
commands that drive a whole experiment from one config file.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .errors import SynthlabError


@click.group()
def main():
    """Synthetic-data generation and segmentation ablation toolkit."""


def _fail(exc: Exception):
    raise click.ClickException(str(exc))


# ---------------------------------------------------------------------------
# gan
# ---------------------------------------------------------------------------
@main.group()
def gan():
    """Train, grow, and sample the progressive conditional generator."""


@gan.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--stage", "stage_res", required=True, type=int, help="Stage resolution to train.")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--parent", "parent_path", type=click.Path(exists=True),
              help="Parent checkpoint; omit to train the stem from scratch.")
@click.option("--steps", type=int, default=None, help="Override steps for this stage.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
def gan_train(config_path, stage_res, manifest_path, parent_path, steps, seed, out_path):
    """Train one stage and write its promoted (lowest-FID) checkpoint."""
    from .data.manifest import load_manifest, resize_manifest
    from .gan.config import load_generator_config
    from .gan.checkpoint import load_checkpoint, save_checkpoint
    from .gan.train import grow, init_stem, select_checkpoint, state_from_checkpoint, train_stage
    from .metrics.fid import LinearProjectionEmbedder

    try:
        cfg = load_generator_config(config_path)
        stage_idx = cfg.stage_index(stage_res)
        manifest = load_manifest(manifest_path)
        if manifest.records[0].spatial_shape != (stage_res, stage_res):
            manifest = resize_manifest(manifest, stage_res)
        if parent_path is None:
            if stage_idx != 0:
                raise SynthlabError(
                    f"stage {stage_res} is not the stem; pass --parent with the "
                    f"{cfg.stage_resolutions[stage_idx - 1]}px checkpoint"
                )
            state = init_stem(cfg, seed)
        else:
            parent = load_checkpoint(parent_path)
            if parent.resolution * 2 != stage_res:
                raise SynthlabError(
                    f"parent is {parent.resolution}px; cannot grow to {stage_res}px"
                )
            state = grow(state_from_checkpoint(parent, seed), cfg)
        embedder = LinearProjectionEmbedder()
        state = train_stage(state, manifest, embedder, cfg, steps=steps)
        ckpt = select_checkpoint(state)
        save_checkpoint(ckpt, out_path)
        click.echo(f"stage {stage_res}px: selection FID {ckpt.selection_fid:.4f} -> {out_path}")
    except SynthlabError as exc:
        _fail(exc)


@gan.command("grow")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--parent", "parent_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True),
              help="Real images for the initial FID evaluation of the grown stage.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
def gan_grow(config_path, parent_path, manifest_path, seed, out_path):
    """Grow a checkpoint one stage (no training) and write the result."""
    from .data.manifest import load_manifest, resize_manifest
    from .gan.config import load_generator_config
    from .gan.checkpoint import load_checkpoint, save_checkpoint
    from .gan.train import grow, select_checkpoint, state_from_checkpoint, train_stage
    from .metrics.fid import LinearProjectionEmbedder

    try:
        cfg = load_generator_config(config_path)
        parent = load_checkpoint(parent_path)
        state = grow(state_from_checkpoint(parent, seed), cfg)
        manifest = load_manifest(manifest_path)
        if manifest.records[0].spatial_shape != (state.resolution, state.resolution):
            manifest = resize_manifest(manifest, state.resolution)
        state = train_stage(state, manifest, LinearProjectionEmbedder(), cfg, steps=0)
        ckpt = select_checkpoint(state)
        save_checkpoint(ckpt, out_path)
        click.echo(f"grew {parent.resolution}px -> {state.resolution}px; wrote {out_path}")
    except SynthlabError as exc:
        _fail(exc)


@gan.command("sample")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--class", "class_id", required=True, type=int)
@click.option("-n", "count", required=True, type=int)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
def gan_sample(ckpt_path, class_id, count, seed, out_dir):
    """Sample images from a checkpoint into a manifest directory."""
    from .data.catalog import phantom_catalog
    from .data.manifest import DatasetManifest, ImageRecord, save_manifest
    from .gan.checkpoint import load_checkpoint
    from .gan.train import sample

    try:
        ckpt = load_checkpoint(ckpt_path)
        samples = sample(ckpt, class_id, count, seed)
        records = [
            ImageRecord(
                id=f"sample{int(s.index):05d}",
                class_id=class_id,
                group_id=f"seed{seed}",
                pixels=s.image,
                extras={"latent_seed": str(seed), "latent_index": str(s.index)},
            )
            for s in samples
        ]
        manifest = DatasetManifest(records=records,
                                   catalog=phantom_catalog(max(2, ckpt.config.n_classes)))
        path = save_manifest(manifest, out_dir)
        click.echo(f"wrote {count} samples to {path}")
    except SynthlabError as exc:
        _fail(exc)


# ---------------------------------------------------------------------------
# interp
# ---------------------------------------------------------------------------
@main.group()
def interp():
    """Train the feature interpreter and generate labeled pairs."""


@interp.command("train")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "ann_path", required=True, type=click.Path(exists=True))
@click.option("--lr", type=float, default=1e-4, show_default=True)
@click.option("--batch-size", type=int, default=4, show_default=True)
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
def interp_train(ckpt_path, ann_path, lr, batch_size, epochs, seed, out_path):
    from .gan.checkpoint import load_checkpoint
    from .interpreter.annotations import load_annotations
    from .interpreter.model import InterpreterHyper, save_interpreter, train_interpreter

    try:
        ckpt = load_checkpoint(ckpt_path)
        annotations = load_annotations(ann_path)
        hyper = InterpreterHyper(lr=lr, batch_size=batch_size, epochs=epochs)
        model = train_interpreter(ckpt, annotations, hyper, seed=seed)
        save_interpreter(model, out_path)
        click.echo(
            f"interpreter trained on {len(annotations.entries)} annotations "
            f"(loss {model.initial_loss:.4f} -> {model.final_loss:.4f}) -> {out_path}"
        )
    except SynthlabError as exc:
        _fail(exc)


@interp.command("generate")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--interp", "interp_path", required=True, type=click.Path(exists=True))
@click.option("--class", "class_id", required=True, type=int)
@click.option("-n", "count", required=True, type=int)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
def interp_generate(ckpt_path, interp_path, class_id, count, seed, out_dir):
    """Generate paired image+mask samples as a manifest directory."""
    from .data.catalog import phantom_catalog
    from .data.manifest import DatasetManifest, save_manifest
    from .gan.checkpoint import load_checkpoint
    from .interpreter.model import generate_labeled, labeled_to_records, load_interpreter

    try:
        ckpt = load_checkpoint(ckpt_path)
        model = load_interpreter(interp_path)
        samples = generate_labeled(ckpt, model, class_id, count, seed)
        manifest = DatasetManifest(
            records=labeled_to_records(samples),
            catalog=phantom_catalog(max(2, ckpt.config.n_classes)),
        )
        path = save_manifest(manifest, out_dir)
        click.echo(f"wrote {count} labeled pairs to {path}")
    except SynthlabError as exc:
        _fail(exc)


# ---------------------------------------------------------------------------
# conditions
# ---------------------------------------------------------------------------
@main.group()
def conditions():
    """Materialize data-availability conditions over frozen folds."""


@conditions.command("build")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True),
              help="Experiment config naming the manifest and split sizes.")
@click.option("--fold", type=int, required=True)
@click.option("--condition", "condition_name", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def conditions_build(dataset_path, fold, condition_name, out_path):
    from .conditions.folds import make_folds
    from .conditions.plans import build_condition, condition_by_name
    from .data.manifest import load_manifest
    from .orchestrator.config import load_experiment_config

    try:
        config = load_experiment_config(dataset_path)
        manifest = load_manifest(config.manifest_path)
        folds = make_folds(manifest, k=config.k, grouping=config.grouping,
                           seed=config.fold_seed, val_size=config.val_size,
                           test_size=config.test_size)
        plan = build_condition(folds[fold], condition_by_name(condition_name),
                               manifest, sizes=config.sizes,
                               target_resolution=config.target_resolution)
        plan.save(out_path)
        click.echo(
            f"{plan.condition} fold {fold}: {len(plan.real_ids)} real + "
            f"{plan.synthetic_count} synthetic -> {out_path}"
        )
    except SynthlabError as exc:
        _fail(exc)


# ---------------------------------------------------------------------------
# seg
# ---------------------------------------------------------------------------
@main.group()
def seg():
    """Plan, train, and predict with the segmentation baseline."""


@seg.command("plan")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def seg_plan(manifest_path, epochs, out_dir):
    from .data.manifest import load_manifest
    from .segmentor.planning import plan_and_preprocess

    try:
        manifest = load_manifest(manifest_path)
        fp, plan = plan_and_preprocess(manifest, epochs=epochs, cache_dir=out_dir)
        click.echo(json.dumps({"fingerprint": fp.to_dict(), "plan": plan.to_dict()}, indent=2))
    except SynthlabError as exc:
        _fail(exc)


@seg.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True),
              help="Manifest with split column set (train/val).")
@click.option("--condition-plan", "plan_path", type=click.Path(exists=True),
              help="Optional condition plan; restricts training to its real ids.")
@click.option("--init", "init_path", type=click.Path(exists=True),
              help="Pretrained weights (torch file) to fine-tune from.")
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
def seg_train(manifest_path, plan_path, init_path, epochs, seed, out_path):
    import torch

    from .conditions.plans import ConditionPlan
    from .data.manifest import DatasetManifest, load_manifest
    from .segmentor.planning import plan_and_preprocess
    from .segmentor.train import save_seg_model, train

    try:
        manifest = load_manifest(manifest_path)
        if plan_path:
            plan = ConditionPlan.load(plan_path)
            keep = set(plan.real_ids)
            records = [
                r for r in manifest.records
                if r.id in keep or r.split in ("val",)
            ]
            manifest = DatasetManifest(records=records, catalog=manifest.catalog)
        _, seg_plan = plan_and_preprocess(manifest, epochs=epochs)
        init = torch.load(init_path, weights_only=False) if init_path else None
        model = train(seg_plan, manifest, init=init, seed=seed)
        save_seg_model(model, out_path)
        click.echo(
            f"trained {seg_plan.epochs} epochs; best val Dice "
            f"{model.best_val_dice:.4f} (epoch {model.best_epoch}) -> {out_path}"
        )
    except SynthlabError as exc:
        _fail(exc)


@seg.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def seg_predict(model_path, manifest_path, out_dir):
    from .data.manifest import DatasetManifest, load_manifest, save_manifest
    from .segmentor.train import load_seg_model, predict

    try:
        model = load_seg_model(model_path)
        manifest = load_manifest(manifest_path)
        masks = predict(model, [r.pixels for r in manifest])
        records = [replace(r, mask=m) for r, m in zip(manifest.records, masks)]
        path = save_manifest(DatasetManifest(records=records, catalog=manifest.catalog), out_dir)
        click.echo(f"wrote predictions for {len(records)} images to {path}")
    except SynthlabError as exc:
        _fail(exc)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------
@main.group()
def metrics():
    """Standalone metric computations."""


@metrics.command("fid")
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--synth", "synth_path", required=True, type=click.Path(exists=True))
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0)
def metrics_fid(real_path, synth_path, dim, seed):
    from .data.manifest import load_manifest
    from .metrics.fid import LinearProjectionEmbedder, fid_between_image_sets

    try:
        real = load_manifest(real_path)
        synth = load_manifest(synth_path)
        embedder = LinearProjectionEmbedder(dim=dim, seed=seed)
        score = fid_between_image_sets(
            [r.pixels for r in real], [r.pixels for r in synth], embedder
        )
        click.echo(f"FID: {score:.6f}")
    except SynthlabError as exc:
        _fail(exc)


@metrics.command("dice")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--label", type=int, required=True)
def metrics_dice(pred_path, gt_path, label):
    """Mean Dice between two manifests' masks, matched by record id."""
    from .data.manifest import load_manifest
    from .metrics.dice import mean_dice

    try:
        pred = load_manifest(pred_path)
        gt = load_manifest(gt_path)
        ids = [r.id for r in gt if r.id in set(pred.ids)]
        score = mean_dice(
            [pred.by_id(i).mask for i in ids], [gt.by_id(i).mask for i in ids], label
        )
        click.echo(f"mean Dice (label {label}, n={len(ids)}): {score:.6f}")
    except SynthlabError as exc:
        _fail(exc)


def _read_scores(path: str) -> tuple[dict, np.ndarray]:
    header: dict = {}
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    k, v = part.split("=", 1)
                    header[k] = v
            continue
        values.append(float(line))
    return header, np.array(values)


def write_scores(path: str | Path, values, **header) -> Path:
    """Score file: one float per line, '#' header naming the run context."""
    path = Path(path)
    head = "# " + " ".join(f"{k}={v}" for k, v in header.items())
    path.write_text(head + "\n" + "\n".join(f"{v:.6f}" for v in values) + "\n")
    return path


@metrics.command("compare")
@click.option("--a", "a_path", required=True, type=click.Path(exists=True))
@click.option("--b", "b_path", required=True, type=click.Path(exists=True))
@click.option("--resamples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0)
def metrics_compare(a_path, b_path, resamples, seed):
    """Paired comparison of two score files (Wilcoxon + bootstrap CIs)."""
    from .metrics.bootstrap import bootstrap_ci
    from .metrics.significance import shapiro_wilk, wilcoxon_signed_rank

    try:
        ha, a = _read_scores(a_path)
        hb, b = _read_scores(b_path)
        if a.size != b.size:
            raise SynthlabError(f"score files differ in length: {a.size} vs {b.size}")
        res = wilcoxon_signed_rank(a, b)
        ca = bootstrap_ci(a, resamples=resamples, seed=seed)
        cb = bootstrap_ci(b, resamples=resamples, seed=seed)
        lines = [
            f"a: mean {a.mean():.4f} CI ({ca[0]:.4f}, {ca[1]:.4f})  [{ha}]",
            f"b: mean {b.mean():.4f} CI ({cb[0]:.4f}, {cb[1]:.4f})  [{hb}]",
            f"wilcoxon: W={res.statistic:.2f} p={res.p_value:.6f} ({res.method}, n={res.n})",
        ]
        diff = a - b
        if diff.size >= 3 and np.ptp(diff) > 0:
            sw = shapiro_wilk(diff)
            lines.append(f"shapiro-wilk on differences: W={sw.statistic:.4f} p={sw.p_value:.6f}")
        click.echo("\n".join(lines))
    except SynthlabError as exc:
        _fail(exc)


# ---------------------------------------------------------------------------
# run / report
# ---------------------------------------------------------------------------
@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def run_cmd(config_path):
    """Execute the full experiment grid described by a config file."""
    from .orchestrator.config import load_experiment_config
    from .orchestrator.runner import run_grid

    try:
        config = load_experiment_config(config_path)
        result = run_grid(config)
        click.echo(
            f"grid complete: {result.executed} executed, {result.skipped} skipped, "
            f"{len(result.failures)} failed; store: {Path(config.output_dir) / 'runs'}"
        )
        for run_id, error in result.failures:
            click.echo(f"  FAILED {run_id}: {error}")
        if result.failures:
            sys.exit(1)
    except SynthlabError as exc:
        _fail(exc)


@main.command("report")
@click.option("--runs", "runs_dir", required=True, type=click.Path(exists=True))
@click.option("--format", "formats", default="table,bars", show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
def report_cmd(runs_dir, formats, out_dir):
    """Render tables and bar charts from a run store."""
    from .orchestrator.report import RunReport, render

    try:
        report = RunReport.from_store(runs_dir)
        out = Path(out_dir) if out_dir else Path(runs_dir).parent / "report"
        paths = render(report, out, formats=tuple(formats.split(",")))
        for p in paths:
            click.echo(str(p))
    except SynthlabError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
