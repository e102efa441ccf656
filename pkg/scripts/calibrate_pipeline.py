"""Oracle calibration run for the phantom pipeline.

Builds the full chain (phantom data -> progressive GAN -> feature interpreter
-> condition grid -> significance tests) at 32x32 and prints every quantity
the frozen test thresholds depend on: FID trend per stage, interpreter
fidelity against the band oracle, and per-seed minimal/gap/pretrain test Dice
with paired Wilcoxon p-values.

Usage: python scripts/calibrate_pipeline.py [workdir]
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import torch

torch.set_num_threads(1)

from synthlab.data import (
    DatasetManifest,
    OrganTemplate,
    PhantomSpec,
    annotate_by_intensity,
    generate_phantoms,
    phantom_catalog,
    resize_manifest,
    save_manifest,
)
from synthlab.gan import (
    GeneratorConfig,
    grow,
    init_stem,
    sample,
    save_checkpoint,
    select_checkpoint,
    train_stage,
)
from synthlab.interpreter import (
    AnnotationEntry,
    AnnotationSet,
    generate_labeled,
    save_interpreter,
    train_interpreter,
)
from synthlab.metrics import LinearProjectionEmbedder, per_image_dice
from synthlab.orchestrator import ExperimentConfig, RunReport, paired_wilcoxon, run_grid


def gan_phantom_spec(n_images: int, seed: int) -> PhantomSpec:
    return PhantomSpec(
        image_size=32,
        n_classes=2,
        organs_per_class=(
            OrganTemplate("blob", intensity=(0.5, 0.68), size=(0.12, 0.26)),
        ),
        distractors=(
            OrganTemplate("blob", intensity=(0.5, 0.68), size=(0.03, 0.05)),
        ),
        distractor_count=(2, 5),
        noise_level=0.08,
        brightness_jitter=0.15,
        class_shift=0.05,
        n_images=n_images,
        seed=seed,
    )


GAN_CONFIG = GeneratorConfig(
    base_channels=48,
    min_channels=24,
    latent_dim=48,
    style_dim=48,
    class_embed_dim=8,
    batch_size_low_res=24,
    batch_size_high_res=24,
    n_classes=2,
    fid_samples=96,
    steps_per_stage=900,
)

TASK_LABELS = {1: "blob"}
N_ANNOTATIONS = 50
SEEDS = (0, 1, 2)


def main(workdir: Path) -> None:
    workdir.mkdir(parents=True, exist_ok=True)
    t_start = time.time()

    # ---- data ------------------------------------------------------------
    gan_spec = gan_phantom_spec(n_images=160, seed=817)
    gan_manifest32 = generate_phantoms(gan_spec)
    gan_manifest16 = resize_manifest(gan_manifest32, 16)

    task_records = [r for r in gan_phantoms_task(gan_spec)]
    task_manifest = DatasetManifest(records=task_records, catalog=phantom_catalog(2))
    task_dir = workdir / "task_data"
    manifest_csv = save_manifest(task_manifest, task_dir)
    print(f"[data] GAN manifest {len(gan_manifest32)} imgs; task manifest "
          f"{len(task_manifest)} imgs ({time.time()-t_start:.0f}s)")

    # ---- GAN -------------------------------------------------------------
    embedder = LinearProjectionEmbedder(dim=48, patch=32, seed=0)
    t0 = time.time()
    state = init_stem(GAN_CONFIG, seed=41)
    state = train_stage(state, gan_manifest16, embedder, GAN_CONFIG)
    print(f"[gan] stem FID trend: {[(s, round(f, 3)) for s, f in state.fid_history]} "
          f"({time.time()-t0:.0f}s)")
    t0 = time.time()
    state = grow(state, GAN_CONFIG)
    state = train_stage(state, gan_manifest32, embedder, GAN_CONFIG)
    print(f"[gan] 32px FID trend: {[(s, round(f, 3)) for s, f in state.fid_history]} "
          f"({time.time()-t0:.0f}s)")
    ckpt = select_checkpoint(state)
    ckpt_path = workdir / "generator32.ckpt"
    save_checkpoint(ckpt, ckpt_path)
    print(f"[gan] promoted FID {ckpt.selection_fid:.3f}")

    # ---- interpreter -----------------------------------------------------
    t0 = time.time()
    entries = []
    for i in range(N_ANNOTATIONS):
        s = sample(ckpt, 0, 1, seed=9000 + i)[0]
        entries.append(AnnotationEntry(latent_seed=9000 + i, class_id=0,
                                       mask=annotate_by_intensity(s.image, gan_spec)))
    annotations = AnnotationSet(task="blob-seg", label_names={1: "blob"},
                                entries=entries, generator_fingerprint=ckpt.fingerprint)
    interp = train_interpreter(ckpt, annotations, seed=5)
    interp_path = workdir / "interp32.pt"
    save_interpreter(interp, interp_path)
    print(f"[interp] loss {interp.initial_loss:.4f} -> {interp.final_loss:.4f} "
          f"({time.time()-t0:.0f}s)")

    held_out = generate_labeled(ckpt, interp, 0, 100, seed=77777)
    oracle = [annotate_by_intensity(s.image, gan_spec) for s in held_out]
    fid_scores = per_image_dice([s.mask for s in held_out], oracle, 1)
    print(f"[interp] generated-vs-oracle Dice on 100 held out: "
          f"mean {np.mean(fid_scores):.4f} (n={len(fid_scores)}, min {min(fid_scores):.3f})")

    # ---- grid per seed ---------------------------------------------------
    for seed in SEEDS:
        t0 = time.time()
        config = ExperimentConfig(
            name="phantom-blob",
            manifest_path=str(manifest_csv),
            grouping="by_image",
            archetype="phantom",
            target_resolution=32,
            task_labels=TASK_LABELS,
            generator_class_id=0,
            generator_checkpoint=str(ckpt_path),
            interpreter_path=str(interp_path),
            output_dir=str(workdir / f"grid_seed{seed}"),
            k=5,
            run_folds=(0,),
            fold_seed=100 + seed,
            train_seed=200 + seed,
            val_size=8,
            test_size=16,
            minimal_size=1,
            conditions=("minimal_real", "minimal_real+gap"),
            pretrain=(False, True),
        )
        result = run_grid(config, manifest=task_manifest)
        report = RunReport(records=result.records)
        rows = {}
        for cond, pre in [("minimal_real", False), ("minimal_real+gap", False),
                          ("minimal_real", True), ("minimal_real+gap", True)]:
            summary = report.pooled_summary("blob", cond, pre)
            rows[(cond, pre)] = summary[0] if summary else float("nan")
        p_gap = paired_wilcoxon(report, "blob", ("minimal_real+gap", False),
                                ("minimal_real", False))
        p_pre = paired_wilcoxon(report, "blob", ("minimal_real", True),
                                ("minimal_real", False))
        print(f"[seed {seed}] minimal {rows[('minimal_real', False)]:.3f} | "
              f"gap {rows[('minimal_real+gap', False)]:.3f} "
              f"(margin {rows[('minimal_real+gap', False)] - rows[('minimal_real', False)]:+.3f}, "
              f"p={p_gap.p_value:.4g} [{p_gap.method}]) | "
              f"pretrain {rows[('minimal_real', True)]:.3f} "
              f"(margin {rows[('minimal_real', True)] - rows[('minimal_real', False)]:+.3f}, "
              f"p={p_pre.p_value:.4g}) | both {rows[('minimal_real+gap', True)]:.3f} "
              f"({time.time()-t0:.0f}s)")

    print(f"[total] {time.time()-t_start:.0f}s")


def gan_phantoms_task(gan_spec: PhantomSpec):
    """Task dataset: a fresh phantom draw (different seed), class 0 only."""
    from dataclasses import replace

    task_spec = replace(gan_spec, n_images=140, seed=2024)
    manifest = generate_phantoms(task_spec)
    return [r for r in manifest if r.class_id == 0]


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("calibration_out"))
