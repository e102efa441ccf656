"""Progressive stage training: stem init, growth, adversarial steps with FID
monitoring, checkpoint promotion, and sampling from frozen checkpoints."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ConfigError, TrainingError
from ..seeding import derive_seed
from ..data.manifest import DatasetManifest
from ..metrics.fid import GaussianSummary, fid, summarize
from .checkpoint import Checkpoint
from .config import GeneratorConfig
from .networks import Discriminator, ProgressiveGenerator, parameter_count


@dataclass
class StageState:
    """One resolution stage of the progressive schedule, mid-training."""

    config: GeneratorConfig
    generator: ProgressiveGenerator
    discriminator: Discriminator
    head_layer_total: int
    rng_seed: int
    parent_checkpoint: Optional[str] = None   # parent checkpoint fingerprint
    fid_history: list[tuple[int, float]] = field(default_factory=list)
    snapshots: dict[int, dict] = field(default_factory=dict)

    @property
    def resolution(self) -> int:
        return self.generator.resolution

    @property
    def stage_index(self) -> int:
        return self.generator.stage_count - 1


def head_layer_total_for(config: GeneratorConfig, stage_count: int) -> int:
    """Cumulative head-layer count after ``stage_count`` stages of the schedule."""
    return sum(config.head_layers_for_stage(i) for i in range(stage_count))


def state_from_checkpoint(ckpt: Checkpoint, seed: int) -> StageState:
    """Rebuild a trained stage from its promoted checkpoint (for growing or
    resuming from the CLI); the checkpoint is its own single-entry history."""
    torch.manual_seed(derive_seed(seed, "resume-disc", ckpt.resolution))
    return StageState(
        config=ckpt.config,
        generator=ckpt.build_generator(),
        discriminator=Discriminator(ckpt.config, ckpt.resolution),
        head_layer_total=head_layer_total_for(ckpt.config, ckpt.stage_count),
        rng_seed=seed,
        fid_history=[(0, ckpt.selection_fid)],
        snapshots={0: ckpt.state_dict},
    )


def init_stem(config: GeneratorConfig, seed: int) -> StageState:
    """Fresh stem stage at the lowest scheduled resolution, seeded init."""
    torch.manual_seed(derive_seed(seed, "stem-init"))
    generator = ProgressiveGenerator(config, stage_count=1)
    torch.manual_seed(derive_seed(seed, "stem-disc"))
    discriminator = Discriminator(config, config.stage_resolutions[0])
    return StageState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        head_layer_total=config.stem_head_layers,
        rng_seed=seed,
    )


def grow(state: StageState, config: GeneratorConfig) -> StageState:
    """Promote the stage's best snapshot and extend the network by one stage.

    All parameters of the trained sub-network are copied bit-exact from the
    selected checkpoint; only the new stage's head blocks (and the fresh
    discriminator) start from seeded random init.
    """
    new_count = state.generator.stage_count + 1
    if new_count > config.n_stages:
        raise TrainingError(
            f"cannot grow past the final scheduled stage ({state.resolution}px)"
        )
    ckpt = select_checkpoint(state)

    new_res = config.stage_resolutions[new_count - 1]
    torch.manual_seed(derive_seed(state.rng_seed, "grow-init", new_res))
    generator = ProgressiveGenerator(config, stage_count=new_count)
    missing, unexpected = generator.load_state_dict(ckpt.state_dict, strict=False)
    if unexpected:
        raise TrainingError(f"parent checkpoint has unknown parameters: {unexpected[:3]}")
    copied = set(ckpt.state_dict)
    for key in missing:
        if not key.startswith(f"stages.{new_count - 1}."):
            raise TrainingError(f"parameter {key} missing from parent checkpoint")
    for key in copied:
        if not torch.equal(generator.state_dict()[key], ckpt.state_dict[key]):
            raise TrainingError(f"parameter {key} was not copied bit-exact")

    torch.manual_seed(derive_seed(state.rng_seed, "grow-disc", new_res))
    discriminator = Discriminator(config, new_res)
    added = config.head_layers_for_stage(new_count - 1)
    return StageState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        head_layer_total=state.head_layer_total + added,
        rng_seed=state.rng_seed,
        parent_checkpoint=ckpt.fingerprint,
    )


def select_checkpoint(state: StageState) -> Checkpoint:
    """Snapshot with the lowest FID; ties break toward the earliest step."""
    if not state.fid_history:
        raise TrainingError("stage has no FID history; train it first")
    best_step, best_fid = min(state.fid_history, key=lambda e: (e[1], e[0]))
    if best_step not in state.snapshots:
        raise TrainingError(f"no snapshot retained for step {best_step}")
    return Checkpoint(
        resolution=state.resolution,
        stage_count=state.generator.stage_count,
        selection_fid=best_fid,
        config=state.config,
        state_dict=state.snapshots[best_step],
    )


def _manifest_tensors(manifest: DatasetManifest, config: GeneratorConfig,
                      resolution: int) -> tuple[torch.Tensor, torch.Tensor]:
    images, classes = [], []
    for rec in manifest:
        if rec.spatial_shape != (resolution, resolution):
            raise TrainingError(
                f"record {rec.id} is {rec.spatial_shape}, stage expects {resolution}px; "
                "resize the manifest first"
            )
        arr = np.asarray(rec.pixels, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[None]
        else:
            arr = arr.transpose(2, 0, 1)
        if arr.shape[0] != config.img_channels:
            raise TrainingError(
                f"record {rec.id} has {arr.shape[0]} channels, config expects "
                f"{config.img_channels}"
            )
        if rec.class_id >= config.n_classes:
            raise TrainingError(
                f"record {rec.id} class {rec.class_id} outside configured "
                f"{config.n_classes} classes"
            )
        images.append(torch.from_numpy(arr.copy()))
        classes.append(rec.class_id)
    return torch.stack(images), torch.tensor(classes, dtype=torch.long)


def _to_numpy_images(batch: torch.Tensor) -> list[np.ndarray]:
    out = []
    for img in batch.detach().cpu().numpy():
        out.append(img[0] if img.shape[0] == 1 else img.transpose(1, 2, 0))
    return out


def _snapshot(generator: ProgressiveGenerator) -> dict:
    return {k: v.detach().clone() for k, v in generator.state_dict().items()}


def train_stage(
    state: StageState,
    manifest: DatasetManifest,
    eval_embedder,
    config: GeneratorConfig,
    steps: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> StageState:
    """Adversarial training at the stage's resolution.

    Uses the stage batch policy (large batch for the first two stages), x-flip
    augmentation except on the final stage, non-saturating logistic losses
    with lazy R1, and appends an FID evaluation (with a retained snapshot)
    every cadence interval plus one final evaluation. Deterministic given the
    state's seed.
    """
    steps = config.steps_per_stage if steps is None else steps
    stage = state.stage_index
    resolution = state.resolution
    real_images, real_classes = _manifest_tensors(manifest, config, resolution)
    n_real = real_images.shape[0]

    batch = batch_size if batch_size is not None else config.batch_size_for_stage(stage)
    batch = min(batch, n_real) if not config.sample_with_replacement else batch
    class_counts = np.bincount(real_classes.numpy(), minlength=config.n_classes)
    present = np.nonzero(class_counts)[0]
    if not config.sample_with_replacement and class_counts[present].min() < batch:
        raise TrainingError(
            "a class has fewer images than the batch size and replacement is disabled"
        )

    flip = config.flip_for_stage(stage)
    rng = np.random.default_rng(derive_seed(state.rng_seed, "train", resolution))
    latent_gen = torch.Generator().manual_seed(derive_seed(state.rng_seed, "latents", resolution))

    g, d = state.generator, state.discriminator
    g.train(), d.train()
    opt_g = torch.optim.Adam(g.parameters(), lr=config.lr_generator, betas=config.adam_betas)
    opt_d = torch.optim.Adam(d.parameters(), lr=config.lr_discriminator, betas=config.adam_betas)

    real_summary = summarize(eval_embedder.embed(_to_numpy_images(real_images)))
    cadence = config.fid_cadence(steps)

    def evaluate(step: int) -> None:
        g.eval()
        with torch.no_grad():
            n = config.fid_samples
            eval_gen = torch.Generator().manual_seed(
                derive_seed(state.rng_seed, "fid-eval", resolution, step)
            )
            z = torch.randn(n, config.latent_dim, generator=eval_gen)
            cls = torch.from_numpy(
                rng.choice(len(real_classes), size=n, replace=True)
            )
            fake = g(z, real_classes[cls])
        score = fid(real_summary, summarize(eval_embedder.embed(_to_numpy_images(fake))))
        state.fid_history.append((step, float(score)))
        state.snapshots[step] = _snapshot(g)
        g.train()

    if steps == 0:
        evaluate(0)
        g.eval(), d.eval()
        return state
    evaluate(0)

    for step in range(1, steps + 1):
        idx = torch.from_numpy(rng.choice(n_real, size=batch, replace=True))
        real = real_images[idx]
        cls = real_classes[idx]
        if flip:
            do_flip = torch.from_numpy(rng.random(batch) < 0.5)
            real = torch.where(do_flip[:, None, None, None], real.flip(-1), real)

        # discriminator step
        z = torch.randn(batch, config.latent_dim, generator=latent_gen)
        with torch.no_grad():
            fake = g(z, cls)
        need_r1 = config.r1_gamma > 0 and step % config.r1_interval == 0
        real_in = real.requires_grad_(True) if need_r1 else real
        real_logits = d(real_in, cls)
        fake_logits = d(fake, cls)
        d_loss = F.softplus(-real_logits).mean() + F.softplus(fake_logits).mean()
        if need_r1:
            (grad,) = torch.autograd.grad(real_logits.sum(), real_in, create_graph=True)
            d_loss = d_loss + 0.5 * config.r1_gamma * grad.pow(2).sum(dim=(1, 2, 3)).mean()
        opt_d.zero_grad(set_to_none=True)
        d_loss.backward()
        opt_d.step()

        # generator step
        z = torch.randn(batch, config.latent_dim, generator=latent_gen)
        fake = g(z, cls)
        g_loss = F.softplus(-d(fake, cls)).mean()
        opt_g.zero_grad(set_to_none=True)
        g_loss.backward()
        opt_g.step()

        if not (torch.isfinite(d_loss) and torch.isfinite(g_loss)):
            raise TrainingError(
                f"non-finite loss at step {step} "
                f"(d={float(d_loss):.4g}, g={float(g_loss):.4g})"
            )

        if step % cadence == 0 or step == steps:
            evaluate(step)

    g.eval(), d.eval()
    return state


@dataclass(frozen=True)
class GeneratedSample:
    """One synthetic image with optional tap-layer feature maps."""

    image: np.ndarray
    class_id: int
    seed: int
    index: int
    features: Optional[list[np.ndarray]] = None


def sample(
    ckpt: Checkpoint,
    class_id: int,
    n: int,
    seed: int,
    capture_features: bool = False,
) -> list[GeneratedSample]:
    """Draw ``n`` images from a frozen checkpoint, deterministically.

    Latents come from a stream seeded by ``seed``, so sample ``i`` depends
    only on (checkpoint, class_id, seed, i); asking for a longer batch keeps
    the shared prefix. With ``capture_features`` each sample also carries the
    activation maps of the generator's tap blocks (every second block).
    """
    if not 0 <= class_id < ckpt.config.n_classes:
        raise ConfigError(f"unknown class_id {class_id} for this generator")
    if n == 0:
        return []
    gen = ckpt.build_generator()
    latent_gen = torch.Generator().manual_seed(derive_seed(seed, "sample", class_id))
    z = torch.randn(n, ckpt.config.latent_dim, generator=latent_gen)
    cls = torch.full((n,), class_id, dtype=torch.long)
    with torch.no_grad():
        if capture_features:
            imgs, taps = gen(z, cls, capture=True)
        else:
            imgs = gen(z, cls)
    images = _to_numpy_images(imgs)
    out = []
    for i in range(n):
        feats = None
        if capture_features:
            feats = [t[i].cpu().numpy() for t in taps]
        out.append(
            GeneratedSample(
                image=np.clip(images[i], 0.0, 1.0),
                class_id=class_id,
                seed=seed,
                index=i,
                features=feats,
            )
        )
    return out


def generator_parameter_count(state: StageState) -> int:
    return parameter_count(state.generator)
