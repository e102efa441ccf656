"""Feature interpreter: a segmentation branch over generator tap activations.

The head reads the generator's intermediate feature maps (every second
synthesis/head block, bilinearly upsampled to output resolution and
concatenated) through two 1x1 convolutions, and predicts a per-pixel label
for each synthetic image. Trained on ~50 manually annotated samples, it turns
a frozen checkpoint into a paired image+mask generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import AnnotationError, FingerprintMismatchError, TrainingError
from ..seeding import derive_seed, fingerprint_bytes
from ..data.manifest import ImageRecord
from ..gan.checkpoint import Checkpoint
from ..gan.train import GeneratedSample, sample
from .annotations import AnnotationSet

HEAD_WIDTH = 64


@dataclass(frozen=True)
class InterpreterHyper:
    lr: float = 1e-4
    batch_size: int = 4
    epochs: int = 100


class _Head(nn.Module):
    def __init__(self, in_ch: int, n_labels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, HEAD_WIDTH, kernel_size=1)
        self.conv2 = nn.Conv2d(HEAD_WIDTH, n_labels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv2(F.leaky_relu(self.conv1(x), 0.2))


@dataclass
class InterpreterModel:
    task: str
    label_names: dict[int, str]
    n_labels: int
    tap_ids: list[int]
    feature_dim: int
    resolution: int
    generator_fingerprint: str
    hyper: InterpreterHyper
    head_state: dict
    initial_loss: float
    final_loss: float

    @property
    def fingerprint(self) -> str:
        blob = b"".join(
            self.head_state[k].numpy().tobytes() for k in sorted(self.head_state)
        )
        return fingerprint_bytes(self.generator_fingerprint.encode() + blob)

    def build_head(self) -> _Head:
        head = _Head(self.feature_dim, self.n_labels)
        head.load_state_dict(self.head_state)
        head.eval()
        return head


def _stack_features(feats: list[np.ndarray], resolution: int) -> torch.Tensor:
    """Upsample each tap map to output resolution and concatenate channels."""
    pieces = []
    for f in feats:
        t = torch.from_numpy(f)[None]
        if t.shape[-1] != resolution:
            t = F.interpolate(t, size=(resolution, resolution), mode="bilinear",
                              align_corners=False)
        pieces.append(t[0])
    return torch.cat(pieces, dim=0)


def _feature_batch(samples: list[GeneratedSample], resolution: int) -> torch.Tensor:
    return torch.stack([_stack_features(s.features, resolution) for s in samples])


def train_interpreter(
    ckpt: Checkpoint,
    annotations: AnnotationSet,
    hyper: InterpreterHyper = InterpreterHyper(),
    seed: int = 0,
) -> InterpreterModel:
    """Fit the segmentation head on (feature pyramid, manual mask) pairs.

    Regenerates every annotated image from its recorded latent seed under
    ``ckpt`` (the fingerprint must match the one the annotations were made
    against), then trains with per-pixel cross-entropy for exactly the
    configured epochs. Deterministic given ``seed``.
    """
    if annotations.generator_fingerprint != ckpt.fingerprint:
        raise FingerprintMismatchError(
            f"annotations were made against generator {annotations.generator_fingerprint}, "
            f"checkpoint is {ckpt.fingerprint}"
        )
    if annotations.resolution != ckpt.resolution:
        raise AnnotationError(
            f"masks are {annotations.resolution}px but the generator emits "
            f"{ckpt.resolution}px images"
        )

    regenerated = [
        sample(ckpt, e.class_id, 1, seed=e.latent_seed, capture_features=True)[0]
        for e in annotations.entries
    ]
    features = _feature_batch(regenerated, ckpt.resolution)
    targets = torch.stack(
        [torch.from_numpy(np.ascontiguousarray(e.mask, dtype=np.int64)) for e in annotations.entries]
    )
    n_labels = annotations.n_labels

    torch.manual_seed(derive_seed(seed, "interp-head"))
    head = _Head(features.shape[1], n_labels)
    opt = torch.optim.Adam(head.parameters(), lr=hyper.lr)
    rng = np.random.default_rng(derive_seed(seed, "interp-batches"))

    n = features.shape[0]
    epoch_losses = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, hyper.batch_size):
            idx = torch.from_numpy(order[start : start + hyper.batch_size])
            logits = head(features[idx])
            loss = F.cross_entropy(logits, targets[idx])
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite interpreter loss at epoch {epoch}")
            losses.append(float(loss))
        epoch_losses.append(float(np.mean(losses)))

    if epoch_losses[-1] >= epoch_losses[0]:
        raise TrainingError(
            f"interpreter failed to fit: loss {epoch_losses[0]:.4f} -> {epoch_losses[-1]:.4f}"
        )
    head.eval()
    return InterpreterModel(
        task=annotations.task,
        label_names=dict(annotations.label_names),
        n_labels=n_labels,
        tap_ids=ckpt.build_generator().tap_block_ids(),
        feature_dim=features.shape[1],
        resolution=ckpt.resolution,
        generator_fingerprint=ckpt.fingerprint,
        hyper=hyper,
        head_state={k: v.detach().clone() for k, v in head.state_dict().items()},
        initial_loss=epoch_losses[0],
        final_loss=epoch_losses[-1],
    )


@dataclass(frozen=True)
class LabeledSample:
    """A synthetic image paired with its generated mask and provenance."""

    image: np.ndarray
    mask: np.ndarray
    class_id: int
    provenance: dict = field(default_factory=dict)


def _predict_masks(interp: InterpreterModel, samples: list[GeneratedSample]) -> np.ndarray:
    head = interp.build_head()
    feats = _feature_batch(samples, interp.resolution)
    with torch.no_grad():
        logits = head(feats)
    return logits.argmax(dim=1).numpy().astype(np.int32)


def generate_labeled(
    ckpt: Checkpoint,
    interp: InterpreterModel,
    class_id: int,
    n: int,
    seed: int,
) -> list[LabeledSample]:
    """Draw ``n`` paired (image, mask) samples; mask is the per-pixel argmax
    of the head over the captured feature pyramid. Deterministic in seed."""
    if interp.generator_fingerprint != ckpt.fingerprint:
        raise FingerprintMismatchError(
            f"interpreter was trained against generator {interp.generator_fingerprint}, "
            f"checkpoint is {ckpt.fingerprint}"
        )
    if n == 0:
        return []
    drawn = sample(ckpt, class_id, n, seed=seed, capture_features=True)
    masks = _predict_masks(interp, drawn)
    out = []
    for i, s in enumerate(drawn):
        out.append(
            LabeledSample(
                image=s.image,
                mask=masks[i],
                class_id=class_id,
                provenance={
                    "generator": ckpt.fingerprint,
                    "interpreter": interp.fingerprint,
                    "class_id": class_id,
                    "seed": seed,
                    "index": i,
                },
            )
        )
    return out


def regenerate(ckpt: Checkpoint, interp: InterpreterModel, provenance: dict) -> LabeledSample:
    """Reproduce one labeled sample bit-identically from its provenance.

    Relies on latent prefix stability: sample ``index`` of a longer batch
    equals sample ``index`` of any shorter batch with the same seed.
    """
    for key in ("class_id", "seed", "index"):
        if key not in provenance:
            raise AnnotationError(f"provenance record lacks {key!r}")
    batch = generate_labeled(
        ckpt, interp,
        class_id=provenance["class_id"],
        n=provenance["index"] + 1,
        seed=provenance["seed"],
    )
    return batch[provenance["index"]]


def labeled_to_records(
    samples: list[LabeledSample],
    id_prefix: str = "synth",
    group_prefix: str = "synthgrp",
    split: Optional[str] = None,
) -> list[ImageRecord]:
    """Wrap labeled samples as manifest records with provenance columns."""
    records = []
    for i, s in enumerate(samples):
        records.append(
            ImageRecord(
                id=f"{id_prefix}{i:05d}",
                class_id=s.class_id,
                group_id=f"{group_prefix}{i:05d}",
                pixels=s.image,
                mask=s.mask,
                split=split,
                extras={
                    "gen_fingerprint": s.provenance.get("generator", ""),
                    "interp_fingerprint": s.provenance.get("interpreter", ""),
                    "latent_seed": str(s.provenance.get("seed", "")),
                    "latent_index": str(s.provenance.get("index", "")),
                },
            )
        )
    return records


def save_interpreter(interp: InterpreterModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": 1,
            "task": interp.task,
            "label_names": interp.label_names,
            "n_labels": interp.n_labels,
            "tap_ids": interp.tap_ids,
            "feature_dim": interp.feature_dim,
            "resolution": interp.resolution,
            "generator_fingerprint": interp.generator_fingerprint,
            "hyper": vars(interp.hyper),
            "head_state": interp.head_state,
            "initial_loss": interp.initial_loss,
            "final_loss": interp.final_loss,
        },
        path,
    )
    return path


def load_interpreter(path: str | Path) -> InterpreterModel:
    path = Path(path)
    if not path.exists():
        raise AnnotationError(f"interpreter file not found: {path}")
    d = torch.load(path, weights_only=False)
    return InterpreterModel(
        task=d["task"],
        label_names={int(k): v for k, v in d["label_names"].items()},
        n_labels=d["n_labels"],
        tap_ids=list(d["tap_ids"]),
        feature_dim=d["feature_dim"],
        resolution=d["resolution"],
        generator_fingerprint=d["generator_fingerprint"],
        hyper=InterpreterHyper(**d["hyper"]),
        head_state=d["head_state"],
        initial_loss=d["initial_loss"],
        final_loss=d["final_loss"],
    )
