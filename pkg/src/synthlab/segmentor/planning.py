"""Dataset fingerprinting and the plan rulebook.

The training plan is a pure function of the dataset fingerprint: input size
is the median spatial size, intensities are clipped to the [0.5, 99.5]
percentiles and z-scored with post-clip statistics, and the augmentation and
schedule defaults mirror a self-configuring 2D segmentation baseline at desk
scale (100 epochs, mirroring, small rotations, intensity jitter).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import TrainingError
from ..seeding import fingerprint
from ..data.manifest import DatasetManifest, ImageRecord


@dataclass(frozen=True)
class DatasetFingerprint:
    median_shape: tuple[int, int]
    channels: int
    clip_lo: float            # 0.5th intensity percentile
    clip_hi: float            # 99.5th intensity percentile
    mean: float               # post-clip
    std: float                # post-clip
    label_counts: dict[int, int]
    n_images: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["median_shape"] = list(self.median_shape)
        d["label_counts"] = {str(k): v for k, v in self.label_counts.items()}
        return d


@dataclass(frozen=True)
class TrainingPlan:
    input_size: int
    channels: int
    n_labels: int
    clip_lo: float
    clip_hi: float
    mean: float
    std: float
    epochs: int = 100
    batch_size: int = 8
    lr: float = 1e-3
    lr_schedule: str = "poly_0.9"
    mirror: bool = True
    rotation_degrees: float = 15.0
    intensity_scale: float = 0.1
    intensity_shift: float = 0.1

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainingPlan":
        return TrainingPlan(**d)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())

    def normalize(self, pixels: np.ndarray) -> np.ndarray:
        arr = np.clip(np.asarray(pixels, dtype=np.float32), self.clip_lo, self.clip_hi)
        return (arr - self.mean) / self.std


def _training_records(manifest: DatasetManifest) -> list[ImageRecord]:
    train = [r for r in manifest if r.split == "train"]
    return train if train else list(manifest.records)


def plan_and_preprocess(
    manifest: DatasetManifest,
    epochs: int = 100,
    batch_size: int = 8,
    cache_dir: Optional[str | Path] = None,
) -> tuple[DatasetFingerprint, TrainingPlan]:
    """Fingerprint the training records and derive the plan by rulebook.

    Requires a mask on every training record and at least one foreground
    pixel overall. When ``cache_dir`` is given, normalized arrays plus the
    plan and fingerprint files are written there.
    """
    records = _training_records(manifest)
    for rec in records:
        if rec.mask is None:
            raise TrainingError(f"record {rec.id} lacks a mask; cannot plan segmentation")

    shapes = np.array([rec.spatial_shape for rec in records])
    median_shape = tuple(int(v) for v in np.median(shapes, axis=0))
    channels = 3 if np.asarray(records[0].pixels).ndim == 3 else 1

    all_pixels = np.concatenate([np.asarray(r.pixels, dtype=np.float32).ravel() for r in records])
    clip_lo, clip_hi = (float(v) for v in np.percentile(all_pixels, [0.5, 99.5]))
    clipped = np.clip(all_pixels, clip_lo, clip_hi)
    mean, std = float(clipped.mean()), float(clipped.std())
    if std <= 0:
        std = 1.0

    label_counts: dict[int, int] = {}
    for rec in records:
        vals, counts = np.unique(rec.mask, return_counts=True)
        for v, c in zip(vals.tolist(), counts.tolist()):
            label_counts[int(v)] = label_counts.get(int(v), 0) + int(c)
    foreground = {k: v for k, v in label_counts.items() if k > 0}
    if not foreground:
        raise TrainingError("degenerate labels: no foreground pixels in any training mask")

    fp = DatasetFingerprint(
        median_shape=median_shape,
        channels=channels,
        clip_lo=clip_lo,
        clip_hi=clip_hi,
        mean=mean,
        std=std,
        label_counts=dict(sorted(label_counts.items())),
        n_images=len(records),
    )
    plan = TrainingPlan(
        input_size=int(median_shape[0]),
        channels=channels,
        n_labels=max(foreground) + 1,
        clip_lo=clip_lo,
        clip_hi=clip_hi,
        mean=mean,
        std=std,
        epochs=epochs,
        batch_size=min(batch_size, len(records)),
    )

    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        for rec in manifest:
            np.savez_compressed(
                cache_dir / f"{rec.id}.npz",
                pixels=plan.normalize(rec.pixels),
                mask=rec.mask if rec.mask is not None else np.array([]),
            )
        (cache_dir / "plan.json").write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n")
        (cache_dir / "fingerprint.json").write_text(json.dumps(fp.to_dict(), indent=2, sort_keys=True) + "\n")

    return fp, plan
