"""Annotation bundles: manually labeled synthetic images, stored offline.

A bundle is a directory of mask PNGs plus ``index.json`` recording, per
entry, the latent seed and class id that regenerate the annotated image, the
task name, the label names, and the generator fingerprint the annotations
were made against. No annotation UI exists here; masks are produced with any
external tool and dropped into the bundle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import AnnotationError
from ..data.manifest import _read_mask_png, _write_mask_png


@dataclass(frozen=True)
class AnnotationEntry:
    latent_seed: int
    class_id: int
    mask: np.ndarray


@dataclass
class AnnotationSet:
    """~50 manual masks keyed by the latents that regenerate their images."""

    task: str
    label_names: dict[int, str]          # label value -> name; 0 is background
    entries: list[AnnotationEntry]
    generator_fingerprint: str

    def __post_init__(self):
        if not self.entries:
            raise AnnotationError("annotation set has no entries")
        if 0 in self.label_names:
            raise AnnotationError("label 0 is reserved for background")
        allowed = set(self.label_names) | {0}
        shapes = set()
        any_foreground = False
        for e in self.entries:
            labels = set(np.unique(e.mask).tolist())
            if not labels <= allowed:
                raise AnnotationError(
                    f"mask for seed {e.latent_seed} uses labels {sorted(labels - allowed)} "
                    f"outside the task label set {sorted(allowed)}"
                )
            if labels - {0}:
                any_foreground = True
            shapes.add(e.mask.shape)
        if len(shapes) != 1:
            raise AnnotationError(f"masks disagree on shape: {sorted(shapes)}")
        if not any_foreground:
            raise AnnotationError("degenerate annotation set: every mask is all background")

    @property
    def resolution(self) -> int:
        return self.entries[0].mask.shape[0]

    @property
    def n_labels(self) -> int:
        return max(self.label_names) + 1


def save_annotations(annotations: AnnotationSet, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    index = {
        "task": annotations.task,
        "label_names": {str(k): v for k, v in annotations.label_names.items()},
        "generator_fingerprint": annotations.generator_fingerprint,
        "entries": [],
    }
    for e in annotations.entries:
        mask_path = f"masks/seed{e.latent_seed}_class{e.class_id}.png"
        _write_mask_png(e.mask, out_dir / mask_path)
        index["entries"].append(
            {"latent_seed": e.latent_seed, "class_id": e.class_id, "mask_path": mask_path}
        )
    index_path = out_dir / "index.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index_path


def load_annotations(path: str | Path) -> AnnotationSet:
    """Load a bundle from its directory or its index.json path."""
    path = Path(path)
    index_path = path / "index.json" if path.is_dir() else path
    if not index_path.exists():
        raise AnnotationError(f"annotation index not found: {index_path}")
    index = json.loads(index_path.read_text())
    base = index_path.parent
    entries = []
    for item in index["entries"]:
        mask_file = base / item["mask_path"]
        if not mask_file.exists():
            raise AnnotationError(f"mask file missing: {mask_file}")
        entries.append(
            AnnotationEntry(
                latent_seed=int(item["latent_seed"]),
                class_id=int(item["class_id"]),
                mask=_read_mask_png(mask_file),
            )
        )
    return AnnotationSet(
        task=index["task"],
        label_names={int(k): v for k, v in index["label_names"].items()},
        entries=entries,
        generator_fingerprint=index["generator_fingerprint"],
    )
