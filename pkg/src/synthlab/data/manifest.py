"""Dataset manifests: ordered image/mask records bound to experiment roles.

Storage is a flat, diff-able container: one lossless PNG per image (16-bit
grayscale or 8-bit RGB), 8-bit PNG label masks, and a line-delimited CSV
manifest with columns ``id, class_id, group_id, split, fold, pixels_path,
mask_path`` (extra provenance columns are preserved verbatim).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import cv2
import numpy as np
from PIL import Image

from ..errors import ManifestError
from .catalog import ClassCatalog

SPLITS = ("train", "val", "test")
_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")
CORE_COLUMNS = ["id", "class_id", "group_id", "split", "fold", "pixels_path", "mask_path"]


@dataclass
class ImageRecord:
    """One image (optionally with a label mask) and its experiment role."""

    id: str
    class_id: int
    group_id: str
    pixels: np.ndarray
    mask: Optional[np.ndarray] = None
    split: Optional[str] = None
    fold: Optional[int] = None
    extras: dict = field(default_factory=dict)

    def validate(self, catalog: Optional[ClassCatalog] = None) -> None:
        if not _ID_RE.match(self.id or ""):
            raise ManifestError(f"invalid record id {self.id!r}")
        px = np.asarray(self.pixels)
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ManifestError(f"record {self.id}: pixels must be HxW or HxWx3, got {px.shape}")
        if not np.isfinite(px).all():
            raise ManifestError(f"record {self.id}: non-finite pixel values")
        if px.min() < -1e-6 or px.max() > 1 + 1e-6:
            raise ManifestError(f"record {self.id}: pixel values outside [0, 1]")
        if self.mask is not None:
            mask = np.asarray(self.mask)
            if mask.shape != self.spatial_shape:
                raise ManifestError(
                    f"record {self.id}: mask shape {mask.shape} does not match "
                    f"pixels shape {self.spatial_shape}"
                )
            if not np.issubdtype(mask.dtype, np.integer):
                raise ManifestError(f"record {self.id}: mask must be an integer array")
        if self.split is not None and self.split not in SPLITS:
            raise ManifestError(f"record {self.id}: split must be one of {SPLITS}")
        if self.fold is not None and not 0 <= self.fold <= 4:
            raise ManifestError(f"record {self.id}: fold must be in [0, 4]")
        if catalog is not None and self.class_id not in catalog:
            raise ManifestError(f"record {self.id}: class_id {self.class_id} not in catalog")

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return tuple(np.asarray(self.pixels).shape[:2])


@dataclass
class DatasetManifest:
    """Validated, id-ordered collection of records."""

    records: list[ImageRecord]
    catalog: Optional[ClassCatalog] = None

    def __post_init__(self):
        if not self.records:
            raise ManifestError("empty manifest")
        self.records = sorted(self.records, key=lambda r: r.id)
        seen = set()
        for rec in self.records:
            rec.validate(self.catalog)
            if rec.id in seen:
                raise ManifestError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self, record_id: str) -> ImageRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise ManifestError(f"record id {record_id!r} not in manifest")

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def group_ids(self) -> list[str]:
        out, seen = [], set()
        for rec in self.records:
            if rec.group_id not in seen:
                seen.add(rec.group_id)
                out.append(rec.group_id)
        return out

    def subset(self, ids: Iterable[str]) -> "DatasetManifest":
        wanted = set(ids)
        missing = wanted - set(self.ids)
        if missing:
            raise ManifestError(f"unknown ids in subset: {sorted(missing)[:5]}")
        return DatasetManifest(
            records=[replace(r) for r in self.records if r.id in wanted],
            catalog=self.catalog,
        )

    def with_splits(self, assignment: dict[str, str], fold: Optional[int] = None) -> "DatasetManifest":
        """New manifest with split (and optional fold) set from id -> split."""
        recs = []
        for rec in self.records:
            recs.append(
                replace(
                    rec,
                    split=assignment.get(rec.id, rec.split),
                    fold=fold if fold is not None else rec.fold,
                )
            )
        return DatasetManifest(records=recs, catalog=self.catalog)


def minmax_normalize(arr: np.ndarray) -> np.ndarray:
    """Rescale one image to [0, 1]; constant images map to zeros."""
    arr = np.asarray(arr, dtype=np.float32)
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def _write_pixels_png(arr: np.ndarray, path: Path) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        data = np.round(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)
        Image.fromarray(data, mode="I;16").save(path, format="PNG")
    else:
        data = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(data, mode="RGB").save(path, format="PNG")


def _read_pixels_png(path: Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode in ("I;16", "I"):
        return (np.asarray(img, dtype=np.float32) / 65535.0).astype(np.float32)
    if img.mode == "RGB":
        return (np.asarray(img, dtype=np.float32) / 255.0).astype(np.float32)
    if img.mode == "L":
        return (np.asarray(img, dtype=np.float32) / 255.0).astype(np.float32)
    raise ManifestError(f"unsupported PNG mode {img.mode} in {path}")


def _write_mask_png(mask: np.ndarray, path: Path) -> None:
    mask = np.asarray(mask)
    if mask.min() < 0 or mask.max() > 255:
        raise ManifestError("mask labels must fit in [0, 255] for PNG storage")
    Image.fromarray(mask.astype(np.uint8), mode="L").save(path, format="PNG")


def _read_mask_png(path: Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.int32)


def save_manifest(manifest: DatasetManifest, out_dir: str | Path) -> Path:
    """Write pixels/masks/manifest.csv under ``out_dir``; returns the CSV path.

    Output bytes are a pure function of the manifest content, so saving a
    loaded manifest reproduces the container byte for byte.
    """
    out_dir = Path(out_dir)
    (out_dir / "pixels").mkdir(parents=True, exist_ok=True)
    need_masks = any(r.mask is not None for r in manifest.records)
    if need_masks:
        (out_dir / "masks").mkdir(exist_ok=True)

    extra_cols = sorted({k for r in manifest.records for k in r.extras})
    rows = []
    for rec in manifest.records:
        pixels_path = f"pixels/{rec.id}.png"
        _write_pixels_png(rec.pixels, out_dir / pixels_path)
        mask_path = ""
        if rec.mask is not None:
            mask_path = f"masks/{rec.id}.png"
            _write_mask_png(rec.mask, out_dir / mask_path)
        row = [
            rec.id,
            str(rec.class_id),
            rec.group_id,
            rec.split or "",
            "" if rec.fold is None else str(rec.fold),
            pixels_path,
            mask_path,
        ] + [str(rec.extras.get(k, "")) for k in extra_cols]
        rows.append(row)

    csv_path = out_dir / "manifest.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CORE_COLUMNS + extra_cols)
        w.writerows(rows)
    return csv_path


def load_manifest(path: str | Path, catalog: Optional[ClassCatalog] = None) -> DatasetManifest:
    """Load a manifest CSV; pixel/mask paths resolve relative to the CSV."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest file not found: {path}")
    base = path.parent
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ManifestError("empty manifest")
        missing_cols = [c for c in CORE_COLUMNS if c not in reader.fieldnames]
        if missing_cols:
            raise ManifestError(f"manifest missing columns {missing_cols}")
        extra_cols = [c for c in reader.fieldnames if c not in CORE_COLUMNS]
        records = []
        for row in reader:
            px_path = base / row["pixels_path"]
            if not px_path.exists():
                raise ManifestError(f"pixel file not found: {px_path}")
            pixels = _read_pixels_png(px_path)
            mask = None
            if row["mask_path"]:
                m_path = base / row["mask_path"]
                if not m_path.exists():
                    raise ManifestError(f"mask file not found: {m_path}")
                mask = _read_mask_png(m_path)
            records.append(
                ImageRecord(
                    id=row["id"],
                    class_id=int(row["class_id"]),
                    group_id=row["group_id"],
                    pixels=pixels,
                    mask=mask,
                    split=row["split"] or None,
                    fold=int(row["fold"]) if row["fold"] else None,
                    extras={k: row[k] for k in extra_cols if row.get(k, "")},
                )
            )
    if not records:
        raise ManifestError("empty manifest")
    return DatasetManifest(records=records, catalog=catalog)


def resize_record(rec: ImageRecord, target: int) -> ImageRecord:
    if rec.spatial_shape == (target, target):
        return replace(rec)
    pixels = cv2.resize(
        np.asarray(rec.pixels, dtype=np.float32),
        (target, target),
        interpolation=cv2.INTER_LINEAR,
    )
    pixels = np.clip(pixels, 0.0, 1.0)
    mask = rec.mask
    if mask is not None:
        mask = cv2.resize(
            mask.astype(np.int32), (target, target), interpolation=cv2.INTER_NEAREST
        )
    return replace(rec, pixels=pixels, mask=mask)


def resize_manifest(manifest: DatasetManifest, target: int) -> DatasetManifest:
    """Resample every record to target x target.

    Pixels go through bilinear interpolation; masks through nearest-neighbor,
    so the output label set is a subset of the input label set.
    """
    if target < 8:
        raise ManifestError(f"resize target must be >= 8, got {target}")
    return DatasetManifest(
        records=[resize_record(r, target) for r in manifest.records],
        catalog=manifest.catalog,
    )
