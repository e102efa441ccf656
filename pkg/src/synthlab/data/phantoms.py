"""Procedural phantom anatomy with exact analytic oracle masks.

Every image is composed of shape-family "organs" (ellipse, paired ellipses,
annulus, blob) painted over a darker background, each family occupying its
own intensity band. The label mask is produced by evaluating the very same
analytic region membership used for painting, so masks are exact by
construction, and an intensity-band rule can re-derive them for any image
drawn from the same appearance distribution (including GAN samples).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import cv2
import numpy as np

from ..errors import PhantomError
from ..seeding import derive_seed
from .catalog import ClassCatalog, phantom_catalog
from .manifest import DatasetManifest, ImageRecord

VALID_SIZES = (16, 32, 64, 128)
FAMILIES = ("ellipse", "paired_ellipses", "annulus", "blob")


@dataclass(frozen=True)
class OrganTemplate:
    """One organ family: label index comes from its position in the spec."""

    family: str
    intensity: tuple[float, float]   # uniform band, before class shift
    size: tuple[float, float]        # radius as a fraction of image size

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PhantomError(f"unknown shape family {self.family!r}")
        lo, hi = self.intensity
        if not 0.0 < lo <= hi <= 1.0:
            raise PhantomError(f"bad intensity band {self.intensity}")
        lo, hi = self.size
        if not 0.0 < lo <= hi < 0.5:
            raise PhantomError(f"bad size range {self.size}")


@dataclass(frozen=True)
class PhantomSpec:
    image_size: int
    n_classes: int
    organs_per_class: tuple[OrganTemplate, ...]
    noise_level: float = 0.04
    n_images: int = 100
    seed: int = 0
    channels: int = 1
    background: tuple[float, float] = (0.08, 0.20)
    class_shift: float = 0.05        # per-class additive appearance offset
    brightness_jitter: float = 0.0   # per-image multiplicative jitter half-range
    group_size: int = 1              # images per synthetic scan
    overlap_cap: float = 0.05        # max tolerated organ-organ overlap fraction
    # Distractors share the organs' intensity bands but are labeled
    # background; they are only separable from organs by size.
    distractors: tuple[OrganTemplate, ...] = ()
    distractor_count: tuple[int, int] = (2, 4)

    def __post_init__(self):
        if self.image_size not in VALID_SIZES:
            raise PhantomError(f"image_size must be one of {VALID_SIZES}")
        if self.n_classes < 2:
            raise PhantomError("phantom specs need n_classes >= 2")
        if not self.organs_per_class:
            raise PhantomError("at least one organ template required")
        if len(self.organs_per_class) > 254:
            raise PhantomError("too many organ labels for 8-bit masks")
        if not 0.0 <= self.noise_level < 1.0:
            raise PhantomError("noise_level must be in [0, 1)")
        if self.n_images < 1:
            raise PhantomError("n_images must be >= 1")
        if self.channels not in (1, 3):
            raise PhantomError("channels must be 1 or 3")
        if self.group_size < 1:
            raise PhantomError("group_size must be >= 1")

    @property
    def labels(self) -> dict[int, str]:
        return {i + 1: t.family for i, t in enumerate(self.organs_per_class)}


@dataclass(frozen=True)
class PlacedShape:
    """A concrete organ instance with its analytic membership test."""

    family: str
    label: int
    intensity: float
    params: dict = field(default_factory=dict)

    def contains(self, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        p = self.params
        if self.family == "ellipse":
            return _ellipse_contains(yy, xx, p["cy"], p["cx"], p["ry"], p["rx"], p["theta"])
        if self.family == "paired_ellipses":
            a = _ellipse_contains(yy, xx, p["cy"], p["cx1"], p["ry"], p["rx"], p["theta"])
            b = _ellipse_contains(yy, xx, p["cy"], p["cx2"], p["ry"], p["rx"], -p["theta"])
            return a | b
        if self.family == "annulus":
            d2 = (yy - p["cy"]) ** 2 + (xx - p["cx"]) ** 2
            return (d2 <= p["r_out"] ** 2) & (d2 >= p["r_in"] ** 2)
        if self.family == "blob":
            dy, dx = yy - p["cy"], xx - p["cx"]
            phi = np.arctan2(dy, dx)
            radius = p["r0"] * (1.0 + p["amp"] * np.sin(p["lobes"] * phi + p["phase"]))
            return dy**2 + dx**2 <= radius**2
        raise PhantomError(f"unknown family {self.family!r}")


def _ellipse_contains(yy, xx, cy, cx, ry, rx, theta):
    dy, dx = yy - cy, xx - cx
    ct, st = math.cos(theta), math.sin(theta)
    xr = dx * ct + dy * st
    yr = -dx * st + dy * ct
    return (xr / rx) ** 2 + (yr / ry) ** 2 <= 1.0


def _place_shape(template: OrganTemplate, label: int, class_id: int,
                 spec: PhantomSpec, rng: np.random.Generator) -> PlacedShape:
    s = spec.image_size
    radius = rng.uniform(*template.size) * s
    margin = radius * 1.15 + 1.0
    cy = rng.uniform(margin, s - margin)
    cx = rng.uniform(margin, s - margin)
    intensity = float(np.clip(rng.uniform(*template.intensity) + spec.class_shift * class_id, 0.0, 0.99))
    if template.family == "ellipse":
        params = {
            "cy": cy, "cx": cx,
            "ry": radius * rng.uniform(0.6, 1.0),
            "rx": radius,
            "theta": rng.uniform(0.0, math.pi),
        }
    elif template.family == "paired_ellipses":
        gap = radius * rng.uniform(1.1, 1.5)
        cx = float(np.clip(cx, margin + gap / 2, s - margin - gap / 2))
        params = {
            "cy": cy, "cx1": cx - gap, "cx2": cx + gap,
            "ry": radius * rng.uniform(0.8, 1.2),
            "rx": radius * rng.uniform(0.45, 0.6),
            "theta": rng.uniform(-0.35, 0.35),
        }
    elif template.family == "annulus":
        params = {"cy": cy, "cx": cx, "r_out": radius, "r_in": radius * rng.uniform(0.45, 0.62)}
    else:  # blob
        params = {
            "cy": cy, "cx": cx,
            "r0": radius * 0.85,
            "amp": rng.uniform(0.12, 0.3),
            "lobes": int(rng.integers(3, 6)),
            "phase": rng.uniform(0.0, 2 * math.pi),
        }
    return PlacedShape(family=template.family, label=label, intensity=intensity, params=params)


def sample_scene(spec: PhantomSpec, class_id: int, rng: np.random.Generator,
                 max_tries: int = 25) -> list[PlacedShape]:
    """Place one instance of every organ template (plus any distractors)
    without excessive overlap. Distractors carry label 0."""
    yy, xx = np.meshgrid(np.arange(spec.image_size), np.arange(spec.image_size), indexing="ij")
    placements: list[tuple[OrganTemplate, int]] = [
        (t, i + 1) for i, t in enumerate(spec.organs_per_class)
    ]
    if spec.distractors:
        count = int(rng.integers(spec.distractor_count[0], spec.distractor_count[1] + 1))
        for _ in range(count):
            template = spec.distractors[int(rng.integers(len(spec.distractors)))]
            placements.append((template, 0))

    shapes: list[PlacedShape] = []
    occupancy: list[np.ndarray] = []
    for template, label in placements:
        for attempt in range(max_tries):
            shape = _place_shape(template, label, class_id, spec, rng)
            region = shape.contains(yy, xx)
            area = int(region.sum())
            if area == 0:
                continue
            overlap = max((int((region & prev).sum()) for prev in occupancy), default=0)
            if overlap <= spec.overlap_cap * max(area, 1):
                shapes.append(shape)
                occupancy.append(region)
                break
        else:
            if label == 0:
                continue  # a crowded scene may simply drop a distractor
            raise PhantomError(
                f"could not place organ {template.family!r} within the overlap cap "
                f"{spec.overlap_cap} after {max_tries} tries"
            )
    return shapes


def render_scene(spec: PhantomSpec, class_id: int, shapes: list[PlacedShape],
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Paint background + organs, apply jitter and noise; returns (pixels, mask)."""
    s = spec.image_size
    yy, xx = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    base = rng.uniform(*spec.background) + spec.class_shift * class_id
    img = np.full((s, s), base, dtype=np.float32)
    # gentle background gradient so backgrounds are not constant
    grad = rng.uniform(-0.03, 0.03)
    img += (grad * (xx - s / 2) / s).astype(np.float32)
    mask = np.zeros((s, s), dtype=np.int32)
    for shape in shapes:
        region = shape.contains(yy, xx)
        img[region] = shape.intensity
        mask[region] = shape.label
    if spec.brightness_jitter > 0:
        img *= rng.uniform(1.0 - spec.brightness_jitter, 1.0 + spec.brightness_jitter)
    if spec.noise_level > 0:
        img += rng.normal(0.0, spec.noise_level, size=img.shape).astype(np.float32)
    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    if spec.channels == 3:
        gains = np.array([1.0, 0.72, 0.58], dtype=np.float32)  # endoscopy-like tint
        img = np.clip(img[:, :, None] * gains[None, None, :], 0.0, 1.0)
    return img, mask


def generate_record(spec: PhantomSpec, index: int) -> tuple[ImageRecord, list[PlacedShape]]:
    """Deterministically generate phantom ``index`` and its analytic scene."""
    group_index = index // spec.group_size
    class_id = group_index % spec.n_classes
    rng = np.random.default_rng(derive_seed(spec.seed, "phantom", index))
    shapes = sample_scene(spec, class_id, rng)
    pixels, mask = render_scene(spec, class_id, shapes, rng)
    rec = ImageRecord(
        id=f"ph{index:05d}",
        class_id=class_id,
        group_id=f"grp{group_index:04d}",
        pixels=pixels,
        mask=mask,
    )
    return rec, shapes


def generate_phantoms(spec: PhantomSpec, catalog: Optional[ClassCatalog] = None) -> DatasetManifest:
    """Materialize the phantom dataset; identical spec + seed is bit-identical."""
    records = [generate_record(spec, i)[0] for i in range(spec.n_images)]
    return DatasetManifest(records=records, catalog=catalog or phantom_catalog(spec.n_classes))


def intensity_thresholds(spec: PhantomSpec) -> list[float]:
    """Decision thresholds between background and successive organ bands.

    Valid when the spec's intensity bands are disjoint and ordered by label
    (the shipped presets are); accounts for the worst-case class shift by
    splitting bands at their shifted midpoints.
    """
    shift_hi = spec.class_shift * (spec.n_classes - 1)
    uppers = [spec.background[1] + shift_hi]
    lowers = []
    for t in spec.organs_per_class:
        lowers.append(t.intensity[0])
        uppers.append(t.intensity[1] + shift_hi)
    cuts = []
    for i, lo in enumerate(lowers):
        prev_hi = uppers[i]
        if lo <= prev_hi:
            raise PhantomError(
                "intensity bands overlap after class shift; threshold annotation undefined"
            )
        cuts.append((prev_hi + lo) / 2.0)
    return cuts


def annotate_by_intensity(pixels: np.ndarray, spec: PhantomSpec) -> np.ndarray:
    """Oracle segmentation from the phantom's intensity-band construction.

    Smooths noise lightly, rescales the band thresholds by the image's
    estimated brightness (the 99.5th percentile tracks the top organ band,
    bounded by the spec's jitter range), then assigns each pixel the highest
    band it clears. This plays the role of the expert annotator for synthetic
    images and of the reference region oracle when scoring generated masks.
    """
    arr = np.asarray(pixels, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[:, :, 0]  # the tint keeps channel 0 at full scale
    smoothed = cv2.GaussianBlur(arr, (3, 3), 0.8)
    scale = 1.0
    if spec.brightness_jitter > 0:
        expected_top = max(t.intensity[1] for t in spec.organs_per_class) + \
            spec.class_shift * (spec.n_classes - 1)
        estimate = float(np.percentile(smoothed, 99.5)) / expected_top
        scale = float(np.clip(estimate, 1.0 - spec.brightness_jitter,
                              1.0 + spec.brightness_jitter))
    mask = np.zeros(arr.shape, dtype=np.int32)
    for label, cut in enumerate(intensity_thresholds(spec), start=1):
        mask[smoothed >= cut * scale] = label
    if spec.distractors:
        cut_area = _component_area_cut(spec)
        for label in range(1, len(spec.organs_per_class) + 1):
            binary = (mask == label).astype(np.uint8)
            n, comp, stats, _ = cv2.connectedComponentsWithStats(binary, connectivity=8)
            for ci in range(1, n):
                if stats[ci, cv2.CC_STAT_AREA] < cut_area:
                    mask[comp == ci] = 0
    return mask


def _component_area_cut(spec: PhantomSpec) -> float:
    """Area separating real organs from distractors, from the spec's disjoint
    size ranges (midpoint of the typical effective radii)."""
    s = spec.image_size
    organ_min_r = min(t.size[0] for t in spec.organs_per_class) * s
    distractor_max_r = max(t.size[1] for t in spec.distractors) * s
    if distractor_max_r >= organ_min_r:
        raise PhantomError("distractor sizes must stay below organ sizes")
    r_cut = 0.85 * (organ_min_r + distractor_max_r) / 2.0
    return math.pi * r_cut**2


def abdomen_like_spec(image_size: int = 32, **kw) -> PhantomSpec:
    """Liver-and-kidneys analog: one big ellipse plus paired ellipses."""
    return PhantomSpec(
        image_size=image_size,
        n_classes=kw.pop("n_classes", 2),
        organs_per_class=(
            OrganTemplate("ellipse", intensity=(0.45, 0.58), size=(0.16, 0.26)),
            OrganTemplate("paired_ellipses", intensity=(0.72, 0.88), size=(0.07, 0.11)),
        ),
        **kw,
    )


def spine_like_spec(image_size: int = 32, **kw) -> PhantomSpec:
    """Disc analog: an annulus plus a small bright core."""
    return PhantomSpec(
        image_size=image_size,
        n_classes=kw.pop("n_classes", 2),
        organs_per_class=(
            OrganTemplate("annulus", intensity=(0.45, 0.58), size=(0.18, 0.3)),
            OrganTemplate("ellipse", intensity=(0.72, 0.88), size=(0.06, 0.1)),
        ),
        **kw,
    )


def polyp_like_spec(image_size: int = 32, **kw) -> PhantomSpec:
    """Single bright blob on a tinted background (endoscopy analog)."""
    return PhantomSpec(
        image_size=image_size,
        n_classes=kw.pop("n_classes", 2),
        organs_per_class=(OrganTemplate("blob", intensity=(0.6, 0.85), size=(0.12, 0.24)),),
        channels=kw.pop("channels", 3),
        **kw,
    )
