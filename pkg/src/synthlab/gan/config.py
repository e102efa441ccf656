"""Progressive generator configuration.

The stage schedule, layer growth counts, batch-size policy, and flip policy
are the reproducible training contract; widths, learning rates, and step
counts are desk-scale knobs. Layer-count defaults: the stem carries 10
synthesis layers and 7 head layers, each later stage appends 7 more head
layers except the final stage, which appends 5.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, asdict
from pathlib import Path

from ..errors import ConfigError
from ..seeding import fingerprint

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class GeneratorConfig:
    stage_resolutions: tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    stem_synthesis_layers: int = 10
    stem_head_layers: int = 7
    head_layers_per_stage: int = 7
    final_stage_head_layers: int = 5
    # Batch policy: the first two stages train at the large batch, later
    # stages at the small one; the 8x default ratio is the contract, the
    # absolute numbers are overridable at desk scale.
    batch_size_low_res: int = 2048
    batch_size_high_res: int = 256
    flip_augmentation: bool = True   # forced off for the final stage
    latent_dim: int = 64
    style_dim: int = 64
    class_embed_dim: int = 16
    base_channels: int = 64
    min_channels: int = 16
    img_channels: int = 1
    n_classes: int = 2
    lr_generator: float = 2.5e-3
    lr_discriminator: float = 2.5e-3
    adam_betas: tuple[float, float] = (0.0, 0.99)
    r1_gamma: float = 1.0
    r1_interval: int = 16
    steps_per_stage: int = 2000
    fid_interval: int | None = None  # None -> max(steps // 10, 50)
    fid_samples: int = 128
    sample_with_replacement: bool = True

    def __post_init__(self):
        res = self.stage_resolutions
        if not res or res[0] < 4:
            raise ConfigError("stage_resolutions must start at >= 4")
        for a, b in zip(res, res[1:]):
            if b != 2 * a:
                raise ConfigError(f"stage resolutions must strictly double, got {a} -> {b}")
        for name in (
            "stem_synthesis_layers",
            "stem_head_layers",
            "head_layers_per_stage",
            "final_stage_head_layers",
            "batch_size_low_res",
            "batch_size_high_res",
            "latent_dim",
            "style_dim",
            "class_embed_dim",
            "base_channels",
            "min_channels",
            "n_classes",
            "steps_per_stage",
            "fid_samples",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.img_channels not in (1, 3):
            raise ConfigError("img_channels must be 1 or 3")

    @property
    def n_stages(self) -> int:
        return len(self.stage_resolutions)

    def stage_index(self, resolution: int) -> int:
        if resolution not in self.stage_resolutions:
            raise ConfigError(f"resolution {resolution} not in schedule {self.stage_resolutions}")
        return self.stage_resolutions.index(resolution)

    def stage_channels(self, stage: int) -> int:
        return max(self.min_channels, self.base_channels // (2**stage))

    def head_layers_for_stage(self, stage: int) -> int:
        if stage == 0:
            return self.stem_head_layers
        if stage == self.n_stages - 1:
            return self.final_stage_head_layers
        return self.head_layers_per_stage

    def batch_size_for_stage(self, stage: int) -> int:
        return self.batch_size_low_res if stage < 2 else self.batch_size_high_res

    def flip_for_stage(self, stage: int) -> bool:
        return self.flip_augmentation and stage != self.n_stages - 1

    def fid_cadence(self, steps: int) -> int:
        if self.fid_interval is not None:
            return self.fid_interval
        return max(steps // 10, 50)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_resolutions"] = list(self.stage_resolutions)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @staticmethod
    def from_dict(d: dict) -> "GeneratorConfig":
        d = dict(d)
        d["stage_resolutions"] = tuple(d["stage_resolutions"])
        d["adam_betas"] = tuple(d["adam_betas"])
        return GeneratorConfig(**d)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())


def load_generator_config(path: str | Path) -> GeneratorConfig:
    """Read a [gan] table from a TOML file; absent keys keep their defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"generator config not found: {path}")
    with open(path, "rb") as f:
        raw = tomllib.load(f)
    table = raw.get("gan", raw)
    known = set(GeneratorConfig.__dataclass_fields__)
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown generator config keys {sorted(unknown)}")
    for key in ("stage_resolutions", "adam_betas"):
        if key in table:
            table[key] = tuple(table[key])
    return GeneratorConfig(**table)
