"""Conditional generator and per-stage discriminator.

The generator maps (latent, class embedding) through a small mapping MLP to a
style vector that modulates every convolution. Synthesis starts from a
learned constant at the stem resolution; each stage appends head blocks (with
one 2x upsample per stage after the stem) and contributes to the RGB output
through a skip connection, so parameters copied from a previous stage keep
producing exactly the same low-resolution pathway.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import GeneratorConfig


class MappingNetwork(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.embed = nn.Embedding(cfg.n_classes, cfg.class_embed_dim)
        self.fc1 = nn.Linear(cfg.latent_dim + cfg.class_embed_dim, cfg.style_dim)
        self.fc2 = nn.Linear(cfg.style_dim, cfg.style_dim)

    def forward(self, z: torch.Tensor, class_ids: torch.Tensor) -> torch.Tensor:
        z = z / torch.sqrt(z.pow(2).mean(dim=1, keepdim=True) + 1e-8)
        h = torch.cat([z, self.embed(class_ids)], dim=1)
        h = F.leaky_relu(self.fc1(h), 0.2)
        return F.leaky_relu(self.fc2(h), 0.2)


class ModulatedConv2d(nn.Module):
    """StyleGAN2-style weight modulation with optional demodulation."""

    def __init__(self, in_ch: int, out_ch: int, style_dim: int, kernel: int = 3,
                 demodulate: bool = True):
        super().__init__()
        self.in_ch, self.out_ch, self.kernel = in_ch, out_ch, kernel
        self.demodulate = demodulate
        self.weight = nn.Parameter(torch.randn(out_ch, in_ch, kernel, kernel) / math.sqrt(in_ch * kernel * kernel))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.affine = nn.Linear(style_dim, in_ch)
        nn.init.zeros_(self.affine.weight)
        nn.init.ones_(self.affine.bias)

    def forward(self, x: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        # Scaling the inputs commutes with scaling the weights per input
        # channel, so this is weight modulation without materializing a
        # per-sample weight tensor.
        s = self.affine(style)                                  # [B, in]
        out = F.conv2d(x * s[:, :, None, None], self.weight, padding=self.kernel // 2)
        if self.demodulate:
            w2 = self.weight.pow(2).sum(dim=(2, 3))             # [out, in]
            d = torch.rsqrt((w2[None] * s.pow(2)[:, None, :]).sum(-1) + 1e-8)
            out = out * d[:, :, None, None]
        return out + self.bias[None, :, None, None]


class SynthesisBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, style_dim: int):
        super().__init__()
        self.conv = ModulatedConv2d(in_ch, out_ch, style_dim)

    def forward(self, x: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        return F.leaky_relu(self.conv(x, style), 0.2)


class ToRGB(nn.Module):
    def __init__(self, in_ch: int, img_channels: int, style_dim: int):
        super().__init__()
        self.conv = ModulatedConv2d(in_ch, img_channels, style_dim, kernel=1, demodulate=False)

    def forward(self, x: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        return self.conv(x, style)


class StageHead(nn.Module):
    """Head blocks for one resolution stage plus its RGB skip."""

    def __init__(self, in_ch: int, out_ch: int, n_blocks: int, cfg: GeneratorConfig):
        super().__init__()
        blocks = []
        ch = in_ch
        for _ in range(n_blocks):
            blocks.append(SynthesisBlock(ch, out_ch, cfg.style_dim))
            ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.to_rgb = ToRGB(out_ch, cfg.img_channels, cfg.style_dim)


class ProgressiveGenerator(nn.Module):
    """Generator truncated to ``stage_count`` stages of the configured schedule."""

    def __init__(self, cfg: GeneratorConfig, stage_count: int = 1):
        super().__init__()
        if not 1 <= stage_count <= cfg.n_stages:
            raise ValueError(f"stage_count {stage_count} outside schedule of {cfg.n_stages}")
        self.cfg = cfg
        self.stage_count = stage_count
        r0 = cfg.stage_resolutions[0]
        ch0 = cfg.stage_channels(0)
        self.mapping = MappingNetwork(cfg)
        self.const = nn.Parameter(torch.randn(ch0, r0, r0))
        self.stem = nn.ModuleList(
            SynthesisBlock(ch0, ch0, cfg.style_dim) for _ in range(cfg.stem_synthesis_layers)
        )
        self.stages = nn.ModuleList(
            StageHead(
                in_ch=cfg.stage_channels(max(i - 1, 0)),
                out_ch=cfg.stage_channels(i),
                n_blocks=cfg.head_layers_for_stage(i),
                cfg=cfg,
            )
            for i in range(stage_count)
        )

    @property
    def resolution(self) -> int:
        return self.cfg.stage_resolutions[self.stage_count - 1]

    def forward(
        self,
        z: torch.Tensor,
        class_ids: torch.Tensor,
        max_stage: int | None = None,
        capture: bool = False,
    ):
        """Synthesize images in [0, 1]; optionally stop at an earlier stage
        and/or capture tap-block activations (every second block, in forward
        order across stem and heads)."""
        upto = self.stage_count if max_stage is None else max_stage + 1
        style = self.mapping(z, class_ids)
        x = self.const[None].expand(z.shape[0], -1, -1, -1)
        taps: list[torch.Tensor] = []
        block_idx = 0
        for block in self.stem:
            x = block(x, style)
            if capture and block_idx % 2 == 1:
                taps.append(x)
            block_idx += 1
        rgb = None
        for i, stage in enumerate(self.stages[:upto]):
            if i > 0:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
                rgb = F.interpolate(rgb, scale_factor=2, mode="nearest")
            for block in stage.blocks:
                x = block(x, style)
                if capture and block_idx % 2 == 1:
                    taps.append(x)
                block_idx += 1
            skip = stage.to_rgb(x, style)
            rgb = skip if rgb is None else rgb + skip
        img = torch.sigmoid(rgb)
        if capture:
            return img, taps
        return img

    def tap_block_ids(self) -> list[int]:
        total = len(self.stem) + sum(len(s.blocks) for s in self.stages)
        return [i for i in range(total) if i % 2 == 1]


class Discriminator(nn.Module):
    """Per-stage conv discriminator with class projection."""

    def __init__(self, cfg: GeneratorConfig, resolution: int):
        super().__init__()
        ch = max(cfg.min_channels, cfg.base_channels // 2)
        layers: list[nn.Module] = [
            nn.Conv2d(cfg.img_channels, ch, 3, padding=1),
            nn.LeakyReLU(0.2),
        ]
        res = resolution
        while res > 4:
            out = min(ch * 2, cfg.base_channels * 4)
            layers += [
                nn.Conv2d(ch, out, 3, padding=1, stride=2),
                nn.LeakyReLU(0.2),
            ]
            ch = out
            res //= 2
        self.body = nn.Sequential(*layers)
        self.feat_dim = ch * res * res
        self.fc = nn.Linear(self.feat_dim, 128)
        self.out = nn.Linear(128, 1)
        self.embed = nn.Embedding(cfg.n_classes, 128)

    def forward(self, img: torch.Tensor, class_ids: torch.Tensor) -> torch.Tensor:
        h = self.body(img).flatten(1)
        f = F.leaky_relu(self.fc(h), 0.2)
        proj = (self.embed(class_ids) * f).sum(dim=1, keepdim=True)
        return self.out(f) + proj / math.sqrt(f.shape[1])


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
