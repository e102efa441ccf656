"""4-level U-shaped encoder-decoder, desk-scale width."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def _block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.InstanceNorm2d(out_ch, affine=True),
        nn.LeakyReLU(0.1, inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.InstanceNorm2d(out_ch, affine=True),
        nn.LeakyReLU(0.1, inplace=True),
    )


class UNet(nn.Module):
    def __init__(self, in_channels: int, n_labels: int, base_width: int = 16):
        super().__init__()
        w = base_width
        self.enc1 = _block(in_channels, w)
        self.enc2 = _block(w, w * 2)
        self.enc3 = _block(w * 2, w * 4)
        self.bottleneck = _block(w * 4, w * 8)
        self.down = nn.MaxPool2d(2)
        self.up3 = nn.Conv2d(w * 8, w * 4, 3, padding=1)
        self.dec3 = _block(w * 8, w * 4)
        self.up2 = nn.Conv2d(w * 4, w * 2, 3, padding=1)
        self.dec2 = _block(w * 4, w * 2)
        self.up1 = nn.Conv2d(w * 2, w, 3, padding=1)
        self.dec1 = _block(w * 2, w)
        self.head = nn.Conv2d(w, n_labels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e1 = self.enc1(x)
        e2 = self.enc2(self.down(e1))
        e3 = self.enc3(self.down(e2))
        b = self.bottleneck(self.down(e3))
        d3 = self.dec3(torch.cat([self.up3(F.interpolate(b, scale_factor=2, mode="nearest")), e3], dim=1))
        d2 = self.dec2(torch.cat([self.up2(F.interpolate(d3, scale_factor=2, mode="nearest")), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(F.interpolate(d2, scale_factor=2, mode="nearest")), e1], dim=1))
        return self.head(d1)
