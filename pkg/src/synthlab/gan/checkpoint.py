"""Versioned generator checkpoints: JSON header + parameter blob.

Layout: magic bytes, 4-byte big-endian header length, UTF-8 JSON header
(format version, config fingerprint, resolution, stage count, selection FID),
then the torch parameter payload. The header is readable without
deserializing the blob.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import torch

from ..errors import CheckpointError
from .config import GeneratorConfig
from .networks import ProgressiveGenerator

MAGIC = b"SYNTHLABCKPT1\n"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A promoted generator snapshot."""

    resolution: int
    stage_count: int
    selection_fid: float
    config: GeneratorConfig
    state_dict: dict
    format_version: int = FORMAT_VERSION

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.config.fingerprint.encode())
        h.update(struct.pack(">ii", self.resolution, self.stage_count))
        for key in sorted(self.state_dict):
            h.update(key.encode())
            h.update(self.state_dict[key].numpy().tobytes())
        return h.hexdigest()[:16]

    def build_generator(self) -> ProgressiveGenerator:
        gen = ProgressiveGenerator(self.config, stage_count=self.stage_count)
        gen.load_state_dict(self.state_dict)
        gen.eval()
        return gen


def checkpoint_header(ckpt: Checkpoint) -> dict:
    return {
        "format_version": ckpt.format_version,
        "resolution": ckpt.resolution,
        "stage_count": ckpt.stage_count,
        "selection_fid": ckpt.selection_fid,
        "config_fingerprint": ckpt.config.fingerprint,
        "config": ckpt.config.to_dict(),
    }


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(checkpoint_header(ckpt), sort_keys=True).encode()
    buf = io.BytesIO()
    torch.save(ckpt.state_dict, buf)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack(">I", len(header)))
        f.write(header)
        f.write(buf.getvalue())
    return path


def read_checkpoint_header(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path} is not a synthlab checkpoint")
        (hlen,) = struct.unpack(">I", f.read(4))
        header = json.loads(f.read(hlen).decode())
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {header.get('format_version')}"
        )
    return header


def load_checkpoint(path: str | Path) -> Checkpoint:
    header = read_checkpoint_header(path)
    path = Path(path)
    with open(path, "rb") as f:
        f.read(len(MAGIC))
        (hlen,) = struct.unpack(">I", f.read(4))
        f.read(hlen)
        blob = f.read()
    state_dict = torch.load(io.BytesIO(blob), weights_only=True)
    return Checkpoint(
        resolution=header["resolution"],
        stage_count=header["stage_count"],
        selection_fid=header["selection_fid"],
        config=GeneratorConfig.from_dict(header["config"]),
        state_dict=state_dict,
    )
