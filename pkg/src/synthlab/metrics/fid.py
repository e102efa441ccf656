"""Fréchet distance between Gaussian feature summaries, and the pluggable
image embedders that produce those features.

The default embedder is a seeded fixed linear projection of the downsampled
image, so distances are fully deterministic and carry no pretrained-network
dependency. Any object with ``embed`` and ``fingerprint`` works in its place
(e.g. the penultimate layer of a probe classifier).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import MetricError
from ..seeding import fingerprint_bytes

_EIG_FLOOR = 1e-10
_SYM_TOL = 1e-8


@dataclass(frozen=True)
class GaussianSummary:
    """First and second moments of an embedded image set."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise MetricError(f"inconsistent summary shapes {mu.shape} / {sigma.shape}")
        if not np.allclose(sigma, sigma.T, atol=_SYM_TOL):
            raise MetricError("covariance is not symmetric within tolerance")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", (sigma + sigma.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mu.size


def summarize(features: Sequence[np.ndarray] | np.ndarray) -> GaussianSummary:
    """Sample mean and covariance (denominator n-1) of d-vectors."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise MetricError(f"expected (n, d) feature array, got shape {feats.shape}")
    n = feats.shape[0]
    if n < 2:
        raise MetricError(f"need at least 2 feature vectors, got {n}")
    mu = feats.mean(axis=0)
    sigma = np.cov(feats, rowvar=False, ddof=1).reshape(feats.shape[1], feats.shape[1])
    return GaussianSummary(mu=mu, sigma=sigma)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, clamping tiny
    negative eigenvalues from floating-point noise."""
    vals, vecs = np.linalg.eigh(mat)
    vals = np.where(vals < _EIG_FLOOR, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(a: GaussianSummary, b: GaussianSummary) -> float:
    """Fréchet distance between two Gaussian summaries.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), computed
    entirely through symmetric eigendecompositions. Result is clamped at 0.
    """
    if a.dim != b.dim:
        raise MetricError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mu - b.mu
    a_half = _psd_sqrt(a.sigma)
    inner = a_half @ b.sigma @ a_half
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigvalsh(inner)
    vals = np.where(vals < _EIG_FLOOR, 0.0, vals)
    cross = 2.0 * np.sqrt(vals).sum()
    value = float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - cross)
    return max(value, 0.0)


class LinearProjectionEmbedder:
    """Seeded fixed linear projection of downsampled grayscale pixels.

    Images are averaged over channels if needed, area-downsampled to
    ``patch`` x ``patch``, flattened, and projected to ``dim`` features with a
    frozen Gaussian matrix. Same (dim, patch, seed) always yields the same
    embedding.
    """

    def __init__(self, dim: int = 64, patch: int = 32, seed: int = 0):
        if dim < 2:
            raise MetricError("embedding dimension must be >= 2")
        self.dim = dim
        self.patch = patch
        self.seed = seed
        rng = np.random.default_rng(seed)
        self._weight = rng.standard_normal((dim, patch * patch)).astype(np.float64)
        self._weight /= np.sqrt(patch * patch)
        self.fingerprint = fingerprint_bytes(
            b"linproj|%d|%d|%d|" % (dim, patch, seed) + self._weight.tobytes()
        )

    def embed(self, images: Sequence[np.ndarray]) -> np.ndarray:
        """Map a batch of images to an (n, dim) feature array."""
        out = np.empty((len(images), self.dim), dtype=np.float64)
        for i, img in enumerate(images):
            arr = np.asarray(img, dtype=np.float64)
            if arr.ndim == 3:
                arr = arr.mean(axis=2)
            if arr.ndim != 2:
                raise MetricError(f"expected 2D or 3-channel image, got shape {arr.shape}")
            out[i] = self._weight @ _downsample(arr, self.patch).ravel()
        return out


def _downsample(arr: np.ndarray, size: int) -> np.ndarray:
    """Area-style downsample by block averaging after padding to a multiple."""
    h, w = arr.shape
    if (h, w) == (size, size):
        return arr
    if h < size or w < size:
        reps = (int(np.ceil(size / h)), int(np.ceil(size / w)))
        arr = np.kron(arr, np.ones(reps))
        h, w = arr.shape
    ph = int(np.ceil(h / size)) * size - h
    pw = int(np.ceil(w / size)) * size - w
    if ph or pw:
        arr = np.pad(arr, ((0, ph), (0, pw)), mode="edge")
        h, w = arr.shape
    return arr.reshape(size, h // size, size, w // size).mean(axis=(1, 3))


def fid_between_image_sets(real, synth, embedder=None) -> float:
    """Convenience: embed two image collections and return their FID."""
    embedder = embedder or LinearProjectionEmbedder()
    return fid(summarize(embedder.embed(real)), summarize(embedder.embed(synth)))
