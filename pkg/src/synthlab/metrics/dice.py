"""Dice overlap between integer label masks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import MetricError


def dice(pred: np.ndarray, gt: np.ndarray, label: int) -> float:
    """Dice score for one label: 2*|P∩G| / (|P|+|G|) over pixels equal to ``label``.

    Returns 1.0 when the label is absent from both masks (perfect agreement
    on "nothing there").
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise MetricError(f"mask shape mismatch: {pred.shape} vs {gt.shape}")
    p = pred == label
    g = gt == label
    denom = int(p.sum()) + int(g.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / denom


def mean_dice(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    label: int,
    skip_empty_gt: bool = True,
) -> float:
    """Mean of per-image Dice scores for one label.

    The contract is mean-of-per-image scores, not Dice of the concatenated
    pixel sets. With ``skip_empty_gt`` (default), images whose ground truth
    does not contain ``label`` are excluded from the mean.
    """
    if len(preds) != len(gts):
        raise MetricError(f"got {len(preds)} predictions for {len(gts)} ground truths")
    scores = per_image_dice(preds, gts, label, skip_empty_gt=skip_empty_gt)
    if not scores:
        raise MetricError(f"no evaluable images for label {label}")
    return float(np.mean(scores))


def per_image_dice(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    label: int,
    skip_empty_gt: bool = True,
) -> list[float]:
    """Per-image Dice list, skipping empty-ground-truth images when asked."""
    scores = []
    for p, g in zip(preds, gts):
        if skip_empty_gt and not np.any(np.asarray(g) == label):
            continue
        scores.append(dice(p, g, label))
    return scores
