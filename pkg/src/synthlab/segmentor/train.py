"""Segmentation training, synthetic pretraining, and prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import TrainingError
from ..seeding import derive_seed, fingerprint_bytes
from ..data.manifest import DatasetManifest
from ..metrics.dice import per_image_dice
from .planning import TrainingPlan, plan_and_preprocess
from .unet import UNet

BASE_WIDTH = 16


@dataclass
class SegModel:
    """Trained segmentation model with its plan and provenance."""

    plan: TrainingPlan
    weights_best: dict
    weights_final: dict
    val_dice_trace: list[float]
    initial_val_dice: float
    best_epoch: int
    init_provenance: str      # "random" or the init weights fingerprint
    seed: int

    @property
    def best_val_dice(self) -> float:
        return self.val_dice_trace[self.best_epoch]

    @property
    def fingerprint(self) -> str:
        blob = b"".join(self.weights_best[k].numpy().tobytes() for k in sorted(self.weights_best))
        return fingerprint_bytes(blob)

    def build(self, weights: str = "best") -> UNet:
        net = UNet(self.plan.channels, self.plan.n_labels, BASE_WIDTH)
        net.load_state_dict(self.weights_best if weights == "best" else self.weights_final)
        net.eval()
        return net


def weights_fingerprint(weights: dict) -> str:
    return fingerprint_bytes(b"".join(weights[k].numpy().tobytes() for k in sorted(weights)))


def _to_tensor(pixels: np.ndarray, plan: TrainingPlan) -> torch.Tensor:
    arr = plan.normalize(pixels)
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))


def _prep_split(manifest: DatasetManifest, plan: TrainingPlan, split: str,
                need_masks: bool) -> tuple[torch.Tensor, torch.Tensor]:
    recs = [r for r in manifest if r.split == split]
    images, masks = [], []
    for rec in recs:
        if rec.spatial_shape != (plan.input_size, plan.input_size):
            raise TrainingError(
                f"record {rec.id} is {rec.spatial_shape}, plan expects {plan.input_size}px"
            )
        if need_masks and rec.mask is None:
            raise TrainingError(f"record {rec.id} lacks a mask")
        images.append(_to_tensor(rec.pixels, plan))
        if rec.mask is not None:
            if rec.mask.max() >= plan.n_labels:
                raise TrainingError(
                    f"record {rec.id} has label {int(rec.mask.max())} outside the plan's "
                    f"{plan.n_labels} labels"
                )
            masks.append(torch.from_numpy(np.ascontiguousarray(rec.mask, dtype=np.int64)))
    if not images:
        return torch.empty(0), torch.empty(0, dtype=torch.long)
    return torch.stack(images), torch.stack(masks) if masks else torch.empty(0, dtype=torch.long)


def _augment(images: torch.Tensor, masks: torch.Tensor, plan: TrainingPlan,
             rng: np.random.Generator) -> tuple[torch.Tensor, torch.Tensor]:
    b = images.shape[0]
    if plan.mirror:
        flip_x = torch.from_numpy(rng.random(b) < 0.5)
        flip_y = torch.from_numpy(rng.random(b) < 0.5)
        images = torch.where(flip_x[:, None, None, None], images.flip(-1), images)
        masks = torch.where(flip_x[:, None, None], masks.flip(-1), masks)
        images = torch.where(flip_y[:, None, None, None], images.flip(-2), images)
        masks = torch.where(flip_y[:, None, None], masks.flip(-2), masks)
    if plan.rotation_degrees > 0:
        angles = rng.uniform(-plan.rotation_degrees, plan.rotation_degrees, size=b)
        theta = torch.zeros(b, 2, 3)
        for i, deg in enumerate(angles):
            rad = math.radians(deg)
            theta[i, 0, 0] = math.cos(rad)
            theta[i, 0, 1] = -math.sin(rad)
            theta[i, 1, 0] = math.sin(rad)
            theta[i, 1, 1] = math.cos(rad)
        grid = F.affine_grid(theta, list(images.shape), align_corners=False)
        images = F.grid_sample(images, grid, mode="bilinear", padding_mode="border",
                               align_corners=False)
        m = masks[:, None].float()
        m = F.grid_sample(m, grid, mode="nearest", padding_mode="zeros", align_corners=False)
        masks = m[:, 0].long()
    if plan.intensity_scale > 0 or plan.intensity_shift > 0:
        scale = torch.from_numpy(
            rng.uniform(1 - plan.intensity_scale, 1 + plan.intensity_scale, size=b)
        ).float()
        shift = torch.from_numpy(
            rng.uniform(-plan.intensity_shift, plan.intensity_shift, size=b)
        ).float()
        images = images * scale[:, None, None, None] + shift[:, None, None, None]
    return images, masks


def _loss(logits: torch.Tensor, targets: torch.Tensor, n_labels: int) -> torch.Tensor:
    """Cross-entropy plus soft Dice over foreground labels."""
    ce = F.cross_entropy(logits, targets)
    probs = F.softmax(logits, dim=1)
    dice_terms = []
    for label in range(1, n_labels):
        p = probs[:, label]
        t = (targets == label).float()
        inter = (p * t).sum(dim=(1, 2))
        denom = p.sum(dim=(1, 2)) + t.sum(dim=(1, 2))
        dice_terms.append(1.0 - (2 * inter + 1.0) / (denom + 1.0))
    return ce + torch.cat(dice_terms).mean()


def _val_dice(net: UNet, images: torch.Tensor, masks: torch.Tensor, n_labels: int) -> float:
    """Mean foreground Dice over the validation set (labels absent from every
    ground truth are skipped; all-absent inventories score 0)."""
    net.eval()
    with torch.no_grad():
        preds = net(images).argmax(dim=1).numpy()
    gts = masks.numpy()
    per_label = []
    for label in range(1, n_labels):
        scores = per_image_dice(list(preds), list(gts), label, skip_empty_gt=True)
        if scores:
            per_label.append(float(np.mean(scores)))
    net.train()
    return float(np.mean(per_label)) if per_label else 0.0


def train(
    plan: TrainingPlan,
    manifest: DatasetManifest,
    init: Optional[dict] = None,
    seed: int = 0,
) -> SegModel:
    """Train for exactly ``plan.epochs`` passes over the train split.

    Records the validation Dice after every epoch (and once before training
    starts), keeps both the best-validation and final weights, and is fully
    deterministic in (plan, manifest, init, seed).
    """
    train_images, train_masks = _prep_split(manifest, plan, "train", need_masks=True)
    val_images, val_masks = _prep_split(manifest, plan, "val", need_masks=True)
    if train_images.shape[0] == 0:
        raise TrainingError("no training records in manifest (split == 'train')")
    if val_images.shape[0] == 0:
        raise TrainingError("no validation records in manifest (split == 'val')")

    torch.manual_seed(derive_seed(seed, "unet-init"))
    net = UNet(plan.channels, plan.n_labels, BASE_WIDTH)
    provenance = "random"
    if init is not None:
        try:
            net.load_state_dict(init)
        except RuntimeError as exc:
            raise TrainingError(f"init weights are shape-incompatible: {exc}") from exc
        provenance = weights_fingerprint(init)

    rng = np.random.default_rng(derive_seed(seed, "batches"))
    opt = torch.optim.Adam(net.parameters(), lr=plan.lr)
    n = train_images.shape[0]
    initial_val = _val_dice(net, val_images, val_masks, plan.n_labels)

    trace: list[float] = []
    best_epoch, best_dice, best_weights = 0, -1.0, None
    net.train()
    for epoch in range(plan.epochs):
        lr = plan.lr * (1 - epoch / plan.epochs) ** 0.9
        for group in opt.param_groups:
            group["lr"] = lr
        order = rng.permutation(n)
        for start in range(0, n, plan.batch_size):
            idx = torch.from_numpy(order[start : start + plan.batch_size])
            imgs, masks = _augment(train_images[idx], train_masks[idx], plan, rng)
            loss = _loss(net(imgs), masks, plan.n_labels)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite segmentation loss at epoch {epoch}")
        score = _val_dice(net, val_images, val_masks, plan.n_labels)
        trace.append(score)
        if score > best_dice:
            best_epoch, best_dice = epoch, score
            best_weights = {k: v.detach().clone() for k, v in net.state_dict().items()}

    return SegModel(
        plan=plan,
        weights_best=best_weights,
        weights_final={k: v.detach().clone() for k, v in net.state_dict().items()},
        val_dice_trace=trace,
        initial_val_dice=initial_val,
        best_epoch=best_epoch,
        init_provenance=provenance,
        seed=seed,
    )


@dataclass(frozen=True)
class PretrainResult:
    weights: dict
    fold_index: int
    val_dice: float
    candidate_dices: tuple[float, ...]


def pretrain_synthetic(
    folds,
    synthetic_manifest: DatasetManifest,
    real_manifest: DatasetManifest,
    plan: Optional[TrainingPlan] = None,
    seed: int = 0,
    epochs: Optional[int] = None,
) -> PretrainResult:
    """Train one model per fold on the synthetic set, validated on that
    fold's real validation split; export the best model's weights.

    The synthetic manifest stands in for the full-size training set; ties on
    validation Dice resolve to the lowest fold index.
    """
    if len(synthetic_manifest) == 0:
        raise TrainingError("synthetic manifest is empty")
    if len(folds) < 2:
        raise TrainingError(f"need at least 2 folds for pretraining selection, got {len(folds)}")

    candidates = []
    for fold in folds:
        synth_records = [replace(r, split="train") for r in synthetic_manifest.records]
        val_ids = set(fold.val_ids)
        real_records = [
            replace(r, split="val") for r in real_manifest.records if r.id in val_ids
        ]
        combined = DatasetManifest(records=synth_records + real_records,
                                   catalog=real_manifest.catalog)
        fold_plan = plan
        if fold_plan is None:
            _, fold_plan = plan_and_preprocess(combined)
        if epochs is not None:
            fold_plan = replace(fold_plan, epochs=epochs)
        model = train(fold_plan, combined, init=None,
                      seed=derive_seed(seed, "pretrain", fold.fold_index))
        candidates.append((fold.fold_index, model))

    dices = tuple(m.best_val_dice for _, m in candidates)
    best_idx = max(range(len(candidates)), key=lambda i: (dices[i], -candidates[i][0]))
    fold_index, best_model = candidates[best_idx]
    return PretrainResult(
        weights=best_model.weights_best,
        fold_index=fold_index,
        val_dice=dices[best_idx],
        candidate_dices=dices,
    )


def predict(model: SegModel, images: Sequence[np.ndarray], weights: str = "best") -> list[np.ndarray]:
    """Integer masks for a batch of raw images, in input order."""
    net = model.build(weights)
    plan = model.plan
    tensors = []
    for i, img in enumerate(images):
        if tuple(np.asarray(img).shape[:2]) != (plan.input_size, plan.input_size):
            raise TrainingError(
                f"image {i} is {np.asarray(img).shape[:2]}, model expects {plan.input_size}px"
            )
        tensors.append(_to_tensor(np.asarray(img), plan))
    if not tensors:
        return []
    with torch.no_grad():
        logits = net(torch.stack(tensors))
    return [m.astype(np.int32) for m in logits.argmax(dim=1).numpy()]


def save_seg_model(model: SegModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": 1,
            "plan": model.plan.to_dict(),
            "weights_best": model.weights_best,
            "weights_final": model.weights_final,
            "val_dice_trace": model.val_dice_trace,
            "initial_val_dice": model.initial_val_dice,
            "best_epoch": model.best_epoch,
            "init_provenance": model.init_provenance,
            "seed": model.seed,
        },
        path,
    )
    return path


def load_seg_model(path: str | Path) -> SegModel:
    path = Path(path)
    if not path.exists():
        raise TrainingError(f"model file not found: {path}")
    d = torch.load(path, weights_only=False)
    return SegModel(
        plan=TrainingPlan.from_dict(d["plan"]),
        weights_best=d["weights_best"],
        weights_final=d["weights_final"],
        val_dice_trace=d["val_dice_trace"],
        initial_val_dice=d["initial_val_dice"],
        best_epoch=d["best_epoch"],
        init_provenance=d["init_provenance"],
        seed=d["seed"],
    )
