"""Desk-scale self-configuring 2D segmentation baseline."""

from .planning import DatasetFingerprint, TrainingPlan, plan_and_preprocess
from .train import (
    PretrainResult,
    SegModel,
    load_seg_model,
    predict,
    pretrain_synthetic,
    save_seg_model,
    train,
    weights_fingerprint,
)
from .unet import UNet

__all__ = [
    "DatasetFingerprint",
    "TrainingPlan",
    "plan_and_preprocess",
    "PretrainResult",
    "SegModel",
    "load_seg_model",
    "predict",
    "pretrain_synthetic",
    "save_seg_model",
    "train",
    "weights_fingerprint",
    "UNet",
]
