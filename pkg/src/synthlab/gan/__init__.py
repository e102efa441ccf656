"""Class-conditional progressively grown GAN with FID-gated stage promotion."""

from .checkpoint import (
    Checkpoint,
    load_checkpoint,
    read_checkpoint_header,
    save_checkpoint,
)
from .config import GeneratorConfig, load_generator_config
from .networks import Discriminator, ProgressiveGenerator, parameter_count
from .train import (
    GeneratedSample,
    StageState,
    generator_parameter_count,
    grow,
    head_layer_total_for,
    init_stem,
    sample,
    select_checkpoint,
    state_from_checkpoint,
    train_stage,
)

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "read_checkpoint_header",
    "save_checkpoint",
    "GeneratorConfig",
    "load_generator_config",
    "Discriminator",
    "ProgressiveGenerator",
    "parameter_count",
    "GeneratedSample",
    "StageState",
    "generator_parameter_count",
    "grow",
    "head_layer_total_for",
    "init_stem",
    "sample",
    "select_checkpoint",
    "state_from_checkpoint",
    "train_stage",
]
