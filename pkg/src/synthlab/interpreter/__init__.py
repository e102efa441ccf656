"""Feature interpreter: paired image+mask generation from a few annotations."""

from .annotations import AnnotationEntry, AnnotationSet, load_annotations, save_annotations
from .model import (
    InterpreterHyper,
    InterpreterModel,
    LabeledSample,
    generate_labeled,
    labeled_to_records,
    load_interpreter,
    regenerate,
    save_interpreter,
    train_interpreter,
)

__all__ = [
    "AnnotationEntry",
    "AnnotationSet",
    "load_annotations",
    "save_annotations",
    "InterpreterHyper",
    "InterpreterModel",
    "LabeledSample",
    "generate_labeled",
    "labeled_to_records",
    "load_interpreter",
    "regenerate",
    "save_interpreter",
    "train_interpreter",
]
