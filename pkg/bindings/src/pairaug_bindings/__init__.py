"""In-process binding layer for training pipelines.

Wraps the exact pairaug core functions (no reimplementation), exchanging
samples as plain mappings plus numpy image arrays so any array-consuming
framework can interoperate through the buffer protocol.
"""

from .binding import (
    BoundSample,
    py_augment,
    py_classify_flippability,
    py_contains_color_words,
    py_find_positional_terms,
    py_metrics,
)
from pairaug.losses import (
    box_loss,
    contrastive_alignment_loss,
    giou,
    soft_token_loss,
)

__version__ = "0.1.0"

__all__ = [
    "BoundSample",
    "py_augment",
    "py_metrics",
    "py_contains_color_words",
    "py_find_positional_terms",
    "py_classify_flippability",
    "contrastive_alignment_loss",
    "soft_token_loss",
    "box_loss",
    "giou",
]
