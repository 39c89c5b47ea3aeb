"""Visual-semantic joint embedding with multi-head self-attention pooling.

Two-path encoders pool spatial image features and per-word text features
through r attention heads, train with a hard-negative triplet ranking loss
plus a diversity regularizer, and are evaluated by cross-modal Recall@K.
"""

from .errors import (
    ConfigError,
    ContractError,
    DegenerateVectorError,
    FormatError,
    NumericError,
    ShapeError,
    VocabularyError,
    VsembedError,
)
from .tensor import Tensor, backward, grad_check, gradients, tensor, wide_precision

__all__ = [
    "Tensor",
    "backward",
    "grad_check",
    "gradients",
    "tensor",
    "wide_precision",
    "VsembedError",
    "ShapeError",
    "DegenerateVectorError",
    "ContractError",
    "VocabularyError",
    "FormatError",
    "ConfigError",
    "NumericError",
]
