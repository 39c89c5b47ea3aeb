"""Multi-head self-attention pooling and joint-space projection.

One module serves both encoders: image features (l, d) and text features
(n, d) go through the same two-layer attention MLP, differing only in the
hidden activation (relu for images, tanh for text) and the shapes.

The r attention rows are row-stochastic weights over positions/words. They
pool the features into an (r, d) embedding matrix whose rows are convex
combinations of feature rows; the matrix is then concatenated row-by-row and
projected to a unit-norm vector in the joint space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import (
    Tensor,
    add,
    dropout,
    glorot_uniform,
    l2_normalize,
    matmul,
    relu,
    reshape,
    softmax_rows,
    tanh_act,
    transpose,
    zeros,
)

_ACTIVATIONS = {"relu": relu, "tanh": tanh_act}


@dataclass
class AttentionParams:
    w_hidden: Tensor       # (d_a, d), applied to transposed features
    w_heads: Tensor        # (r, d_a), one row of logits per head
    activation: str = "relu"
    dropout: float = 0.5

    @property
    def heads(self):
        return self.w_heads.shape[0]

    def parameters(self, prefix):
        return [(f"{prefix}.w_hidden", self.w_hidden), (f"{prefix}.w_heads", self.w_heads)]


@dataclass
class ProjectionParams:
    weight: Tensor  # (r*d, d_joint)
    bias: Tensor    # (d_joint,)
    dropout: float = 0.5

    def parameters(self, prefix):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]


def init_attention_params(rng, d, d_attn, heads, activation="relu", drop=0.5, dtype=None):
    if activation not in _ACTIVATIONS:
        raise ShapeError(f"unknown activation {activation!r}")
    return AttentionParams(
        w_hidden=glorot_uniform(rng, (d_attn, d), dtype=dtype),
        w_heads=glorot_uniform(rng, (heads, d_attn), dtype=dtype),
        activation=activation,
        dropout=drop,
    )


def init_projection_params(rng, d, heads, d_joint, drop=0.5, dtype=None):
    return ProjectionParams(
        weight=glorot_uniform(rng, (heads * d, d_joint), dtype=dtype),
        bias=zeros(d_joint, requires_grad=True, dtype=dtype),
        dropout=drop,
    )


def attention_weights(features, params, rng=None):
    """The (r, l) row-stochastic weight matrix over the l feature rows.

    softmax_rows(W_heads . act(W_hidden . features^T)); dropout sits between
    the activation and the head layer during training.
    """
    if features.ndim != 2 or features.shape[1] != params.w_hidden.shape[1]:
        raise ShapeError(
            f"attention expects (l, {params.w_hidden.shape[1]}) features, got {features.shape}")
    hidden = _ACTIVATIONS[params.activation](matmul(params.w_hidden, transpose(features)))
    if rng is not None and params.dropout > 0:
        hidden = dropout(hidden, params.dropout, rng)
    return softmax_rows(matmul(params.w_heads, hidden))


def attend(weights, features):
    """Pool feature rows with each attention row: the (r, d) embedding matrix.

    Row i is the weights[i]-weighted average of the feature rows, so each
    output row lies in the convex hull of the features.
    """
    if weights.shape[1] != features.shape[0]:
        raise ShapeError(
            f"attention weights cover {weights.shape[1]} positions, features have {features.shape[0]}")
    return matmul(weights, features)


def project_joint(embedding_matrix, params, rng=None):
    """Concatenate the r embedding rows (row 1 first) and project to a
    unit-norm joint-space vector."""
    r, d = embedding_matrix.shape
    if params.weight.shape[0] != r * d:
        raise ShapeError(
            f"projection expects a concatenated length of {params.weight.shape[0]}, got {r}x{d}")
    concat = reshape(embedding_matrix, (1, r * d))
    if rng is not None and params.dropout > 0:
        concat = dropout(concat, params.dropout, rng)
    vec = add(matmul(concat, params.weight), params.bias)
    return l2_normalize(reshape(vec, (params.weight.shape[1],)))


def encode_item(features, attn_params, proj_params, rng=None):
    """Full pooling path for one item: returns (joint vector, attention weights).

    The weights are returned alongside the vector because the diversity
    regularizer and the heatmap exporter both need them.
    """
    weights = attention_weights(features, attn_params, rng)
    pooled = attend(weights, features)
    return project_joint(pooled, proj_params, rng), weights


def attention_to_heatmap(row, w, h, out_w, out_h):
    """One attention row (length l = w*h) rendered as an (out_h, out_w) raster.

    The row is unflattened with the encoder's cell order and upsampled with
    corner-aligned bilinear interpolation: grid corners land exactly on
    raster corners, and values stay inside [min(row), max(row)].
    Returns a float numpy array (no gradient; visualization only).
    """
    values = row.data if isinstance(row, Tensor) else np.asarray(row, dtype=np.float64)
    values = values.reshape(-1)
    if values.shape[0] != w * h:
        raise ShapeError(f"attention row of length {values.shape[0]} does not fill a {w}x{h} grid")
    if out_w < w or out_h < h:
        raise ShapeError(f"target {out_w}x{out_h} smaller than the {w}x{h} grid")
    grid = values.astype(np.float64).reshape(h, w)

    sx = np.linspace(0.0, w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    sy = np.linspace(0.0, h - 1.0, out_h) if out_h > 1 else np.zeros(1)
    if w == 1:
        sx = np.zeros(out_w)
    if h == 1:
        sy = np.zeros(out_h)
    x0 = np.clip(np.floor(sx).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(sy).astype(int), 0, max(h - 2, 0))
    fx = (sx - x0)[None, :]
    fy = (sy - y0)[:, None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    top = grid[y0[:, None], x0[None, :]] * (1 - fx) + grid[y0[:, None], x1[None, :]] * fx
    bottom = grid[y1[:, None], x0[None, :]] * (1 - fx) + grid[y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bottom * fy
