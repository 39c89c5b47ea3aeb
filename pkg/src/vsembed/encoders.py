"""Pre-attention feature producers for both paths.

Image path: a spatial feature map is a rank-3 tensor laid out (h, w, c) --
row y, column x, channel. Flattening maps cell (x, y) to row y*w + x, and
the heatmap exporter relies on the same order when it unflattens.

Text path: token indices -> embedding rows -> a stack of simple recurrent
layers whose top-layer hidden states (all n of them, not just the last) form
the sentence feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError, VocabularyError
from .tensor import (
    Tensor,
    add,
    dropout,
    glorot_uniform,
    matmul,
    relu,
    reshape,
    stack_rows,
    take_rows,
    tanh_act,
    tensor,
    transpose,
    zeros,
)


def adapt_features(raw, weight, bias=None):
    """Map every spatial cell of an (h, w, c) map through one linear layer.

    The 1x1-convolution equivalent: cells are independent, so the map is a
    single matmul on the flattened grid. Returns an (h, w, d) tensor.
    """
    h, w, c = raw.shape
    if weight.shape[0] != c:
        raise ShapeError(f"adapter expects {weight.shape[0]} input channels, map has {c}")
    flat = reshape(raw, (h * w, c))
    out = matmul(flat, weight)
    if bias is not None:
        out = add(out, bias)
    return reshape(out, (h, w, weight.shape[1]))


def flatten_spatial(v):
    """(h, w, d) -> (l, d) with l = w*h; cell (x, y) becomes row y*w + x."""
    h, w, d = v.shape
    return reshape(v, (h * w, d))


def unflatten_spatial(rows, w, h):
    """Inverse of flatten_spatial for an (l, d) tensor or (l,) vector."""
    if rows.shape[0] != w * h:
        raise ShapeError(f"cannot unflatten {rows.shape[0]} rows into a {w}x{h} grid")
    target = (h, w) if rows.ndim == 1 else (h, w) + tuple(rows.shape[1:])
    return reshape(rows, target)


def lookup_embeddings(tokens, table):
    """Rows of the embedding table selected by token index, as an (n, k) tensor."""
    vocab = table.shape[0]
    for pos, idx in enumerate(tokens):
        if not 0 <= idx < vocab:
            raise VocabularyError(
                f"token index {idx} at position {pos} outside vocabulary of size {vocab}")
    return take_rows(table, list(tokens))


@dataclass
class RecurrentCell:
    w_in: Tensor      # (input_dim, hidden_dim)
    w_hidden: Tensor  # (hidden_dim, hidden_dim)
    bias: Tensor      # (hidden_dim,)

    def parameters(self, prefix):
        return [(f"{prefix}.w_in", self.w_in), (f"{prefix}.w_hidden", self.w_hidden),
                (f"{prefix}.bias", self.bias)]


@dataclass
class RecurrentEncoderParams:
    """A stack of Elman-style recurrent cells: h_i = tanh(x_i W_in + h_{i-1} W_h + b).

    The published simple-recurrent-unit internals are not reproduced here;
    the cell above is the documented default and the dataclass is the seam
    for swapping in another cell. Dropout is applied between layers.
    With `bidirectional` a second stack runs over the reversed sequence and
    the two state sequences are projected back to the hidden dimension.
    """

    layers: list[RecurrentCell]
    dropout: float = 0.25
    bidirectional: bool = False
    backward_layers: list[RecurrentCell] = field(default_factory=list)
    combine_fwd: Tensor | None = None  # (hidden, hidden), bidirectional only
    combine_bwd: Tensor | None = None

    @property
    def hidden_dim(self):
        return self.layers[0].w_hidden.shape[0]

    def parameters(self, prefix="text_encoder"):
        named = []
        for i, cell in enumerate(self.layers):
            named.extend(cell.parameters(f"{prefix}.layer{i}"))
        for i, cell in enumerate(self.backward_layers):
            named.extend(cell.parameters(f"{prefix}.rev{i}"))
        if self.combine_fwd is not None:
            named.append((f"{prefix}.combine_fwd", self.combine_fwd))
            named.append((f"{prefix}.combine_bwd", self.combine_bwd))
        return named


def init_recurrent_params(rng, input_dim, hidden_dim, layer_count=4, dropout=0.25,
                          bidirectional=False, dtype=None):
    def make_stack():
        cells = []
        for i in range(layer_count):
            in_dim = input_dim if i == 0 else hidden_dim
            cells.append(RecurrentCell(
                w_in=glorot_uniform(rng, (in_dim, hidden_dim), dtype=dtype),
                w_hidden=glorot_uniform(rng, (hidden_dim, hidden_dim), dtype=dtype),
                bias=zeros(hidden_dim, requires_grad=True, dtype=dtype),
            ))
        return cells

    params = RecurrentEncoderParams(layers=make_stack(), dropout=dropout,
                                    bidirectional=bidirectional)
    if bidirectional:
        params.backward_layers = make_stack()
        params.combine_fwd = glorot_uniform(rng, (hidden_dim, hidden_dim), dtype=dtype)
        params.combine_bwd = glorot_uniform(rng, (hidden_dim, hidden_dim), dtype=dtype)
    return params


def _run_stack(embedded, cells, p_drop, rng):
    seq = embedded
    n = seq.shape[0]
    d = cells[0].w_hidden.shape[0]
    for depth, cell in enumerate(cells):
        if depth > 0 and rng is not None and p_drop > 0:
            seq = dropout(seq, p_drop, rng)
        driven = add(matmul(seq, cell.w_in), cell.bias)  # per-step input term, one matmul
        h = zeros((1, d), dtype=embedded.dtype)
        states = []
        for i in range(n):
            h = tanh_act(add(take_rows(driven, [i]), matmul(h, cell.w_hidden)))
            states.append(reshape(h, (d,)))
        seq = stack_rows(states)
    return seq


def encode_text(embedded, params, rng=None):
    """All top-layer hidden states of the recurrent stack, as an (n, d) tensor.

    The initial hidden state is zero. Pass `rng` to enable inter-layer
    dropout (training mode); without it the encoder is deterministic.
    """
    if embedded.ndim != 2 or embedded.shape[0] < 1:
        raise ContractError(f"encode_text needs a nonempty (n, k) sequence, got {embedded.shape}")
    fwd = _run_stack(embedded, params.layers, params.dropout, rng)
    if not params.bidirectional:
        return fwd
    n = embedded.shape[0]
    rev_in = take_rows(embedded, list(range(n - 1, -1, -1)))
    bwd = _run_stack(rev_in, params.backward_layers, params.dropout, rng)
    bwd = take_rows(bwd, list(range(n - 1, -1, -1)))  # re-align to forward time
    return add(matmul(fwd, params.combine_fwd), matmul(bwd, params.combine_bwd))


@dataclass
class ToyBackboneParams:
    """A two-layer strided stack: non-overlapping patch convolution, ReLU,
    then a 1x1 mixing layer. Stands in for a pretrained deep backbone so the
    full image path (including its unfreezing stage) can be exercised
    end to end on synthetic rasters.
    """

    stride: int
    w_patch: Tensor  # (stride*stride*in_channels, mid)
    b_patch: Tensor
    w_mix: Tensor    # (mid, out_channels)
    b_mix: Tensor

    def parameters(self, prefix="backbone"):
        return [(f"{prefix}.w_patch", self.w_patch), (f"{prefix}.b_patch", self.b_patch),
                (f"{prefix}.w_mix", self.w_mix), (f"{prefix}.b_mix", self.b_mix)]


def init_toy_backbone(rng, stride, in_channels, mid_channels, out_channels, dtype=None):
    return ToyBackboneParams(
        stride=stride,
        w_patch=glorot_uniform(rng, (stride * stride * in_channels, mid_channels), dtype=dtype),
        b_patch=zeros(mid_channels, requires_grad=True, dtype=dtype),
        w_mix=glorot_uniform(rng, (mid_channels, out_channels), dtype=dtype),
        b_mix=zeros(out_channels, requires_grad=True, dtype=dtype),
    )


def toy_visual_backbone(image, params):
    """(H, W, C) raster -> (H/stride, W/stride, out_channels) feature map."""
    H, W, C = image.shape
    s = params.stride
    if H % s or W % s:
        raise ShapeError(f"image dims {H}x{W} not divisible by backbone stride {s}")
    h, w = H // s, W // s
    patches = reshape(image, (h, s, w, s, C))
    patches = transpose(patches, (0, 2, 1, 3, 4))
    patches = reshape(patches, (h * w, s * s * C))
    hidden = relu(add(matmul(patches, params.w_patch), params.b_patch))
    out = add(matmul(hidden, params.w_mix), params.b_mix)
    return reshape(out, (h, w, params.w_mix.shape[1]))
