"""Two-path model assembly: all parameters, grouped for staged training.

Image path: (toy backbone ->) 1x1 adapter -> flatten -> attention -> projection.
Text path: embedding table -> recurrent stack -> attention -> projection.
The two attention/projection paths are symmetric but hold separate
parameters; only the module code is shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import (
    AttentionParams,
    ProjectionParams,
    encode_item,
    init_attention_params,
    init_projection_params,
)
from .config import ModelConfig
from .encoders import (
    RecurrentEncoderParams,
    ToyBackboneParams,
    adapt_features,
    encode_text,
    flatten_spatial,
    init_recurrent_params,
    init_toy_backbone,
    lookup_embeddings,
    toy_visual_backbone,
)
from .errors import ConfigError
from .tensor import Tensor, glorot_uniform, tensor, zeros


@dataclass
class Model:
    config: ModelConfig
    visual_adapter_w: Tensor
    visual_adapter_b: Tensor
    image_attention: AttentionParams
    image_projection: ProjectionParams
    word_embedding: Tensor
    text_encoder: RecurrentEncoderParams
    text_attention: AttentionParams
    text_projection: ProjectionParams
    backbone: ToyBackboneParams | None = None

    def parameter_groups(self):
        """Named parameter groups, the unit of freezing in staged training."""
        groups = {
            "visual_adapter": [("visual_adapter.weight", self.visual_adapter_w),
                               ("visual_adapter.bias", self.visual_adapter_b)],
            "image_attention": self.image_attention.parameters("image_attention"),
            "image_projection": self.image_projection.parameters("image_projection"),
            "word_embedding": [("word_embedding.table", self.word_embedding)],
            "text_encoder": self.text_encoder.parameters("text_encoder"),
            "text_attention": self.text_attention.parameters("text_attention"),
            "text_projection": self.text_projection.parameters("text_projection"),
        }
        if self.backbone is not None:
            groups["backbone"] = self.backbone.parameters("backbone")
        return groups

    def parameters(self):
        named = []
        for group in self.parameter_groups().values():
            named.extend(group)
        return named

    def encode_image(self, features, rng=None):
        """Joint vector and attention weights for one image.

        `features` is an (h, w, c) map, or a raw raster when the model was
        built with the toy backbone.
        """
        if not isinstance(features, Tensor):
            features = tensor(features, dtype=self.visual_adapter_w.dtype)
        if self.backbone is not None:
            features = toy_visual_backbone(features, self.backbone)
        adapted = adapt_features(features, self.visual_adapter_w, self.visual_adapter_b)
        flat = flatten_spatial(adapted)
        return encode_item(flat, self.image_attention, self.image_projection, rng)

    def encode_caption(self, tokens, rng=None):
        """Joint vector and attention weights for one token sequence."""
        embedded = lookup_embeddings(tokens, self.word_embedding)
        hidden = encode_text(embedded, self.text_encoder, rng)
        return encode_item(hidden, self.text_attention, self.text_projection, rng)


def init_model(cfg, seed=0, dtype=None):
    """Deterministically initialized model: same config and seed, same weights.

    Matrices draw from the uniform +-sqrt(6/(fan_in+fan_out)) scheme, biases
    start at zero. An `embedding_table` path in the config replaces the
    random word-vector table (rows must match vocab_size and word_dim).
    """
    rng = np.random.default_rng(seed)
    word_table = glorot_uniform(rng, (cfg.vocab_size, cfg.word_dim), dtype=dtype)
    if cfg.embedding_table:
        from .dataio import read_tensor

        loaded = read_tensor(cfg.embedding_table)
        if loaded.shape != (cfg.vocab_size, cfg.word_dim):
            raise ConfigError(
                f"embedding table {cfg.embedding_table} has shape {loaded.shape}, "
                f"config expects ({cfg.vocab_size}, {cfg.word_dim})")
        word_table = tensor(loaded, requires_grad=True, dtype=dtype)

    backbone = None
    if cfg.use_backbone:
        backbone = init_toy_backbone(rng, cfg.backbone_stride, in_channels=1,
                                     mid_channels=cfg.backbone_mid,
                                     out_channels=cfg.channels, dtype=dtype)

    return Model(
        config=cfg,
        visual_adapter_w=glorot_uniform(rng, (cfg.channels, cfg.d), dtype=dtype),
        visual_adapter_b=zeros(cfg.d, requires_grad=True, dtype=dtype),
        image_attention=init_attention_params(rng, cfg.d, cfg.d_attn, cfg.heads,
                                              cfg.activation_image,
                                              cfg.dropout_attention, dtype=dtype),
        image_projection=init_projection_params(rng, cfg.d, cfg.heads, cfg.d_joint,
                                                cfg.dropout_projection, dtype=dtype),
        word_embedding=word_table,
        text_encoder=init_recurrent_params(rng, cfg.word_dim, cfg.d, cfg.text_layers,
                                           cfg.dropout_text, cfg.bidirectional_text,
                                           dtype=dtype),
        text_attention=init_attention_params(rng, cfg.d, cfg.d_attn, cfg.heads,
                                             cfg.activation_text,
                                             cfg.dropout_attention, dtype=dtype),
        text_projection=init_projection_params(rng, cfg.d, cfg.heads, cfg.d_joint,
                                               cfg.dropout_projection, dtype=dtype),
        backbone=backbone,
    )
