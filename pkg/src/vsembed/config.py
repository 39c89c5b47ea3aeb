"""Model and run configuration, plus the flat key=value config file format.

Desk-scale defaults keep everything runnable in seconds on a CPU; the
published large-scale hyperparameters are available through
``paper_model_config`` (dimension 2400, attention hidden 350, 10 heads,
620-dim word vectors, 4 recurrent layers, dropouts 0.5/0.5/0.25).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError


@dataclass
class ModelConfig:
    d: int = 64                 # shared feature/hidden dimension
    d_attn: int = 32            # attention MLP hidden size
    heads: int = 4              # attention weight vectors per encoder
    d_joint: int = 128          # joint embedding dimension
    word_dim: int = 64          # word vector size
    text_layers: int = 1        # recurrent stack depth (desk scale; published setup: 4)
    vocab_size: int = 256
    channels: int = 8           # input channels of precomputed feature maps
    margin: float = 0.2
    diversity_weight: float = 0.1
    diversity_reduction: str = "mean"
    dropout_attention: float = 0.0
    dropout_projection: float = 0.0
    dropout_text: float = 0.0
    activation_image: str = "relu"
    activation_text: str = "tanh"
    bidirectional_text: bool = False
    use_backbone: bool = False  # route images through the toy backbone first
    backbone_stride: int = 4
    backbone_mid: int = 16
    embedding_table: str = ""   # optional tensor file with pretrained word vectors

    def __post_init__(self):
        for name in ("d", "d_attn", "heads", "d_joint", "word_dim", "text_layers",
                     "vocab_size", "channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")


def paper_model_config(vocab_size):
    """The published full-scale hyperparameters (not desk-scale trainable)."""
    return ModelConfig(
        d=2400, d_attn=350, heads=10, d_joint=2400, word_dim=620, text_layers=4,
        vocab_size=vocab_size, dropout_attention=0.5, dropout_projection=0.5,
        dropout_text=0.25,
    )


@dataclass
class TrainRunConfig:
    manifest: str = ""
    checkpoint_dir: str = "checkpoints"
    batch_size: int = 32
    seed: int = 7
    stage_preset: str = "desk"       # "desk" | "paper"
    stage_groups: str = ""           # explicit plan: stages split by "|",
    stage_epochs: str = ""           # groups within a stage by ","
    stage_lrs: str = ""
    eval_every: int = 1
    eval_fold_size: int = 0          # 0 = full-set evaluation
    metrics_log: str = ""            # defaults to <checkpoint_dir>/metrics.csv

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 (hard negatives need a pair)")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be a positive integer")


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False,
                "yes": True, "no": False}


def _convert(raw, target_type, key):
    if target_type is bool:
        if raw.lower() not in _BOOL_VALUES:
            raise ConfigError(f"key {key}: cannot read {raw!r} as a boolean")
        return _BOOL_VALUES[raw.lower()]
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key}: cannot read {raw!r} as {target_type.__name__}") from exc


def parse_config_text(text):
    """Flat `key = value` lines into a dict; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = raw.strip()
    return values


def load_config(path):
    """Read a config file into (ModelConfig, TrainRunConfig).

    Every key must name a field of one of the two dataclasses; anything else
    is rejected so typos fail fast.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            values = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return configs_from_dict(values)


def configs_from_dict(values):
    model_fields = {f.name: f.type for f in fields(ModelConfig)}
    run_fields = {f.name: f.type for f in fields(TrainRunConfig)}
    model_kwargs, run_kwargs = {}, {}
    for key, raw in values.items():
        if key in model_fields:
            model_kwargs[key] = _convert(raw, _field_type(ModelConfig, key), key)
        elif key in run_fields:
            run_kwargs[key] = _convert(raw, _field_type(TrainRunConfig, key), key)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return ModelConfig(**model_kwargs), TrainRunConfig(**run_kwargs)


def _field_type(cls, name):
    for f in fields(cls):
        if f.name == name:
            factory = {"int": int, "float": float, "str": str, "bool": bool}
            return factory.get(f.type, f.type) if isinstance(f.type, str) else f.type
    raise KeyError(name)


def dump_config(model_cfg, run_cfg):
    """Serialize both configs back to the flat text format (round-trips)."""
    lines = []
    for cfg in (model_cfg, run_cfg):
        for f in fields(cfg):
            lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"


def with_overrides(model_cfg, run_cfg, **overrides):
    """Copies with any non-None override applied to whichever config owns it."""
    model_names = {f.name for f in fields(ModelConfig)}
    run_names = {f.name for f in fields(TrainRunConfig)}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in model_names:
            model_cfg = replace(model_cfg, **{key: value})
        elif key in run_names:
            run_cfg = replace(run_cfg, **{key: value})
        else:
            raise ConfigError(f"unknown override {key!r}")
    return model_cfg, run_cfg
