"""Adam optimization with a staged freeze/unfreeze schedule.

A stage plan is an ordered list of (trainable group names, epochs, learning
rate). Frozen groups are masked exactly: their parameters receive no update
and their optimizer state stays untouched. The published schedule (4/15/40
epochs at 0.005 with x0.1 decay per stage) ships as the "paper" preset; the
"desk" preset is scaled down for synthetic runs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .config import dump_config, load_config
from .dataio import read_tensor, write_tensor
from .errors import ConfigError, ContractError, NumericError
from .losses import BatchEmbeddings, LossConfig, diversity_loss, total_loss
from .model import init_model
from .retrieval import evaluate_protocol
from .tensor import gradients, stack_rows

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)
    step: int = 0


def adam_step(named_params, grads, state, lr):
    """One bias-corrected Adam update over (name, tensor) pairs.

    Parameters appearing here are updated in place; anything absent keeps
    its stale moments, which is exactly the staged-freezing contract.
    """
    if lr <= 0:
        raise ContractError(f"learning rate must be positive, got {lr}")
    if len(named_params) != len(grads):
        raise ContractError(f"{len(named_params)} parameters but {len(grads)} gradients")
    state.step += 1
    t = state.step
    for (name, param), grad in zip(named_params, grads):
        if grad.shape != param.shape:
            raise ContractError(f"gradient shape {grad.shape} mismatches {name} {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient for {name} at optimizer step {t}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - ADAM_BETA1 ** t)
        v_hat = v / (1.0 - ADAM_BETA2 ** t)
        param.data -= (lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)).astype(param.dtype)


@dataclass
class Stage:
    groups: tuple
    epochs: int
    lr: float


@dataclass
class StagePlan:
    stages: list

    def validate(self, model):
        known = set(model.parameter_groups())
        for i, stage in enumerate(self.stages):
            if stage.epochs < 1:
                raise ConfigError(f"stage {i}: epoch count must be positive")
            if stage.lr <= 0:
                raise ConfigError(f"stage {i}: learning rate must be positive")
            for group in stage.groups:
                if group != "all" and group not in known:
                    raise ConfigError(f"stage {i}: unknown parameter group {group!r}")

    @property
    def total_epochs(self):
        return sum(s.epochs for s in self.stages)


_TEXT_SIDE = ("word_embedding", "text_encoder", "text_attention", "text_projection")


def paper_stage_plan():
    """The published three-stage schedule: projection first, then the text
    encoder, finally the whole image path, decaying the rate x0.1 per stage."""
    return StagePlan([
        Stage(("image_projection",), 4, 0.005),
        Stage(("image_projection",) + _TEXT_SIDE, 15, 0.0005),
        Stage(("all",), 40, 0.00005),
    ])


def desk_stage_plan():
    """Scaled-down schedule for synthetic runs: both attention/projection
    paths and the text side first, image adapter (and backbone, if present)
    unfrozen last. A flat rate trains reliably at this scale; the x0.1
    decay of the published schedule starves the later stages here."""
    head = ("image_projection", "image_attention") + _TEXT_SIDE
    return StagePlan([
        Stage(head, 2, 0.005),
        Stage(head, 5, 0.005),
        Stage(("all",), 10, 0.005),
    ])


def stage_plan_from_config(run_cfg):
    """Plan from explicit stage_groups/epochs/lrs keys, else from the preset."""
    if run_cfg.stage_groups or run_cfg.stage_epochs or run_cfg.stage_lrs:
        groups = [tuple(g.strip() for g in chunk.split(",") if g.strip())
                  for chunk in run_cfg.stage_groups.split("|")]
        try:
            epochs = [int(e) for e in run_cfg.stage_epochs.split(",")]
            lrs = [float(lr) for lr in run_cfg.stage_lrs.split(",")]
        except ValueError as exc:
            raise ConfigError(f"malformed explicit stage plan: {exc}") from exc
        if not (len(groups) == len(epochs) == len(lrs)):
            raise ConfigError("stage_groups, stage_epochs, and stage_lrs disagree on stage count")
        return StagePlan([Stage(g, e, lr) for g, e, lr in zip(groups, epochs, lrs)])
    if run_cfg.stage_preset == "paper":
        return paper_stage_plan()
    if run_cfg.stage_preset == "desk":
        return desk_stage_plan()
    raise ConfigError(f"unknown stage preset {run_cfg.stage_preset!r}")


def apply_stage_plan(model, plan):
    """Yield (stage index, trainable named parameters, lr, epochs) per stage."""
    plan.validate(model)
    groups = model.parameter_groups()
    for i, stage in enumerate(plan.stages):
        if "all" in stage.groups:
            names = list(groups)
        else:
            names = [g for g in groups if g in stage.groups]
        trainable = []
        for name in names:
            trainable.extend(groups[name])
        yield i, trainable, stage.lr, stage.epochs


def save_checkpoint(model, directory, model_cfg=None, run_cfg=None):
    os.makedirs(directory, exist_ok=True)
    for name, param in model.parameters():
        write_tensor(os.path.join(directory, f"{name}.mht"), param.data)
    if model_cfg is not None and run_cfg is not None:
        with open(os.path.join(directory, "config.txt"), "w", encoding="utf-8") as fh:
            fh.write(dump_config(model_cfg, run_cfg))


def load_checkpoint(model, directory):
    for name, param in model.parameters():
        path = os.path.join(directory, f"{name}.mht")
        loaded = read_tensor(path)
        if loaded.shape != param.shape:
            raise ConfigError(
                f"checkpoint tensor {name} has shape {loaded.shape}, model expects {param.shape}")
        param.data = loaded.astype(param.dtype)
    return model


def load_model_from_checkpoint(directory):
    """Rebuild a model from the config echo stored next to the weights."""
    model_cfg, run_cfg = load_config(os.path.join(directory, "config.txt"))
    model = init_model(model_cfg, seed=run_cfg.seed)
    return load_checkpoint(model, directory), model_cfg, run_cfg


@dataclass
class EpochMetrics:
    epoch: int
    stage: int
    total: float
    triplet: float
    diversity: float
    val_sentence_r1: float | None = None
    val_image_r1: float | None = None

    def csv_line(self):
        def fmt(x):
            return "" if x is None else f"{x:.6f}"

        return (f"{self.epoch},{self.stage},{self.total:.6f},{self.triplet:.6f},"
                f"{self.diversity:.6f},{fmt(self.val_sentence_r1)},{fmt(self.val_image_r1)}")


METRICS_HEADER = "epoch,stage,total_loss,triplet_loss,diversity_loss,val_sentence_r1,val_image_r1"


def embed_items(model, items):
    """Evaluation-mode joint vectors for every item and every caption.

    Returns (image_vectors, caption_vectors, captions_per_item) as numpy
    arrays; all items must carry the same number of captions.
    """
    per_item = len(items[0].captions)
    if any(len(item.captions) != per_item for item in items):
        raise ContractError("evaluation requires a uniform caption count per item")
    image_vecs, caption_vecs = [], []
    for item in items:
        vec, _ = model.encode_image(item.features)
        image_vecs.append(vec.data)
        for caption in item.captions:
            cvec, _ = model.encode_caption(caption)
            caption_vecs.append(cvec.data)
    return np.stack(image_vecs), np.stack(caption_vecs), per_item


def average_diversity_loss(model, items):
    """Mean diversity penalty over all (image, caption) attention pairs."""
    values = []
    for item in items:
        _, m = model.encode_image(item.features)
        for caption in item.captions:
            _, q = model.encode_caption(caption)
            values.append(float(diversity_loss(m, q).data))
    return float(np.mean(values))


def _batch_ranges(count, batch_size):
    return [(start, min(start + batch_size, count)) for start in range(0, count, batch_size)]


def train(items, model_cfg, run_cfg):
    """Full staged training run; deterministic given the seed.

    `items` is a loaded dataset (any splits); training uses the train split,
    per-epoch validation uses val. Appends one metrics line per epoch to the
    metrics log, writes a checkpoint per stage plus `final/`, and returns
    (model, list of EpochMetrics).
    """
    train_items = [it for it in items if it.split == "train"]
    val_items = [it for it in items if it.split == "val"]
    if not train_items:
        raise ContractError("no items tagged 'train' in the dataset")

    seeds = np.random.SeedSequence(run_cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])

    model = init_model(model_cfg, seed=run_cfg.seed)
    plan = stage_plan_from_config(run_cfg)
    plan.validate(model)
    loss_cfg = LossConfig(model_cfg.margin, model_cfg.diversity_weight,
                          model_cfg.diversity_reduction)
    state = OptimizerState()

    os.makedirs(run_cfg.checkpoint_dir, exist_ok=True)
    metrics_path = run_cfg.metrics_log or os.path.join(run_cfg.checkpoint_dir, "metrics.csv")
    metrics = []
    epoch = 0
    with open(metrics_path, "a", encoding="utf-8") as log:
        log.write(METRICS_HEADER + "\n")
        passes = max(len(item.captions) for item in train_items)
        for stage_idx, trainable, lr, stage_epochs in apply_stage_plan(model, plan):
            params_only = [p for _, p in trainable]
            for _ in range(stage_epochs):
                epoch += 1
                epoch_parts = {"total": [], "triplet": [], "diversity": []}
                # One epoch covers every (item, caption) pair. Each sub-pass
                # pins one caption index so a batch never repeats an item,
                # which would turn a positive caption into a fake hard negative.
                for caption_pass in range(passes):
                    order = shuffle_rng.permutation(len(train_items))
                    for start, stop in _batch_ranges(len(order), run_cfg.batch_size):
                        batch_items = [train_items[i] for i in order[start:stop]]
                        if len(batch_items) < 2:
                            raise ContractError(
                                f"batch of size {len(batch_items)} at epoch {epoch}: hard-negative "
                                "training needs at least 2 items per batch")
                        loss, parts = _forward_batch(model, batch_items, caption_pass,
                                                     loss_cfg, dropout_rng)
                        grads = gradients(loss, params_only)
                        adam_step(trainable, grads, state, lr)
                        for key in epoch_parts:
                            epoch_parts[key].append(parts[key])

                record = EpochMetrics(
                    epoch=epoch, stage=stage_idx,
                    total=float(np.mean(epoch_parts["total"])),
                    triplet=float(np.mean(epoch_parts["triplet"])),
                    diversity=float(np.mean(epoch_parts["diversity"])),
                )
                if val_items and epoch % run_cfg.eval_every == 0:
                    img, cap, per = embed_items(model, val_items)
                    sent_report, img_report = evaluate_protocol(img, cap, per)
                    record.val_sentence_r1 = sent_report.recalls[1]
                    record.val_image_r1 = img_report.recalls[1]
                metrics.append(record)
                log.write(record.csv_line() + "\n")
            save_checkpoint(model, os.path.join(run_cfg.checkpoint_dir, f"stage{stage_idx}"),
                            model_cfg, run_cfg)
    save_checkpoint(model, os.path.join(run_cfg.checkpoint_dir, "final"), model_cfg, run_cfg)
    return model, metrics


def _forward_batch(model, batch_items, caption_pass, loss_cfg, rng):
    image_vecs, image_attn, text_vecs, text_attn = [], [], [], []
    for item in batch_items:
        vec, m = model.encode_image(item.features, rng)
        image_vecs.append(vec)
        image_attn.append(m)
        caption = item.captions[caption_pass % len(item.captions)]
        cvec, q = model.encode_caption(caption, rng)
        text_vecs.append(cvec)
        text_attn.append(q)
    batch = BatchEmbeddings(stack_rows(image_vecs), stack_rows(text_vecs),
                            image_attn, text_attn)
    return total_loss(batch, loss_cfg)
