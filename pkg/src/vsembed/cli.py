"""Command-line interface.

Subcommands: synth (emit a synthetic dataset), train (config -> checkpoints
and a metrics log), eval (checkpoint + manifest -> retrieval report),
export-attention (checkpoint + item ids -> one PGM heatmap per head), and
gradcheck (the wide-precision gradient suite). Exit code 0 on success;
failures print a category-tagged message and exit nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys

from .attention import attention_to_heatmap
from .config import load_config, with_overrides
from .dataio import SynthSpec, load_dataset, synth_dataset, write_heatmap
from .errors import ConfigError, VsembedError
from .gradcheck import run_gradient_suite, suite_passes
from .retrieval import (
    combined_mean_recall,
    evaluate_protocol,
    format_report_table,
    report_csv_lines,
)
from .training import (
    average_diversity_loss,
    embed_items,
    load_model_from_checkpoint,
    train,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vsembed",
        description="Visual-semantic embedding with multi-head self-attention pooling")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic paired dataset")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--classes", type=int, default=10)
    synth.add_argument("--items", type=int, default=200)
    synth.add_argument("--grid-w", type=int, default=4)
    synth.add_argument("--grid-h", type=int, default=4)
    synth.add_argument("--vocab", type=int, default=256)
    synth.add_argument("--channels", type=int, default=8)
    synth.add_argument("--noise", type=float, default=0.1)

    tr = sub.add_parser("train", help="train from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--heads", type=int, default=None)
    tr.add_argument("--lambda", dest="diversity_weight", type=float, default=None)
    tr.add_argument("--stage-preset", choices=("paper", "desk"), default=None)
    tr.add_argument("--manifest", default=None)
    tr.add_argument("--checkpoint-dir", default=None)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    ev.add_argument("--checkpoint", required=True, help="checkpoint directory")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--split", default="test", choices=("train", "val", "test"))
    ev.add_argument("--fold-size", type=int, default=0,
                    help="evaluate in disjoint folds of this many items (0 = full set)")
    ev.add_argument("--csv", action="store_true", help="also print machine-readable lines")

    ex = sub.add_parser("export-attention", help="write per-head heatmaps for items")
    ex.add_argument("--checkpoint", required=True)
    ex.add_argument("--manifest", required=True)
    ex.add_argument("--items", required=True, help="comma-separated item ids")
    ex.add_argument("--out", required=True, help="output directory for PGM files")

    gc = sub.add_parser("gradcheck", help="run the wide-precision gradient suite")
    gc.add_argument("--seed", type=int, default=12345)
    return parser


def _cmd_synth(args):
    spec = SynthSpec(classes=args.classes, items=args.items, grid_w=args.grid_w,
                     grid_h=args.grid_h, vocab=args.vocab, channels=args.channels,
                     noise=args.noise)
    manifest = synth_dataset(args.out, seed=args.seed, spec=spec)
    print(f"wrote {args.items} items to {manifest}")
    return 0


def _cmd_train(args):
    model_cfg, run_cfg = load_config(args.config)
    model_cfg, run_cfg = with_overrides(
        model_cfg, run_cfg,
        seed=args.seed, heads=args.heads, diversity_weight=args.diversity_weight,
        stage_preset=args.stage_preset, manifest=args.manifest,
        checkpoint_dir=args.checkpoint_dir)
    if not run_cfg.manifest:
        raise ConfigError("no manifest given (config key 'manifest' or --manifest)")
    items = load_dataset(run_cfg.manifest)
    model, metrics = train(items, model_cfg, run_cfg)
    last = metrics[-1]
    print(f"trained {last.epoch} epochs; final loss {last.total:.4f} "
          f"(triplet {last.triplet:.4f}, diversity {last.diversity:.4f})")
    if last.val_sentence_r1 is not None:
        print(f"validation R@1: sentence {last.val_sentence_r1:.1f}, image {last.val_image_r1:.1f}")
    print(f"checkpoints under {run_cfg.checkpoint_dir}")
    return 0


def _cmd_eval(args):
    model, _, _ = load_model_from_checkpoint(args.checkpoint)
    items = load_dataset(args.manifest, split=args.split)
    if not items:
        raise ConfigError(f"manifest has no items in split {args.split!r}")
    image_vecs, caption_vecs, per_item = embed_items(model, items)
    mode = "folds" if args.fold_size else "full"
    reports = evaluate_protocol(image_vecs, caption_vecs, per_item,
                                mode=mode, fold_size=args.fold_size)
    print(format_report_table(reports))
    print(f"mean of all R@K values: {combined_mean_recall(reports):.2f}")
    diversity = average_diversity_loss(model, items)
    print(f"average diversity loss over {len(items)} {args.split} items: {diversity:.4f}")
    if args.csv:
        for line in report_csv_lines(reports):
            print(line)
    return 0


def _cmd_export_attention(args):
    model, _, _ = load_model_from_checkpoint(args.checkpoint)
    wanted = [token.strip() for token in args.items.split(",") if token.strip()]
    items = {item.item_id: item for item in load_dataset(args.manifest)}
    missing = [w for w in wanted if w not in items]
    if missing:
        raise ConfigError(f"item ids not in manifest: {', '.join(missing)}")
    os.makedirs(args.out, exist_ok=True)
    for item_id in wanted:
        item = items[item_id]
        h, w, _ = item.features.shape
        out_w, out_h = item.image_dims if item.image_dims else (w * 32, h * 32)
        _, weights = model.encode_image(item.features)
        for head in range(weights.shape[0]):
            raster = attention_to_heatmap(weights.data[head], w, h, out_w, out_h)
            path = os.path.join(args.out, f"{item_id}_head{head}.pgm")
            write_heatmap(raster, path)
        print(f"{item_id}: wrote {weights.shape[0]} heatmaps")
    return 0


def _cmd_gradcheck(args):
    results = run_gradient_suite(seed=args.seed)
    if suite_passes(results):
        print("gradient suite passed")
        return 0
    print("gradient suite FAILED", file=sys.stderr)
    return 1


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "export-attention": _cmd_export_attention,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except VsembedError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
