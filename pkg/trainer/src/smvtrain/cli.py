"""Command line front end: smvtrain train."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import load_corpus
from .errors import TrainError
from .train import MAX_FINETUNE_EPOCHS, MAX_PRETRAIN_STEPS, TrainConfig, train_pipeline


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smvtrain", description="train the boundary-labeling model")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="pretrain, fine-tune, and export weights")
    train.add_argument("--corpus", required=True, help="directory of artifacts or sources + corpus.tsv")
    train.add_argument("--out", required=True, help="weight file to write")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--steps", type=int, default=300, help=f"pretrain steps, at most {MAX_PRETRAIN_STEPS}")
    train.add_argument("--epochs", type=int, default=20, help=f"fine-tune epochs, at most {MAX_FINETUNE_EPOCHS}")
    train.add_argument("--batch", type=int, default=8)
    train.add_argument("--val-fraction", type=float, default=0.2)
    train.add_argument(
        "--synth", type=int, default=150,
        help="generated contracts mixed into the training side (0 disables)",
    )
    train.add_argument("--stats", help="also write run statistics as JSON")
    return parser


def run_train(args: argparse.Namespace) -> int:
    try:
        cfg = TrainConfig(
            seed=args.seed,
            pretrain_steps=args.steps,
            finetune_epochs=args.epochs,
            batch=args.batch,
            val_fraction=args.val_fraction,
            synth_contracts=args.synth,
        )
    except ValueError as exc:
        raise TrainError(str(exc)) from exc
    errors: list[tuple[str, str]] = []
    entries = load_corpus(args.corpus, errors=errors)
    for where, message in errors:
        print(f"warning: {where}: {message}", file=sys.stderr)
    stats = train_pipeline(entries, Path(args.out), cfg)
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats, indent=2) + "\n")
    acc = stats.get("masked_acc")
    f1 = stats.get("finetune", {}).get("val_f1_s")
    line = f"wrote {args.out}: {stats['contracts']} contract(s), masked acc {acc:.3f}"
    if f1 is not None:
        line += f", val S-F1 {f1:.3f}"
    print(line, file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "train":
            return run_train(args)
        raise TrainError(f"unknown command {args.command}")
    except TrainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
