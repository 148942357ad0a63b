"""Command-line interface: train, transfer, eval.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 numeric failure (divergence).
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .errors import ConfigError, DataError, DlnetError, TrainError
from .nets import NetSpec, build, param_count
from .rscd import load_arrays, split_indices
from .trainloop import (
    TrainConfig,
    accuracy_by_snr,
    fit,
    load_checkpoint,
    predict,
    save_checkpoint,
    transfer_finetune,
    write_confusion_csv,
    write_curve_csv,
)

_PARTS = ("train", "val", "test")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=100, help="epoch cap")
    p.add_argument("--patience", type=int, default=10,
                   help="early-stop patience, epochs")
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-amp", action="store_true",
                   help="disable bfloat16 autocast")


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dlnet",
        description="Convolutional modulation classifiers on raw I/Q")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a network on a dataset")
    t.add_argument("--arch", choices=("vgg", "resnet"), required=True)
    t.add_argument("--data", required=True, help="input .rscd path")
    t.add_argument("--out", required=True, help="output checkpoint path")
    t.add_argument("--kernel", type=int, default=3, help="conv kernel size")
    t.add_argument("--stacks", type=int, default=6,
                   help="residual stacks (resnet)")
    t.add_argument("--pairs", type=int, default=None,
                   help="conv/pool pairs (vgg; default fits input length)")
    t.add_argument("--width", type=int, default=None,
                   help="conv filters (default 64 vgg / 32 resnet)")
    t.add_argument("--dropout", type=float, default=0.1)
    _add_train_flags(t)
    _add_split_flags(t)

    e = sub.add_parser("eval", help="score a checkpoint, write CSV artifacts")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out-prefix", required=True)
    e.add_argument("--partition", choices=_PARTS + ("all",), default="test")
    e.add_argument("--batch", type=int, default=1024)

    tr = sub.add_parser("transfer",
                        help="fine-tune the dense head on a target dataset")
    tr.add_argument("--ckpt", required=True)
    tr.add_argument("--data", required=True, help="target .rscd path")
    tr.add_argument("--out", required=True, help="fine-tuned checkpoint path")
    tr.add_argument("--freeze-tail", type=int, default=3,
                    help="how many trailing dense layers stay trainable")
    _add_train_flags(tr)
    _add_split_flags(tr)
    return ap


def _split_doc(args) -> dict:
    train_frac = 1.0 - args.val_frac - args.test_frac
    if train_frac <= 0.0:
        raise ConfigError("val and test fractions leave nothing to train on")
    return {"fractions": [train_frac, args.val_frac, args.test_frac],
            "seed": args.split_seed}


def _train_config(args) -> TrainConfig:
    return TrainConfig(batch_size=args.batch, learning_rate=args.lr,
                       max_epochs=args.epochs, patience=args.patience,
                       seed=args.seed, amp=not args.no_amp)


def _check_hash(meta_hash: Optional[str], data_hash: Optional[str]) -> None:
    if meta_hash and data_hash and meta_hash != data_hash:
        raise DataError("checkpoint was trained on a different dataset "
                        f"({meta_hash} vs {data_hash})")


def _cmd_train(args) -> int:
    x, y, snrs, ds = load_arrays(args.data)
    split = _split_doc(args)
    idx_train, idx_val, idx_test = split_indices(
        y, snrs, fractions=split["fractions"], seed=split["seed"])
    spec = NetSpec(kind=args.arch, example_len=ds.example_len,
                   n_classes=ds.n_classes, kernel_size=args.kernel,
                   conv_width=args.width, n_stacks=args.stacks,
                   n_pairs=args.pairs, dropout=args.dropout)
    model = build(spec)
    print(f"{args.arch}: {param_count(model)} trainable parameters, "
          f"{idx_train.size}/{idx_val.size}/{idx_test.size} "
          f"train/val/test examples")
    state = fit(model, x[idx_train], y[idx_train], x[idx_val], y[idx_val],
                _train_config(args), log=print)
    save_checkpoint(args.out, model, ds.classes,
                    config_hash=ds.config_hash,
                    train_config=_train_config(args), split=split,
                    history=state.history)
    print(f"best epoch {state.best_epoch}, "
          f"val loss {state.best_val_loss:.4f}, saved {args.out}")
    return 0


def _partition_indices(partition: str, y, snrs, split: Optional[dict]):
    if partition == "all":
        return np.arange(y.shape[0])
    if not split:
        raise ConfigError(f"checkpoint carries no split; "
                          f"cannot select partition {partition!r}")
    parts = split_indices(y, snrs, fractions=split["fractions"],
                          seed=split["seed"])
    return parts[_PARTS.index(partition)]


def _cmd_eval(args) -> int:
    model, meta = load_checkpoint(args.ckpt)
    x, y, snrs, ds = load_arrays(args.data)
    _check_hash(meta.get("config_hash"), ds.config_hash)
    if list(meta["classes"]) != list(ds.classes):
        raise DataError("checkpoint classes do not match the dataset")
    idx = _partition_indices(args.partition, y, snrs, meta.get("split"))
    pred = predict(model, x[idx], batch_size=args.batch)
    truth, s = y[idx], snrs[idx]
    rows = accuracy_by_snr(pred, truth, s)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(f"{prefix}.curve.csv", rows)
    write_confusion_csv(f"{prefix}.confusion.csv", pred, truth, ds.classes)
    overall = float(np.mean(pred == truth))
    meta_doc = {"partition": args.partition, "n": int(idx.size),
                "accuracy": overall, "config_hash": ds.config_hash,
                "checkpoint": str(args.ckpt)}
    Path(f"{prefix}.meta.json").write_text(json.dumps(meta_doc, indent=1))
    print(f"{args.partition} accuracy {overall:.4f} over {idx.size} examples")
    return 0


def _cmd_transfer(args) -> int:
    model, meta = load_checkpoint(args.ckpt)
    x, y, snrs, ds = load_arrays(args.data)
    if list(meta["classes"]) != list(ds.classes):
        raise DataError("checkpoint classes do not match the target dataset")
    split = _split_doc(args)
    idx_train, idx_val, idx_test = split_indices(
        y, snrs, fractions=split["fractions"], seed=split["seed"])
    pre = float(np.mean(predict(model, x[idx_test]) == y[idx_test]))
    state = transfer_finetune(model, x[idx_train], y[idx_train],
                              x[idx_val], y[idx_val], _train_config(args),
                              freeze_tail=args.freeze_tail, log=print)
    post = float(np.mean(predict(model, x[idx_test]) == y[idx_test]))
    save_checkpoint(args.out, model, ds.classes,
                    config_hash=ds.config_hash,
                    train_config=_train_config(args), split=split,
                    history=state.history)
    print(f"frozen accuracy {pre:.4f} -> fine-tuned {post:.4f} "
          f"({state.epochs_run} epochs), saved {args.out}")
    return 0


def main(argv=None) -> int:
    torch.set_num_threads(max(1, torch.get_num_threads()))
    args = _parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        return _cmd_transfer(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DlnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
