"""Command-line interface.

Subcommands: generate, featurize, train-baseline, evaluate, sweep.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure. Dataset generation demands an explicit --seed; nothing in the
pipeline ever draws from unseeded entropy.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gbtree, harness
from .errors import ConfigError, DataError, ModrecError, NumericError


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def _add_gbt_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rounds", type=int, default=300)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--reg-lambda", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--min-child-weight", type=float, default=1.0)
    p.add_argument("--subsample", type=float, default=0.8)
    p.add_argument("--gbt-seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--split-seed", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)


def _gbt_config(args: argparse.Namespace) -> gbtree.GbtConfig:
    return gbtree.GbtConfig(
        n_rounds=args.rounds, max_depth=args.depth,
        learning_rate=args.learning_rate, reg_lambda=args.reg_lambda,
        gamma=args.gamma, min_child_weight=args.min_child_weight,
        subsample=args.subsample, seed=args.gbt_seed)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="modrec",
        description="Radio dataset forge and modulation classifier")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a labeled dataset")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--seed", type=int, required=True,
                   help="master seed (mandatory; no silent entropy)")
    g.add_argument("--out", required=True, help="output .rscd path")
    g.add_argument("--n", type=int, help="override n_examples")
    g.add_argument("--len", type=int, dest="example_len",
                   help="override example_len")
    g.add_argument("--class-set", choices=["normal-11", "difficult-24"],
                   help="override class set")
    g.add_argument("--sigma-clk", type=float, help="override profile.sigma_clk")
    g.add_argument("--tau", type=float, help="override profile.tau")
    g.add_argument("--workers", type=int, default=1)

    f = sub.add_parser("featurize", help="extract feature vectors")
    f.add_argument("--dataset", required=True)
    f.add_argument("--out", required=True, help="output .rfft path")

    t = sub.add_parser("train-baseline", help="fit the boosted-tree baseline")
    t.add_argument("--features", required=True)
    t.add_argument("--out", required=True, help="output model JSON path")
    _add_gbt_flags(t)

    e = sub.add_parser("evaluate", help="score a model, write CSV artifacts")
    e.add_argument("--model", required=True)
    e.add_argument("--features", required=True)
    e.add_argument("--out-prefix", required=True)
    e.add_argument("--snr-min", type=float, default=0.0,
                   help="confusion matrix SNR floor (dB)")
    e.add_argument("--partition", choices=["test", "train", "all"],
                   default="test")

    s = sub.add_parser("sweep", help="run the pipeline across an axis")
    s.add_argument("--config", help="JSON base config file")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--axis", required=True,
                   choices=["n_examples", "example_len", "sigma_clk", "tau"])
    s.add_argument("--values", required=True,
                   help="comma-separated axis values")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=1)
    _add_gbt_flags(s)
    return ap


def _cmd_generate(args: argparse.Namespace) -> None:
    config = _load_config(args.config)
    if args.n is not None:
        config["n_examples"] = args.n
    if args.example_len is not None:
        config["example_len"] = args.example_len
    if args.class_set is not None:
        config["class_set"] = args.class_set
    for key in ("sigma_clk", "tau"):
        val = getattr(args, key)
        if val is not None:
            config.setdefault("profile", {})[key] = val
    manifest = harness.build_manifest(config, args.seed)
    harness.generate_dataset(manifest, args.out, workers=args.workers)
    print(f"wrote {manifest.n_examples} examples x {manifest.example_len} "
          f"samples ({len(manifest.classes)} classes) to {args.out} "
          f"[hash {manifest.config_hash}]")


def _cmd_featurize(args: argparse.Namespace) -> None:
    out = harness.featurize_dataset(args.dataset, args.out)
    print(f"wrote features to {out}")


def _cmd_train(args: argparse.Namespace) -> None:
    model, report = harness.train_baseline(
        args.features, args.out, _gbt_config(args),
        train_fraction=args.train_frac, split_seed=args.split_seed,
        n_jobs=args.jobs)
    final_v = report["valid_loss"][-1] if report["valid_loss"] else None
    print(f"trained {len(model.trees)} rounds x {model.n_classes} classes "
          f"in {report['seconds']}s; train loss {report['train_loss'][-1]:.4f}"
          + (f", valid loss {final_v:.4f}" if final_v is not None else ""))
    print(f"model -> {args.out}")


def _cmd_evaluate(args: argparse.Namespace) -> None:
    summary = harness.evaluate(args.model, args.features, args.out_prefix,
                               snr_min_confusion=args.snr_min,
                               partition=args.partition)
    print(f"{summary['partition']} accuracy {summary['overall_accuracy']:.4f} "
          f"over {summary['n_examples']} examples; "
          f"confusion(snr>={args.snr_min:g}) {summary['confusion_accuracy']:.4f}")
    print(f"curve -> {summary['outputs']['curve']}")
    print(f"confusion -> {summary['outputs']['confusion']}")


def _parse_values(text: str) -> list:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        num = float(tok)
        vals.append(int(num) if num == int(num) else num)
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def _cmd_sweep(args: argparse.Namespace) -> None:
    doc = harness.sweep(args.axis, _parse_values(args.values),
                        _load_config(args.config), args.seed, args.out_dir,
                        gbt_config=_gbt_config(args),
                        train_fraction=args.train_frac,
                        split_seed=args.split_seed,
                        workers=args.workers, n_jobs=args.jobs)
    for value, res in doc["results"].items():
        print(f"{args.axis}={value}: accuracy {res['overall_accuracy']:.4f}")
    print(f"sweep artifacts -> {args.out_dir}")


_COMMANDS = {
    "generate": _cmd_generate,
    "featurize": _cmd_featurize,
    "train-baseline": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except ModrecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
