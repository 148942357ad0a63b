"""End-to-end pipeline: generate, featurize, train, evaluate, sweep.

Dataset generation is embarrassingly parallel: example i is a pure function
of (manifest, i) via a counter-based random stream, so worker processes
produce bit-identical files for any worker count, and generating a prefix
of a larger dataset yields byte-identical examples.
"""

from __future__ import annotations

import json
import multiprocessing
import time
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import dataio, features, gbtree, metrics, modem
from .channel import ImpairmentProfile, draw_params, guard_length, impair
from .dataio import DatasetManifest, example_assignment
from .errors import ConfigError, DataError
from .modem import CLASS_SETS, AnalogSourceConfig, ShapingConfig
from .sigcore import IqExample, RandomStream

_CONFIG_KEYS = {
    "class_set", "classes", "n_examples", "example_len", "sps",
    "span_symbols", "gmsk_bt", "analog", "profile",
}


def build_manifest(config: dict, master_seed: int) -> DatasetManifest:
    """Manifest from a JSON-style config dict; unknown keys are errors."""
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "classes" in config:
        classes = tuple(config["classes"])
        bad = [c for c in classes if c not in modem.DIFFICULT_CLASSES]
        if bad:
            raise ConfigError(f"unknown class names: {bad}")
    else:
        set_name = config.get("class_set", "difficult-24")
        if set_name not in CLASS_SETS:
            raise ConfigError(
                f"class_set must be one of {sorted(CLASS_SETS)}, got {set_name!r}")
        classes = CLASS_SETS[set_name]
    profile_doc = dict(config.get("profile", {}))
    profile_fields = ImpairmentProfile()
    base = profile_fields.to_json()
    unknown = set(profile_doc) - set(base)
    if unknown:
        raise ConfigError(f"unknown profile keys: {sorted(unknown)}")
    base.update(profile_doc)
    profile = ImpairmentProfile.from_json(base)
    analog_doc = config.get("analog", {})
    analog_base = {
        "cutoff": 0.05, "fir_taps": 129,
        "carrier_power_ratio": 0.5, "fm_deviation": 0.15,
    }
    unknown = set(analog_doc) - set(analog_base)
    if unknown:
        raise ConfigError(f"unknown analog keys: {sorted(unknown)}")
    analog_base.update(analog_doc)
    try:
        return DatasetManifest(
            classes=classes,
            n_examples=int(config.get("n_examples", 1000)),
            example_len=int(config.get("example_len", 1024)),
            master_seed=int(master_seed),
            profile=profile,
            sps=int(config.get("sps", 8)),
            span_symbols=int(config.get("span_symbols", 8)),
            gmsk_bt=float(config.get("gmsk_bt", 0.35)),
            analog=AnalogSourceConfig(**{k: analog_base[k]
                                         for k in analog_base}),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from e


def generate_example(manifest: DatasetManifest, index: int) -> IqExample:
    """Example `index`, independent of every other example.

    Draw order within the per-example stream is fixed: channel parameters,
    then modulation symbols/message, then receiver noise.
    """
    rng = RandomStream(manifest.master_seed, index).generator()
    label, snr = example_assignment(manifest, index)
    params = draw_params(manifest.profile, rng, snr_db=snr)
    name = manifest.classes[label]
    scheme = modem.scheme_for(name)
    taps = params.taps if params.taps else ((0.0, 1.0 + 0.0j),)
    need = guard_length(manifest.example_len, taps)
    sps = manifest.sps

    if scheme.kind in ("linear", "offset"):
        cfg = ShapingConfig(alpha=params.alpha, sps=sps,
                            span_symbols=manifest.span_symbols)
        n_symbols = -(-need // sps) + manifest.span_symbols
        if scheme.kind == "linear":
            clean = modem.modulate_linear(scheme, n_symbols, cfg, rng)
        else:
            clean = modem.modulate_offset_qpsk(n_symbols, cfg, rng)
    elif scheme.kind == "cpm":
        n_symbols = -(-need // sps) + 2
        clean = modem.modulate_gmsk(n_symbols, sps, rng, bt=manifest.gmsk_bt)
    else:
        clean = modem.modulate_analog(scheme, need, manifest.analog, rng)

    return impair(clean, params, rng, out_len=manifest.example_len,
                  label=label, example_index=index)


_WORKER_MANIFEST: Optional[DatasetManifest] = None


def _worker_init(manifest_doc: dict) -> None:
    global _WORKER_MANIFEST
    _WORKER_MANIFEST = DatasetManifest.from_json(manifest_doc)


def _worker_chunk(index_range: Tuple[int, int]) -> List[IqExample]:
    lo, hi = index_range
    return [generate_example(_WORKER_MANIFEST, i) for i in range(lo, hi)]


def _example_stream(manifest: DatasetManifest, workers: int,
                    chunk: int = 64) -> Iterator[IqExample]:
    n = manifest.n_examples
    if workers <= 1:
        for i in range(n):
            yield generate_example(manifest, i)
        return
    ranges = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=workers, initializer=_worker_init,
                  initargs=(manifest.to_json(),)) as pool:
        for batch in pool.imap(_worker_chunk, ranges):
            yield from batch


def generate_dataset(manifest: DatasetManifest,
                     path: Union[str, Path],
                     workers: int = 1) -> Path:
    path = Path(path)
    dataio.write_dataset(path, _example_stream(manifest, workers), manifest)
    return path


def featurize_dataset(dataset_path: Union[str, Path],
                      out_path: Union[str, Path],
                      chunk: int = 512) -> Path:
    """Extract the 28-column feature matrix for every example."""
    manifest, samples, labels, snrs, _params = dataio.read_dataset_arrays(
        dataset_path)
    if manifest is None:
        raise DataError(f"{dataset_path}: feature extraction needs a manifest")
    matrix = features.featurize_batch(samples, chunk=chunk)
    dataio.write_features(out_path, matrix.astype(np.float32), labels,
                          features.FEATURE_NAMES, snrs, manifest=manifest)
    return Path(out_path)


def _manifest_from_sidecar(sidecar: dict, path: str) -> DatasetManifest:
    doc = sidecar.get("manifest")
    if not doc:
        raise DataError(f"{path}: feature sidecar has no manifest echo")
    return DatasetManifest.from_json(doc)


def train_baseline(features_path: Union[str, Path],
                   model_path: Union[str, Path],
                   config: gbtree.GbtConfig = gbtree.GbtConfig(),
                   train_fraction: float = 0.8,
                   split_seed: int = 1,
                   n_jobs: int = 1) -> Tuple[gbtree.GbtModel, dict]:
    """Train on the stratified train side; track log-loss on the test side.

    The split parameters and config hash ride along in the model file so
    evaluation can reconstruct the exact same partition.
    """
    matrix, labels, sidecar = dataio.read_features(features_path)
    manifest = _manifest_from_sidecar(sidecar, str(features_path))
    snrs = np.asarray(sidecar["snr_db"], dtype=np.float64)
    tr, te = dataio.split(manifest, train_fraction, split_seed,
                          labels=labels, snrs=snrs)
    x = matrix.astype(np.float64)
    t0 = time.time()
    model = gbtree.train(x[tr], labels[tr], config,
                         n_classes=manifest.n_classes,
                         eval_set=(x[te], labels[te]),
                         feature_names=tuple(sidecar["columns"]),
                         n_jobs=n_jobs)
    report = {
        "config_hash": sidecar.get("config_hash"),
        "train_fraction": train_fraction,
        "split_seed": split_seed,
        "n_train": int(tr.size),
        "n_test": int(te.size),
        "seconds": round(time.time() - t0, 3),
        "train_loss": model.train_loss,
        "valid_loss": model.valid_loss,
    }
    gbtree.save_model(model_path, model, meta={
        "config_hash": sidecar.get("config_hash"),
        "features_file": str(features_path),
        "train_fraction": train_fraction,
        "split_seed": split_seed,
    })
    Path(str(model_path) + ".report.json").write_text(json.dumps(report))
    return model, report


def evaluate(model_path: Union[str, Path],
             features_path: Union[str, Path],
             out_prefix: Union[str, Path],
             snr_min_confusion: float = 0.0,
             partition: str = "test") -> dict:
    """Score a model on one partition; write curve and confusion CSVs.

    Partition reconstruction uses the split parameters stored in the model
    file. Outputs <prefix>.curve.csv, <prefix>.confusion.csv and
    <prefix>.meta.json; returns a summary dict.
    """
    model = gbtree.load_model(model_path)
    meta = gbtree.load_model_meta(model_path)
    matrix, labels, sidecar = dataio.read_features(features_path)
    manifest = _manifest_from_sidecar(sidecar, str(features_path))
    snrs = np.asarray(sidecar["snr_db"], dtype=np.float64)
    if (meta.get("config_hash") and sidecar.get("config_hash")
            and meta["config_hash"] != sidecar["config_hash"]):
        raise DataError(
            "model was trained on a different dataset "
            f"({meta['config_hash']} vs {sidecar['config_hash']})")
    if partition not in ("test", "train", "all"):
        raise ConfigError(f"unknown partition {partition!r}")
    if partition == "all":
        idx = np.arange(manifest.n_examples)
    else:
        tr, te = dataio.split(manifest,
                              float(meta.get("train_fraction", 0.8)),
                              int(meta.get("split_seed", 1)),
                              labels=labels, snrs=snrs)
        idx = tr if partition == "train" else te

    pred = gbtree.predict(model, matrix[idx].astype(np.float64))
    true = labels[idx]
    s = snrs[idx]
    curve = metrics.accuracy_by_snr(pred, true, s)
    conf = metrics.confusion_matrix(pred, true, manifest.classes,
                                    snrs=s, snr_min=snr_min_confusion)
    out_prefix = str(out_prefix)
    curve_path = out_prefix + ".curve.csv"
    conf_path = out_prefix + ".confusion.csv"
    metrics.write_csv(curve_path, curve.to_csv())
    metrics.write_csv(conf_path, conf.to_csv())
    summary = {
        "config_hash": sidecar.get("config_hash"),
        "model": str(model_path),
        "features": str(features_path),
        "partition": partition,
        "n_examples": int(idx.size),
        "overall_accuracy": curve.overall_accuracy(),
        "confusion_snr_min": snr_min_confusion,
        "confusion_accuracy": conf.accuracy(),
        "outputs": {"curve": curve_path, "confusion": conf_path},
    }
    Path(out_prefix + ".meta.json").write_text(json.dumps(summary, indent=1))
    return summary


_SWEEP_AXES = {"n_examples", "example_len", "sigma_clk", "tau"}


def sweep(axis: str,
          values: Sequence,
          base_config: dict,
          master_seed: int,
          out_dir: Union[str, Path],
          gbt_config: gbtree.GbtConfig = gbtree.GbtConfig(),
          train_fraction: float = 0.8,
          split_seed: int = 1,
          workers: int = 1,
          n_jobs: int = 1) -> dict:
    """Generate/featurize/train/evaluate once per axis value, shared seed.

    Writes per-value artifacts under out_dir plus a combined sweep.csv
    (axis, snr_db, n, accuracy) and sweep.json summary.
    """
    if axis not in _SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {sorted(_SWEEP_AXES)}")
    if len(values) < 2:
        raise ConfigError("sweep needs at least two values")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: List[Tuple] = []
    summary: Dict[str, dict] = {}
    for value in values:
        cfg = json.loads(json.dumps(base_config))  # deep copy
        if axis in ("sigma_clk", "tau"):
            cfg.setdefault("profile", {})[axis] = value
        else:
            cfg[axis] = value
        tag = f"{axis}-{value}"
        manifest = build_manifest(cfg, master_seed)
        ds = out_dir / f"{tag}.rscd"
        ft = out_dir / f"{tag}.rfft"
        generate_dataset(manifest, ds, workers=workers)
        featurize_dataset(ds, ft)
        model_path = out_dir / f"{tag}.model.json"
        train_baseline(ft, model_path, gbt_config,
                       train_fraction=train_fraction,
                       split_seed=split_seed, n_jobs=n_jobs)
        res = evaluate(model_path, ft, str(out_dir / tag))
        curve = metrics.read_curve(res["outputs"]["curve"])
        for b in curve.bins:
            rows.append((value, b.snr_db, b.n, b.accuracy))
        summary[str(value)] = res
    lines = ["axis_value,snr_db,n,accuracy"]
    lines += [f"{v:g},{s:g},{n},{a:.6f}" for v, s, n, a in rows]
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    doc = {"axis": axis, "values": [v for v in values],
           "master_seed": master_seed, "results": summary}
    (out_dir / "sweep.json").write_text(json.dumps(doc, indent=1))
    return doc
