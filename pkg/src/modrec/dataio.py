"""Dataset container format, manifests, and deterministic splits.

Binary layout (little-endian), extension .rscd:

    header   : magic "RSCD", u32 version = 1, u64 n_examples,
               u32 example_len, u32 n_classes              (24 bytes)
    records  : n_examples of
                   u16 label
                   f32 snr_db
                   f32[7] channel params (alpha, delta_t, delta_fs,
                          theta_c, delta_fc, tau, reserved)
                   f32[2*example_len] interleaved I/Q
    trailer  : u32 end sentinel                            (4 bytes)

A JSON manifest sits next to the binary at <path>.json and is the authority
on class names, the impairment profile, and the generation seed. Labels and
SNR assignments are round-robin in example index (class = i mod K, then the
SNR grid advances every K examples), so splits and evaluations can be
derived from the manifest alone without scanning the binary.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .channel import ChannelParams, ImpairmentProfile
from .errors import ConfigError, DataError
from .modem import AnalogSourceConfig
from .sigcore import IqExample, RandomStream

MAGIC = b"RSCD"
FORMAT_VERSION = 1
END_SENTINEL = 0x52534344  # "RSCD" read back as a big-endian integer

_HEADER = struct.Struct("<4sIQII")
_REC_FIXED = struct.Struct("<Hf7f")

FEATURE_MAGIC = b"RFFT"
FEATURE_VERSION = 1
_FEAT_HEADER = struct.Struct("<4sIQI")


def record_size(example_len: int) -> int:
    return _REC_FIXED.size + 8 * example_len


def expected_file_size(n_examples: int, example_len: int) -> int:
    return _HEADER.size + n_examples * record_size(example_len) + 4


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class DatasetManifest:
    """Everything needed to regenerate or interpret a dataset."""

    classes: Tuple[str, ...]
    n_examples: int
    example_len: int
    master_seed: int
    profile: ImpairmentProfile
    sps: int = 8
    span_symbols: int = 8
    gmsk_bt: float = 0.35
    analog: AnalogSourceConfig = AnalogSourceConfig()
    version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if self.n_examples < 1:
            raise ConfigError("n_examples must be >= 1")
        if self.example_len < 2:
            raise ConfigError("example_len must be >= 2")
        if len(self.classes) < 2:
            raise ConfigError("need at least two classes")
        if len(set(self.classes)) != len(self.classes):
            raise ConfigError("duplicate class names")
        if len(self.classes) > 65535:
            raise ConfigError("class count exceeds u16 labels")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_json(self) -> dict:
        doc = {
            "format": "modrec-dataset",
            "version": self.version,
            "classes": list(self.classes),
            "n_examples": self.n_examples,
            "example_len": self.example_len,
            "master_seed": self.master_seed,
            "sps": self.sps,
            "span_symbols": self.span_symbols,
            "gmsk_bt": self.gmsk_bt,
            "analog": {
                "cutoff": self.analog.cutoff,
                "fir_taps": self.analog.fir_taps,
                "carrier_power_ratio": self.analog.carrier_power_ratio,
                "fm_deviation": self.analog.fm_deviation,
            },
            "profile": self.profile.to_json(),
        }
        doc["config_hash"] = _hash_doc(doc)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "DatasetManifest":
        try:
            a = doc["analog"]
            return cls(
                classes=tuple(doc["classes"]),
                n_examples=int(doc["n_examples"]),
                example_len=int(doc["example_len"]),
                master_seed=int(doc["master_seed"]),
                profile=ImpairmentProfile.from_json(doc["profile"]),
                sps=int(doc["sps"]),
                span_symbols=int(doc["span_symbols"]),
                gmsk_bt=float(doc["gmsk_bt"]),
                analog=AnalogSourceConfig(
                    cutoff=float(a["cutoff"]),
                    fir_taps=int(a["fir_taps"]),
                    carrier_power_ratio=float(a["carrier_power_ratio"]),
                    fm_deviation=float(a["fm_deviation"])),
                version=int(doc["version"]),
            )
        except KeyError as e:
            raise ConfigError(f"manifest missing key {e}") from e

    @property
    def config_hash(self) -> str:
        return self.to_json()["config_hash"]


def _hash_doc(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def manifest_path(dataset_path: Union[str, Path]) -> Path:
    return Path(str(dataset_path) + ".json")


def write_manifest(dataset_path: Union[str, Path],
                   manifest: DatasetManifest) -> None:
    manifest_path(dataset_path).write_text(
        json.dumps(manifest.to_json(), indent=1))


def read_manifest(dataset_path: Union[str, Path]) -> DatasetManifest:
    p = manifest_path(dataset_path)
    if not p.exists():
        raise DataError(f"missing manifest {p}")
    try:
        return DatasetManifest.from_json(json.loads(p.read_text()))
    except json.JSONDecodeError as e:
        raise DataError(f"bad manifest JSON {p}: {e}") from e


def example_assignment(manifest: DatasetManifest,
                       index: int) -> Tuple[int, float]:
    """(label, snr_db) for example `index` under the round-robin plan."""
    if not (0 <= index < manifest.n_examples):
        raise DataError(f"index {index} out of range")
    k = manifest.n_classes
    grid = manifest.profile.snr_grid
    label = index % k
    snr = grid[(index // k) % len(grid)]
    return label, float(snr)


def assignment_arrays(manifest: DatasetManifest) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.arange(manifest.n_examples)
    k = manifest.n_classes
    grid = np.asarray(manifest.profile.snr_grid)
    labels = (idx % k).astype(np.int32)
    snrs = grid[(idx // k) % grid.size]
    return labels, snrs


# ---------------------------------------------------------------------------
# binary writer / readers


def _pack_params(p: Optional[ChannelParams]) -> Tuple[float, ...]:
    if p is None:
        return (0.0,) * 7
    return (p.alpha, p.delta_t, p.delta_fs, p.theta_c, p.delta_fc, p.tau, 0.0)


def _unpack_params(vals: Tuple[float, ...], snr_db: float
                   ) -> Optional[ChannelParams]:
    if all(v == 0.0 for v in vals):
        return None
    return ChannelParams(alpha=vals[0], delta_t=vals[1], delta_fs=vals[2],
                         theta_c=vals[3], delta_fc=vals[4], tau=vals[5],
                         snr_db=snr_db, taps=None)


def write_dataset(path: Union[str, Path],
                  examples: Iterable[IqExample],
                  manifest: DatasetManifest) -> None:
    """Stream examples to disk; counts and shapes must match the manifest."""
    path = Path(path)
    n_written = 0
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, manifest.n_examples,
                             manifest.example_len, manifest.n_classes))
        for ex in examples:
            if len(ex.samples) != manifest.example_len:
                raise DataError(
                    f"example {n_written} has {len(ex.samples)} samples, "
                    f"manifest says {manifest.example_len}")
            if not (0 <= ex.label < manifest.n_classes):
                raise DataError(f"label {ex.label} out of range")
            f.write(_REC_FIXED.pack(ex.label, float(ex.snr_db),
                                    *_pack_params(ex.params)))
            iq = np.ascontiguousarray(ex.samples.astype(np.complex64))
            f.write(iq.view(np.float32).astype("<f4", copy=False).tobytes())
            n_written += 1
        if n_written != manifest.n_examples:
            raise DataError(
                f"wrote {n_written} examples, manifest says {manifest.n_examples}")
        f.write(struct.pack("<I", END_SENTINEL))
    write_manifest(path, manifest)


def _check_header(path: Path, blob: bytes) -> Tuple[int, int, int]:
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: too short for a dataset header")
    magic, version, n, length, n_classes = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    return n, length, n_classes


def read_dataset_arrays(path: Union[str, Path]
                        ) -> Tuple[Optional[DatasetManifest], np.ndarray,
                                   np.ndarray, np.ndarray, np.ndarray]:
    """Bulk load: (manifest, samples (n, l) complex64, labels, snrs, params).

    params is the raw (n, 7) float32 block. The manifest is None when the
    sidecar JSON is absent.
    """
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        n, length, n_classes = _check_header(path, head)
        if size != expected_file_size(n, length):
            raise DataError(
                f"{path}: size {size} != expected {expected_file_size(n, length)}")
        rec = np.dtype([("label", "<u2"), ("snr", "<f4"), ("params", "<f4", 7),
                        ("iq", "<f4", 2 * length)])
        data = np.fromfile(f, dtype=rec, count=n)
        sentinel = struct.unpack("<I", f.read(4))[0]
    if sentinel != END_SENTINEL:
        raise DataError(f"{path}: bad end sentinel {sentinel:#x}")
    if data.size != n:
        raise DataError(f"{path}: truncated record block")
    labels = data["label"].astype(np.int32)
    if labels.size and labels.max() >= n_classes:
        raise DataError(f"{path}: label {labels.max()} >= {n_classes}")
    samples = data["iq"].view(np.complex64).reshape(n, length)
    manifest = None
    if manifest_path(path).exists():
        manifest = read_manifest(path)
        if (manifest.n_examples != n or manifest.example_len != length
                or manifest.n_classes != n_classes):
            raise DataError(f"{path}: manifest disagrees with binary header")
    return manifest, samples, labels, data["snr"].astype(np.float64), data["params"]


def read_dataset(path: Union[str, Path]
                 ) -> Tuple[Optional[DatasetManifest], Iterator[IqExample]]:
    """Manifest plus a generator over examples (complex128 samples)."""
    manifest, samples, labels, snrs, params = read_dataset_arrays(path)

    def gen() -> Iterator[IqExample]:
        for i in range(samples.shape[0]):
            yield IqExample(
                samples=samples[i].astype(np.complex128),
                label=int(labels[i]),
                snr_db=float(snrs[i]),
                params=_unpack_params(tuple(float(v) for v in params[i]),
                                      float(snrs[i])),
                example_index=i)

    return manifest, gen()


# ---------------------------------------------------------------------------
# feature files


def write_features(path: Union[str, Path],
                   matrix: np.ndarray,
                   labels: np.ndarray,
                   columns: Tuple[str, ...],
                   snrs: np.ndarray,
                   manifest: Optional[DatasetManifest] = None,
                   extra_meta: Optional[dict] = None) -> None:
    """Feature matrix container: "RFFT" header, f32 rows, u16 labels.

    The JSON sidecar at <path>.json carries column names, per-row snr_db,
    the source manifest echo, and the config hash, so downstream evaluation
    needs only this file pair.
    """
    path = Path(path)
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float32))
    y = np.asarray(labels)
    s = np.asarray(snrs, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != len(columns):
        raise DataError(f"matrix shape {m.shape} vs {len(columns)} columns")
    if y.shape != (m.shape[0],) or s.shape != (m.shape[0],):
        raise DataError("labels/snrs misaligned with matrix rows")
    if y.size and (y.min() < 0 or y.max() > 65535):
        raise DataError("labels out of u16 range")
    with open(path, "wb") as f:
        f.write(_FEAT_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION,
                                  m.shape[0], m.shape[1]))
        f.write(m.astype("<f4", copy=False).tobytes())
        f.write(y.astype("<u2").tobytes())
    sidecar = {
        "format": "modrec-features",
        "version": FEATURE_VERSION,
        "columns": list(columns),
        "snr_db": [float(v) for v in s],
        "manifest": manifest.to_json() if manifest is not None else None,
        "config_hash": manifest.config_hash if manifest is not None else None,
    }
    if extra_meta:
        sidecar["meta"] = extra_meta
    Path(str(path) + ".json").write_text(json.dumps(sidecar))


def read_features(path: Union[str, Path]
                  ) -> Tuple[np.ndarray, np.ndarray, dict]:
    """(matrix f32 (n, c), labels i32 (n,), sidecar dict)."""
    path = Path(path)
    blob_size = path.stat().st_size
    with open(path, "rb") as f:
        head = f.read(_FEAT_HEADER.size)
        if len(head) < _FEAT_HEADER.size:
            raise DataError(f"{path}: too short for a feature header")
        magic, version, rows, cols = _FEAT_HEADER.unpack(head)
        if magic != FEATURE_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != FEATURE_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        expected = _FEAT_HEADER.size + rows * cols * 4 + rows * 2
        if blob_size != expected:
            raise DataError(f"{path}: size {blob_size} != expected {expected}")
        matrix = np.fromfile(f, dtype="<f4", count=rows * cols).reshape(rows, cols)
        labels = np.fromfile(f, dtype="<u2", count=rows).astype(np.int32)
    sidecar_file = Path(str(path) + ".json")
    if not sidecar_file.exists():
        raise DataError(f"missing feature sidecar {sidecar_file}")
    sidecar = json.loads(sidecar_file.read_text())
    if len(sidecar.get("snr_db", [])) != rows:
        raise DataError(f"{path}: sidecar snr_db length != {rows}")
    if len(sidecar.get("columns", [])) != cols:
        raise DataError(f"{path}: sidecar columns != {cols}")
    return matrix, labels, sidecar


# ---------------------------------------------------------------------------
# splits


def split(manifest: DatasetManifest,
          train_fraction: float = 0.8,
          seed: int = 1,
          labels: Optional[np.ndarray] = None,
          snrs: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified (class, snr) split with |train| = round(n * fraction).

    Per-cell quotas come from largest-remainder rounding of the global
    fraction; every cell with at least two members keeps at least one
    example on each side when the cell count permits. When the corpus is
    small relative to the (class, snr) grid that guarantee can exceed the
    requested fraction, in which case the fraction wins and a seeded
    selection of cells lands entirely in one partition. Deterministic in
    (manifest, fraction, seed).
    """
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError("train_fraction must be in (0, 1)")
    n = manifest.n_examples
    if labels is None or snrs is None:
        labels, snrs = assignment_arrays(manifest)
    labels = np.asarray(labels)
    snrs = np.asarray(snrs)
    if labels.shape != (n,) or snrs.shape != (n,):
        raise DataError("labels/snrs misaligned with manifest")

    n_train = int(round(n * train_fraction))
    if not (0 < n_train < n):
        raise ConfigError(
            f"train_fraction {train_fraction} leaves an empty partition")

    cells: dict = {}
    for i in range(n):
        cells.setdefault((int(labels[i]), float(snrs[i])), []).append(i)
    keys = sorted(cells.keys())
    sizes = np.array([len(cells[k]) for k in keys], dtype=np.int64)

    exact = train_fraction * sizes
    quota = np.floor(exact).astype(np.int64)
    remainder = exact - quota
    shortfall = n_train - int(quota.sum())
    if shortfall > 0:
        grab = np.lexsort((np.arange(len(keys)), -remainder))[:shortfall]
        quota[grab] += 1
    elif shortfall < 0:
        give = np.lexsort((np.arange(len(keys)), remainder))[: -shortfall]
        quota[give] -= 1

    # coverage guarantee, then restore the exact total using slack cells
    quota = np.where(sizes >= 2, np.clip(quota, 1, sizes - 1),
                     np.clip(quota, 0, sizes))
    drift = n_train - int(quota.sum())
    order = np.argsort(-sizes, kind="stable")
    for c in order:
        if drift == 0:
            break
        if drift > 0 and quota[c] < (sizes[c] - 1 if sizes[c] >= 2 else sizes[c]):
            room = (sizes[c] - 1 if sizes[c] >= 2 else sizes[c]) - quota[c]
            take = min(room, drift)
            quota[c] += take
            drift -= take
        elif drift < 0 and quota[c] > (1 if sizes[c] >= 2 else 0):
            floor_q = 1 if sizes[c] >= 2 else 0
            give = min(quota[c] - floor_q, -drift)
            quota[c] -= give
            drift += give
    if drift != 0:
        # Tiny cells made the coverage guarantee infeasible. Release whole
        # cells to the needy side in a seeded order so no class or noise
        # level is systematically stripped from either partition.
        relax = RandomStream(seed, 1).generator().permutation(len(keys))
        for c in relax:
            if drift == 0:
                break
            if drift > 0 and quota[c] < sizes[c]:
                take = min(int(sizes[c] - quota[c]), drift)
                quota[c] += take
                drift -= take
            elif drift < 0 and quota[c] > 0:
                give = min(int(quota[c]), -drift)
                quota[c] -= give
                drift += give

    rng = RandomStream(seed, 0).generator()
    train_idx: List[int] = []
    test_idx: List[int] = []
    for q, key in zip(quota, keys):
        members = np.asarray(cells[key])
        perm = rng.permutation(members.size)
        train_idx.extend(members[perm[:q]])
        test_idx.extend(members[perm[q:]])
    return (np.sort(np.asarray(train_idx, dtype=np.int64)),
            np.sort(np.asarray(test_idx, dtype=np.int64)))
