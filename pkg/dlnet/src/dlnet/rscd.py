"""Native reader for .rscd datasets and their JSON manifests.

The container is self-describing: a 24-byte header (magic "RSCD", u32
version, u64 example count, u32 example length, u32 class count), fixed
34-byte record prefixes (u16 label, f32 snr_db, seven f32 channel
parameters) each followed by interleaved f32 I/Q, and a u32 end sentinel.
A JSON manifest next to the binary carries class names and the generation
config. Records are exposed through a structured memory map, so loading is
cheap and batch access is zero-copy until conversion.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DataError

MAGIC = b"RSCD"
FORMAT_VERSION = 1
END_SENTINEL = 0x52534344

_HEADER = struct.Struct("<4sIQII")


def _record_dtype(example_len: int) -> np.dtype:
    return np.dtype([("label", "<u2"), ("snr_db", "<f4"),
                     ("params", "<f4", (7,)), ("iq", "<f4", (2 * example_len,))])


@dataclass(frozen=True)
class RscdFile:
    """An open dataset: structured record map plus manifest."""

    path: Path
    n_examples: int
    example_len: int
    n_classes: int
    records: np.memmap
    manifest: Optional[dict]

    @property
    def labels(self) -> np.ndarray:
        return self.records["label"]

    @property
    def snrs(self) -> np.ndarray:
        return self.records["snr_db"]

    @property
    def classes(self) -> Tuple[str, ...]:
        if self.manifest is not None:
            return tuple(self.manifest["classes"])
        return tuple(str(k) for k in range(self.n_classes))

    @property
    def config_hash(self) -> Optional[str]:
        if self.manifest is not None:
            return self.manifest.get("config_hash")
        return None

    def iq(self, indices: Union[slice, np.ndarray]) -> np.ndarray:
        """(n, 2, example_len) float32 I/Q for the given rows."""
        raw = np.ascontiguousarray(self.records["iq"][indices])
        n = raw.shape[0]
        return raw.reshape(n, self.example_len, 2).transpose(0, 2, 1)


def read_manifest(path: Union[str, Path]) -> Optional[dict]:
    side = Path(str(path) + ".json")
    if not side.exists():
        return None
    doc = json.loads(side.read_text())
    if doc.get("format") != "modrec-dataset":
        raise DataError(f"{side}: not a dataset manifest")
    return doc


def open_rscd(path: Union[str, Path]) -> RscdFile:
    path = Path(path)
    size = path.stat().st_size
    if size < _HEADER.size + 4:
        raise DataError(f"{path}: too small to be a dataset")
    with open(path, "rb") as f:
        magic, version, n, length, n_classes = _HEADER.unpack(
            f.read(_HEADER.size))
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        rec = _record_dtype(length)
        expected = _HEADER.size + n * rec.itemsize + 4
        if size != expected:
            raise DataError(f"{path}: size {size} != expected {expected}")
        f.seek(size - 4)
        (sentinel,) = struct.unpack("<I", f.read(4))
        if sentinel != END_SENTINEL:
            raise DataError(f"{path}: missing end sentinel")
    records = np.memmap(path, dtype=rec, mode="r", offset=_HEADER.size,
                        shape=(n,))
    if n and int(records["label"].max()) >= n_classes:
        raise DataError(f"{path}: label exceeds declared class count")
    manifest = read_manifest(path)
    if manifest is not None:
        if (manifest["n_examples"] != n or manifest["example_len"] != length
                or len(manifest["classes"]) != n_classes):
            raise DataError(f"{path}: manifest disagrees with header")
    return RscdFile(path=path, n_examples=n, example_len=length,
                    n_classes=n_classes, records=records, manifest=manifest)


def load_arrays(path: Union[str, Path], normalize: bool = True
                ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, RscdFile]:
    """Materialize the whole dataset: (x (n,2,len) f32, labels i64, snrs f32).

    With normalize=True each example is scaled to unit mean power, so the
    network input scale does not encode the noise level.
    """
    ds = open_rscd(path)
    x = ds.iq(slice(None))
    if normalize:
        p = np.mean(np.square(x), axis=(1, 2), keepdims=True) * 2.0
        bad = p[:, 0, 0] <= 0.0
        if np.any(bad):
            raise DataError(f"{path}: zero-power example "
                            f"{int(np.argmax(bad))}")
        x = x / np.sqrt(p, dtype=np.float32)
    labels = ds.labels.astype(np.int64)
    snrs = ds.snrs.astype(np.float32)
    return x, labels, snrs, ds


def split_indices(labels: np.ndarray, snrs: np.ndarray,
                  fractions: Sequence[float] = (0.7, 0.1, 0.2),
                  seed: int = 0) -> Tuple[np.ndarray, ...]:
    """Deterministic stratified split over (label, snr) cells.

    Every cell is shuffled once and divided by largest-remainder quotas, so
    each part sees every class at every noise level a cell can cover.
    Returns one sorted index array per fraction.
    """
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.ndim != 1 or fr.size < 2 or np.any(fr <= 0.0) \
            or abs(fr.sum() - 1.0) > 1e-9:
        raise ConfigError(f"fractions must be positive and sum to 1: "
                          f"{list(fractions)}")
    labels = np.asarray(labels)
    snrs = np.asarray(snrs)
    if labels.shape != snrs.shape or labels.ndim != 1:
        raise ConfigError("labels and snrs must be aligned 1-d arrays")
    rng = np.random.default_rng(seed)
    parts: list = [[] for _ in fr]
    # cells in deterministic order
    cells: Dict[tuple, np.ndarray] = {}
    for key in sorted({(int(l), float(s)) for l, s in zip(labels, snrs)}):
        mask = (labels == key[0]) & (snrs == key[1])
        cells[key] = np.flatnonzero(mask)
    for key, idx in cells.items():
        idx = idx.copy()
        rng.shuffle(idx)
        quota = fr * idx.size
        base = np.floor(quota).astype(np.int64)
        for which in np.argsort(-(quota - base), kind="stable")[
                : idx.size - int(base.sum())]:
            base[which] += 1
        start = 0
        for part, count in zip(parts, base):
            part.extend(idx[start:start + count])
            start += count
    out = tuple(np.sort(np.asarray(p, dtype=np.int64)) for p in parts)
    if any(o.size == 0 for o in out):
        raise ConfigError("a split part came out empty; "
                          "use larger data or fewer parts")
    return out
