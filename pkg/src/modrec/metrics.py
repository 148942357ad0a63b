"""Evaluation artifacts: accuracy-vs-SNR curves and confusion matrices.

Both have a fixed CSV schema. Curves: header "snr_db,n,accuracy", one row
per SNR bin, ascending. Confusion matrices: first row ",<class0>,<class1>,
...", then one row per true class with integer counts. Provenance (config
hashes etc.) never goes inside the CSV; the harness writes it to an
adjacent .meta.json.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SnrBin:
    snr_db: float
    n: int
    accuracy: float


@dataclass(frozen=True)
class SnrCurve:
    bins: Tuple[SnrBin, ...]

    def accuracy_at(self, snr_db: float) -> float:
        for b in self.bins:
            if b.snr_db == snr_db:
                return b.accuracy
        raise DataError(f"no bin at {snr_db} dB")

    def overall_accuracy(self) -> float:
        total = sum(b.n for b in self.bins)
        hits = sum(b.n * b.accuracy for b in self.bins)
        return hits / total if total else 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["snr_db", "n", "accuracy"])
        for b in self.bins:
            w.writerow([f"{b.snr_db:g}", b.n, f"{b.accuracy:.6f}"])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SnrCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["snr_db", "n", "accuracy"]:
            raise DataError("bad curve CSV header")
        bins = tuple(SnrBin(float(r[0]), int(r[1]), float(r[2]))
                     for r in rows[1:] if r)
        return cls(bins)


def _as_int_array(x, name: str) -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != 1:
        raise DataError(f"{name} must be 1-D")
    return a.astype(np.int64)


def accuracy_by_snr(predictions: Sequence[int],
                    truths: Sequence[int],
                    snrs: Sequence[float],
                    bin_width: float = 2.0) -> SnrCurve:
    """Per-SNR-bin accuracy; bins are bin_width-spaced, centered on multiples.

    snr values are assigned to the nearest multiple of bin_width, so grid
    SNRs land in their own bins unchanged.
    """
    pred = _as_int_array(predictions, "predictions")
    true = _as_int_array(truths, "truths")
    s = np.asarray(snrs, dtype=np.float64)
    if not (pred.shape == true.shape == s.shape):
        raise DataError("predictions, truths, snrs must be aligned")
    if pred.size == 0:
        raise DataError("empty evaluation")
    if bin_width <= 0:
        raise DataError("bin_width must be positive")
    centers = np.round(s / bin_width) * bin_width
    bins = []
    for c in np.unique(centers):
        mask = centers == c
        n = int(mask.sum())
        acc = float(np.mean(pred[mask] == true[mask]))
        bins.append(SnrBin(float(c), n, acc))
    return SnrCurve(tuple(bins))


@dataclass(frozen=True)
class ConfusionMatrix:
    class_names: Tuple[str, ...]
    counts: np.ndarray  # (k, k) int64, counts[true, predicted]

    def __post_init__(self) -> None:
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise DataError(f"counts shape {self.counts.shape} vs {k} classes")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        t = self.total
        return float(np.trace(self.counts)) / t if t else 0.0

    def normalized(self) -> np.ndarray:
        """Rows scaled to sum 1 (empty rows stay zero)."""
        c = self.counts.astype(np.float64)
        sums = c.sum(axis=1, keepdims=True)
        return np.divide(c, sums, out=np.zeros_like(c), where=sums > 0)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([""] + list(self.class_names))
        for name, row in zip(self.class_names, self.counts):
            w.writerow([name] + [int(v) for v in row])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][0] != "":
            raise DataError("bad confusion CSV header")
        names = tuple(rows[0][1:])
        body = [r for r in rows[1:] if r]
        if len(body) != len(names):
            raise DataError("confusion CSV is not square")
        counts = np.zeros((len(names), len(names)), dtype=np.int64)
        for i, r in enumerate(body):
            if r[0] != names[i]:
                raise DataError(f"row label {r[0]!r} != column {names[i]!r}")
            counts[i] = [int(v) for v in r[1:]]
        return cls(names, counts)


def confusion_matrix(predictions: Sequence[int],
                     truths: Sequence[int],
                     class_names: Sequence[str],
                     snrs: Optional[Sequence[float]] = None,
                     snr_min: Optional[float] = None) -> ConfusionMatrix:
    """Counts[true, predicted]; snr_min keeps only examples at or above it."""
    pred = _as_int_array(predictions, "predictions")
    true = _as_int_array(truths, "truths")
    if pred.shape != true.shape:
        raise DataError("predictions and truths must be aligned")
    k = len(class_names)
    if snr_min is not None:
        if snrs is None:
            raise DataError("snr_min requires snrs")
        s = np.asarray(snrs, dtype=np.float64)
        if s.shape != pred.shape:
            raise DataError("snrs misaligned with predictions")
        keep = s >= snr_min
        pred, true = pred[keep], true[keep]
    if pred.size and (true.max() >= k or pred.max() >= k
                      or true.min() < 0 or pred.min() < 0):
        raise DataError("class index outside class_names")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(tuple(class_names), counts)


def write_csv(path: Union[str, Path], content: str) -> None:
    Path(path).write_text(content)


def read_curve(path: Union[str, Path]) -> SnrCurve:
    return SnrCurve.from_csv(Path(path).read_text())


def read_confusion(path: Union[str, Path]) -> ConfusionMatrix:
    return ConfusionMatrix.from_csv(Path(path).read_text())
