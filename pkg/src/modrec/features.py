"""Expert statistics: higher-order moments, cumulants, and envelope stats.

The 28-entry feature vector is, in order: ten moment magnitudes M(2,0),
M(2,1), M(4,0..3), M(6,0..3); nine cumulant magnitudes C(2,0), C(2,1),
C(4,0..2), C(6,0..3); then mean/std/kurtosis of the normalized centered
amplitude, of the centered unwrapped phase, and of the instantaneous
frequency. Moment and cumulant magnitudes are order-normalized, |v|^(2/k)
for an order-k statistic, so every entry scales like power.

M(p,q) = E[x^(p-q) conj(x)^q]. Cumulants come from the standard moment
expansions for complex zero-mean processes, e.g. C(4,0) = M(4,0) - 3
M(2,0)^2; all fourth- and sixth-order cumulants vanish on circular Gaussian
noise, which is what makes them useful against AWGN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from .errors import DataError, DegenerateExampleError, NumericError
from .sigcore import IqExample, normalize_power

FEATURE_NAMES: Tuple[str, ...] = (
    "M20", "M21", "M40", "M41", "M42", "M43",
    "M60", "M61", "M62", "M63",
    "C20", "C21", "C40", "C41", "C42",
    "C60", "C61", "C62", "C63",
    "amp_mu", "amp_sigma", "amp_kurt",
    "phase_mu", "phase_sigma", "phase_kurt",
    "freq_mu", "freq_sigma", "freq_kurt",
)

N_FEATURES = len(FEATURE_NAMES)

# order of each moment/cumulant entry, for |v|^(2/k) normalization
_MOMENT_ORDERS = (2, 2, 4, 4, 4, 4, 6, 6, 6, 6)
_CUMULANT_ORDERS = (2, 2, 4, 4, 4, 6, 6, 6, 6)

_DEGENERATE_SIGMA = 1e-9


def _vector(x: Union[np.ndarray, IqExample]) -> np.ndarray:
    s = x.samples if isinstance(x, IqExample) else np.asarray(x)
    if s.size == 0:
        raise DegenerateExampleError("empty waveform")
    return s.astype(np.complex128, copy=False)


def hom(x: Union[np.ndarray, IqExample], p: int, q: int) -> complex:
    """Higher-order moment M(p,q) = E[x^(p-q) conj(x)^q]."""
    if p not in (2, 4, 6):
        raise DataError(f"moment order p must be 2, 4 or 6, got {p}")
    if not (0 <= q <= p):
        raise DataError(f"conjugation count q must be in [0, {p}], got {q}")
    s = _vector(x)
    return complex(np.mean(s ** (p - q) * np.conj(s) ** q))


def cumulants(x: Union[np.ndarray, IqExample]) -> Dict[str, complex]:
    """All nine reported cumulants, keyed 'C20'..'C63'.

    Reference single-vector route; the batched extractor recomputes the
    same expansions from shared moment temporaries.
    """
    s = _vector(x)
    needed = [(2, 0), (2, 1), (2, 2), (4, 0), (4, 1), (4, 2), (4, 3),
              (6, 0), (6, 1), (6, 2), (6, 3)]
    m = {pq: complex(np.mean(s ** (pq[0] - pq[1]) * np.conj(s) ** pq[1]))
         for pq in needed}
    return _cumulant_expansions(*(m[pq] for pq in needed))


def cumulant(x: Union[np.ndarray, IqExample], p: int, q: int) -> complex:
    key = f"C{p}{q}"
    table = cumulants(x)
    if key not in table:
        raise DataError(f"cumulant C({p},{q}) is not part of the feature set")
    return table[key]


def _cumulant_expansions(m20, m21, m22, m40, m41, m42, m43,
                         m60, m61, m62, m63) -> Dict[str, complex]:
    c20 = m20
    c21 = m21
    c40 = m40 - 3.0 * m20 * m20
    c41 = m41 - 3.0 * m20 * m21
    c42 = m42 - m20 * m22 - 2.0 * m21 * m21
    c60 = m60 - 15.0 * m20 * m40 + 30.0 * m20 ** 3
    c61 = m61 - 5.0 * m21 * m40 - 10.0 * m20 * m41 + 30.0 * m20 ** 2 * m21
    c62 = (m62 - 6.0 * m20 * m42 - 8.0 * m21 * m41 - m22 * m40
           + 6.0 * m20 ** 2 * m22 + 24.0 * m21 ** 2 * m20)
    c63 = (m63 - 9.0 * m21 * m42 + 12.0 * m21 ** 3 - 3.0 * m20 * m43
           - 3.0 * m22 * m41 + 18.0 * m20 * m21 * m22)
    return {"C20": c20, "C21": c21, "C40": c40, "C41": c41, "C42": c42,
            "C60": c60, "C61": c61, "C62": c62, "C63": c63}


@dataclass(frozen=True)
class AnalogStats:
    """Envelope/phase/frequency statistics of one waveform.

    Amplitude is normalized by its mean and centered (so amp_mu is 0 by
    construction); phase is unwrapped and centered; instantaneous frequency
    is the unwrapped phase increment in cycles/sample. degenerate marks any
    series whose spread fell below the kurtosis threshold (its kurtosis is
    reported as 0).
    """

    amp_mu: float
    amp_sigma: float
    amp_kurt: float
    phase_mu: float
    phase_sigma: float
    phase_kurt: float
    freq_mu: float
    freq_sigma: float
    freq_kurt: float
    degenerate: bool = False

    def values(self) -> Tuple[float, ...]:
        return (self.amp_mu, self.amp_sigma, self.amp_kurt,
                self.phase_mu, self.phase_sigma, self.phase_kurt,
                self.freq_mu, self.freq_sigma, self.freq_kurt)


def _stat_triple(z: np.ndarray) -> Tuple[float, float, float, bool]:
    mu = float(np.mean(z))
    d = z - mu
    var = float(np.mean(d * d))
    sigma = math.sqrt(var)
    if sigma <= _DEGENERATE_SIGMA * max(1.0, abs(mu)):
        return mu, sigma, 0.0, True
    kurt = float(np.mean(d ** 4)) / var ** 2
    return mu, sigma, kurt, False


def analog_stats(x: Union[np.ndarray, IqExample]) -> AnalogStats:
    s = _vector(x)
    amp = np.abs(s)
    mean_amp = float(np.mean(amp))
    if mean_amp == 0.0:
        raise DegenerateExampleError("zero-amplitude waveform")
    a = amp / mean_amp - 1.0
    phase = np.unwrap(np.angle(s))
    ph = phase - phase.mean()
    freq = np.diff(phase) / (2.0 * np.pi)

    am, asig, ak, d1 = _stat_triple(a)
    pm, psig, pk, d2 = _stat_triple(ph)
    fm, fsig, fk, d3 = _stat_triple(freq)
    return AnalogStats(am, asig, ak, pm, psig, pk, fm, fsig, fk,
                       degenerate=d1 or d2 or d3)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # float64, shape (28,)
    names: Tuple[str, ...] = FEATURE_NAMES


def featurize(x: Union[np.ndarray, IqExample]) -> FeatureVector:
    """28-entry feature vector of one waveform (normalized internally)."""
    s = normalize_power(_vector(x))
    row = featurize_batch(s[None, :])[0]
    return FeatureVector(values=row)


def _order_normalize(mag: np.ndarray, order: int) -> np.ndarray:
    return mag ** (2.0 / order)


def featurize_batch(batch: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Feature matrix (n, 28) float64 for a stack of waveforms (n, l).

    Rows are power-normalized individually. Processes in chunks to bound
    temporary memory. Raises on zero-power rows and non-finite outputs.
    """
    batch = np.asarray(batch)
    if batch.ndim != 2:
        raise DataError(f"expected (n, l) batch, got shape {batch.shape}")
    n = batch.shape[0]
    out = np.empty((n, N_FEATURES), dtype=np.float64)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        out[lo:hi] = _featurize_chunk(batch[lo:hi].astype(np.complex128,
                                                          copy=False))
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))
        raise NumericError(f"non-finite feature at (row, col) {tuple(bad[0])}")
    return out


def _featurize_chunk(x: np.ndarray) -> np.ndarray:
    p = np.mean(np.abs(x) ** 2, axis=1)
    if not np.all(np.isfinite(p)):
        raise NumericError(
            f"non-finite sample in row {int(np.argmin(np.isfinite(p)))}")
    if np.any(p == 0.0):
        raise DegenerateExampleError(
            f"zero-power row {int(np.argmin(p))} cannot be featurized")
    x = x / np.sqrt(p)[:, None]

    ax2 = (x.real ** 2 + x.imag ** 2)
    x2 = x * x
    x4 = x2 * x2
    ax4 = ax2 * ax2

    m20 = x2.mean(axis=1)
    m21 = ax2.mean(axis=1).astype(np.complex128)
    m22 = np.conj(m20)
    m40 = x4.mean(axis=1)
    m41 = (x2 * ax2).mean(axis=1)
    m42 = ax4.mean(axis=1).astype(np.complex128)
    m43 = np.conj(m41)
    m60 = (x4 * x2).mean(axis=1)
    m61 = (x4 * ax2).mean(axis=1)
    m62 = (x2 * ax4).mean(axis=1)
    m63 = (ax2 * ax4).mean(axis=1).astype(np.complex128)

    c = _cumulant_expansions(m20, m21, m22, m40, m41, m42, m43,
                             m60, m61, m62, m63)
    moments = (m20, m21, m40, m41, m42, m43, m60, m61, m62, m63)
    cums = (c["C20"], c["C21"], c["C40"], c["C41"], c["C42"],
            c["C60"], c["C61"], c["C62"], c["C63"])

    nrows = x.shape[0]
    out = np.empty((nrows, N_FEATURES), dtype=np.float64)
    for j, (v, k) in enumerate(zip(moments, _MOMENT_ORDERS)):
        out[:, j] = _order_normalize(np.abs(v), k)
    for j, (v, k) in enumerate(zip(cums, _CUMULANT_ORDERS)):
        out[:, 10 + j] = _order_normalize(np.abs(v), k)

    amp = np.sqrt(ax2)
    mean_amp = amp.mean(axis=1)
    if np.any(mean_amp == 0.0):
        raise DegenerateExampleError("zero-amplitude row")
    a = amp / mean_amp[:, None] - 1.0
    phase = np.unwrap(np.angle(x), axis=1)
    ph = phase - phase.mean(axis=1)[:, None]
    freq = np.diff(phase, axis=1) / (2.0 * np.pi)
    for j, z in enumerate((a, ph, freq)):
        mu = z.mean(axis=1)
        d = z - mu[:, None]
        var = (d * d).mean(axis=1)
        sigma = np.sqrt(var)
        live = sigma > _DEGENERATE_SIGMA * np.maximum(1.0, np.abs(mu))
        kurt = np.zeros(nrows)
        if np.any(live):
            kurt[live] = (d[live] ** 4).mean(axis=1) / var[live] ** 2
        out[:, 19 + 3 * j] = mu
        out[:, 20 + 3 * j] = sigma
        out[:, 21 + 3 * j] = kurt
    return out
