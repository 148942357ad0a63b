"""Clean waveform synthesis for the 24 modulation classes.

All modulators return complex128 vectors at nominal sample rate 1.0 whose
long-run mean power converges to 1, so the channel stage can apply SNR
bookkeeping uniformly. Digital schemes are root-raised-cosine shaped (except
GMSK); analog schemes modulate a band-limited Gaussian message. Everything
takes an explicit numpy Generator; nothing reads global random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, InsufficientLengthError

# Class lists, in canonical label order. The "normal" list is the easier
# 11-class subset; the "difficult" list is the full 24-class set.
NORMAL_CLASSES = (
    "OOK", "4ASK", "BPSK", "QPSK", "8PSK", "16QAM",
    "AM-SSB-SC", "AM-DSB-SC", "FM", "GMSK", "OQPSK",
)
DIFFICULT_CLASSES = (
    "OOK", "4ASK", "8ASK", "BPSK", "QPSK", "8PSK", "16PSK", "32PSK",
    "16APSK", "32APSK", "64APSK", "128APSK",
    "16QAM", "32QAM", "64QAM", "128QAM", "256QAM",
    "AM-SSB-WC", "AM-SSB-SC", "AM-DSB-WC", "AM-DSB-SC",
    "FM", "GMSK", "OQPSK",
)

CLASS_SETS = {"normal-11": NORMAL_CLASSES, "difficult-24": DIFFICULT_CLASSES}

_LINEAR = {
    "OOK", "4ASK", "8ASK", "BPSK", "QPSK", "8PSK", "16PSK", "32PSK",
    "16APSK", "32APSK", "64APSK", "128APSK",
    "16QAM", "32QAM", "64QAM", "128QAM", "256QAM",
}
_ANALOG = {"AM-SSB-WC", "AM-SSB-SC", "AM-DSB-WC", "AM-DSB-SC", "FM"}


@dataclass(frozen=True)
class ModulationScheme:
    """A class name plus the synthesis family it dispatches to."""

    name: str
    kind: str  # "linear" | "offset" | "cpm" | "analog"


def scheme_for(name: str) -> ModulationScheme:
    if name in _LINEAR:
        return ModulationScheme(name, "linear")
    if name == "OQPSK":
        return ModulationScheme(name, "offset")
    if name == "GMSK":
        return ModulationScheme(name, "cpm")
    if name in _ANALOG:
        return ModulationScheme(name, "analog")
    raise ConfigError(f"unknown modulation scheme {name!r}")


# ---------------------------------------------------------------------------
# Constellations


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power symbol alphabet; points[k] is symbol index k."""

    name: str
    points: np.ndarray
    bits_per_symbol: int

    @property
    def order(self) -> int:
        return len(self.points)


def _gray_decode(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def _normalized(name: str, pts: np.ndarray) -> Constellation:
    pts = np.asarray(pts, dtype=np.complex128)
    p = np.mean(np.abs(pts) ** 2)
    pts = pts / math.sqrt(p)
    bits = int(round(math.log2(len(pts))))
    if 2 ** bits != len(pts):
        raise ConfigError(f"{name}: order {len(pts)} is not a power of two")
    return Constellation(name, pts, bits)


def _psk(name: str, m: int, offset: float) -> Constellation:
    k = np.arange(m)
    return _normalized(name, np.exp(1j * (2 * np.pi * k / m + offset)))


def _ask(name: str, m: int) -> Constellation:
    # Unipolar amplitude levels 1..m; the zero level appears only in OOK.
    return _normalized(name, np.arange(1, m + 1).astype(np.complex128))


def _square_qam(name: str, m: int) -> Constellation:
    side = int(round(math.sqrt(m)))
    bits_axis = int(round(math.log2(side)))
    levels = 2 * np.arange(side) - (side - 1)
    pts = np.empty(m, dtype=np.complex128)
    for sym in range(m):
        gi = sym >> bits_axis
        gq = sym & (side - 1)
        pts[sym] = levels[_gray_decode(gi)] + 1j * levels[_gray_decode(gq)]
    return _normalized(name, pts)


def _cross_qam(name: str, m: int, side: int, corner: int) -> Constellation:
    # side x side odd-integer grid with a corner x corner block cut from each
    # corner; yields the usual 32/128 cross shapes.
    levels = 2 * np.arange(side) - (side - 1)
    cut = side - corner
    pts = []
    for re in levels:
        for im in levels:
            if abs(re) > levels[cut - 1] and abs(im) > levels[cut - 1]:
                continue
            pts.append(complex(re, im))
    if len(pts) != m:
        raise ConfigError(f"{name}: cross grid produced {len(pts)} points")
    return _normalized(name, np.array(pts))


# Ring layouts: (points per ring, radius relative to the inner ring). The 16
# and 32 point layouts use the common satellite broadcast geometry; 64 and
# 128 follow the same recipe with four rings.
_APSK_RINGS = {
    16: ((4, 12), (1.0, 2.57)),
    32: ((4, 12, 16), (1.0, 2.53, 4.30)),
    64: ((8, 16, 20, 20), (1.0, 2.2, 3.6, 5.2)),
    128: ((8, 24, 40, 56), (1.0, 2.4, 3.8, 5.4)),
}


def _apsk(name: str, m: int) -> Constellation:
    counts, radii = _APSK_RINGS[m]
    pts = []
    for c, r in zip(counts, radii):
        k = np.arange(c)
        pts.append(r * np.exp(1j * (2 * np.pi * k / c + np.pi / c)))
    return _normalized(name, np.concatenate(pts))


def constellation_for(scheme: Union[str, ModulationScheme]) -> Constellation:
    """Alphabet for a linear digital scheme; ConfigError for the rest."""
    name = scheme.name if isinstance(scheme, ModulationScheme) else scheme
    if name == "OOK":
        return Constellation("OOK", np.array([0.0, math.sqrt(2.0)],
                                             dtype=np.complex128), 1)
    if name == "BPSK":
        return _psk(name, 2, 0.0)
    if name == "QPSK":
        return _psk(name, 4, np.pi / 4)
    if name in ("8PSK", "16PSK", "32PSK"):
        return _psk(name, int(name[:-3]), 0.0)
    if name in ("4ASK", "8ASK"):
        return _ask(name, int(name[0]))
    if name in ("16QAM", "64QAM", "256QAM"):
        return _square_qam(name, int(name[:-3]))
    if name == "32QAM":
        return _cross_qam(name, 32, side=6, corner=1)
    if name == "128QAM":
        return _cross_qam(name, 128, side=12, corner=2)
    if name.endswith("APSK"):
        m = int(name[:-4])
        if m in _APSK_RINGS:
            return _apsk(name, m)
    raise ConfigError(f"no constellation defined for {name!r}")


# ---------------------------------------------------------------------------
# Pulse shaping


@dataclass(frozen=True)
class ShapingConfig:
    """Root-raised-cosine shaping parameters.

    alpha is the roll-off; alpha == 0 selects the sinc limit (used by tests
    as an intersymbol-interference-free reference), otherwise it must lie in
    the drawn support [0.1, 0.4].
    """

    alpha: float
    sps: int = 8
    span_symbols: int = 8

    def __post_init__(self) -> None:
        if not isinstance(self.sps, int) or self.sps < 2:
            raise ConfigError(f"sps must be an integer >= 2, got {self.sps}")
        if not isinstance(self.span_symbols, int) or self.span_symbols < 4:
            raise ConfigError(
                f"span_symbols must be an integer >= 4, got {self.span_symbols}")
        if (self.sps * self.span_symbols) % 2:
            raise ConfigError("sps * span_symbols must be even "
                              "(symmetric odd-length filter)")
        ok = self.alpha == 0.0 or 0.1 - 1e-12 <= self.alpha <= 0.4 + 1e-12
        if not ok:
            raise ConfigError(
                f"alpha must be 0 (sinc limit) or in [0.1, 0.4], got {self.alpha}")

    @property
    def n_taps(self) -> int:
        return self.span_symbols * self.sps + 1


def rrc_taps(cfg: ShapingConfig) -> np.ndarray:
    """Unit-energy root-raised-cosine filter, span_symbols*sps + 1 taps.

    The two removable singularities (t = 0 and |t| = T/(4 alpha)) use their
    closed-form limits; proximity is tested with a relative tolerance since
    the grid rarely hits them exactly.
    """
    a = cfg.alpha
    n = cfg.n_taps
    u = (np.arange(n) - n // 2) / cfg.sps  # time in symbol units
    if a == 0.0:
        h = np.sinc(u)
    else:
        h = np.empty(n, dtype=np.float64)
        at_zero = u == 0.0
        at_edge = np.abs(np.abs(4.0 * a * u) - 1.0) < 1e-8
        body = ~(at_zero | at_edge)
        ub = u[body]
        h[at_zero] = 1.0 + a * (4.0 / np.pi - 1.0)
        h[at_edge] = (a / math.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * math.sin(np.pi / (4.0 * a))
            + (1.0 - 2.0 / np.pi) * math.cos(np.pi / (4.0 * a)))
        h[body] = (np.sin(np.pi * ub * (1.0 - a))
                   + 4.0 * a * ub * np.cos(np.pi * ub * (1.0 + a))) / (
            np.pi * ub * (1.0 - (4.0 * a * ub) ** 2))
    return h / math.sqrt(np.sum(h * h))


# ---------------------------------------------------------------------------
# Digital modulators


def _draw_symbols(rng: np.random.Generator, order: int, n: int) -> np.ndarray:
    return rng.integers(0, order, size=n)


def modulate_linear(scheme: Union[str, ModulationScheme],
                    n_symbols: int,
                    cfg: ShapingConfig,
                    rng: np.random.Generator,
                    symbols: Optional[Sequence[int]] = None) -> np.ndarray:
    """RRC-shaped linearly modulated burst.

    Returns the full convolution, n_symbols*sps + n_taps - 1 samples, scaled
    by sqrt(sps) so long-run power converges to the constellation's unit
    average power. `symbols` overrides the uniform draw (test hook).
    """
    if n_symbols < 1:
        raise InsufficientLengthError("need at least one symbol")
    const = constellation_for(scheme)
    if symbols is None:
        idx = _draw_symbols(rng, const.order, n_symbols)
    else:
        idx = np.asarray(symbols, dtype=np.int64)
        if idx.size != n_symbols or idx.min() < 0 or idx.max() >= const.order:
            raise ConfigError("symbol indices out of range for constellation")
    up = np.zeros(n_symbols * cfg.sps, dtype=np.complex128)
    up[:: cfg.sps] = const.points[idx]
    return np.convolve(up, rrc_taps(cfg)) * math.sqrt(cfg.sps)


def modulate_offset_qpsk(n_symbols: int,
                         cfg: ShapingConfig,
                         rng: np.random.Generator,
                         symbols_i: Optional[Sequence[int]] = None,
                         symbols_q: Optional[Sequence[int]] = None) -> np.ndarray:
    """QPSK with the quadrature arm delayed by half a symbol.

    The I and Q bit streams are shaped independently and the Q arm is shifted
    sps/2 samples, which bounds envelope excursions (phase never crosses the
    origin). Requires even sps. symbols_i / symbols_q are 0/1 sequences
    overriding the draws (test hook).
    """
    if cfg.sps % 2:
        raise ConfigError("OQPSK requires even sps")
    if n_symbols < 1:
        raise InsufficientLengthError("need at least one symbol")

    def bits(given: Optional[Sequence[int]]) -> np.ndarray:
        if given is None:
            return rng.integers(0, 2, size=n_symbols).astype(np.float64)
        b = np.asarray(given, dtype=np.float64)
        if b.size != n_symbols or not np.all((b == 0) | (b == 1)):
            raise ConfigError("OQPSK symbol streams must be 0/1")
        return b

    bi = bits(symbols_i)
    bq = bits(symbols_q)
    amp = 1.0 / math.sqrt(2.0)
    up_i = np.zeros(n_symbols * cfg.sps, dtype=np.float64)
    up_q = np.zeros_like(up_i)
    up_i[:: cfg.sps] = amp * (2.0 * bi - 1.0)
    up_q[:: cfg.sps] = amp * (2.0 * bq - 1.0)
    taps = rrc_taps(cfg)
    arm_i = np.convolve(up_i, taps)
    arm_q = np.convolve(up_q, taps)
    half = cfg.sps // 2
    out = np.zeros(arm_i.size + half, dtype=np.complex128)
    out[: arm_i.size] += arm_i
    out[half:] += 1j * arm_q
    return out * math.sqrt(cfg.sps)


def gaussian_phase_taps(bt: float, sps: int) -> np.ndarray:
    """Area-one Gaussian smoothing kernel for the GMSK frequency pulse."""
    if not (bt > 0):
        raise ConfigError(f"bt must be positive, got {bt}")
    sigma = math.sqrt(math.log(2.0)) / (2.0 * np.pi * bt) * sps
    half = max(int(math.ceil(4.0 * sigma)), sps)
    t = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def modulate_gmsk(n_symbols: int,
                  sps: int,
                  rng: np.random.Generator,
                  bt: float = 0.35,
                  bits: Optional[Sequence[int]] = None) -> np.ndarray:
    """Gaussian minimum-shift keying: constant-envelope, +-pi/2 per bit.

    The NRZ bit stream is smoothed by a Gaussian kernel (bandwidth-time
    product bt) and integrated into phase at pi/2 per symbol interval.
    bt=inf skips the smoothing, giving plain MSK. Length n_symbols*sps.
    """
    if n_symbols < 1:
        raise InsufficientLengthError("need at least one symbol")
    if sps < 2:
        raise ConfigError("sps must be >= 2")
    if bits is None:
        nrz = rng.integers(0, 2, size=n_symbols).astype(np.float64) * 2.0 - 1.0
    else:
        nrz = np.asarray(bits, dtype=np.float64)
        if nrz.size != n_symbols or not np.all(np.abs(nrz) == 1.0):
            raise ConfigError("GMSK bits must be +-1")
    c = np.repeat(nrz, sps)
    if math.isinf(bt):
        freq = c
    else:
        freq = np.convolve(c, gaussian_phase_taps(bt, sps), mode="same")
    phase = (np.pi / 2.0) * np.cumsum(freq) / sps
    return np.exp(1j * phase)


# ---------------------------------------------------------------------------
# Analog modulators


@dataclass(frozen=True)
class AnalogSourceConfig:
    """Band-limited Gaussian message source and analog scheme constants.

    cutoff is the message lowpass corner in cycles/sample (0.05 = a tenth of
    Nyquist). carrier_power_ratio is carrier power over message-component
    power for the with-carrier schemes. fm_deviation is peak-normalized
    frequency deviation in cycles/sample per unit message amplitude.
    """

    cutoff: float = 0.05
    fir_taps: int = 129
    carrier_power_ratio: float = 0.5
    fm_deviation: float = 0.15

    def __post_init__(self) -> None:
        if not (0.0 < self.cutoff < 0.5):
            raise ConfigError(f"cutoff must be in (0, 0.5), got {self.cutoff}")
        if self.fir_taps < 3 or self.fir_taps % 2 == 0:
            raise ConfigError("fir_taps must be odd and >= 3")
        if self.carrier_power_ratio < 0:
            raise ConfigError("carrier_power_ratio must be >= 0")
        if not (0.0 < self.fm_deviation < 0.5):
            raise ConfigError("fm_deviation must be in (0, 0.5)")


def lowpass_taps(cutoff: float, n_taps: int) -> np.ndarray:
    """Hamming-windowed sinc lowpass, unit DC gain."""
    m = np.arange(n_taps) - (n_taps - 1) / 2.0
    h = 2.0 * cutoff * np.sinc(2.0 * cutoff * m) * np.hamming(n_taps)
    return h / h.sum()


def analog_message(n_samples: int,
                   cfg: AnalogSourceConfig,
                   rng: np.random.Generator) -> np.ndarray:
    """Zero-mean unit-variance Gaussian message band-limited to cfg.cutoff."""
    if n_samples < 2:
        raise InsufficientLengthError("message needs at least 2 samples")
    white = rng.standard_normal(n_samples + cfg.fir_taps - 1)
    m = np.convolve(white, lowpass_taps(cfg.cutoff, cfg.fir_taps), mode="valid")
    return (m - m.mean()) / m.std()


def analytic_signal(m: np.ndarray) -> np.ndarray:
    """One-sided spectrum (positive frequencies doubled) of a real vector."""
    m = np.asarray(m, dtype=np.float64)
    n = m.size
    spec = np.fft.fft(m)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[1: n // 2] = 2.0
        gain[n // 2] = 1.0
    else:
        gain[1: (n + 1) // 2] = 2.0
    return np.fft.ifft(spec * gain)


def modulate_analog(scheme: Union[str, ModulationScheme],
                    n_samples: int,
                    cfg: AnalogSourceConfig,
                    rng: np.random.Generator,
                    message: Optional[np.ndarray] = None) -> np.ndarray:
    """Analog modulation of a band-limited Gaussian message.

    DSB keeps both sidebands (real waveform); SSB keeps the upper sideband
    via the analytic signal; the WC variants add a residual carrier at
    cfg.carrier_power_ratio of the message-component power. FM integrates
    the message into phase at cfg.fm_deviation cycles/sample. Outputs are
    scaled to unit expected power. `message` overrides the source (test
    hook; real-valued, any power).
    """
    name = scheme.name if isinstance(scheme, ModulationScheme) else scheme
    if name not in _ANALOG:
        raise ConfigError(f"{name!r} is not an analog scheme")
    if message is None:
        m = analog_message(n_samples, cfg, rng)
    else:
        m = np.asarray(message, dtype=np.float64)
        if m.size != n_samples:
            raise ConfigError("message length must equal n_samples")
    p_m = float(np.mean(m * m))

    if name == "FM":
        phase = 2.0 * np.pi * cfg.fm_deviation * np.cumsum(m)
        return np.exp(1j * phase)
    if name == "AM-DSB-SC":
        return m.astype(np.complex128)
    if name == "AM-DSB-WC":
        carrier = math.sqrt(cfg.carrier_power_ratio * p_m)
        y = carrier + m
        total = p_m * (1.0 + cfg.carrier_power_ratio)
        return (y / math.sqrt(total) if total > 0 else y).astype(np.complex128)
    analytic = analytic_signal(m)  # component power 2 * p_m
    if name == "AM-SSB-SC":
        return analytic / math.sqrt(2.0 * p_m) if p_m > 0 else analytic
    carrier = math.sqrt(cfg.carrier_power_ratio * 2.0 * p_m)
    y = carrier + analytic
    total = 2.0 * p_m * (1.0 + cfg.carrier_power_ratio)
    return y / math.sqrt(total) if total > 0 else y
