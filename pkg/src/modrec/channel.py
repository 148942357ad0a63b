"""Channel impairments: timing/clock error, multipath fading, LO offset, AWGN.

The canonical application order is fixed: symbol-clock resampling first (it
models the transmit/receive rate mismatch), then the multipath channel, then
receiver LO rotation, then a centered crop to the output length, unit-power
normalization, and finally additive noise at the requested SNR. Parameter
draws always consume the same number of generator variates regardless of
which stages are enabled, so datasets differing in one profile knob share
all other per-example randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, InsufficientLengthError
from .sigcore import IqExample, normalize_power

_TWO_PI = 2.0 * np.pi

# Fractional-delay interpolator: 16-tap windowed sinc. At integer delays the
# sinc zeros make it an exact delta, so integer shifts are lossless.
_INTERP_HALF = 8
_KAISER_BETA = 8.0

DEFAULT_SNR_GRID = tuple(float(s) for s in range(-20, 31, 2))


def _interp_weights(frac_offsets: np.ndarray) -> np.ndarray:
    """Rows of interpolation weights for tap offsets -7..8 minus frac."""
    offs = np.arange(-_INTERP_HALF + 1, _INTERP_HALF + 1, dtype=np.float64)
    arg = offs[None, :] - np.asarray(frac_offsets, dtype=np.float64)[:, None]
    x = arg / _INTERP_HALF
    w = np.zeros_like(arg)
    inside = np.abs(x) <= 1.0
    w[inside] = np.i0(_KAISER_BETA * np.sqrt(1.0 - x[inside] ** 2))
    w /= np.i0(_KAISER_BETA)
    return np.sinc(arg) * w


@dataclass(frozen=True)
class ChannelParams:
    """One per-example draw of every impairment variable.

    alpha is the pulse-shaping roll-off used for that example (stored here
    because it is drawn with the channel variables and echoed to disk).
    taps is the multipath response as ((delay_samples, complex_gain), ...)
    with total power 1; None means no fading was applied.
    """

    alpha: float
    delta_t: float
    delta_fs: float
    theta_c: float
    delta_fc: float
    tau: float
    snr_db: float
    taps: Optional[Tuple[Tuple[float, complex], ...]] = None

    def __post_init__(self) -> None:
        eps = 1e-5
        if not (0.1 - eps <= self.alpha <= 0.4 + eps):
            raise ConfigError(f"alpha out of range: {self.alpha}")
        if not (0.0 <= self.delta_t <= 16.0 + eps):
            raise ConfigError(f"delta_t out of range: {self.delta_t}")
        if not (-eps <= self.theta_c < _TWO_PI + eps):
            raise ConfigError(f"theta_c out of range: {self.theta_c}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0: {self.tau}")
        if abs(self.delta_fs) >= 0.5:
            raise ConfigError(f"implausible delta_fs: {self.delta_fs}")
        if self.taps is not None:
            p = sum(abs(g) ** 2 for _, g in self.taps)
            if abs(p - 1.0) > 1e-9:
                raise ConfigError(f"tap power {p} != 1")
            if any(d < 0 for d, _ in self.taps):
                raise ConfigError("negative tap delay")


@dataclass(frozen=True)
class ImpairmentProfile:
    """Dataset-level channel description; drawn per example by draw_params.

    sigma_clk scales both the symbol-clock and carrier offsets (cycles per
    sample, standard deviation of a centered normal). tau is the Rayleigh
    scale of the multipath delay spread in samples; tau == 0 disables
    fading. Stage enables zero the corresponding draw without changing the
    generator consumption pattern.
    """

    sigma_clk: float = 0.0
    tau: float = 0.0
    n_paths: int = 8
    snr_grid: Tuple[float, ...] = DEFAULT_SNR_GRID
    alpha_range: Tuple[float, float] = (0.1, 0.4)
    timing_range: Tuple[float, float] = (0.0, 16.0)
    enable_timing: bool = True
    enable_fading: bool = True
    enable_cfo: bool = True
    enable_awgn: bool = True

    def __post_init__(self) -> None:
        if self.sigma_clk < 0:
            raise ConfigError("sigma_clk must be >= 0")
        if self.tau < 0:
            raise ConfigError("tau must be >= 0")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if len(self.snr_grid) == 0:
            raise ConfigError("snr_grid must be non-empty")
        if list(self.snr_grid) != sorted(self.snr_grid):
            raise ConfigError("snr_grid must be ascending")
        lo, hi = self.alpha_range
        if not (0.1 - 1e-12 <= lo <= hi <= 0.4 + 1e-12):
            raise ConfigError("alpha_range must lie within [0.1, 0.4]")
        lo, hi = self.timing_range
        if not (0.0 <= lo <= hi <= 16.0):
            raise ConfigError("timing_range must lie within [0, 16]")

    def to_json(self) -> dict:
        return {
            "sigma_clk": self.sigma_clk,
            "tau": self.tau,
            "n_paths": self.n_paths,
            "snr_grid": list(self.snr_grid),
            "alpha_range": list(self.alpha_range),
            "timing_range": list(self.timing_range),
            "enable_timing": self.enable_timing,
            "enable_fading": self.enable_fading,
            "enable_cfo": self.enable_cfo,
            "enable_awgn": self.enable_awgn,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ImpairmentProfile":
        try:
            return cls(
                sigma_clk=float(d["sigma_clk"]),
                tau=float(d["tau"]),
                n_paths=int(d["n_paths"]),
                snr_grid=tuple(float(s) for s in d["snr_grid"]),
                alpha_range=tuple(float(a) for a in d["alpha_range"]),
                timing_range=tuple(float(t) for t in d["timing_range"]),
                enable_timing=bool(d["enable_timing"]),
                enable_fading=bool(d["enable_fading"]),
                enable_cfo=bool(d["enable_cfo"]),
                enable_awgn=bool(d["enable_awgn"]),
            )
        except KeyError as e:
            raise ConfigError(f"impairment profile missing key {e}") from e


def draw_fading_taps(tau: float,
                     n_paths: int,
                     rng: np.random.Generator
                     ) -> Tuple[Tuple[float, complex], ...]:
    """Random multipath response: Rayleigh-spread delays, decaying profile.

    Path 0 sits at delay 0; the remaining n_paths-1 delays are Rayleigh(tau)
    draws. Gains are circular complex normals with variance exp(-delay/tau),
    renormalized to total power exactly 1. Always consumes the same number
    of variates; tau == 0 returns the identity tap after consuming them.
    """
    if n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    extra = rng.rayleigh(scale=max(tau, 0.0), size=n_paths - 1)
    re = rng.standard_normal(n_paths)
    im = rng.standard_normal(n_paths)
    if tau == 0.0:
        return ((0.0, 1.0 + 0.0j),)
    delays = np.concatenate(([0.0], extra))
    profile = np.exp(-delays / tau)
    gains = (re + 1j * im) * np.sqrt(profile / 2.0)
    total = np.sum(np.abs(gains) ** 2)
    if total == 0.0:
        return ((0.0, 1.0 + 0.0j),)
    gains = gains / math.sqrt(total)
    return tuple((float(d), complex(g)) for d, g in zip(delays, gains))


def draw_params(profile: ImpairmentProfile,
                rng: np.random.Generator,
                snr_db: Optional[float] = None) -> ChannelParams:
    """Draw one example's channel variables in the canonical order.

    Order: alpha, delta_t, delta_fs, theta_c, delta_fc, fading taps, SNR
    index. Disabled stages zero their value after the draw. snr_db
    overrides the grid draw (the grid index is still consumed).
    """
    alpha = rng.uniform(*profile.alpha_range)
    delta_t = rng.uniform(*profile.timing_range)
    # scale is applied after the unit draw, so consumption is identical for
    # every sigma_clk including 0
    delta_fs = float(rng.normal(0.0, 1.0)) * profile.sigma_clk
    theta_c = rng.uniform(0.0, _TWO_PI)
    delta_fc = float(rng.normal(0.0, 1.0)) * profile.sigma_clk
    taps = draw_fading_taps(profile.tau, profile.n_paths, rng)
    grid_pick = profile.snr_grid[int(rng.integers(0, len(profile.snr_grid)))]
    snr = float(snr_db) if snr_db is not None else float(grid_pick)

    if not profile.enable_timing:
        delta_t, delta_fs = 0.0, 0.0
    if not profile.enable_fading or profile.tau == 0.0:
        taps = ((0.0, 1.0 + 0.0j),)
    if not profile.enable_cfo:
        theta_c, delta_fc = 0.0, 0.0
    if not profile.enable_awgn:
        snr = math.inf
    return ChannelParams(alpha=alpha, delta_t=delta_t, delta_fs=delta_fs,
                         theta_c=theta_c, delta_fc=delta_fc,
                         tau=profile.tau if profile.enable_fading else 0.0,
                         snr_db=snr, taps=taps)


# ---------------------------------------------------------------------------
# Stage application


def apply_sro_timing(x: np.ndarray,
                     delta_fs: float,
                     delta_t: float,
                     n_out: Optional[int] = None) -> np.ndarray:
    """Resample x with a symbol-clock offset and fractional timing shift.

    Output sample n reads input position delta_t + n / (1 + delta_fs), so a
    tone at f0 lands at f0 / (1 + delta_fs) and delta_t delays the stream.
    Interpolation is 16-tap windowed-sinc; integer positions reproduce input
    samples exactly. n_out defaults to the largest count whose read
    positions stay inside the input.
    """
    x = np.asarray(x)
    if abs(delta_fs) >= 0.5:
        raise ConfigError(f"implausible delta_fs: {delta_fs}")
    if delta_t < 0:
        raise ConfigError("delta_t must be >= 0")
    step = 1.0 / (1.0 + delta_fs)
    limit = x.size - 1
    max_n = int(math.floor((limit - delta_t) / step)) + 1
    if n_out is None:
        n_out = max_n
    if n_out < 1 or n_out > max_n:
        raise InsufficientLengthError(
            f"resampler needs {n_out} outputs but only {max_n} positions fit")
    pos = delta_t + step * np.arange(n_out)
    base = np.floor(pos).astype(np.int64)
    frac = pos - base
    exact = frac == 0.0
    out = np.empty(n_out, dtype=np.complex128)
    if np.any(exact):
        out[exact] = x[base[exact]]
    rest = ~exact
    if np.any(rest):
        w = _interp_weights(frac[rest])
        pad = np.concatenate([np.zeros(_INTERP_HALF, dtype=x.dtype), x,
                              np.zeros(_INTERP_HALF, dtype=x.dtype)])
        idx = (base[rest][:, None] + _INTERP_HALF
               + np.arange(-_INTERP_HALF + 1, _INTERP_HALF + 1)[None, :])
        out[rest] = np.sum(pad[idx] * w, axis=1)
    return out


def fading_kernel(taps: Tuple[Tuple[float, complex], ...]) -> Tuple[np.ndarray, int]:
    """Composite FIR for a multipath response.

    Returns (kernel, origin) with kernel[origin + k] the coefficient at
    integer lag k; fractional delays are spread over the 16-tap
    interpolator, integer delays stay exact deltas.
    """
    if not taps:
        raise ConfigError("empty tap list")
    delays = np.array([d for d, _ in taps], dtype=np.float64)
    gains = np.array([g for _, g in taps], dtype=np.complex128)
    base = np.floor(delays).astype(np.int64)
    frac = delays - base
    k_lo = int(base.min()) - (_INTERP_HALF - 1)
    k_hi = int(base.max()) + _INTERP_HALF
    kernel = np.zeros(k_hi - k_lo + 1, dtype=np.complex128)
    offs = np.arange(-_INTERP_HALF + 1, _INTERP_HALF + 1)
    for b, f, g in zip(base, frac, gains):
        if f == 0.0:
            kernel[b - k_lo] += g
        else:
            kernel[b + offs - k_lo] += g * _interp_weights([f])[0]
    return kernel, -k_lo


def apply_fading(x: np.ndarray,
                 taps: Tuple[Tuple[float, complex], ...]) -> np.ndarray:
    """Convolve with the multipath response; output aligned to input length.

    The single identity tap ((0, 1),) returns the input bit-exactly.
    """
    x = np.asarray(x, dtype=np.complex128)
    if len(taps) == 1 and taps[0][0] == 0.0 and taps[0][1] == 1.0 + 0.0j:
        return x.copy()
    kernel, origin = fading_kernel(taps)
    full = np.convolve(x, kernel)
    out = np.zeros(x.size, dtype=np.complex128)
    n0 = max(0, -origin)
    n1 = min(x.size, full.size - origin)
    if n1 > n0:
        out[n0:n1] = full[n0 + origin: n1 + origin]
    return out


def apply_cfo_phase(x: np.ndarray,
                    delta_fc: float,
                    theta_c: float) -> np.ndarray:
    """Carrier frequency offset (cycles/sample) and phase rotation."""
    x = np.asarray(x)
    n = np.arange(x.size)
    return x * np.exp(1j * (_TWO_PI * delta_fc * n + theta_c))


def apply_awgn(x: np.ndarray,
               snr_db: float,
               rng: np.random.Generator) -> np.ndarray:
    """Complex white Gaussian noise at snr_db below unit signal power.

    The caller is expected to have normalized x; noise power is
    10^(-snr/10) split evenly across I and Q. snr_db = inf is a no-op.
    """
    x = np.asarray(x, dtype=np.complex128)
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy()
    var = 10.0 ** (-snr_db / 10.0)
    scale = math.sqrt(var / 2.0)
    noise = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    return x + scale * noise


def guard_length(out_len: int,
                 taps: Tuple[Tuple[float, complex], ...]) -> int:
    """Clean samples needed upstream of impair() for an out_len crop."""
    span = max(d for d, _ in taps) if taps else 0.0
    return out_len + 256 + int(math.ceil(16.0 + span))


def impair(clean: np.ndarray,
           params: ChannelParams,
           rng: np.random.Generator,
           out_len: int,
           label: int = 0,
           example_index: int = 0) -> IqExample:
    """Run the full impairment chain and emit a finished example.

    Stages in order: clock resampling, multipath, LO rotation, centered crop
    to out_len, unit-power normalization, AWGN. Raises
    InsufficientLengthError when the clean waveform is too short to survive
    the crop.
    """
    x = np.asarray(clean, dtype=np.complex128)
    x = apply_sro_timing(x, params.delta_fs, params.delta_t)
    taps = params.taps if params.taps is not None else ((0.0, 1.0 + 0.0j),)
    x = apply_fading(x, taps)
    x = apply_cfo_phase(x, params.delta_fc, params.theta_c)
    if x.size < out_len:
        raise InsufficientLengthError(
            f"{x.size} samples left after impairments, need {out_len}")
    start = (x.size - out_len) // 2
    x = x[start: start + out_len]
    x = normalize_power(x)
    x = apply_awgn(x, params.snr_db, rng)
    return IqExample(samples=x, label=label, snr_db=params.snr_db,
                     params=params, example_index=example_index)
