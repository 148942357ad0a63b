"""Core sample types, power accounting, and per-example random streams.

Everything downstream works on complex-baseband vectors at a nominal sample
rate of 1.0, so every frequency in the package is in cycles/sample. Power is
mean squared magnitude. Random state is counter-based (Philox) keyed by
(master_seed, stream_index) so example i of a dataset is reproducible in
isolation, from any worker, without generating examples 0..i-1 first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from .errors import DegenerateExampleError

if TYPE_CHECKING:
    from .channel import ChannelParams

_U64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    """Named, replayable source of randomness.

    Two streams with the same (master_seed, stream_index) produce identical
    draw sequences; distinct indices give statistically independent streams.
    Datasets key stream_index by example index.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.master_seed & _U64_MASK, self.stream_index & _U64_MASK],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class IqExample:
    """One labeled complex-baseband record.

    samples : complex ndarray, shape (l,)
    label   : class index into the dataset's class list
    snr_db  : the SNR the example was synthesized at (inf for clean)
    params  : channel draw that produced it, if any
    """

    samples: np.ndarray
    label: int = 0
    snr_db: float = math.inf
    params: Optional["ChannelParams"] = None
    example_index: int = 0

    def __len__(self) -> int:
        return len(self.samples)


def power(x: Union[np.ndarray, IqExample]) -> float:
    """Mean squared magnitude of a waveform or example."""
    s = x.samples if isinstance(x, IqExample) else np.asarray(x)
    if s.size == 0:
        raise DegenerateExampleError("empty waveform has no power")
    return float(np.mean(np.abs(s) ** 2))


def normalize_power(x: np.ndarray) -> np.ndarray:
    """Scale a waveform to exactly unit mean power.

    Raises DegenerateExampleError for empty or all-zero input. Idempotent up
    to floating-point roundoff.
    """
    x = np.asarray(x)
    p = power(x)
    if p == 0.0:
        raise DegenerateExampleError("all-zero waveform cannot be normalized")
    return x / math.sqrt(p)


def normalize(example: IqExample) -> IqExample:
    """normalize_power applied to an example, other fields preserved."""
    return replace(example, samples=normalize_power(example.samples))


def measure_snr(clean: Union[np.ndarray, IqExample],
                noisy: Union[np.ndarray, IqExample]) -> float:
    """Empirical SNR in dB of `noisy` against the reference `clean`.

    Defined as 10*log10(P_clean / P_residual) with residual = noisy - clean.
    Returns +inf when the residual is identically zero.
    """
    c = clean.samples if isinstance(clean, IqExample) else np.asarray(clean)
    n = noisy.samples if isinstance(noisy, IqExample) else np.asarray(noisy)
    if c.shape != n.shape:
        raise DegenerateExampleError(
            f"shape mismatch {c.shape} vs {n.shape} in measure_snr")
    p_sig = power(c)
    p_res = float(np.mean(np.abs(n - c) ** 2))
    if p_res == 0.0:
        return math.inf
    return 10.0 * math.log10(p_sig / p_res)
