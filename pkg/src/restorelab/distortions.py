"""Atomic speech distortions: clipping, reverberation, band limiting, noise, gain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .dsp import AudioBuffer

# intermediate rates of the band-limiting distortion are snapped to this grid so
# that the rational resampling factor against 44.1 kHz stays small
RATE_GRID_HZ = 10
# highest cutoff a lowpass is actually designed at, as a fraction of Nyquist
MAX_DESIGN_FRACTION = 0.99


@dataclass(frozen=True)
class ClipSpec:
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"clipping threshold must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class LowpassSpec:
    family: str
    cutoff_hz: float
    order: int


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float


def clip(x: AudioBuffer, eta: float) -> AudioBuffer:
    eta = ClipSpec(eta).eta
    return x.replace(np.clip(x.samples, -eta, eta))


def reverberate(x: AudioBuffer, rir: AudioBuffer, trim: bool = True) -> AudioBuffer:
    """Convolve with a room impulse response.

    With ``trim`` (the default) the output keeps the input length so the
    result stays aligned with the clean target; otherwise the full tail of
    ``len(x) + len(rir) - 1`` samples is returned.
    """
    y = dsp.convolve(x, rir)
    if trim:
        return y.replace(y.samples[:len(x)])
    return y


def intermediate_rate(cutoff_hz: float, sample_rate: int) -> int:
    rate = int(round(2.0 * cutoff_hz / RATE_GRID_HZ)) * RATE_GRID_HZ
    return int(min(max(rate, RATE_GRID_HZ), sample_rate))


def lowpass_resample(x: AudioBuffer, spec: LowpassSpec) -> AudioBuffer:
    """Lowpass at the cutoff, drop to twice the cutoff rate and come back.

    Output length always equals the input length.
    """
    nyquist = x.sample_rate / 2.0
    if not 0.0 < spec.cutoff_hz <= nyquist:
        raise ValueError(f"cutoff {spec.cutoff_hz} Hz outside (0, {nyquist}]")
    design_cutoff = min(spec.cutoff_hz, MAX_DESIGN_FRACTION * nyquist)
    filt = dsp.design_lowpass(spec.family, design_cutoff, spec.order, x.sample_rate)
    y = dsp.apply_filter(x, filt)
    low = intermediate_rate(spec.cutoff_hz, x.sample_rate)
    y = dsp.resample(dsp.resample(y, low), x.sample_rate)
    return y.replace(dsp.fit_length(y.samples, len(x)))


def noise_segment(noise: AudioBuffer, length: int, offset: int) -> np.ndarray:
    """``length`` samples of noise starting at ``offset``, wrapping around if short."""
    n = noise.samples
    if n.size == 0:
        raise ValueError("noise buffer is empty")
    idx = (int(offset) + np.arange(length)) % n.size
    return n[idx]


def add_noise(x: AudioBuffer, n, snr_db: float) -> AudioBuffer:
    """Mix noise at ``snr_db``, measuring level as mean absolute amplitude.

    The noise is first scaled to the mean absolute value of ``x`` and then
    attenuated by ``10 ** (snr_db / 20)``.  This is an amplitude-ratio SNR,
    not a power SNR.
    """
    if isinstance(n, AudioBuffer):
        if n.sample_rate != x.sample_rate:
            raise ValueError(f"sample rate mismatch: {x.sample_rate} vs {n.sample_rate}")
        n = n.samples
    n = np.asarray(n, dtype=np.float64)
    if n.size < len(x):
        n = np.resize(n, len(x)) if n.size else n
    n = n[:len(x)]
    level = np.mean(np.abs(n)) if n.size else 0.0
    if not level > 0.0:
        raise ValueError("noise buffer is silent; cannot normalise its level")
    n = n * (np.mean(np.abs(x.samples)) / level)
    return x.replace(x.samples + n / 10.0 ** (snr_db / 20.0))


def scale(x: AudioBuffer, q: float) -> AudioBuffer:
    if not np.isfinite(q):
        raise ValueError("gain must be finite")
    return x.replace(x.samples * q)
