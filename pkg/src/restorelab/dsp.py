"""Signal-processing primitives shared by the rest of the package.

Conventions: mono float64 audio, spectrograms shaped ``(frames, bins)``,
mel filterbanks shaped ``(bins, mels)`` so that ``mel = mag @ weights``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import signal

from . import _accel

FILTER_FAMILIES = ("butterworth", "chebyshev1", "bessel", "elliptic")

# passband ripple / stopband attenuation (dB) for the ripple families
CHEBY_RIPPLE_DB = 0.05
ELLIP_RIPPLE_DB = 0.05
ELLIP_STOP_DB = 60.0

MAX_POLE_RADIUS = 1.0 - 1e-6

RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_STOPBAND_DB = 80.0


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio samples must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def replace(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True)
class ComplexSpectrogram:
    bins: np.ndarray
    window_size: int
    hop: int
    sample_rate: int

    def __post_init__(self):
        b = np.asarray(self.bins)
        if b.ndim != 2 or b.shape[0] < 1:
            raise ValueError("spectrogram must be a non-empty (frames, bins) grid")
        if b.shape[1] != self.window_size // 2 + 1:
            raise ValueError(
                f"expected {self.window_size // 2 + 1} bins for window {self.window_size}, "
                f"got {b.shape[1]}")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.bins)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.bins)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray
    sample_rate: int
    n_fft: int
    f_min: float = 0.0
    f_max: float | None = None
    norm: str | None = None

    @property
    def n_bins(self) -> int:
        return self.weights.shape[0]

    @property
    def n_mels(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class IirFilter:
    family: str
    order: int
    cutoff_hz: float
    sample_rate: int
    sos: np.ndarray = field(repr=False)

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(sec[3:]) for sec in self.sos])

    def response(self, freqs_hz) -> np.ndarray:
        _, h = signal.sosfreqz(self.sos, worN=np.asarray(freqs_hz, dtype=float),
                               fs=self.sample_rate)
        return h


def as_audio(x, sample_rate: int | None = None) -> AudioBuffer:
    if isinstance(x, AudioBuffer):
        return x
    if sample_rate is None:
        raise TypeError("a sample rate is required for raw arrays")
    return AudioBuffer(x, sample_rate)


# ---------------------------------------------------------------------------
# STFT


def hann(n: int) -> np.ndarray:
    return signal.get_window("hann", n, fftbins=True)


def _check_frame_params(window_size: int, hop: int):
    if hop <= 0:
        raise ValueError("hop must be positive")
    if window_size < hop:
        raise ValueError(f"window_size ({window_size}) must be >= hop ({hop})")


def stft(audio: AudioBuffer, window_size: int = 2048, hop: int = 441) -> ComplexSpectrogram:
    _check_frame_params(window_size, hop)
    x = audio.samples
    if x.size == 0:
        raise ValueError("cannot take the STFT of empty audio")
    pad = window_size // 2
    mode = "reflect" if x.size > 1 else "constant"
    padded = np.pad(x, pad, mode=mode)
    n_frames = x.size // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(padded, window_size)[::hop][:n_frames]
    bins = np.fft.rfft(frames * hann(window_size), axis=-1)
    return ComplexSpectrogram(bins, window_size, hop, audio.sample_rate)


def window_sum_square(window_size: int, hop: int, n_frames: int) -> np.ndarray:
    w2 = hann(window_size) ** 2
    total = np.zeros(window_size + hop * (n_frames - 1))
    for t in range(n_frames):
        total[t * hop:t * hop + window_size] += w2
    return total


def istft(spec: ComplexSpectrogram, out_len: int) -> AudioBuffer:
    n, hop = spec.window_size, spec.hop
    _check_frame_params(n, hop)
    n_frames = spec.bins.shape[0]
    pad = n // 2
    frames = np.fft.irfft(spec.bins, n=n, axis=-1) * hann(n)
    total = n + hop * (n_frames - 1)
    y = np.zeros(total)
    for t in range(n_frames):
        y[t * hop:t * hop + n] += frames[t]
    norm = window_sum_square(n, hop, n_frames)

    # the region that maps back onto the requested output samples; the
    # overlap condition must hold between the first and last frame centres
    lo, hi = pad, min(pad + out_len, total)
    floor_tol = 1e-8 * norm.max()
    span_hi = min(hi, pad + hop * (n_frames - 1) + 1)
    if span_hi > lo and norm[lo:span_hi].min() < floor_tol:
        raise ValueError(
            f"window {n} / hop {hop} does not satisfy the overlap-add condition; "
            "the inverse STFT cannot reconstruct the signal")
    out = np.zeros(out_len)
    if hi > lo:
        w = norm[lo:hi]
        seg = np.where(w >= floor_tol, y[lo:hi] / np.maximum(w, floor_tol), 0.0)
        out[:seg.size] = seg
    return AudioBuffer(out, spec.sample_rate)


def magnitude(audio: AudioBuffer, window_size: int = 2048, hop: int = 441) -> np.ndarray:
    return stft(audio, window_size, hop).magnitude


# ---------------------------------------------------------------------------
# mel


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_fft: int = 2048, n_mels: int = 128, sample_rate: int = 44100,
                   f_min: float = 0.0, f_max: float | None = None,
                   norm: str | None = None) -> MelFilterbank:
    """Triangular HTK-scale filterbank of shape ``(n_fft // 2 + 1, n_mels)``.

    ``norm="slaney"`` scales each triangle to unit area (in Hz); the default
    leaves peaks at 1.
    """
    nyquist = sample_rate / 2.0
    f_max = nyquist if f_max is None else float(f_max)
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    if not (0.0 <= f_min < f_max <= nyquist):
        raise ValueError(f"need 0 <= f_min < f_max <= {nyquist}, got {f_min}, {f_max}")
    if norm not in (None, "slaney"):
        raise ValueError(f"unknown mel normalisation {norm!r}")
    n_bins = n_fft // 2 + 1
    if n_mels > n_bins:
        raise ValueError(f"n_mels={n_mels} exceeds the {n_bins} available FFT bins")

    fft_freqs = np.linspace(0.0, nyquist, n_bins)
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    lower, centre, upper = edges[:-2], edges[1:-1], edges[2:]
    rising = (fft_freqs[:, None] - lower[None, :]) / (centre - lower)[None, :]
    falling = (upper[None, :] - fft_freqs[:, None]) / (upper - centre)[None, :]
    weights = np.maximum(0.0, np.minimum(rising, falling))
    if norm == "slaney":
        weights *= 2.0 / (upper - lower)[None, :]

    empty = np.flatnonzero(weights.max(axis=0) <= 0.0)
    if empty.size:
        raise ValueError(
            f"{empty.size} mel bands contain no FFT bin; use fewer mels or a larger n_fft")
    return MelFilterbank(weights, sample_rate, n_fft, f_min, f_max, norm)


def apply_mel(mag: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    if mag.shape[-1] != fb.n_bins:
        raise ValueError(f"magnitude has {mag.shape[-1]} bins, filterbank expects {fb.n_bins}")
    return mag @ fb.weights


def mel_spectrogram(audio: AudioBuffer, fb: MelFilterbank, window_size: int = 2048,
                    hop: int = 441) -> np.ndarray:
    return apply_mel(magnitude(audio, window_size, hop), fb)


# ---------------------------------------------------------------------------
# IIR lowpass design


def design_lowpass(family: str, cutoff_hz: float, order: int, sample_rate: int) -> IirFilter:
    """Digital lowpass as a biquad cascade, normalised to unit DC gain.

    Butterworth and Bessel (magnitude-normalised) are -3 dB at the cutoff;
    Chebyshev I and elliptic have their ripple band edge there.
    """
    nyquist = sample_rate / 2.0
    if not (0.0 < cutoff_hz < nyquist):
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist})")
    if order < 1:
        raise ValueError("order must be >= 1")
    wn = cutoff_hz / nyquist
    if family == "butterworth":
        sos = signal.butter(order, wn, btype="low", output="sos")
    elif family in ("chebyshev1", "chebyshev"):
        family = "chebyshev1"
        sos = signal.cheby1(order, CHEBY_RIPPLE_DB, wn, btype="low", output="sos")
    elif family == "bessel":
        sos = signal.bessel(order, wn, btype="low", norm="mag", output="sos")
    elif family in ("elliptic", "ellip"):
        family = "elliptic"
        sos = signal.ellip(order, ELLIP_RIPPLE_DB, ELLIP_STOP_DB, wn, btype="low", output="sos")
    else:
        raise ValueError(f"unknown filter family {family!r}")

    sos = np.array(sos, dtype=np.float64)
    dc = np.prod(sos[:, :3].sum(axis=1) / sos[:, 3:].sum(axis=1))
    sos[0, :3] /= dc
    filt = IirFilter(family, int(order), float(cutoff_hz), int(sample_rate), sos)
    radius = np.abs(filt.poles()).max()
    if not radius < MAX_POLE_RADIUS:
        raise ValueError(
            f"{family} order {order} at {cutoff_hz} Hz is numerically unstable "
            f"(pole radius {radius:.9f})")
    return filt


def apply_filter(audio: AudioBuffer, filt: IirFilter) -> AudioBuffer:
    if audio.sample_rate != filt.sample_rate:
        raise ValueError(
            f"filter designed for {filt.sample_rate} Hz applied to {audio.sample_rate} Hz audio")
    return audio.replace(_accel.sos_filter(filt.sos, audio.samples))


# ---------------------------------------------------------------------------
# resampling


@lru_cache(maxsize=64)
def _resample_prototype(up: int, down: int) -> np.ndarray:
    factor = max(up, down)
    half = RESAMPLE_TAPS_PER_PHASE // 2
    n_taps = 2 * half * factor + 1
    beta = signal.kaiser_beta(RESAMPLE_STOPBAND_DB)
    # half the Kaiser transition width, as a fraction of the lower Nyquist;
    # the stopband edge lands exactly on the lower Nyquist
    half_width = factor * (RESAMPLE_STOPBAND_DB - 7.95) / (14.36 * (n_taps - 1))
    cutoff = (1.0 - half_width) / factor
    # unit DC gain; resample_poly applies the interpolation gain ``up`` itself
    return signal.firwin(n_taps, cutoff, window=("kaiser", beta))


def resample(audio: AudioBuffer, to_rate: int) -> AudioBuffer:
    to_rate = int(to_rate)
    if to_rate <= 0:
        raise ValueError("target rate must be positive")
    from_rate = audio.sample_rate
    if to_rate == from_rate:
        return audio
    ratio = Fraction(to_rate, from_rate)
    up, down = ratio.numerator, ratio.denominator
    n_out = int(round(len(audio) * to_rate / from_rate))
    y = signal.resample_poly(audio.samples, up, down, window=_resample_prototype(up, down))
    y = fit_length(y, n_out)
    return AudioBuffer(y, to_rate)


def fit_length(x: np.ndarray, n: int) -> np.ndarray:
    if x.shape[0] >= n:
        return x[:n]
    return np.concatenate([x, np.zeros(n - x.shape[0])])


# ---------------------------------------------------------------------------
# convolution


def convolve(audio: AudioBuffer, kernel: AudioBuffer) -> AudioBuffer:
    """Full linear convolution (length ``L + K - 1``) via FFT."""
    if audio.sample_rate != kernel.sample_rate:
        raise ValueError(
            f"sample rate mismatch: {audio.sample_rate} vs {kernel.sample_rate}")
    if len(audio) == 0 or len(kernel) == 0:
        return audio.replace(np.zeros(0))
    return audio.replace(signal.fftconvolve(audio.samples, kernel.samples, mode="full"))
