"""Oracle two-stage restoration.

The analysis stage is an ideal ratio mask computed from the clean target.
The synthesis stage inverts the mel projection with non-negative least
squares and recovers a waveform with Griffin-Lim.  Together they give a
reproducible upper-bound baseline for mask-based restoration.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import dsp
from .dsp import AudioBuffer, ComplexSpectrogram, MelFilterbank

EPS = 1e-8
MASK_CEILING = 10.0
NNLS_ITERATIONS = 200
GL_ITERATIONS = 32
PEAK_GUARD = 4.0
_TINY = 1e-30


@dataclass(frozen=True)
class RestoreConfig:
    ceiling: float = MASK_CEILING
    eps: float = EPS
    nnls_iterations: int = NNLS_ITERATIONS
    gl_iterations: int = GL_ITERATIONS
    init_phase: str = "zero"
    seed: int = 0
    window_size: int = 2048
    hop: int = 441
    n_mels: int = 128

    def __post_init__(self):
        if not self.ceiling > 0:
            raise ValueError("mask ceiling must be positive")
        if self.gl_iterations < 0 or self.nnls_iterations < 0:
            raise ValueError("iteration counts must be >= 0")
        if self.init_phase not in ("zero", "random"):
            raise ValueError(f"unknown init phase {self.init_phase!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_same(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def oracle_mask(x_mag, s_mag, ceiling: float = MASK_CEILING, eps: float = EPS) -> np.ndarray:
    """Ideal ratio mask ``clip(S / max(X, eps), 0, ceiling)``."""
    x_mag, s_mag = _check_same(x_mag, s_mag)
    if not ceiling > 0:
        raise ValueError("mask ceiling must be positive")
    return np.clip(s_mag / np.maximum(x_mag, eps), 0.0, ceiling)


def oracle_mel_mask(x_mel, s_mel, ceiling: float = MASK_CEILING, eps: float = EPS) -> np.ndarray:
    return oracle_mask(x_mel, s_mel, ceiling, eps)


def oracle_stft_mask(x_mag, s_mag, ceiling: float = MASK_CEILING, eps: float = EPS) -> np.ndarray:
    return oracle_mask(x_mag, s_mag, ceiling, eps)


def apply_mel_mask(x_mel, mask) -> np.ndarray:
    x_mel, mask = _check_same(x_mel, mask)
    return x_mel * mask


def mel_to_linear(mel, fb: MelFilterbank, iterations: int = NNLS_ITERATIONS) -> np.ndarray:
    """Non-negative ``X`` with ``X @ W ~= mel``, by multiplicative updates.

    Every frame is solved jointly (one matrix product per update), which keeps
    the reduction order fixed.  The start point spreads each band's energy back
    over its bins in proportion to the filter weights.
    """
    mel = np.asarray(mel, dtype=np.float64)
    if mel.ndim != 2 or mel.shape[1] != fb.n_mels:
        raise ValueError(f"mel grid has shape {mel.shape}, filterbank has {fb.n_mels} bands")
    if np.any(mel < 0):
        raise ValueError("mel magnitudes must be non-negative")
    w = fb.weights
    wt = np.ascontiguousarray(w.T)
    numer = mel @ wt
    x = mel @ (w / np.maximum(w.sum(axis=0), _TINY)).T
    for _ in range(iterations):
        x *= numer / np.maximum((x @ w) @ wt, _TINY)
    return x


def _spectrogram(mag, phase, window_size, hop, sample_rate):
    return ComplexSpectrogram(mag * np.exp(1j * phase), window_size, hop, sample_rate)


def griffin_lim(mag, iterations: int = GL_ITERATIONS, init_phase: str = "zero", seed: int = 0,
                window_size: int = 2048, hop: int = 441, sample_rate: int = 44100,
                length: int | None = None, history: list | None = None) -> AudioBuffer:
    """Recover a waveform whose STFT magnitude approximates ``mag``.

    If ``history`` is a list, the spectral convergence of each iterate's STFT
    magnitude against ``mag`` is appended to it.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != window_size // 2 + 1:
        raise ValueError(f"magnitude grid {mag.shape} does not match window {window_size}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if length is None:
        length = (mag.shape[0] - 1) * hop
    if init_phase == "zero":
        phase = np.zeros_like(mag)
    elif init_phase == "random":
        phase = np.random.default_rng(seed).uniform(-np.pi, np.pi, mag.shape)
    else:
        raise ValueError(f"unknown init phase {init_phase!r}")
    ref_norm = np.linalg.norm(mag)

    y = dsp.istft(_spectrogram(mag, phase, window_size, hop, sample_rate), length)
    for _ in range(iterations):
        spec = dsp.stft(y, window_size, hop).bins
        if spec.shape != mag.shape:
            raise ValueError("signal length is inconsistent with the magnitude grid")
        if history is not None:
            history.append(float(np.linalg.norm(np.abs(spec) - mag) / max(ref_norm, _TINY)))
        phase = np.angle(spec)
        y = dsp.istft(_spectrogram(mag, phase, window_size, hop, sample_rate), length)
    return y


def restore_oracle(degraded: AudioBuffer, target: AudioBuffer,
                   cfg: RestoreConfig = RestoreConfig()) -> AudioBuffer:
    """Mask the degraded mel spectrogram with the oracle mask and resynthesise."""
    if len(degraded) == 0 or len(target) == 0:
        raise ValueError("cannot restore zero-length audio")
    if degraded.sample_rate != target.sample_rate:
        raise ValueError("degraded and target sample rates differ")
    if len(degraded) != len(target):
        raise ValueError(f"length mismatch: {len(degraded)} vs {len(target)}")
    sr = target.sample_rate
    fb = dsp.mel_filterbank(cfg.window_size, cfg.n_mels, sr)
    x_mel = dsp.mel_spectrogram(degraded, fb, cfg.window_size, cfg.hop)
    s_mel = dsp.mel_spectrogram(target, fb, cfg.window_size, cfg.hop)
    est_mel = apply_mel_mask(x_mel, oracle_mel_mask(x_mel, s_mel, cfg.ceiling, cfg.eps))
    mag = mel_to_linear(est_mel, fb, cfg.nnls_iterations)
    y = griffin_lim(mag, cfg.gl_iterations, cfg.init_phase, cfg.seed, cfg.window_size,
                    cfg.hop, sr, len(target))
    out = y.samples
    bound = PEAK_GUARD * np.max(np.abs(target.samples))
    peak = np.max(np.abs(out))
    if peak > bound:
        out = out * (bound / peak)
    return AudioBuffer(out, sr)
