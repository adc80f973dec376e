"""Vocoder training criteria as plain numpy kernels (no gradients).

Every norm is mean-reduced over its entries so values do not depend on the
grid size.  ``frequency_loss`` and ``time_loss`` combine the components over
several resolutions with the weights in :class:`LossWeights`.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import dsp
from .dsp import AudioBuffer

log = logging.getLogger(__name__)

EPS = 1e-8
SC_CAP = 100.0
MEL_WINDOW = 2048
MEL_HOP = 441
N_MELS = 128


@dataclass(frozen=True)
class LossWeights:
    lambda_mel: float = 50.0
    lambda_sc: float = 5.0
    lambda_mag: float = 5.0
    lambda_seg: float = 200.0
    lambda_energy: float = 100.0
    lambda_phase: float = 100.0
    lambda_D: float = 4.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "LossWeights":
        return cls(**d)


@dataclass(frozen=True)
class MultiResConfig:
    freq_windows: tuple[tuple[int, int], ...] = tuple((w, w // 4) for w in
                                                      (64, 128, 256, 512, 1024, 2048, 4096))
    time_windows: tuple[int, ...] = (1, 240, 480, 960)

    def __post_init__(self):
        object.__setattr__(self, "freq_windows",
                           tuple((int(w), int(h)) for w, h in self.freq_windows))
        object.__setattr__(self, "time_windows", tuple(int(w) for w in self.time_windows))
        for w, h in self.freq_windows:
            if not 0 < h <= w:
                raise ValueError(f"bad STFT resolution ({w}, {h})")
        if any(w < 1 for w in self.time_windows):
            raise ValueError("time window counts must be >= 1")

    def to_dict(self) -> dict:
        return {"freq_windows": [list(p) for p in self.freq_windows],
                "time_windows": list(self.time_windows)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MultiResConfig":
        return cls(**d)


def _pair(est, ref):
    if isinstance(est, AudioBuffer):
        est = est.samples
    if isinstance(ref, AudioBuffer):
        ref = ref.samples
    est = np.asarray(est, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape[0]} vs {ref.shape[0]}")
    return est, ref


def _mags(est, ref, window: int, hop: int, sample_rate: int):
    return (dsp.magnitude(AudioBuffer(est, sample_rate), window, hop),
            dsp.magnitude(AudioBuffer(ref, sample_rate), window, hop))


def window_mean(x, w: int) -> np.ndarray:
    """Means of ``w`` contiguous, near-equal windows (the first ``len % w`` get one extra)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if not 1 <= w <= x.size:
        raise ValueError(f"cannot split {x.size} samples into {w} windows")
    base, extra = divmod(x.size, w)
    sizes = np.full(w, base)
    sizes[:extra] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    sums = np.add.reduceat(x, bounds[:-1])
    return sums / sizes


def mel_loss(est, ref, sample_rate: int = 44100, fb: dsp.MelFilterbank | None = None) -> float:
    est, ref = _pair(est, ref)
    if fb is None:
        fb = _default_filterbank(sample_rate)
    e_mag, r_mag = _mags(est, ref, fb.n_fft, MEL_HOP, sample_rate)
    diff = dsp.apply_mel(e_mag, fb) - dsp.apply_mel(r_mag, fb)
    return float(np.sqrt(np.mean(diff ** 2)))


_FB_CACHE: dict = {}


def _default_filterbank(sample_rate: int) -> dsp.MelFilterbank:
    if sample_rate not in _FB_CACHE:
        _FB_CACHE[sample_rate] = dsp.mel_filterbank(MEL_WINDOW, N_MELS, sample_rate)
    return _FB_CACHE[sample_rate]


def spectral_convergence(est, ref, window: int = 1024, hop: int | None = None,
                         sample_rate: int = 44100, conventional: bool = False) -> float:
    """``|| |S_est| - |S_ref| ||_F`` over ``|| |S_est| ||_F`` (or ``|S_ref|`` if conventional)."""
    est, ref = _pair(est, ref)
    e_mag, r_mag = _mags(est, ref, window, hop or window // 4, sample_rate)
    num = np.linalg.norm(e_mag - r_mag)
    den = np.linalg.norm(r_mag if conventional else e_mag)
    if den == 0.0:
        if num == 0.0:
            return 0.0
        log.warning("spectral convergence denominator is zero; returning cap %g", SC_CAP)
        return SC_CAP
    return float(num / den)


def magnitude_loss(est, ref, window: int = 1024, hop: int | None = None,
                   sample_rate: int = 44100, eps: float = EPS) -> float:
    est, ref = _pair(est, ref)
    e_mag, r_mag = _mags(est, ref, window, hop or window // 4, sample_rate)
    return float(np.mean(np.abs(np.log(np.maximum(e_mag, eps)) - np.log(np.maximum(r_mag, eps)))))


def segment_loss(est, ref, w: int) -> float:
    est, ref = _pair(est, ref)
    return float(np.mean(np.abs(window_mean(est, w) - window_mean(ref, w))))


def energy_loss(est, ref, w: int) -> float:
    est, ref = _pair(est, ref)
    return float(np.mean(np.abs(window_mean(est ** 2, w) - window_mean(ref ** 2, w))))


def phase_loss(est, ref, w: int) -> float:
    """L1 distance of first differences of windowed energy; 0 when ``w == 1``."""
    est, ref = _pair(est, ref)
    d = np.diff(window_mean(est ** 2, w)) - np.diff(window_mean(ref ** 2, w))
    return float(np.mean(np.abs(d))) if d.size else 0.0


def frequency_terms(est, ref, cfg: MultiResConfig = MultiResConfig(),
                    sample_rate: int = 44100, conventional_sc: bool = False) -> dict:
    terms = {"mel": mel_loss(est, ref, sample_rate), "sc": [], "mag": []}
    for window, hop in cfg.freq_windows:
        terms["sc"].append(spectral_convergence(est, ref, window, hop, sample_rate,
                                                conventional_sc))
        terms["mag"].append(magnitude_loss(est, ref, window, hop, sample_rate))
    return terms


def time_terms(est, ref, cfg: MultiResConfig = MultiResConfig()) -> dict:
    return {"seg": [segment_loss(est, ref, w) for w in cfg.time_windows],
            "energy": [energy_loss(est, ref, w) for w in cfg.time_windows],
            "phase": [phase_loss(est, ref, w) for w in cfg.time_windows]}


def frequency_loss(est, ref, cfg: MultiResConfig = MultiResConfig(),
                   weights: LossWeights = LossWeights(), sample_rate: int = 44100,
                   conventional_sc: bool = False) -> float:
    if not cfg.freq_windows:
        raise ValueError("no STFT resolutions configured")
    t = frequency_terms(est, ref, cfg, sample_rate, conventional_sc)
    return combine_frequency(t, weights)


def time_loss(est, ref, cfg: MultiResConfig = MultiResConfig(),
              weights: LossWeights = LossWeights()) -> float:
    if not cfg.time_windows:
        raise ValueError("no time resolutions configured")
    return combine_time(time_terms(est, ref, cfg), weights)


def combine_frequency(terms: dict, weights: LossWeights) -> float:
    total = weights.lambda_mel * terms["mel"]
    for sc, mag in zip(terms["sc"], terms["mag"]):
        total += weights.lambda_sc * sc + weights.lambda_mag * mag
    return float(total)


def combine_time(terms: dict, weights: LossWeights) -> float:
    total = 0.0
    for seg, energy, phase in zip(terms["seg"], terms["energy"], terms["phase"]):
        total += (weights.lambda_seg * seg + weights.lambda_energy * energy
                  + weights.lambda_phase * phase)
    return float(total)


def all_losses(est, ref, cfg: MultiResConfig = MultiResConfig(),
               weights: LossWeights = LossWeights(), sample_rate: int = 44100) -> dict:
    """Every component per resolution plus the weighted combinations."""
    f = frequency_terms(est, ref, cfg, sample_rate)
    t = time_terms(est, ref, cfg)
    return {"components": {**f, **t},
            "frequency_loss": combine_frequency(f, weights),
            "time_loss": combine_time(t, weights),
            "weights": weights.to_dict(), "resolutions": cfg.to_dict()}
