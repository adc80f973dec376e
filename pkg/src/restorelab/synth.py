"""Deterministic speech-like test signals.

Voiced segments are harmonic series with a drifting pitch, shaped by a few
formant resonances; unvoiced segments are bursts of highpassed noise.  They
are no substitute for real speech, but they have the broadband, time-varying
structure the distortion and restoration code needs to be exercised on.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .dsp import AudioBuffer

SAMPLE_RATE = 44100
_FORMANTS = ((500.0, 1500.0, 2500.0), (700.0, 1100.0, 2450.0), (300.0, 2300.0, 3000.0),
             (450.0, 900.0, 2600.0))


def _voiced(rng, n, sr):
    f0 = rng.uniform(90.0, 240.0)
    t = np.arange(n) / sr
    pitch = f0 * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(1.0, 4.0) * t))
    phase = 2 * np.pi * np.cumsum(pitch) / sr
    x = np.zeros(n)
    for k in range(1, int(sr / 2 / (f0 * 1.1))):
        x += np.sin(k * phase) / k
    f1, f2, f3 = _FORMANTS[rng.integers(len(_FORMANTS))]
    y = np.zeros(n)
    for fc, gain in ((f1, 1.0), (f2, 0.6), (f3, 0.3)):
        b, a = signal.iirpeak(fc, Q=5.0, fs=sr)
        y += gain * signal.lfilter(b, a, x)
    return y + 0.02 * x


def _unvoiced(rng, n, sr):
    sos = signal.butter(4, rng.uniform(2500.0, 5000.0), "highpass", fs=sr, output="sos")
    return 0.3 * signal.sosfilt(sos, rng.standard_normal(n))


def utterance(seed: int, seconds: float = 2.0, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """One utterance of syllable-like segments, peak normalised to 0.5."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    out = np.zeros(n)
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.08, 0.3) * sample_rate)
        seg = min(seg, n - pos)
        kind = rng.random()
        if kind < 0.65:
            piece = _voiced(rng, seg, sample_rate)
        elif kind < 0.9:
            piece = _unvoiced(rng, seg, sample_rate)
        else:
            piece = 1e-3 * rng.standard_normal(seg)
        env = np.hanning(seg) if seg > 2 else np.ones(seg)
        out[pos:pos + seg] += piece * env
        pos += seg
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= 0.5 / peak
    return AudioBuffer(out, sample_rate)


def corpus(n: int, seed: int = 0, seconds: float = 2.0,
           sample_rate: int = SAMPLE_RATE) -> dict[str, AudioBuffer]:
    seeds = np.random.SeedSequence(seed).generate_state(n)
    return {f"utt{i:04d}": utterance(int(s), seconds, sample_rate) for i, s in enumerate(seeds)}


def noise(kind: str, seconds: float = 4.0, seed: int = 0,
          sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """``white``, ``pink`` or ``babble`` noise at unit RMS."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        spec = np.fft.rfft(rng.standard_normal(n))
        f = np.arange(spec.size, dtype=float)
        f[0] = 1.0
        x = np.fft.irfft(spec / np.sqrt(f), n)
    elif kind == "babble":
        x = sum(utterance(int(s), seconds, sample_rate).samples
                for s in rng.integers(0, 2 ** 31, 6))
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return AudioBuffer(x / np.sqrt(np.mean(x ** 2)), sample_rate)


def noise_pool(seed: int = 0, seconds: float = 4.0) -> dict[str, AudioBuffer]:
    return {k: noise(k, seconds, seed + i) for i, k in enumerate(("white", "pink", "babble"))}
