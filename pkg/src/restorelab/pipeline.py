"""Randomised composite degradation with replayable records, and test-set builders.

A degradation is planned first (every random draw happens there, producing a
:class:`DistortionRecord`) and then applied deterministically, so replaying a
record is the same code path as the original run.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import distortions as dist
from . import dsp
from .dsp import AudioBuffer

log = logging.getLogger(__name__)

SAMPLE_RATE = 44100
SR_TEST_RATES = (2000, 4000, 8000, 16000, 24000)
DECLIP_TEST_ETAS = (0.25, 0.1)
SR_FILTER_ORDER = 8
GSR_SEGMENT_SECONDS = 3.0


@dataclass(frozen=True)
class DistortionConfig:
    p1: float = 0.25            # reverberation
    p2: float = 0.25            # clipping
    p3: float = 0.5             # band limiting
    p4: float = 0.5             # band-limit the noise too (only when p3 fires)
    p5: float = 0.5             # additive noise
    eta_range: tuple[float, float] = (0.06, 0.9)
    cutoff_range: tuple[float, float] = (750.0, 22050.0)
    order_range: tuple[int, int] = (2, 10)
    snr_range: tuple[float, float] = (-5.0, 40.0)
    scale_range: tuple[float, float] = (0.3, 1.0)
    families: tuple[str, ...] = dsp.FILTER_FAMILIES

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "p4", "p5"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")
        for name in ("eta_range", "cutoff_range", "order_range", "snr_range", "scale_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} has low {lo} > high {hi}")
            object.__setattr__(self, name, (lo, hi))
        if not (0.0 <= self.eta_range[0] and self.eta_range[1] <= 1.0):
            raise ValueError("clipping thresholds must lie in [0, 1]")
        if self.order_range[0] < 1:
            raise ValueError("filter orders must be >= 1")
        object.__setattr__(self, "families", tuple(self.families))
        unknown = set(self.families) - set(dsp.FILTER_FAMILIES)
        if unknown or not self.families:
            raise ValueError(f"bad filter family list {self.families}")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DistortionConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown distortion config fields: {sorted(extra)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class DistortionRecord:
    seed: int
    steps: list[dict] = field(default_factory=list)
    scale: float = 1.0
    master_seed: int | None = None
    utterance: str | None = None

    @property
    def undistorted(self) -> bool:
        return not self.steps

    def step(self, op: str) -> dict | None:
        for s in self.steps:
            if s["op"] == op:
                return s
        return None

    def to_dict(self) -> dict:
        return {"utterance": self.utterance, "master_seed": self.master_seed,
                "seed": self.seed, "steps": [dict(s) for s in self.steps],
                "scale": self.scale, "undistorted": self.undistorted}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DistortionRecord":
        return cls(seed=d["seed"], steps=[dict(s) for s in d["steps"]], scale=d["scale"],
                   master_seed=d.get("master_seed"), utterance=d.get("utterance"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class Pair:
    id: str
    target: AudioBuffer
    degraded: AudioBuffer
    record: DistortionRecord | None = None
    meta: dict = field(default_factory=dict)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-utterance seed that depends only on the master seed and the index."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


def _as_pool(pool) -> dict[str, AudioBuffer]:
    if pool is None:
        return {}
    items = pool.items() if isinstance(pool, Mapping) else ((str(i), a) for i, a in enumerate(pool))
    # impulse responses carry their audio alongside the room description
    return {k: getattr(a, "audio", a) for k, a in items}


def plan(rng: np.random.Generator, cfg: DistortionConfig, n_samples: int,
         noise_pool=None, rir_pool=None) -> tuple[list[dict], float]:
    """Draw every random choice of one degradation, in a fixed order."""
    noise_pool, rir_pool = _as_pool(noise_pool), _as_pool(rir_pool)
    if cfg.p1 > 0 and not rir_pool:
        raise ValueError("reverberation has positive probability but the RIR pool is empty")
    if cfg.p5 > 0 and not noise_pool:
        raise ValueError("noise has positive probability but the noise pool is empty")
    rir_ids, noise_ids = sorted(rir_pool), sorted(noise_pool)
    steps = []
    if rng.random() < cfg.p1:
        steps.append({"op": "reverb", "rir": rir_ids[int(rng.integers(len(rir_ids)))]})
    if rng.random() < cfg.p2:
        steps.append({"op": "clip", "eta": float(rng.uniform(*cfg.eta_range))})
    if rng.random() < cfg.p3:
        family = cfg.families[int(rng.integers(len(cfg.families)))]
        cutoff = float(rng.uniform(*cfg.cutoff_range))
        order = int(rng.integers(cfg.order_range[0], cfg.order_range[1] + 1))
        steps.append({"op": "lowpass", "family": family, "cutoff_hz": cutoff,
                      "order": order, "noise_lowpass": bool(rng.random() < cfg.p4)})
    if rng.random() < cfg.p5:
        snr = float(rng.uniform(*cfg.snr_range))
        noise_id = noise_ids[int(rng.integers(len(noise_ids)))]
        n_len = len(noise_pool[noise_id])
        span = n_len - n_samples + 1 if n_len >= n_samples else n_len
        steps.append({"op": "noise", "noise": noise_id,
                      "offset": int(rng.integers(max(span, 1))), "snr_db": snr})
    q = float(rng.uniform(*cfg.scale_range))
    return steps, q


def apply_steps(s: AudioBuffer, steps, q: float, noise_pool=None, rir_pool=None):
    noise_pool, rir_pool = _as_pool(noise_pool), _as_pool(rir_pool)
    x = s
    noise_lowpass = None
    for step in steps:
        op = step["op"]
        if op == "reverb":
            rir = _lookup(rir_pool, step["rir"], "RIR")
            x = dist.reverberate(x, rir)
        elif op == "clip":
            x = dist.clip(x, step["eta"])
        elif op == "lowpass":
            spec = dist.LowpassSpec(step["family"], step["cutoff_hz"], step["order"])
            x = dist.lowpass_resample(x, spec)
            if step.get("noise_lowpass"):
                noise_lowpass = spec
        elif op == "noise":
            noise = _lookup(noise_pool, step["noise"], "noise")
            if noise.sample_rate != x.sample_rate:
                raise ValueError(f"noise {step['noise']!r} is at {noise.sample_rate} Hz")
            seg = AudioBuffer(dist.noise_segment(noise, len(x), step["offset"]), x.sample_rate)
            if noise_lowpass is not None:
                seg = dist.lowpass_resample(seg, noise_lowpass)
            x = dist.add_noise(x, seg, step["snr_db"])
        else:
            raise ValueError(f"unknown distortion step {op!r}")
    return dist.scale(s, q), dist.scale(x, q)


def _lookup(pool, key, kind):
    try:
        return pool[key]
    except KeyError:
        raise ValueError(f"record references unknown {kind} item {key!r}") from None


def degrade(s: AudioBuffer, noise_pool, rir_pool, cfg: DistortionConfig, seed: int,
            master_seed: int | None = None, utterance: str | None = None):
    """Return ``(target, degraded, record)`` for one clean utterance.

    Both outputs are scaled by the same random gain, so they stay aligned and
    equal in length.
    """
    if s.sample_rate != SAMPLE_RATE:
        raise ValueError(f"speech must be {SAMPLE_RATE} Hz, got {s.sample_rate}")
    rng = np.random.default_rng(seed)
    steps, q = plan(rng, cfg, len(s), noise_pool, rir_pool)
    record = DistortionRecord(seed=int(seed), steps=steps, scale=q,
                              master_seed=master_seed, utterance=utterance)
    target, degraded = apply_steps(s, steps, q, noise_pool, rir_pool)
    return target, degraded, record


def replay(s: AudioBuffer, noise_pool, rir_pool, record: DistortionRecord) -> AudioBuffer:
    return apply_steps(s, record.steps, record.scale, noise_pool, rir_pool)[1]


def _items(corpus):
    if isinstance(corpus, Mapping):
        return list(corpus.items())
    return list(corpus)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i, item) for i, item in enumerate(items)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(len(items)), items))


def degrade_corpus(corpus, noise_pool, rir_pool, cfg: DistortionConfig, master_seed: int,
                   workers: int = 1) -> list[Pair]:
    items = _items(corpus)

    def one(i, item):
        uid, audio = item
        target, degraded, rec = degrade(audio, noise_pool, rir_pool, cfg,
                                        derive_seed(master_seed, i), master_seed, uid)
        return Pair(uid, target, degraded, rec)

    return _map(one, items, workers)


# ---------------------------------------------------------------------------
# evaluation sets


def sr_degrade(audio: AudioBuffer, rate: int) -> AudioBuffer:
    """Chebyshev-I order-8 lowpass at ``rate / 2``, down to ``rate`` and back."""
    if rate > audio.sample_rate:
        raise ValueError(f"target rate {rate} exceeds the source rate {audio.sample_rate}")
    if rate == audio.sample_rate:
        return audio
    filt = dsp.design_lowpass("chebyshev1", rate / 2.0, SR_FILTER_ORDER, audio.sample_rate)
    low = dsp.resample(dsp.apply_filter(audio, filt), rate)
    back = dsp.resample(low, audio.sample_rate)
    return back.replace(dsp.fit_length(back.samples, len(audio)))


def build_sr_testset(corpus, rate: int, workers: int = 1) -> list[Pair]:
    if rate > SAMPLE_RATE:
        raise ValueError(f"target rate must be <= {SAMPLE_RATE}, got {rate}")

    def one(i, item):
        uid, audio = item
        return Pair(uid, audio, sr_degrade(audio, rate), meta={"task": "sr", "rate": rate})

    return _map(one, _items(corpus), workers)


def build_declip_testset(corpus, eta: float, workers: int = 1) -> list[Pair]:
    def one(i, item):
        uid, audio = item
        return Pair(uid, audio, dist.clip(audio, eta), meta={"task": "declip", "eta": eta})

    return _map(one, _items(corpus), workers)


def build_dereverb_testset(corpus, rir_pool, seed: int, workers: int = 1) -> list[Pair]:
    pool = _as_pool(rir_pool)
    if not pool:
        raise ValueError("RIR pool is empty")
    ids = sorted(pool)

    def one(i, item):
        uid, audio = item
        rng = np.random.default_rng(derive_seed(seed, i))
        rid = ids[int(rng.integers(len(ids)))]
        rec = DistortionRecord(seed=derive_seed(seed, i), steps=[{"op": "reverb", "rir": rid}],
                               master_seed=seed, utterance=uid)
        return Pair(uid, audio, dist.reverberate(audio, pool[rid]), rec,
                    meta={"task": "dereverb"})

    return _map(one, _items(corpus), workers)


def segment(audio: AudioBuffer, seconds: float = GSR_SEGMENT_SECONDS) -> list[AudioBuffer]:
    """Consecutive fixed-length segments; a short tail is dropped and an
    utterance shorter than one segment is zero-padded."""
    n = int(round(seconds * audio.sample_rate))
    x = audio.samples
    if len(x) < n:
        return [audio.replace(dsp.fit_length(x, n))]
    return [audio.replace(x[k * n:(k + 1) * n]) for k in range(len(x) // n)]


def build_gsr_testset(corpus, noise_pool, rir_pool, cfg: DistortionConfig, seed: int,
                      seconds: float = GSR_SEGMENT_SECONDS, workers: int = 1) -> list[Pair]:
    segments = []
    for uid, audio in _items(corpus):
        for k, seg in enumerate(segment(audio, seconds)):
            segments.append((f"{uid}_{k:03d}", seg))
    pairs = degrade_corpus(segments, noise_pool, rir_pool, cfg, seed, workers)
    for p in pairs:
        p.meta["task"] = "gsr"
    return pairs
