"""Random shoebox rooms and image-source room impulse responses."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize, signal

from . import _accel
from .dsp import AudioBuffer

log = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0

DIM_RANGE = (1.0, 12.0)
DISTANCE_MEAN = 2.0
DISTANCE_STD = 4.0
MAX_DISTANCE = 5.0
RT60_RANGE = (0.05, 1.0)
PATTERNS = ("omnidirectional", "cardioid")

MAX_TRIES = 10_000
SINC_HALF_WIDTH = 8
LENGTH_FACTOR = 1.2
MAX_IMAGES = 4_000_000
# all image pulses share one sign, so dense late arrivals pile up a
# low-frequency bias; it is removed with a gentle highpass
HIGHPASS_HZ = 100.0


@dataclass(frozen=True)
class RoomConfig:
    dims: tuple[float, float, float]
    mic_pos: tuple[float, float, float]
    src_pos: tuple[float, float, float]
    rt60: float
    pattern: str = "omnidirectional"
    mic_orientation: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("dims", "mic_pos", "src_pos", "mic_orientation"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pickup pattern {self.pattern!r}")
        if not all(d > 0 for d in self.dims):
            raise ValueError("room dimensions must be positive")
        for name in ("mic_pos", "src_pos"):
            p = getattr(self, name)
            if not all(0.0 < v < d for v, d in zip(p, self.dims)):
                raise ValueError(f"{name} {p} is not strictly inside the room {self.dims}")
        if not self.rt60 > 0:
            raise ValueError("rt60 must be positive")

    @property
    def distance(self) -> float:
        return math.dist(self.mic_pos, self.src_pos)

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RoomConfig":
        return cls(**{k: d[k] for k in ("dims", "mic_pos", "src_pos", "rt60", "pattern")},
                   mic_orientation=d.get("mic_orientation", (1.0, 0.0, 0.0)))


@dataclass(frozen=True)
class ImpulseResponse:
    audio: AudioBuffer
    room: RoomConfig

    @property
    def samples(self) -> np.ndarray:
        return self.audio.samples

    @property
    def sample_rate(self) -> int:
        return self.audio.sample_rate


def _unit_vector(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.standard_normal(3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def sample_distance(rng: np.random.Generator) -> float:
    """Gaussian mic-source distance, redrawn until it falls in (0, 5] m."""
    for _ in range(MAX_TRIES):
        d = rng.normal(DISTANCE_MEAN, DISTANCE_STD)
        if 0.0 < d <= MAX_DISTANCE:
            return float(d)
    raise RuntimeError("distance rejection sampling did not converge")


def sample_room(rng: np.random.Generator) -> RoomConfig:
    dims = rng.uniform(*DIM_RANGE, size=3)
    distance = sample_distance(rng)
    mic = rng.uniform(0.0, 1.0, size=3) * dims
    tries = 0
    while True:
        tries += 1
        if tries > MAX_TRIES:
            raise RuntimeError("could not place a source inside the room")
        src = mic + distance * _unit_vector(rng)
        if np.all(src > 0.0) and np.all(src < dims):
            break
        # a distance can be unreachable from this mic spot, or in this room at all
        if tries % 50 == 0:
            mic = rng.uniform(0.0, 1.0, size=3) * dims
        if tries % 500 == 0:
            distance = sample_distance(rng)
    rt60 = rng.uniform(*RT60_RANGE)
    pattern = PATTERNS[int(rng.integers(len(PATTERNS)))]
    orientation = _unit_vector(rng)
    return RoomConfig(tuple(dims), tuple(mic), tuple(src), float(rt60), pattern,
                      tuple(orientation))


def eyring_reflection(dims, rt60: float, c: float = SPEED_OF_SOUND) -> float:
    """Pressure reflection coefficient of every wall for a target RT60."""
    lx, ly, lz = dims
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 1.0 - math.exp(-24.0 * math.log(10.0) * volume / (c * surface * rt60))
    return math.sqrt(1.0 - alpha)


def _octant_directions(n: int = 512) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - k / n
    phi = 0.5 * math.pi * ((k * (math.sqrt(5.0) - 1.0) / 2.0) % 1.0)
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _fit_rt60(t: np.ndarray, edc: np.ndarray, lo_db: float = -5.0, hi_db: float = -35.0):
    edc_db = 10.0 * np.log10(np.maximum(edc / edc[0], 1e-300))
    below_lo = np.flatnonzero(edc_db <= lo_db)
    below_hi = np.flatnonzero(edc_db <= hi_db)
    if below_lo.size == 0 or below_hi.size == 0 or below_hi[0] - below_lo[0] < 3:
        return None
    start, stop = below_lo[0], below_hi[0]
    slope, _ = np.polyfit(t[start:stop + 1], edc_db[start:stop + 1], 1)
    return -60.0 / slope if slope < 0 else None


def matched_reflection(cfg: "RoomConfig", c: float = SPEED_OF_SOUND,
                       duration: float | None = None) -> float:
    """Wall reflection coefficient whose simulated RIR measures the requested RT60.

    An image reached along direction ``u`` after a path ``r`` has bounced about
    ``r * sum(|u_i| / L_i)`` times, so the reverberant energy is a direction
    average of exponentials (slower than the diffuse-field decay Eyring
    assumes).  Reverberant energy arrives at ``c / (4 pi V)`` per second times
    that average; the direct path adds ``(g / 4 pi d)^2``.  The reflection
    coefficient is solved so that the Schroeder fit of this modelled curve,
    truncated at ``duration``, equals ``cfg.rt60``.
    """
    dims = np.asarray(cfg.dims, dtype=np.float64)
    volume = float(np.prod(dims))
    rate = c * (_octant_directions() / dims).sum(axis=1)   # reflections per second
    d = cfg.distance
    t_direct = d / c
    gain = 1.0
    diffuse_gain = 1.0
    if cfg.pattern == "cardioid":
        u = (np.asarray(cfg.src_pos) - np.asarray(cfg.mic_pos)) / d
        o = np.asarray(cfg.mic_orientation) / np.linalg.norm(cfg.mic_orientation)
        gain = 0.5 * (1.0 + float(u @ o))
        diffuse_gain = 1.0 / 3.0
    direct = (gain / (4.0 * math.pi * d)) ** 2
    if duration is None:
        duration = LENGTH_FACTOR * cfg.rt60 + t_direct
    t = np.linspace(0.0, duration, 1024)

    def predicted(log_a: float):
        a = math.exp(log_a)
        decay = np.exp(-2.0 * a * np.outer(t, rate))          # beta ** (2 n)
        tail = np.mean(decay / rate, axis=1)
        reverb = diffuse_gain * c / (4.0 * math.pi * volume) * (tail - tail[-1]) / (2.0 * a)
        edc = reverb + direct * (t <= t_direct)
        return _fit_rt60(t, edc)

    # a = -ln(beta); start from the closed form that ignores the direct path
    t_unit = np.linspace(0.0, 6.0 / rate.min(), 4096)
    k = _fit_rt60(t_unit, np.mean(np.exp(-2.0 * np.outer(t_unit, rate)) / rate, axis=1))
    k = k if k is not None else cfg.rt60
    lo, hi = math.log(k / cfg.rt60) - 3.0, math.log(k / cfg.rt60) + 3.0

    def err(log_a):
        r = predicted(log_a)
        return (r if r is not None else 0.0) - cfg.rt60

    try:
        if err(lo) > 0 > err(hi):
            log_a = optimize.brentq(err, lo, hi, xtol=1e-4)
        else:
            log_a = math.log(k / cfg.rt60)
    except ValueError:
        log_a = math.log(k / cfg.rt60)
    return math.exp(-math.exp(log_a))


def _axis_images(src: float, length: float, reach: float):
    """Image coordinates along one axis with their reflection counts."""
    n_max = int(math.ceil(reach / (2.0 * length))) + 1
    n = np.arange(-n_max, n_max + 1)
    coords = np.concatenate([2.0 * n * length + src, 2.0 * n * length - src])
    refl = np.concatenate([np.abs(2 * n), np.abs(2 * n - 1)])
    return coords, refl


def simulate_rir(cfg: RoomConfig, sample_rate: int = 44100, c: float = SPEED_OF_SOUND,
                 normalize: bool = True, absorption: str = "matched",
                 max_images: int = MAX_IMAGES) -> ImpulseResponse:
    """Image-source RIR of a shoebox room with the same absorption on all walls.

    ``absorption="matched"`` solves the wall reflection coefficient from the
    image model's own decay (see :func:`matched_reflection`); ``"eyring"``
    uses Eyring's diffuse-field formula, which overestimates the realised
    RT60 of a specular shoebox.  The response spans ``1.2 * rt60`` beyond the
    direct path.  With ``normalize`` the peak magnitude is scaled to 1.
    """
    distance = cfg.distance
    if distance < 1e-6:
        raise ValueError("microphone and source coincide")
    n_out = int(math.ceil((LENGTH_FACTOR * cfg.rt60 + distance / c) * sample_rate)) \
        + SINC_HALF_WIDTH
    reach = c * n_out / sample_rate
    volume = float(np.prod(cfg.dims))
    expected = 4.0 / 3.0 * math.pi * reach ** 3 / volume
    if expected > max_images:
        reach = (max_images * volume * 3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
        log.warning("image count capped at %d; reflections beyond %.3f s are omitted",
                    max_images, reach / c)
    if absorption == "matched":
        beta = matched_reflection(cfg, c, duration=reach / c)
    elif absorption == "eyring":
        beta = eyring_reflection(cfg.dims, cfg.rt60, c)
    else:
        raise ValueError(f"unknown absorption model {absorption!r}")
    axes = [_axis_images(s, length, reach) for s, length in zip(cfg.src_pos, cfg.dims)]
    orient = np.asarray(cfg.mic_orientation, dtype=np.float64)
    orient = orient / np.linalg.norm(orient)
    h = _accel.image_source(axes[0][0], axes[0][1], axes[1][0], axes[1][1],
                            axes[2][0], axes[2][1], np.asarray(cfg.mic_pos), orient,
                            cfg.pattern == "cardioid", beta, sample_rate, c, reach,
                            SINC_HALF_WIDTH, n_out)
    if HIGHPASS_HZ:
        sos = signal.butter(2, HIGHPASS_HZ, btype="high", fs=sample_rate, output="sos")
        h = _accel.sos_filter(sos, h)
    if normalize:
        peak = np.abs(h).max()
        if peak > 0:
            h = h / peak
    return ImpulseResponse(AudioBuffer(h, sample_rate), cfg)


def schroeder_curve(h: np.ndarray) -> np.ndarray:
    """Backward-integrated energy decay in dB relative to the total energy."""
    energy = np.cumsum(np.asarray(h, dtype=np.float64)[::-1] ** 2)[::-1]
    total = energy[0]
    if not total > 0:
        raise ValueError("impulse response is silent")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / total)


def measure_rt60(ir, sample_rate: int | None = None, lo_db: float = -5.0,
                 hi_db: float = -35.0) -> float:
    """RT60 from a least-squares line through the -5 .. -35 dB Schroeder segment."""
    if isinstance(ir, ImpulseResponse):
        ir = ir.audio
    if isinstance(ir, AudioBuffer):
        sample_rate, h = ir.sample_rate, ir.samples
    else:
        h = np.asarray(ir, dtype=np.float64)
        if sample_rate is None:
            raise TypeError("sample_rate is required for raw arrays")
    edc = schroeder_curve(h)
    below_lo = np.flatnonzero(edc <= lo_db)
    below_hi = np.flatnonzero(edc <= hi_db)
    if below_lo.size == 0 or below_hi.size == 0:
        raise ValueError("decay does not span the fitting range")
    start, stop = below_lo[0], below_hi[0]
    if stop - start < 3 or not np.all(np.isfinite(edc[start:stop + 1])):
        raise ValueError("decay does not span the fitting range")
    t = np.arange(start, stop + 1) / sample_rate
    slope, _ = np.polyfit(t, edc[start:stop + 1], 1)
    if not slope < 0:
        raise ValueError("energy decay curve is not decreasing")
    return float(-60.0 / slope)


def direct_path_index(ir, rel_threshold: float = 1e-9) -> int:
    """Sample index of the direct-path arrival.

    Nothing reaches the microphone before the direct sound except the leading
    tail of its own interpolation kernel, so the arrival is the largest sample
    within one kernel width of the first non-negligible sample.  This holds
    even when a cardioid pointing away makes a reflection the global peak.
    """
    if isinstance(ir, ImpulseResponse):
        ir = ir.audio
    h = np.abs(ir.samples if isinstance(ir, AudioBuffer) else np.asarray(ir, dtype=np.float64))
    peak = h.max() if h.size else 0.0
    if not peak > 0:
        raise ValueError("impulse response is silent")
    onset = int(np.argmax(h > rel_threshold * peak))
    return onset + int(np.argmax(h[onset:onset + 2 * SINC_HALF_WIDTH + 1]))
