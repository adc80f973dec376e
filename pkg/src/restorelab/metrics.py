"""Objective restoration metrics: LSD, block SSIM, SiSNR and SiSPNR."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .dsp import AudioBuffer

log = logging.getLogger(__name__)

EPS = 1e-8
SNR_CAP_DB = 100.0
SSIM_BLOCK = 7
SSIM_C1 = 0.01
SSIM_C2 = 0.02
CSV_COLUMNS = ("id", "lsd", "ssim", "sisnr_db", "sispnr_db")


@dataclass(frozen=True)
class MetricConfig:
    eps: float = EPS
    cap_db: float = SNR_CAP_DB
    window_size: int = 2048
    hop: int = 441
    strict_sisnr: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def lsd(ref, est, eps: float = EPS) -> float:
    """Log-spectral distance between two magnitude grids shaped (frames, bins)."""
    ref, est = _same_shape(ref, est)
    if ref.ndim != 2 or ref.size == 0:
        raise ValueError("LSD needs non-empty (frames, bins) grids")
    ratio = np.log10(np.maximum(ref, eps) ** 2 / np.maximum(est, eps) ** 2)
    return float(np.mean(np.sqrt(np.mean(ratio ** 2, axis=1))))


def ssim(ref, est, block: int = SSIM_BLOCK, c1: float = SSIM_C1, c2: float = SSIM_C2) -> float:
    """Mean SSIM over non-overlapping ``block x block`` tiles.

    Both grids are divided by the reference maximum first; partial tiles at
    the edges are ignored.
    """
    ref, est = _same_shape(ref, est)
    if ref.ndim != 2 or ref.shape[0] < block or ref.shape[1] < block:
        raise ValueError(f"SSIM needs grids of at least {block}x{block}, got {ref.shape}")
    peak = np.abs(ref).max()
    if peak > 0:
        ref, est = ref / peak, est / peak
    nt, nf = ref.shape[0] // block, ref.shape[1] // block

    def tiles(x):
        x = x[:nt * block, :nf * block].reshape(nt, block, nf, block)
        return x.transpose(0, 2, 1, 3).reshape(nt * nf, block * block)

    a, b = tiles(ref), tiles(est)
    mu_a, mu_b = a.mean(axis=1), b.mean(axis=1)
    da, db = a - mu_a[:, None], b - mu_b[:, None]
    var_a, var_b = (da ** 2).mean(axis=1), (db ** 2).mean(axis=1)
    cov = (da * db).mean(axis=1)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _snr_db(target_energy: float, noise_energy: float, cap_db: float) -> float:
    # a silent estimate projects to nothing: worst score, not a perfect one
    if target_energy <= 0.0:
        return -cap_db
    if noise_energy <= 0.0:
        return cap_db
    return float(min(cap_db, max(-cap_db, 10.0 * math.log10(target_energy / noise_energy))))


def _si_ratio(ref: np.ndarray, est: np.ndarray, cap_db: float, strict: bool) -> float:
    ref_energy = float(np.dot(ref, ref))
    if ref_energy <= 0.0:
        raise ValueError("reference is silent")
    # the printed variant normalises the projection by the estimate energy,
    # which is not scale invariant
    denom = float(np.dot(est, est)) if strict else ref_energy
    if denom <= 0.0:
        return -cap_db
    proj = (float(np.dot(est, ref)) / denom) * ref
    err = est - proj
    return _snr_db(float(np.dot(proj, proj)), float(np.dot(err, err)), cap_db)


def sisnr(ref, est, cap_db: float = SNR_CAP_DB, strict: bool = False) -> float:
    """Scale-invariant SNR in dB, capped at ``cap_db``."""
    if isinstance(ref, AudioBuffer):
        ref = ref.samples
    if isinstance(est, AudioBuffer):
        est = est.samples
    ref = np.asarray(ref, dtype=np.float64).ravel()
    est = np.asarray(est, dtype=np.float64).ravel()
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: {ref.shape[0]} vs {est.shape[0]}")
    return _si_ratio(ref, est, cap_db, strict)


def sispnr(ref, est, cap_db: float = SNR_CAP_DB, strict: bool = False) -> float:
    """SiSNR of mean-removed, flattened magnitude spectrograms."""
    ref, est = _same_shape(ref, est)
    ref = (ref - ref.mean()).ravel()
    est = (est - est.mean()).ravel()
    if not np.any(ref):
        raise ValueError("reference spectrogram is constant")
    return _si_ratio(ref, est, cap_db, strict)


# ---------------------------------------------------------------------------
# batch evaluation


@dataclass
class MetricReport:
    rows: list[dict] = field(default_factory=list)
    config: MetricConfig = field(default_factory=MetricConfig)

    @property
    def aggregate(self) -> dict:
        ok = [r for r in self.rows if not r.get("error")]
        if not ok:
            return {}
        return {k: float(np.mean([r[k] for r in ok])) for k in CSV_COLUMNS[1:]}

    def to_dict(self) -> dict:
        return {"rows": self.rows, "aggregate": self.aggregate, "config": self.config.to_dict(),
                "count": len(self.rows),
                "failed": sum(1 for r in self.rows if r.get("error"))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            if r.get("error"):
                writer.writerow([r["id"]] + [""] * (len(CSV_COLUMNS) - 1))
            else:
                writer.writerow([r["id"]] + [repr(float(r[k])) for k in CSV_COLUMNS[1:]])
        return buf.getvalue()


def evaluate_pair(uid: str, target: AudioBuffer, estimate: AudioBuffer,
                  cfg: MetricConfig = MetricConfig()) -> dict:
    if len(target) != len(estimate):
        raise ValueError(f"length mismatch: {len(target)} vs {len(estimate)}")
    ref_mag = dsp.magnitude(target, cfg.window_size, cfg.hop)
    est_mag = dsp.magnitude(estimate, cfg.window_size, cfg.hop)
    return {
        "id": uid,
        "lsd": lsd(ref_mag, est_mag, cfg.eps),
        "ssim": ssim(ref_mag, est_mag),
        "sisnr_db": sisnr(target, estimate, cfg.cap_db, cfg.strict_sisnr),
        "sispnr_db": sispnr(ref_mag, est_mag, cfg.cap_db, cfg.strict_sisnr),
    }


def evaluate(pairs, cfg: MetricConfig = MetricConfig()) -> MetricReport:
    """Score ``(id, target, estimate)`` triples; failures become flagged rows."""
    report = MetricReport(config=cfg)
    for uid, target, estimate in pairs:
        try:
            report.rows.append(evaluate_pair(uid, target, estimate, cfg))
        except (ValueError, FloatingPointError) as exc:
            log.warning("pair %s could not be scored: %s", uid, exc)
            report.rows.append({"id": uid, "error": str(exc)})
    return report
