"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import contextlib
import hashlib
import json
import math
import time

import numpy as np
import pytest

from restorelab import distortions as dist
from restorelab import dsp, losses, metrics, pipeline, restore, rir, synth
from restorelab.config import load_config
from restorelab.dsp import AudioBuffer

import oracles

SR = 44100


@pytest.fixture
def verdict(capsys):
    """Print ``ACCEPTANCE <n> PASS|FAIL`` with timing, whatever the outcome."""

    @contextlib.contextmanager
    def run(number, title, budget_s):
        notes = []
        t0 = time.perf_counter()
        ok = False
        try:
            yield notes
            ok = True
        finally:
            elapsed = time.perf_counter() - t0
            timed = elapsed < budget_s
            status = "PASS" if ok and timed else "FAIL"
            extra = "; ".join(notes)
            with capsys.disabled():
                print(f"\nACCEPTANCE {number} {status}: {title} "
                      f"({elapsed:.1f} s of {budget_s:.0f} s){': ' + extra if extra else ''}")
        assert timed, f"criterion {number} took {elapsed:.1f} s, budget {budget_s} s"

    return run


def test_1_cola_reconstruction(verdict):
    rng = np.random.default_rng(1)
    with verdict(1, "stft/istft round trip at 2048/441", 5) as notes:
        worst = 0.0
        for _ in range(50):
            x = AudioBuffer(rng.standard_normal(int(rng.integers(2048, 3 * SR))), SR)
            y = dsp.istft(dsp.stft(x, 2048, 441), len(x))
            worst = max(worst, np.linalg.norm(y.samples - x.samples) / np.linalg.norm(x.samples))
        notes.append(f"worst relative error {worst:.2e}")
        assert worst <= 1e-6


def test_2_metric_oracles(verdict):
    rng = np.random.default_rng(2)
    with verdict(2, "metrics match brute-force oracles and anchors", 10) as notes:
        worst = {"lsd": 0.0, "ssim": 0.0, "sisnr": 0.0, "sispnr": 0.0}
        for _ in range(100):
            shape = (int(rng.integers(7, 15)), int(rng.integers(7, 15)))
            ref = rng.uniform(0.0, 2.0, shape)
            est = np.abs(ref + rng.normal(0.0, 0.3, shape))
            a = rng.standard_normal(int(rng.integers(16, 200)))
            b = a + rng.normal(0.0, 0.5, a.size)
            pairs = {
                "lsd": (metrics.lsd(ref, est), oracles.lsd_loop(ref, est)),
                "ssim": (metrics.ssim(ref, est), oracles.ssim_loop(ref, est)),
                "sisnr": (metrics.sisnr(a, b), oracles.sisnr_loop(a, b)),
                "sispnr": (metrics.sispnr(ref, est), oracles.sispnr_loop(ref, est)),
            }
            for k, (got, want) in pairs.items():
                worst[k] = max(worst[k], abs(got - want))
        notes.append("max diffs " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
        assert all(v <= 1e-10 for v in worst.values())

        s = rng.uniform(0.1, 1.0, (20, 30))
        assert metrics.lsd(s, 10 * s) == pytest.approx(2.0, abs=1e-12)
        ref = rng.standard_normal(4000)
        e = rng.standard_normal(4000)
        e -= e @ ref / (ref @ ref) * ref
        e *= math.sqrt((ref @ ref) / 10 / (e @ e))
        assert metrics.sisnr(ref, ref + e) == pytest.approx(10.0, abs=1e-9)
        assert metrics.ssim(s, s) == pytest.approx(1.0, abs=1e-12)


def _digest(pairs):
    h = hashlib.sha256()
    for p in pairs:
        h.update(p.id.encode())
        h.update(p.target.samples.tobytes())
        h.update(p.degraded.samples.tobytes())
    return h.hexdigest()


def test_3_determinism_and_replay(verdict):
    corpus = synth.corpus(200, seed=3, seconds=0.5)
    noise = synth.noise_pool(0, seconds=2.0)
    rng = np.random.default_rng(33)
    rirs = {f"room{i}": rir.simulate_rir(rir.sample_room(rng)).audio for i in range(3)}
    cfg = pipeline.DistortionConfig()
    with verdict(3, "seeded degradation is reproducible and replayable", 120) as notes:
        first = pipeline.degrade_corpus(corpus, noise, rirs, cfg, 7, workers=1)
        second = pipeline.degrade_corpus(corpus, noise, rirs, cfg, 7, workers=4)
        d1, d2 = _digest(first), _digest(second)
        notes.append(f"sha256 {d1[:16]}")
        assert d1 == d2
        mismatched = 0
        for p in first:
            rec = pipeline.DistortionRecord.from_dict(json.loads(p.record.to_json()))
            again = pipeline.replay(corpus[p.id], noise, rirs, rec)
            mismatched += again.samples.tobytes() != p.degraded.samples.tobytes()
        notes.append(f"{len(first) - mismatched}/{len(first)} replays bit-exact")
        assert mismatched == 0


def test_4_distortion_contracts(verdict, speech, noise_pool):
    rng = np.random.default_rng(4)
    with verdict(4, "clip, add_noise and sr builder contracts", 60) as notes:
        for eta in (0.06, 0.1, 0.25, 0.9):
            x = AudioBuffer(rng.uniform(-1.5, 1.5, 5000), SR)
            assert np.max(np.abs(dist.clip(x, eta).samples)) <= eta
        worst = 0.0
        for snr in (-5.0, 0.0, 20.0, 40.0):
            for kind in ("white", "pink", "babble"):
                y = dist.add_noise(speech, noise_pool[kind], snr)
                n = y.samples - speech.samples
                ratio = np.mean(np.abs(speech.samples)) / np.mean(np.abs(n))
                worst = max(worst, abs(ratio / 10 ** (snr / 20) - 1))
        notes.append(f"noise ratio rel err {worst:.1e}")
        assert worst <= 1e-9
        corpus = synth.corpus(5, seed=40, seconds=2.0)
        corpus["white"] = AudioBuffer(0.3 * rng.standard_normal(2 * SR), SR)
        above = -np.inf
        for p in pipeline.build_sr_testset(corpus, 8000):
            total = oracles.band_energy(p.degraded.samples, SR, 0, SR / 2)
            high = oracles.band_energy(p.degraded.samples, SR, 4500, SR / 2)
            above = max(above, 10 * math.log10(high / total))
        notes.append(f"worst energy above 4.5 kHz {above:.1f} dB")
        assert above <= -50


def test_5_rir_fidelity(verdict):
    with verdict(5, "simulated rooms over 50 seeds", 120) as notes:
        errors, offsets = [], []
        for seed in range(50):
            room = rir.sample_room(np.random.default_rng(seed))
            assert 0 < room.distance <= 5
            ir = rir.simulate_rir(room)
            errors.append(abs(rir.measure_rt60(ir) - room.rt60) / room.rt60)
            offsets.append(abs(rir.direct_path_index(ir) - room.distance / 343.0 * SR))
        med = float(np.median(errors))
        notes.append(f"median RT60 error {100 * med:.1f}%, worst direct offset "
                     f"{max(offsets):.2f} samples")
        assert med <= 0.20
        assert max(offsets) <= 1.0


def test_6_loss_kernels(verdict, tmp_path):
    x = synth.utterance(60, seconds=1.0)
    y = AudioBuffer(x.samples + 0.01 * np.random.default_rng(6).standard_normal(len(x)), SR)
    cfg = losses.MultiResConfig()
    with verdict(6, "loss components, combination and weights", 10) as notes:
        same = losses.all_losses(x, x, cfg)["components"]
        assert all(np.all(np.asarray(v) == 0) for v in same.values())

        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"schema_version": 1, "weights": {
            "lambda_mel": 50, "lambda_sc": 5, "lambda_mag": 5, "lambda_seg": 200,
            "lambda_energy": 100, "lambda_phase": 100, "lambda_D": 4}}))
        w = load_config(path, environ={}).weights
        assert w == losses.LossWeights()

        manual_f = w.lambda_mel * losses.mel_loss(y, x)
        for win, hop in cfg.freq_windows:
            manual_f += w.lambda_sc * losses.spectral_convergence(y, x, win, hop)
            manual_f += w.lambda_mag * losses.magnitude_loss(y, x, win, hop)
        manual_t = 0.0
        for tw in cfg.time_windows:
            manual_t += (w.lambda_seg * losses.segment_loss(y, x, tw)
                         + w.lambda_energy * losses.energy_loss(y, x, tw)
                         + w.lambda_phase * losses.phase_loss(y, x, tw))
        lf, lt = losses.frequency_loss(y, x, cfg, w), losses.time_loss(y, x, cfg, w)
        diff = max(abs(lf - manual_f), abs(lt - manual_t))
        notes.append(f"combination diff {diff:.1e}")
        assert diff <= 1e-12

        doubled = losses.LossWeights(**{k: 2 * v for k, v in w.to_dict().items()})
        assert losses.frequency_loss(y, x, cfg, doubled) == pytest.approx(2 * lf, rel=1e-12)
        assert losses.time_loss(y, x, cfg, doubled) == pytest.approx(2 * lt, rel=1e-12)
        only_mel = losses.LossWeights(lambda_mel=50, lambda_sc=0, lambda_mag=0)
        assert losses.frequency_loss(y, x, cfg, only_mel) == pytest.approx(
            50 * losses.mel_loss(y, x), rel=1e-12)


def test_7_oracle_restoration(verdict):
    with verdict(7, "oracle mask and two-stage restoration on mini GSR set", 300) as notes:
        corpus = synth.corpus(20, seed=1, seconds=3.0)
        noise = synth.noise_pool(0)
        rng = np.random.default_rng(np.random.SeedSequence([11, 0x5212]))
        rirs = {f"room{i:03d}": rir.simulate_rir(rir.sample_room(rng)).audio for i in range(4)}
        pairs = pipeline.build_gsr_testset(corpus, noise, rirs, pipeline.DistortionConfig(), 11,
                                           seconds=3.0)
        assert len(pairs) == 20
        fb = dsp.mel_filterbank()
        exact, capped = [], []
        for p in pairs:
            xm, sm = dsp.mel_spectrogram(p.degraded, fb), dsp.mel_spectrogram(p.target, fb)
            m = restore.oracle_mel_mask(xm, sm, ceiling=np.inf, eps=1e-30)
            exact.append(metrics.lsd(sm, restore.apply_mel_mask(xm, m)))
            capped.append(metrics.lsd(sm, restore.apply_mel_mask(xm, restore.oracle_mel_mask(xm, sm))))
        notes.append(f"(a) worst mel LSD {max(exact):.1e} "
                     f"[with ceiling {restore.MASK_CEILING:g}: {max(capped):.2f}]")
        lowpassed = [p for p in pairs if p.record.step("lowpass") is not None]
        improved = 0
        for p in lowpassed:
            ref = dsp.magnitude(p.target)
            before = metrics.lsd(ref, dsp.magnitude(p.degraded))
            after = metrics.lsd(ref, dsp.magnitude(restore.restore_oracle(p.degraded, p.target)))
            improved += after < before
        notes.append(f"(b) {improved}/{len(lowpassed)} lowpass utterances improved")
        assert max(exact) <= 0.05
        assert lowpassed and improved == len(lowpassed)


def test_8_branch_statistics(verdict):
    cfg = pipeline.DistortionConfig()
    noise = {"n": AudioBuffer(np.ones(10), SR)}
    rirs = {"r": AudioBuffer(np.ones(10), SR)}
    n = 10_000
    with verdict(8, "branch rates within 3 sigma", 60) as notes:
        counts = {"reverb": 0, "clip": 0, "lowpass": 0, "noise": 0, "noise_lowpass": 0}
        for i in range(n):
            steps, _ = pipeline.plan(np.random.default_rng(pipeline.derive_seed(8, i)), cfg, 10,
                                     noise, rirs)
            for s in steps:
                counts[s["op"]] += 1
                if s["op"] == "lowpass":
                    counts["noise_lowpass"] += s["noise_lowpass"]
        checks = {"reverb": (cfg.p1, n), "clip": (cfg.p2, n), "lowpass": (cfg.p3, n),
                  "noise": (cfg.p5, n), "noise_lowpass": (cfg.p4, counts["lowpass"])}
        bad = []
        for k, (p, trials) in checks.items():
            z = (counts[k] - p * trials) / math.sqrt(trials * p * (1 - p))
            notes.append(f"{k} {counts[k] / trials:.3f} (z {z:+.2f})")
            if abs(z) > 3:
                bad.append(k)
        assert not bad
