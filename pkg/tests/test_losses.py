import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from restorelab import dsp, losses
from restorelab.losses import LossWeights, MultiResConfig

import oracles

SR = 44100


def sig(seed, n=8000):
    return np.random.default_rng(seed).standard_normal(n) * 0.2


def test_defaults():
    w = LossWeights()
    assert (w.lambda_mel, w.lambda_sc, w.lambda_mag) == (50.0, 5.0, 5.0)
    assert (w.lambda_seg, w.lambda_energy, w.lambda_phase, w.lambda_D) == (200.0, 100.0, 100.0, 4.0)
    cfg = MultiResConfig()
    assert len(cfg.freq_windows) == 7 and len(cfg.time_windows) == 4
    assert cfg.freq_windows[0] == (64, 16) and cfg.freq_windows[-1] == (4096, 1024)
    assert cfg.time_windows[0] == 1 and cfg.time_windows[-1] == 960
    with pytest.raises(ValueError):
        LossWeights(lambda_mel=-1.0)
    with pytest.raises(ValueError):
        MultiResConfig(time_windows=(0,))
    with pytest.raises(ValueError):
        MultiResConfig(freq_windows=((64, 128),))


def test_window_mean_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(losses.window_mean(x, 2), [1.5, 3.5])
    np.testing.assert_array_equal(losses.window_mean(x, 4), x)
    assert losses.window_mean(x, 1)[0] == 2.5
    with pytest.raises(ValueError):
        losses.window_mean(x, 5)
    with pytest.raises(ValueError):
        losses.window_mean(x, 0)


@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-10, 10)), st.data())
def test_window_mean_matches_loop(x, data):
    w = data.draw(st.integers(1, len(x)))
    np.testing.assert_allclose(losses.window_mean(x, w), oracles.window_mean_loop(list(x), w),
                               rtol=1e-12, atol=1e-12)
    assert np.array_equal(np.array_split(np.arange(len(x)), w)[0],
                          np.arange(-(-len(x) // w)))


def test_all_components_zero_on_identical():
    x = sig(0)
    assert losses.mel_loss(x, x) == 0.0
    for w in (64, 512, 4096):
        assert losses.spectral_convergence(x, x, w) == 0.0
        assert losses.magnitude_loss(x, x, w) == 0.0
    for w in (1, 240, 960):
        assert losses.segment_loss(x, x, w) == 0.0
        assert losses.energy_loss(x, x, w) == 0.0
        assert losses.phase_loss(x, x, w) == 0.0
    assert losses.frequency_loss(x, x) == 0.0 and losses.time_loss(x, x) == 0.0


def test_mel_loss_vs_zero_and_scaling():
    x = sig(1)
    fb = dsp.mel_filterbank()
    mel = dsp.apply_mel(np.abs(np.fft.rfft(
        np.lib.stride_tricks.sliding_window_view(np.pad(x, 1024, mode="reflect"), 2048)[::441]
        [:len(x) // 441 + 1] * dsp.hann(2048), axis=-1)), fb)
    expected = math.sqrt(np.mean(mel ** 2))
    assert losses.mel_loss(np.zeros_like(x), x) == pytest.approx(expected, rel=1e-12)
    assert losses.mel_loss(np.zeros_like(x), 2 * x) == pytest.approx(2 * expected, rel=1e-6)


def test_spectral_convergence_examples():
    x = sig(2)
    assert losses.spectral_convergence(2 * x, x, 512) == pytest.approx(0.5, abs=1e-12)
    assert losses.spectral_convergence(2 * x, x, 512, conventional=True) == pytest.approx(1.0)
    y = sig(3)
    a, b = dsp.magnitude(dsp.AudioBuffer(y, SR), 256, 64), dsp.magnitude(dsp.AudioBuffer(x, SR), 256, 64)
    ref = math.sqrt(np.sum((a - b) ** 2)) / math.sqrt(np.sum(a ** 2))
    assert abs(losses.spectral_convergence(y, x, 256, 64) - ref) <= 1e-10


def test_spectral_convergence_silent_estimate_capped(caplog):
    with caplog.at_level("WARNING"):
        v = losses.spectral_convergence(np.zeros(4000), sig(4, 4000), 256)
    assert v == losses.SC_CAP and "zero" in caplog.text


def test_magnitude_loss_examples():
    x = sig(5)
    assert losses.magnitude_loss(math.e * x, x, 512) == pytest.approx(1.0, abs=1e-9)
    y = sig(6)
    a = dsp.magnitude(dsp.AudioBuffer(y, SR), 128, 32)
    b = dsp.magnitude(dsp.AudioBuffer(x, SR), 128, 32)
    ref = np.mean(np.abs(np.log(np.maximum(a, 1e-8)) - np.log(np.maximum(b, 1e-8))))
    assert abs(losses.magnitude_loss(y, x, 128, 32) - ref) <= 1e-10


def test_time_components_examples():
    a, b = sig(7, 1000), sig(8, 1000)
    assert losses.energy_loss(a, b, 1) == pytest.approx(abs(np.mean(a ** 2) - np.mean(b ** 2)))
    assert losses.phase_loss(a, b, 1) == 0.0
    c1, c2 = np.full(1000, 0.3), np.full(1000, -0.7)
    for w in (1, 7, 240, 1000):
        assert losses.phase_loss(c1, c2, w) <= 1e-15
    wa, wb = oracles.window_mean_loop(list(a), 10), oracles.window_mean_loop(list(b), 10)
    assert losses.segment_loss(a, b, 10) == pytest.approx(
        np.mean(np.abs(np.subtract(wa, wb))), abs=1e-14)
    ea = oracles.window_mean_loop(list(a ** 2), 10)
    eb = oracles.window_mean_loop(list(b ** 2), 10)
    assert losses.phase_loss(a, b, 10) == pytest.approx(
        np.mean(np.abs(np.diff(ea) - np.diff(eb))), abs=1e-14)
    with pytest.raises(ValueError):
        losses.segment_loss(a, b, 2000)


def test_length_mismatch():
    with pytest.raises(ValueError):
        losses.mel_loss(np.zeros(100), np.zeros(101))
    with pytest.raises(ValueError):
        losses.segment_loss(np.zeros(100), np.zeros(101), 2)


@given(st.integers(0, 1000))
def test_losses_non_negative(seed):
    a, b = sig(seed, 3000), sig(seed + 1, 3000)
    cfg = MultiResConfig(freq_windows=((64, 16), (256, 64)), time_windows=(1, 30))
    t = losses.all_losses(a, b, cfg)
    comps = t["components"]
    assert comps["mel"] >= 0
    for k in ("sc", "mag", "seg", "energy", "phase"):
        assert all(v >= 0 for v in comps[k])
    assert t["frequency_loss"] >= 0 and t["time_loss"] >= 0


def test_single_resolution_equals_component():
    a, b = sig(9), sig(10)
    w = LossWeights()
    cfg = MultiResConfig(freq_windows=((512, 128),), time_windows=(240,))
    f = losses.frequency_loss(a, b, cfg, w)
    ref = (w.lambda_mel * losses.mel_loss(a, b) + w.lambda_sc * losses.spectral_convergence(a, b, 512, 128)
           + w.lambda_mag * losses.magnitude_loss(a, b, 512, 128))
    assert abs(f - ref) <= 1e-12
    t = losses.time_loss(a, b, cfg, w)
    ref = (w.lambda_seg * losses.segment_loss(a, b, 240) + w.lambda_energy * losses.energy_loss(a, b, 240)
           + w.lambda_phase * losses.phase_loss(a, b, 240))
    assert abs(t - ref) <= 1e-12


def test_zero_weights_and_empty_config():
    a, b = sig(11), sig(12)
    zero = LossWeights(*(0.0,) * 7)
    assert losses.frequency_loss(a, b, weights=zero) == 0.0
    assert losses.time_loss(a, b, weights=zero) == 0.0
    with pytest.raises(ValueError):
        losses.frequency_loss(a, b, MultiResConfig(freq_windows=()))
    with pytest.raises(ValueError):
        losses.time_loss(a, b, MultiResConfig(time_windows=()))


def test_weights_enter_linearly():
    a, b = sig(13), sig(14)
    w1 = LossWeights(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.0)
    w2 = LossWeights(0.5, 7.0, 1.5, 9.0, 0.0, 2.0, 0.0)
    both = LossWeights(*(x + y for x, y in zip(w1.to_dict().values(), w2.to_dict().values())))
    for fn in (losses.frequency_loss, losses.time_loss):
        assert fn(a, b, weights=both) == pytest.approx(fn(a, b, weights=w1) + fn(a, b, weights=w2),
                                                       rel=1e-12)
