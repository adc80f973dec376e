"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--seconds S]
"""

from __future__ import annotations

import argparse
import time

import numpy as np
from scipy import signal

from restorelab import _accel, rir


def _best(fn, repeats):
    fn()  # warm-up (triggers JIT compilation)
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_sos(seconds, repeats):
    x = np.random.default_rng(0).standard_normal(int(seconds * 44100))
    sos = signal.cheby1(8, 0.05, 4000, fs=44100, output="sos")
    t_nb, a = _best(lambda: _accel.sos_filter_numba(sos, x), repeats)
    t_np, b = _best(lambda: _accel.sos_filter_numpy(sos, x), repeats)
    return "sos_filter", t_nb, t_np, float(np.max(np.abs(a - b)))


def bench_image_source(repeats):
    room = rir.RoomConfig(dims=(6.0, 4.5, 3.0), mic_pos=(2.0, 1.5, 1.2),
                          src_pos=(4.0, 3.0, 1.6), rt60=0.4, pattern="cardioid")
    beta = rir.matched_reflection(room)
    sr, c = 44100, rir.SPEED_OF_SOUND
    n_out = int((rir.LENGTH_FACTOR * room.rt60 + room.distance / c) * sr) + rir.SINC_HALF_WIDTH
    reach = c * n_out / sr
    axes = [rir._axis_images(s, length, reach) for s, length in zip(room.src_pos, room.dims)]
    args = (axes[0][0], axes[0][1], axes[1][0], axes[1][1], axes[2][0], axes[2][1],
            np.asarray(room.mic_pos), np.array([1.0, 0.0, 0.0]), True, beta, sr, c, reach,
            rir.SINC_HALF_WIDTH, n_out)
    t_nb, a = _best(lambda: _accel.image_source_numba(*args), repeats)
    t_np, b = _best(lambda: _accel.image_source_numpy(*args), repeats)
    return "image_source", t_nb, t_np, float(np.max(np.abs(a - b)))


def main() -> None:
    parser = argparse.ArgumentParser(description="Compare numba and numpy kernel paths")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seconds", type=float, default=10.0, help="signal length for sos_filter")
    args = parser.parse_args()

    print(f"{'kernel':<14}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'max diff':>11}")
    for name, t_nb, t_np, diff in (bench_sos(args.seconds, args.repeats),
                                   bench_image_source(args.repeats)):
        print(f"{name:<14}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x{diff:>11.2e}")


if __name__ == "__main__":
    main()
