"""Hot inner loops with a numba path and a numpy/scipy fallback.

The image-source kernel runs under numba when numba imports cleanly and the
environment variable ``RESTORELAB_NUMBA`` is not set to ``0``/``false``/``no``.
The biquad cascade always uses scipy, which measured faster.  Both
paths are always importable so the benchmark and the tests can compare them.
"""

from __future__ import annotations

import os

import numpy as np
from scipy import signal

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def numba_enabled() -> bool:
    flag = os.environ.get("RESTORELAB_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# biquad cascade (direct form II transposed)


@njit(cache=True)
def _sos_filter_jit(sos, x):
    n_sec = sos.shape[0]
    y = x.copy()
    for s in range(n_sec):
        b0 = sos[s, 0] / sos[s, 3]
        b1 = sos[s, 1] / sos[s, 3]
        b2 = sos[s, 2] / sos[s, 3]
        a1 = sos[s, 4] / sos[s, 3]
        a2 = sos[s, 5] / sos[s, 3]
        z1 = 0.0
        z2 = 0.0
        for i in range(y.shape[0]):
            xi = y[i]
            yi = b0 * xi + z1
            z1 = b1 * xi - a1 * yi + z2
            z2 = b2 * xi - a2 * yi
            y[i] = yi
    return y


def sos_filter_numba(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _sos_filter_jit(np.ascontiguousarray(sos, dtype=np.float64),
                           np.ascontiguousarray(x, dtype=np.float64))


def sos_filter_numpy(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    return signal.sosfilt(np.asarray(sos, dtype=np.float64), np.asarray(x, dtype=np.float64))


def sos_filter(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    # scipy's compiled loop beats the jitted one (see benchmarks), so it is
    # used regardless of the flag; the numba kernel stays for comparison.
    return sos_filter_numpy(sos, x)


# ---------------------------------------------------------------------------
# image-source accumulation
#
# Each axis contributes a list of image coordinates and the number of wall
# reflections needed to reach them; the 3-D image set is their outer product.
# Every image within ``max_dist`` of the mic is rendered as a Hann-windowed
# sinc pulse centred on its fractional arrival time.


@njit(cache=True)
def _image_source_jit(cx, rx, cy, ry, cz, rz, mic, orient, cardioid, beta,
                      fs, c, max_dist, half_width, out):
    n_out = out.shape[0]
    max_d2 = max_dist * max_dist
    inv_4pi = 1.0 / (4.0 * np.pi)
    for i in range(cx.shape[0]):
        dx = cx[i] - mic[0]
        dx2 = dx * dx
        if dx2 > max_d2:
            continue
        for j in range(cy.shape[0]):
            dy = cy[j] - mic[1]
            dxy2 = dx2 + dy * dy
            if dxy2 > max_d2:
                continue
            for k in range(cz.shape[0]):
                dz = cz[k] - mic[2]
                d2 = dxy2 + dz * dz
                if d2 > max_d2:
                    continue
                d = np.sqrt(d2)
                if d < 1e-9:
                    continue
                amp = beta ** (rx[i] + ry[j] + rz[k]) * inv_4pi / d
                if cardioid:
                    cos_t = (dx * orient[0] + dy * orient[1] + dz * orient[2]) / d
                    amp *= 0.5 * (1.0 + cos_t)
                t = d / c * fs
                t0 = int(np.floor(t))
                for n in range(t0 - half_width + 1, t0 + half_width + 1):
                    if n < 0 or n >= n_out:
                        continue
                    u = n - t
                    w = 0.5 * (1.0 + np.cos(np.pi * u / half_width))
                    if u == 0.0:
                        sinc = 1.0
                    else:
                        sinc = np.sin(np.pi * u) / (np.pi * u)
                    out[n] += amp * w * sinc
    return out


def image_source_numba(cx, rx, cy, ry, cz, rz, mic, orient, cardioid, beta,
                       fs, c, max_dist, half_width, n_out):
    out = np.zeros(n_out, dtype=np.float64)
    return _image_source_jit(
        np.asarray(cx, np.float64), np.asarray(rx, np.int64),
        np.asarray(cy, np.float64), np.asarray(ry, np.int64),
        np.asarray(cz, np.float64), np.asarray(rz, np.int64),
        np.asarray(mic, np.float64), np.asarray(orient, np.float64),
        bool(cardioid), float(beta), float(fs), float(c), float(max_dist),
        int(half_width), out)


def image_source_numpy(cx, rx, cy, ry, cz, rz, mic, orient, cardioid, beta,
                       fs, c, max_dist, half_width, n_out):
    cx, cy, cz = (np.asarray(a, np.float64) for a in (cx, cy, cz))
    rx, ry, rz = (np.asarray(a, np.int64) for a in (rx, ry, rz))
    mic = np.asarray(mic, np.float64)
    orient = np.asarray(orient, np.float64)
    out = np.zeros(n_out, dtype=np.float64)
    offsets = np.arange(-half_width + 1, half_width + 1)

    dy = cy - mic[1]
    dz = cz - mic[2]
    dyz2 = dy[:, None] ** 2 + dz[None, :] ** 2
    ryz = ry[:, None] + rz[None, :]
    max_d2 = max_dist * max_dist
    # one x-slab at a time keeps memory bounded
    for i in range(cx.shape[0]):
        dx = cx[i] - mic[0]
        d2 = dx * dx + dyz2
        keep = d2 <= max_d2
        if not keep.any():
            continue
        jj, kk = np.nonzero(keep)
        d = np.sqrt(d2[jj, kk])
        valid = d >= 1e-9
        jj, kk, d = jj[valid], kk[valid], d[valid]
        amp = beta ** (rx[i] + ryz[jj, kk]).astype(np.float64) / (4.0 * np.pi * d)
        if cardioid:
            cos_t = (dx * orient[0] + dy[jj] * orient[1] + dz[kk] * orient[2]) / d
            amp = amp * 0.5 * (1.0 + cos_t)
        t = d / c * fs
        taps = np.floor(t).astype(np.int64)[:, None] + offsets[None, :]
        u = taps - t[:, None]
        w = 0.5 * (1.0 + np.cos(np.pi * u / half_width))
        vals = amp[:, None] * w * np.sinc(u)
        inside = (taps >= 0) & (taps < n_out)
        out += np.bincount(taps[inside], weights=vals[inside], minlength=n_out)[:n_out]
    return out


def image_source(*args):
    if numba_enabled():
        return image_source_numba(*args)
    return image_source_numpy(*args)
