"""Filtered back projection baseline and its moment-calibrated variants.

Deliberately plain: bare ramp |omega| on the native detector length (no
zero padding, no apodisation window) and Keys cubic interpolation on the
detector during back projection.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from ditrecon.errors import DegenerateInputError, InvalidArgumentError
from ditrecon.grid import ImageGrid, Sinogram

FILTERS = ("ramp",)


def ramp_weights(length: int) -> np.ndarray:
    """|omega_k| with omega_k = 2*pi*k/T, in numpy FFT order (k = 0 first)."""
    return np.abs(2.0 * np.pi * np.fft.fftfreq(length))


def filter_projections(sino: Sinogram, filter_name: str = "ramp") -> Sinogram:
    if filter_name not in FILTERS:
        raise InvalidArgumentError(f"unsupported filter {filter_name!r}; only {FILTERS} is implemented")
    T = sino.detectors
    if T % 2:
        raise InvalidArgumentError("detector count must be even")
    spec = np.fft.fft(sino.values, axis=0)
    spec *= ramp_weights(T)[:, None]
    return Sinogram(np.fft.ifft(spec, axis=0).real)


@njit(cache=True, inline="always")
def _keys(s):
    a = -0.5
    s = abs(s)
    if s <= 1.0:
        return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0
    if s < 2.0:
        return ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    return 0.0


@njit(cache=True, nogil=True)
def _backproject(Q, cos_t, sin_t, a_lo, a_hi, out):
    T = Q.shape[0]
    h = T // 2
    for a in range(a_lo, a_hi):
        ca = cos_t[a]
        sa = sin_t[a]
        for i in range(T):
            xj = i - h + 0.5
            for j in range(T):
                # detector bin through pixel (i, j), measured from the grid pivot
                x = xj * ca + (j - h + 0.5) * sa - 0.5 + h
                if x <= -2.0 or x >= T + 1.0:
                    continue
                ix = math.floor(x)
                f = x - ix
                acc = 0.0
                for p in range(4):
                    ti = ix - 1 + p
                    if 0 <= ti < T:
                        acc += _keys(f + 1.0 - p) * Q[ti, a]
                out[i, j] += acc


def back_project(filtered: Sinogram, *, workers: int = 1) -> ImageGrid:
    """Smear each filtered view back across the grid.

    f(j, k) = (pi / A) / (2 pi) * sum_a Q_a(t), with t the detector
    position of the pixel centre in view a; positions outside the detector
    contribute nothing.
    """
    T, A = filtered.values.shape
    phi = np.arange(A) * (math.pi / A)
    cos_t, sin_t = np.cos(phi), np.sin(phi)
    cos_t[0], sin_t[0] = 1.0, 0.0
    if A % 2 == 0:
        cos_t[A // 2], sin_t[A // 2] = 0.0, 1.0
    Q = np.ascontiguousarray(filtered.values)
    if workers <= 1 or A < 2 * workers:
        acc = np.zeros((T, T))
        _backproject(Q, cos_t, sin_t, 0, A, acc)
    else:
        # private accumulator per worker, reduced in a fixed order
        bounds = np.linspace(0, A, workers + 1).astype(int)
        parts = [np.zeros((T, T)) for _ in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda w: _backproject(Q, cos_t, sin_t, bounds[w], bounds[w + 1], parts[w]), range(workers)))
        acc = np.sum(parts, axis=0)
    return ImageGrid(acc * (math.pi / A) / (2.0 * math.pi))


def reconstruct_fbp(sino: Sinogram, *, workers: int = 1) -> ImageGrid:
    return back_project(filter_projections(sino), workers=workers)


def calibrate_mean(img: ImageGrid, target_mean: float) -> ImageGrid:
    """Shift intensities so the image mean equals ``target_mean``."""
    return ImageGrid(img.pixels + (target_mean - img.pixels.mean()))


def calibrate_mean_sigma(img: ImageGrid, target_mean: float, target_sigma: float) -> ImageGrid:
    """Affine map matching both mean and (population) standard deviation."""
    sigma = img.pixels.std()
    if sigma == 0.0 or not np.isfinite(sigma):
        raise DegenerateInputError("cannot match sigma of a constant image")
    z = (img.pixels - img.pixels.mean()) / sigma
    return ImageGrid(z * target_sigma + target_mean)


def sinogram_mean(sino: Sinogram) -> float:
    """Image mean implied by the data: average view sum over T^2 pixels."""
    return float(sino.values.sum(axis=0).mean()) / sino.detectors**2


def reconstruct_fbp_m(sino: Sinogram, *, workers: int = 1) -> ImageGrid:
    return calibrate_mean(reconstruct_fbp(sino, workers=workers), sinogram_mean(sino))


def reconstruct_fbp_ms(sino: Sinogram, truth_sigma: float, *, workers: int = 1) -> ImageGrid:
    """Mean from the data, sigma from ground truth (evaluation-only calibration)."""
    return calibrate_mean_sigma(reconstruct_fbp(sino, workers=workers), sinogram_mean(sino), truth_sigma)
