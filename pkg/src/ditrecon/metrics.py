"""Image quality metrics and signed error maps."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from ditrecon.errors import DegenerateInputError, InvalidArgumentError
from ditrecon.grid import ImageGrid, Sinogram
from ditrecon.projector import forward_radon

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11 x 11 window


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x = a.pixels if isinstance(a, ImageGrid) else np.asarray(a, dtype=np.float64)
    y = b.pixels if isinstance(b, ImageGrid) else np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x, y


def psnr(a, b, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the inputs are identical."""
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def format_db(value: float) -> str:
    return "exact" if math.isinf(value) else f"{value:.4f}"


def reprojection_psnr(recon: ImageGrid, original: Sinogram, *, projected: Sinogram | None = None) -> float:
    """PSNR between the reprojected reconstruction and the measured sinogram.

    Peak is the maximum of the measured sinogram.  ``projected`` may be
    passed to reuse an already computed reprojection.
    """
    if recon.size != original.detectors:
        raise InvalidArgumentError(f"image size {recon.size} != detector count {original.detectors}")
    peak = float(original.values.max())
    if peak <= 0.0:
        raise DegenerateInputError("reference sinogram has no positive peak")
    if projected is None:
        projected = forward_radon(recon, original.angles)
    return psnr(projected.values, original.values, peak=peak)


def _gauss_window() -> np.ndarray:
    x = np.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def _local_mean(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(x, g, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, g, axis=1, mode="reflect")
    r = SSIM_RADIUS
    return out[r:-r, r:-r]


def ssim(a, b, data_range: float = 255.0) -> float:
    """Mean SSIM over fully covered 11x11 Gaussian (sigma 1.5) windows."""
    x, y = _pair(a, b)
    if min(x.shape) <= 2 * SSIM_RADIUS:
        raise InvalidArgumentError("image too small for an 11x11 SSIM window")
    g = _gauss_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = _local_mean(x, g), _local_mean(y, g)
    sxx = _local_mean(x * x, g) - mx * mx
    syy = _local_mean(y * y, g) - my * my
    sxy = _local_mean(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def sdr(recon, truth) -> float:
    """sigma(recon) / sigma(truth), population standard deviations."""
    x, y = _pair(recon, truth)
    s = float(y.std())
    if s == 0.0:
        raise DegenerateInputError("truth image is constant; SDR undefined")
    return float(x.std()) / s


def radial_correlation(recon, truth) -> float:
    """Pearson correlation between signed error and distance from the grid pivot.

    Returns 0 when either is constant (e.g. a perfect reconstruction).
    """
    x, y = _pair(recon, truth)
    err = (x - y).ravel()
    n = x.shape[0]
    r = np.arange(n) - n // 2 + 0.5
    rad = np.hypot(*np.meshgrid(r, r, indexing="ij")).ravel()
    if err.std() == 0.0:
        return 0.0
    return float(np.corrcoef(err, rad)[0, 1])


def render_error(recon, truth) -> np.ndarray:
    """RGB uint8 rendering: +error -> yellow, -error -> cyan, zero -> black."""
    x, y = _pair(recon, truth)
    err = x - y
    scale = float(np.abs(err).max())
    mag = np.zeros_like(err) if scale == 0.0 else np.abs(err) / scale
    level = np.rint(255.0 * mag).astype(np.uint8)
    rgb = np.zeros(err.shape + (3,), dtype=np.uint8)
    pos = err > 0
    neg = err < 0
    rgb[..., 0] = np.where(pos, level, 0)
    rgb[..., 1] = np.where(pos | neg, level, 0)
    rgb[..., 2] = np.where(neg, level, 0)
    return rgb


def error_map(recon, truth, path: str | Path, csv_path: str | Path | None = None) -> float:
    """Write the signed error PNG and a one-row CSV with the radial correlation."""
    path = Path(path)
    Image.fromarray(render_error(recon, truth), mode="RGB").save(path, format="PNG")
    rho = radial_correlation(recon, truth)
    x, y = _pair(recon, truth)
    csv_path = Path(csv_path) if csv_path is not None else path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["map", "max_abs_error", "radial_correlation"])
        w.writerow([path.name, repr(float(np.abs(x - y).max())), repr(rho)])
    return rho
