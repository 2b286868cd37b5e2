"""Core containers, phantoms and image file I/O.

Layout convention
-----------------
A T x T grid is stored as ``pixels[j + T//2, k + T//2]`` for centered
coordinates ``j, k`` in ``[-T/2, T/2 - 1]``.  Axis 0 is the x direction
(``j``), axis 1 is y (``k``).  Every module uses this offset; nothing else
should assume a different origin.

Sinograms are stored as ``values[t + T//2, a]`` with angle ``a * pi / A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from ditrecon.errors import FormatError, InvalidArgumentError

KEYS_A = -0.5

PHANTOM_KINDS = ("disk", "shepp_logan", "constant", "delta", "rings", "blobs", "squares", "texture")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImageGrid:
    """Real T x T raster on centered coordinates."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] != px.shape[1]:
            raise InvalidArgumentError(f"image must be square, got shape {px.shape}")
        if px.shape[0] == 0 or px.shape[0] % 2:
            raise InvalidArgumentError(f"image side must be positive and even, got {px.shape[0]}")
        if not np.all(np.isfinite(px)):
            raise InvalidArgumentError("image contains non-finite pixels")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    def at(self, j: int, k: int) -> float:
        """Pixel value at centered coordinate (j, k)."""
        h = self.size // 2
        return float(self.pixels[j + h, k + h])

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Centered coordinate arrays (j, k), both shaped like ``pixels``."""
        r = np.arange(self.size) - self.size // 2
        return np.meshgrid(r, r, indexing="ij")


@dataclass(frozen=True)
class Sinogram:
    """T x A projection samples; column ``a`` holds angle ``a*pi/A``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise InvalidArgumentError(f"sinogram must be 2-D, got shape {v.shape}")
        if v.shape[0] == 0 or v.shape[0] % 2:
            raise InvalidArgumentError(f"detector count must be positive and even, got {v.shape[0]}")
        if v.shape[1] < 1:
            raise InvalidArgumentError("sinogram needs at least one angle")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("sinogram contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def detectors(self) -> int:
        return self.values.shape[0]

    @property
    def angles(self) -> int:
        return self.values.shape[1]

    def angle_of(self, a: int) -> float:
        return a * math.pi / self.angles

    def angle_array(self) -> np.ndarray:
        return np.arange(self.angles) * (math.pi / self.angles)

    def column(self, a: int) -> np.ndarray:
        return self.values[:, a]


def keys_cubic(x: np.ndarray | float, a: float = KEYS_A) -> np.ndarray:
    """Keys cubic-convolution kernel evaluated at offset ``x``."""
    s = np.abs(np.asarray(x, dtype=np.float64))
    s2 = s * s
    s3 = s2 * s
    near = (a + 2.0) * s3 - (a + 3.0) * s2 + 1.0
    far = a * s3 - 5.0 * a * s2 + 8.0 * a * s - 4.0 * a
    return np.where(s <= 1.0, near, np.where(s < 2.0, far, 0.0))


_KERNEL_ALIASES = {"nn": "nearest", "nearest": "nearest", "linear": "linear", "cubic": "cubic"}
_KERNEL_SUPPORT = {"nearest": 0.5, "linear": 1.0, "cubic": 2.0}


@dataclass(frozen=True)
class InterpolationKernel:
    """Angular interpolation scheme over uniformly spaced samples.

    ``weights(x)`` returns the integer sample indices touched by a
    fractional sample position ``x`` together with their weights.  Indices
    may fall outside ``[0, A-1]``; callers resolve them (for angles, via
    the half-turn wrap of the Radon transform).
    """

    kind: str = "cubic"

    def __post_init__(self) -> None:
        kind = _KERNEL_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise InvalidArgumentError(f"unknown kernel {self.kind!r}; expected nearest, linear or cubic")
        object.__setattr__(self, "kind", kind)

    @property
    def support(self) -> float:
        return _KERNEL_SUPPORT[self.kind]

    @property
    def taps(self) -> int:
        return {"nearest": 1, "linear": 2, "cubic": 4}[self.kind]

    @property
    def code(self) -> int:
        """Small integer id used by the compiled kernels."""
        return {"nearest": 0, "linear": 1, "cubic": 2}[self.kind]

    def weights(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "nearest":
            return np.array([math.floor(x + 0.5)]), np.ones(1)
        base = math.floor(x)
        frac = x - base
        if self.kind == "linear":
            return np.array([base, base + 1]), np.array([1.0 - frac, frac])
        idx = np.arange(base - 1, base + 3)
        return idx, keys_cubic(x - idx)


@dataclass(frozen=True)
class MetricsReport:
    psnr: float
    p_rp: float
    ssim: float
    sdr: float
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # psnr / p_rp may be +inf ("exact"); nan is never valid.
        for name in ("psnr", "p_rp", "ssim", "sdr"):
            if math.isnan(getattr(self, name)):
                raise InvalidArgumentError(f"{name} is NaN")
        if not math.isfinite(self.ssim) or self.ssim > 1.0 + 1e-12:
            raise InvalidArgumentError(f"ssim out of range: {self.ssim}")
        if not math.isfinite(self.sdr):
            raise InvalidArgumentError(f"sdr not finite: {self.sdr}")


# Ten-ellipse head phantom: (value, semi-axis x, semi-axis y, centre x, centre y, tilt deg),
# in units of the half field of view.  Values are the original Shepp & Logan densities.
_SHEPP_LOGAN = (
    (2.00, 0.6900, 0.920, 0.00, 0.0000, 0.0),
    (-0.98, 0.6624, 0.874, 0.00, -0.0184, 0.0),
    (-0.02, 0.1100, 0.310, 0.22, 0.0000, -18.0),
    (-0.02, 0.1600, 0.410, -0.22, 0.0000, 18.0),
    (0.01, 0.2100, 0.250, 0.00, 0.3500, 0.0),
    (0.01, 0.0460, 0.046, 0.00, 0.1000, 0.0),
    (0.01, 0.0460, 0.046, 0.00, -0.1000, 0.0),
    (0.01, 0.0460, 0.023, -0.08, -0.6050, 0.0),
    (0.01, 0.0230, 0.023, 0.00, -0.6060, 0.0),
    (0.01, 0.0230, 0.046, 0.06, -0.6050, 0.0),
)


def _ellipses(size: int, table) -> np.ndarray:
    h = size // 2
    r = (np.arange(size) - h) / h
    # axis 0 = file rows (y pointing up on screen), axis 1 = columns (x)
    y, x = np.meshgrid(-r, r, indexing="ij")
    out = np.zeros((size, size))
    for value, ax, ay, cx, cy, tilt in table:
        th = math.radians(tilt)
        c, s = math.cos(th), math.sin(th)
        dx, dy = x - cx, y - cy
        u = (dx * c + dy * s) / ax
        v = (-dx * s + dy * c) / ay
        out[u * u + v * v <= 1.0] += value
    return out


def _shepp_logan(size: int) -> np.ndarray:
    p = _ellipses(size, _SHEPP_LOGAN)
    p -= p.min()
    return 255.0 * (p / p.max())


def _support_mask(size: int) -> np.ndarray:
    """1 inside radius 0.85*T/2, ramping to 0 at 0.9*T/2 (well inside the frame)."""
    j, k = np.meshgrid(np.arange(size) - size // 2, np.arange(size) - size // 2, indexing="ij")
    r = np.hypot(j + 0.5, k + 0.5) / (size / 2)
    return np.clip((0.9 - r) / 0.05, 0.0, 1.0)


def _rings(size: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(size) - size // 2, np.arange(size) - size // 2, indexing="ij")
    r = np.hypot(j + 0.5, k + 0.5) / (size / 2)
    out = np.zeros((size, size))
    for outer, value in ((0.85, 60.0), (0.70, 180.0), (0.55, 90.0), (0.35, 230.0), (0.15, 30.0)):
        out[r < outer] = value
    return out


def _blobs(size: int) -> np.ndarray:
    rng = np.random.default_rng(1234)
    j, k = np.meshgrid(np.arange(size) - size // 2, np.arange(size) - size // 2, indexing="ij")
    out = np.zeros((size, size))
    for _ in range(24):
        rad = 0.25 * size * math.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2.0 * math.pi)
        w = rng.uniform(0.02, 0.06) * size
        dj, dk = j - rad * math.cos(ang), k - rad * math.sin(ang)
        out += rng.uniform(0.2, 1.0) * np.exp(-(dj * dj + dk * dk) / (2 * w * w))
    out *= _support_mask(size)
    return 255.0 * (out / out.max())


def _squares(size: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(size) - size // 2, np.arange(size) - size // 2, indexing="ij")
    out = np.zeros((size, size))
    for cx, cy, half, tilt, value in (
        (0.0, 0.0, 0.28, 0.0, 70.0),
        (-0.12, -0.1, 0.09, 20.0, 200.0),
        (0.13, 0.1, 0.07, -35.0, 140.0),
        (0.02, 0.18, 0.045, 10.0, 250.0),
        (-0.14, 0.14, 0.06, 45.0, 20.0),
    ):
        th = math.radians(tilt)
        u = (j / size - cx) * math.cos(th) + (k / size - cy) * math.sin(th)
        v = -(j / size - cx) * math.sin(th) + (k / size - cy) * math.cos(th)
        out[(np.abs(u) <= half) & (np.abs(v) <= half)] = value
    return out


def _texture(size: int) -> np.ndarray:
    # band-limited seeded noise inside a soft-edged disk, photograph-like spectrum
    rng = np.random.default_rng(99)
    spec = np.fft.fft2(rng.standard_normal((size, size)))
    f = np.fft.fftfreq(size)
    fr = np.hypot(*np.meshgrid(f, f, indexing="ij"))
    spec *= 1.0 / (1.0 + (fr / 0.02) ** 2)
    field_ = np.real(np.fft.ifft2(spec))
    field_ = (field_ - field_.min()) / (field_.max() - field_.min())
    return 255.0 * field_ * _support_mask(size)


def make_phantom(kind: str, size: int) -> ImageGrid:
    """Generate a deterministic test image.

    ``disk`` is a uniform 255 disk of radius ``0.45*size`` (strict
    inequality on integer centered coordinates), ``shepp_logan`` the
    ten-ellipse head phantom scaled to [0, 255], ``constant`` all 128 and
    ``delta`` a single 255 pixel at the centered origin.  ``rings``,
    ``blobs``, ``squares`` and ``texture`` complete the benchmark suite.
    """
    if not isinstance(size, (int, np.integer)) or size < 16 or size % 2:
        raise InvalidArgumentError(f"phantom size must be an even integer >= 16, got {size!r}")
    size = int(size)
    h = size // 2
    if kind == "constant":
        px = np.full((size, size), 128.0)
    elif kind == "delta":
        px = np.zeros((size, size))
        px[h, h] = 255.0
    elif kind == "disk":
        r = np.arange(size) - h
        j, k = np.meshgrid(r, r, indexing="ij")
        px = np.where(j * j + k * k < (0.45 * size) ** 2, 255.0, 0.0)
    elif kind == "shepp_logan":
        px = _shepp_logan(size)
    elif kind == "rings":
        px = _rings(size)
    elif kind == "blobs":
        px = _blobs(size)
    elif kind == "squares":
        px = _squares(size)
    elif kind == "texture":
        px = _texture(size)
    else:
        raise InvalidArgumentError(f"unknown phantom kind {kind!r}; choose from {', '.join(PHANTOM_KINDS)}")
    return ImageGrid(px)


def _luminance(rgb: np.ndarray) -> np.ndarray:
    rgb = rgb.astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def read_image(path: str | Path) -> ImageGrid:
    """Load an 8-bit PGM or PNG.

    Colour images are reduced to luminance with 0.299 R + 0.587 G + 0.114 B
    (kept in floating point, not re-quantised).  Rows of the file map to
    axis 0 of the grid.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in ("PNG", "PPM"):
                raise FormatError(f"{path}: unsupported image format {fmt}")
            if im.mode in ("RGB", "RGBA", "P"):
                data = _luminance(np.asarray(im.convert("RGB")))
            elif im.mode in ("L", "LA"):
                data = np.asarray(im.convert("L"), dtype=np.float64)
            else:
                raise FormatError(f"{path}: unsupported pixel mode {im.mode}")
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: cannot read image ({exc})") from exc
    rows, cols = data.shape
    if rows != cols:
        raise FormatError(f"{path}: non-square image {rows}x{cols} unsupported")
    if rows % 2:
        raise FormatError(f"{path}: odd dimensions unsupported ({rows}x{cols})")
    return ImageGrid(data)


def to_uint8(img: ImageGrid) -> np.ndarray:
    return np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)


def write_image(img: ImageGrid, path: str | Path) -> None:
    """Write an 8-bit grayscale file; format chosen by suffix (.pgm or .png)."""
    path = Path(path)
    data = to_uint8(img)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        header = f"P5\n{img.size} {img.size}\n255\n".encode("ascii")
        path.write_bytes(header + data.tobytes())
    elif suffix == ".png":
        Image.fromarray(data, mode="L").save(path, format="PNG")
    else:
        raise FormatError(f"{path}: unsupported output format {suffix!r} (use .pgm or .png)")
