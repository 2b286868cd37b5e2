"""Direct spectral reconstruction from a sinogram.

Every Cartesian frequency (n, m) of the upper half-plane is evaluated
independently as a 1D sum over the detector of the projection taken at
angle ``atan2(m, n)`` (angularly interpolated between acquired views).
The lower half follows from Hermitian symmetry, the DC term is the mean
projection sum, and one 2D IDFT yields the image.  No ramp filter and no
frequency-domain regridding are involved.

Pipeline::

    assemble_spectrum -> hermitian_fill -> center_to_origin_shift -> idft2
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from ditrecon.errors import ConsistencyError, InvalidArgumentError
from ditrecon.grid import ImageGrid, InterpolationKernel, Sinogram

SPEC_MAGIC = b"SPEC1"

CANONICAL, DC, CONJUGATE = "canonical-half", "dc", "conjugate-half"


def classify(n: int, m: int) -> str:
    if n == 0 and m == 0:
        return DC
    if m > 0 or (m == 0 and n > 0):
        return CANONICAL
    return CONJUGATE


@dataclass(frozen=True)
class HalfPlaneSpectrum:
    """Directly computed spectrum samples, stored in an rfft-like layout.

    ``values[n + T//2, m]`` for ``m`` in ``0..T/2``:

    * ``1 <= m < T/2`` -- canonical samples D(n, m), all n;
    * ``m == 0`` -- D(n, 0) for ``n > 0``; slot ``n = -T/2`` holds the
      Nyquist axis sample evaluated at (+T/2, 0); other ``n <= 0`` slots
      are unused and zero;
    * ``m == T/2`` -- the Nyquist row evaluated at (n, +T/2).  Its
      in-range Hermitian partners lie on the same row, so ``hermitian_fill``
      projects it onto the Hermitian-consistent subspace.

    Nothing from the conjugate half-plane is stored.
    """

    size: int
    dc: complex
    values: np.ndarray

    def __post_init__(self) -> None:
        h = self.size // 2
        if self.values.shape != (self.size, h + 1):
            raise InvalidArgumentError(f"values must have shape {(self.size, h + 1)}, got {self.values.shape}")
        if abs(complex(self.dc).imag) > 1e-9 * max(abs(self.dc), 1e-300):
            raise InvalidArgumentError(f"dc must be real, got {self.dc}")

    def entry(self, n: int, m: int) -> complex:
        """Stored sample for a canonical (n, m) or the DC term."""
        kind = classify(n, m)
        if kind == DC:
            return complex(self.dc)
        if kind != CANONICAL:
            raise InvalidArgumentError(f"({n}, {m}) lies in the conjugate half-plane; not stored")
        return complex(self.values[n + self.size // 2, m])


# -- compiled kernels ------------------------------------------------------


@njit(cache=True, inline="always")
def _keys(s):
    a = -0.5
    s = abs(s)
    if s <= 1.0:
        return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0
    if s < 2.0:
        return ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    return 0.0


@njit(cache=True, inline="always")
def _taps(x, kind, idx, w):
    """Fill angular sample indices/weights for fractional position x; return tap count."""
    if kind == 0:
        idx[0] = math.floor(x + 0.5)
        w[0] = 1.0
        return 1
    base = math.floor(x)
    f = x - base
    if kind == 1:
        idx[0] = base
        idx[1] = base + 1
        w[0] = 1.0 - f
        w[1] = f
        return 2
    for p in range(4):
        idx[p] = base - 1 + p
        w[p] = _keys(f + 1.0 - p)
    return 4


@njit(cache=True, nogil=True)
def _spectrum_points(R, kind, ns, ms, half_pixel, out):
    T, A = R.shape
    h = T // 2
    idx = np.empty(4, np.int64)
    w = np.empty(4)
    col = np.empty(4, np.int64)
    flip = np.empty(4, np.bool_)
    for p in range(ns.shape[0]):
        n = ns[p]
        m = ms[p]
        r = math.sqrt(n * n + m * m)
        if n == 0:
            x = 0.5 * A
        else:
            x = math.atan2(m, n) * A / math.pi
        k = _taps(x, kind, idx, w)
        for q in range(k):
            # a sample one half-turn away is the same view with the detector reversed
            turns = idx[q] // A
            col[q] = idx[q] - turns * A
            flip[q] = turns % 2 != 0
        omega = 2.0 * math.pi * r / T
        # signed distance of detector bin t from the pixel origin for this view
        shift = 0.0
        if half_pixel:
            shift = 0.5 * (1.0 - (n + m) / r)
        ph = omega * (-h + shift)
        zr = math.cos(ph)
        zi = -math.sin(ph)
        sr = math.cos(omega)
        si = -math.sin(omega)
        acc_r = 0.0
        acc_i = 0.0
        for ti in range(T):
            v = 0.0
            for q in range(k):
                if flip[q]:
                    v += w[q] * R[T - 1 - ti, col[q]]
                else:
                    v += w[q] * R[ti, col[q]]
            acc_r += v * zr
            acc_i += v * zi
            zr, zi = zr * sr - zi * si, zr * si + zi * sr
        out[p] = complex(acc_r, acc_i)


# -- public API ------------------------------------------------------------


def _resolve_angle(sino: Sinogram, t: int, a: int) -> float:
    T, A = sino.values.shape
    turns = a // A
    col = a - turns * A
    ti = t + T // 2
    if turns % 2:
        ti = T - 1 - ti
    return float(sino.values[ti, col])


def angular_interpolate(sino: Sinogram, t: int, theta: float, kernel: InterpolationKernel) -> float:
    """Projection value at detector ``t`` (centered) and arbitrary angle ``theta``.

    Taps that fall outside ``[0, A-1]`` wrap by half-turns; each half-turn
    reverses the detector (t -> -t-1 on the even centered grid).
    """
    if not (0.0 <= theta < math.pi):
        raise InvalidArgumentError(f"theta must lie in [0, pi), got {theta}")
    h = sino.detectors // 2
    if not (-h <= t < h):
        raise InvalidArgumentError(f"detector index {t} outside [{-h}, {h - 1}]")
    idx, w = kernel.weights(theta * sino.angles / math.pi)
    return float(sum(wi * _resolve_angle(sino, t, int(a)) for a, wi in zip(idx, w)))


def _chunks(n: int, parts: int) -> list[slice]:
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [slice(bounds[i], bounds[i + 1]) for i in range(parts) if bounds[i + 1] > bounds[i]]


def spectrum_at(
    sino: Sinogram,
    ns: np.ndarray,
    ms: np.ndarray,
    kernel: InterpolationKernel,
    *,
    half_pixel: bool = True,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate D at arbitrary upper-half-plane frequencies (vectorised)."""
    ns = np.ascontiguousarray(ns, dtype=np.int64)
    ms = np.ascontiguousarray(ms, dtype=np.int64)
    out = np.empty(ns.shape[0], dtype=np.complex128)
    R = np.ascontiguousarray(sino.values)
    if workers <= 1 or ns.shape[0] < 1024:
        _spectrum_points(R, kernel.code, ns, ms, half_pixel, out)
        return out

    def run(sl: slice) -> None:
        _spectrum_points(R, kernel.code, ns[sl], ms[sl], half_pixel, out[sl])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run, _chunks(ns.shape[0], workers * 4)))
    return out


def dc_estimate(sino: Sinogram, mode: str = "average") -> float:
    """Total image mass from the projections.

    ``average`` uses the mean over all views of the per-view sum (robust to
    corner clipping at oblique views); ``single`` uses only the first view.
    """
    if mode == "average":
        return float(sino.values.sum(axis=0).mean())
    if mode == "single":
        return float(sino.values[:, 0].sum())
    raise InvalidArgumentError(f"unknown dc mode {mode!r}")


def assemble_spectrum(
    sino: Sinogram,
    kernel: InterpolationKernel,
    *,
    dc_mode: str = "average",
    half_pixel: bool = True,
    workers: int = 1,
) -> HalfPlaneSpectrum:
    """Compute the canonical half-plane spectrum directly from projections.

    ``half_pixel`` measures each detector bin from the pixel-index origin
    rather than from the rotation pivot at (-0.5, -0.5); without it
    oblique frequencies pick up a phase error of ``(omega - u - v)/2``.
    The correction vanishes on both frequency axes.
    """
    T, A = sino.values.shape
    if T % 2:
        raise InvalidArgumentError(f"detector count must be even, got {T}")
    if A < kernel.taps:
        raise InvalidArgumentError(f"{kernel.kind} kernel needs at least {kernel.taps} views, got {A}")
    h = T // 2
    n_all = np.arange(-h, h)
    # m = 1 .. h (the last column is the Nyquist row evaluated at +h)
    mm, nn = np.meshgrid(np.arange(1, h + 1), n_all, indexing="xy")
    ns = np.concatenate([nn.ravel(), np.arange(1, h + 1)])
    ms = np.concatenate([mm.ravel(), np.zeros(h, dtype=np.int64)])
    vals = spectrum_at(sino, ns, ms, kernel, half_pixel=half_pixel, workers=workers)

    values = np.zeros((T, h + 1), dtype=np.complex128)
    values[:, 1:] = vals[: T * h].reshape(T, h)
    axis = vals[T * h :]
    values[h + 1 :, 0] = axis[: h - 1]
    values[0, 0] = axis[h - 1]
    dc = dc_estimate(sino, dc_mode)
    values[h, 0] = dc
    return HalfPlaneSpectrum(size=T, dc=complex(dc), values=values)


def hermitian_fill(hp: HalfPlaneSpectrum) -> np.ndarray:
    """Full centered T x T spectrum ``M[n + T/2, m + T/2]``.

    Conjugate-half entries are conj of their modular partner
    ``((-n) mod T, (-m) mod T)``.  Self-conjugate points (DC, the two
    Nyquist axis points and the Nyquist corner) are real, and the Nyquist
    row is replaced by its Hermitian-symmetric part, so the result is
    exactly Hermitian and its IDFT exactly real.
    """
    T = hp.size
    h = T // 2
    V = hp.values
    M = np.zeros((T, T), dtype=np.complex128)
    # upper half, m = 1 .. h-1  (array column m + h)
    M[:, h + 1 :] = V[:, 1:h]
    # lower half by modular Hermitian symmetry: row index of -n is (T - i) % T
    partner = (T - np.arange(T)) % T
    M[:, 1:h] = np.conj(V[partner, 1:h][:, ::-1])
    # m = 0 axis
    M[h + 1 :, h] = V[h + 1 :, 0]
    M[1:h, h] = np.conj(V[h + 1 :, 0][::-1])
    M[h, h] = hp.dc.real
    M[0, h] = V[0, 0].real
    # Nyquist row m = -T/2: symmetric part of the directly evaluated row
    row = V[:, h]
    M[:, 0] = 0.5 * (row + np.conj(row[partner]))
    return M


def center_to_origin_shift(M: np.ndarray) -> np.ndarray:
    """Move the centered DC (array index T/2, T/2) to array index (0, 0).

    ``out[n', m'] = M[(n' + T/2) mod T, (m' + T/2) mod T]``; an involution
    for even T.
    """
    T0, T1 = M.shape
    if T0 % 2 or T1 % 2:
        raise InvalidArgumentError("shift requires even dimensions")
    i = (np.arange(T0) + T0 // 2) % T0
    j = (np.arange(T1) + T1 // 2) % T1
    return M[np.ix_(i, j)]


def idft2(M_shifted: np.ndarray, *, rtol: float = 1e-9) -> ImageGrid:
    """Normalised 2D IDFT of an origin-aligned spectrum, re-centered.

    Raises ConsistencyError when the imaginary residual exceeds
    ``rtol * max|M| / T**2``: the input was not Hermitian.
    """
    T = M_shifted.shape[0]
    f = np.fft.ifft2(M_shifted)
    scale = np.abs(M_shifted).max() / (T * T)
    resid = np.abs(f.imag).max() if f.size else 0.0
    if resid > rtol * scale and resid > 0.0:
        raise ConsistencyError(
            f"imaginary residual {resid:.3e} exceeds {rtol:g} x {scale:.3e}; spectrum is not Hermitian"
        )
    return ImageGrid(center_to_origin_shift(f.real))


def reconstruct_dit(
    sino: Sinogram,
    kernel: InterpolationKernel | str = "cubic",
    *,
    dc_mode: str = "average",
    half_pixel: bool = True,
    workers: int = 1,
) -> ImageGrid:
    """Reconstruct an image from ``sino`` by direct spectrum assembly."""
    if isinstance(kernel, str):
        kernel = InterpolationKernel(kernel)
    hp = assemble_spectrum(sino, kernel, dc_mode=dc_mode, half_pixel=half_pixel, workers=workers)
    return idft2(center_to_origin_shift(hermitian_fill(hp)))


def write_spectrum(M_shifted: np.ndarray, path: str | Path) -> None:
    """Debug dump: SPEC1 magic, T as u32 LE, then T*T complex128 LE (row-major)."""
    T = M_shifted.shape[0]
    data = np.ascontiguousarray(M_shifted, dtype="<c16").tobytes()
    Path(path).write_bytes(SPEC_MAGIC + struct.pack("<I", T) + data)


def read_spectrum(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:5] != SPEC_MAGIC:
        raise InvalidArgumentError(f"{path}: not a SPEC1 file")
    (T,) = struct.unpack("<I", raw[5:9])
    return np.frombuffer(raw, dtype="<c16", offset=9).reshape(T, T).copy()
