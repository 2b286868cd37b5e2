"""Benchmark orchestration: noise, denoising, sparsity sweeps and reports.

A run is the cross product phantom x projections x noise x denoise x
method (x kernel for the direct method), plus one double-rotation row per
phantom at the densest view count.  Output is a CSV with one metrics row
per cell, a JSON manifest, an optional markdown summary and optional
signed error maps.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ditrecon.dit import reconstruct_dit
from ditrecon.errors import InvalidArgumentError
from ditrecon.fbp import calibrate_mean, calibrate_mean_sigma, reconstruct_fbp, sinogram_mean
from ditrecon.grid import PHANTOM_KINDS, ImageGrid, InterpolationKernel, Sinogram, make_phantom, read_image
from ditrecon.metrics import error_map, psnr, reprojection_psnr, sdr, ssim
from ditrecon.projector import double_rotation_test, forward_radon

log = logging.getLogger(__name__)

DEFAULT_PROJECTIONS = (800, 400, 200, 80, 40, 16)
METHODS = ("dit", "fbp", "fbp-m", "fbp-ms")
DENOISE_MODES = ("none", "pre", "post")

CSV_FIELDS = [
    "image",
    "method",
    "A",
    "kernel",
    "noise%",
    "denoise",
    "psnr",
    "p_rp",
    "ssim",
    "sdr",
    "ssim_global",
    "noise_sigma",
    "status",
]


# -- data perturbation -------------------------------------------------------


def add_wgn(sino: Sinogram, percent: float, seed: int | Sequence[int]) -> Sinogram:
    """Add white Gaussian noise with sigma = percent/100 * max(sino)."""
    if percent < 0:
        raise InvalidArgumentError(f"noise percent must be >= 0, got {percent}")
    if percent == 0:
        return sino
    rng = np.random.default_rng(seed)
    sigma = percent / 100.0 * float(sino.values.max())
    return Sinogram(sino.values + rng.normal(0.0, sigma, size=sino.values.shape))


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _smooth_axis(a: np.ndarray, g: np.ndarray, axis: int) -> np.ndarray:
    from scipy.ndimage import correlate1d

    return correlate1d(a, g, axis=axis, mode="mirror")


def gaussian_smooth(data: ImageGrid | Sinogram, sigma: float):
    """Separable Gaussian blur truncated at +-3 sigma, mirror boundaries.

    Images are blurred along both axes, sinograms only along the detector.
    """
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return data
    g = gaussian_kernel(sigma)
    if isinstance(data, Sinogram):
        return Sinogram(_smooth_axis(data.values, g, 0))
    if isinstance(data, ImageGrid):
        return ImageGrid(_smooth_axis(_smooth_axis(data.pixels, g, 0), g, 1))
    raise InvalidArgumentError(f"cannot smooth {type(data).__name__}")


def denoise_sigma(noise_pct: float) -> float:
    """Blur width used for a given noise level: half the percentage."""
    return noise_pct / 2.0


def subsample_projections(source: ImageGrid, count: int) -> Sinogram:
    """Sparse scan with ``count`` uniform views on [0, pi).

    The views are re-projected from the source image rather than decimated
    from a dense sinogram, so the angle set stays exactly a*pi/count.
    """
    if count < 4:
        raise InvalidArgumentError(f"at least 4 projections required, got {count}")
    return forward_radon(source, count)


# -- configuration -------------------------------------------------------------


@dataclass
class ExperimentConfig:
    phantoms: list[str] = field(default_factory=lambda: ["shepp_logan", "disk"])
    size: int = 512
    projections: list[int] = field(default_factory=lambda: list(DEFAULT_PROJECTIONS))
    kernels: list[str] = field(default_factory=lambda: ["cubic"])
    methods: list[str] = field(default_factory=lambda: ["dit", "fbp-m", "fbp-ms"])
    noise_levels: list[float] = field(default_factory=lambda: [0.0])
    denoise: list[str] = field(default_factory=lambda: ["none"])
    seed: int = 0
    include_drt: bool = True
    error_maps: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        for a in self.projections:
            if not 4 <= int(a) <= 800:
                raise InvalidArgumentError(f"projection counts must lie in [4, 800], got {a}")
        self.projections = [int(a) for a in self.projections]
        self.kernels = [InterpolationKernel(k).kind for k in self.kernels]
        for m in self.methods:
            if m not in METHODS:
                raise InvalidArgumentError(f"unknown method {m!r}; choose from {METHODS}")
        for d in self.denoise:
            if d not in DENOISE_MODES:
                raise InvalidArgumentError(f"unknown denoise mode {d!r}")
        for p in self.noise_levels:
            if p < 0:
                raise InvalidArgumentError(f"noise level must be >= 0, got {p}")
        if self.size < 16 or self.size % 2:
            raise InvalidArgumentError(f"size must be even and >= 16, got {self.size}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgumentError("seed must fit in 64 bits")
        self.workers = max(1, int(self.workers))

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def load_source(name: str, size: int) -> ImageGrid:
    if name in PHANTOM_KINDS:
        return make_phantom(name, size)
    return read_image(name)


def _image_label(name: str) -> str:
    return name if name in PHANTOM_KINDS else Path(name).stem


# -- execution -------------------------------------------------------------------


def _fmt(v: float) -> str:
    if isinstance(v, str):
        return v
    if math.isinf(v):
        return "exact"
    return f"{v:.6f}"


def _global_ssim(x: ImageGrid, y: ImageGrid, data_range: float = 255.0) -> float:
    a, b = x.pixels, y.pixels
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    ma, mb = a.mean(), b.mean()
    cov = ((a - ma) * (b - mb)).mean()
    return float((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (a.var() + b.var() + c2)))


def _row(image, method, A, kernel, noise, denoise, sigma, recon=None, truth=None, clean=None, status="ok"):
    row = {
        "image": image,
        "method": method,
        "A": A,
        "kernel": kernel,
        "noise%": f"{noise:g}",
        "denoise": denoise,
        "noise_sigma": _fmt(sigma),
        "status": status,
    }
    if recon is None:
        row.update({k: "" for k in ("psnr", "p_rp", "ssim", "sdr", "ssim_global")})
        return row
    row["psnr"] = _fmt(psnr(recon, truth))
    row["p_rp"] = _fmt(reprojection_psnr(recon, clean))
    row["ssim"] = _fmt(ssim(recon, truth))
    row["sdr"] = _fmt(sdr(recon, truth))
    row["ssim_global"] = _fmt(_global_ssim(recon, truth))
    return row


def _job_seed(seed: int, image_index: int, A: int, noise: float) -> list[int]:
    return [int(seed), image_index, A, int(round(noise * 1000))]


def _reconstruct(method: str, sino: Sinogram, kernel: str, truth: ImageGrid) -> ImageGrid:
    if method == "dit":
        return reconstruct_dit(sino, kernel)
    raw = reconstruct_fbp(sino)
    if method == "fbp":
        return raw
    if method == "fbp-m":
        return calibrate_mean(raw, sinogram_mean(sino))
    return calibrate_mean_sigma(raw, sinogram_mean(sino), float(truth.pixels.std()))


def _run_job(config: ExperimentConfig, image_index: int, A: int, maps_dir: str | None) -> list[dict]:
    name = config.phantoms[image_index]
    label = _image_label(name)
    rows: list[dict] = []
    try:
        truth = load_source(name, config.size)
        clean = subsample_projections(truth, A)
    except Exception as exc:  # recorded per row, the run continues
        log.warning("job %s/A=%d failed: %s", label, A, exc)
        return [_row(label, "*", A, "", 0.0, "none", 0.0, status=f"error: {exc}")]

    peak = float(clean.values.max())
    for noise in config.noise_levels:
        noisy = add_wgn(clean, noise, _job_seed(config.seed, image_index, A, noise))
        sigma = noise / 100.0 * peak
        modes = config.denoise if noise > 0 else ["none"]
        for mode in modes:
            blur = denoise_sigma(noise)
            data = gaussian_smooth(noisy, blur) if mode == "pre" else noisy
            for method in config.methods:
                kernels = config.kernels if method == "dit" else ["n/a"]
                for kernel in kernels:
                    try:
                        rec = _reconstruct(method, data, kernel if method == "dit" else "cubic", truth)
                        if mode == "post":
                            rec = gaussian_smooth(rec, blur)
                        rows.append(_row(label, method, A, kernel, noise, mode, sigma, rec, truth, clean))
                        if maps_dir and noise == 0 and A == max(config.projections):
                            tag = f"{label}_{method}_{kernel}_A{A}".replace("/", "")
                            error_map(rec, truth, Path(maps_dir) / f"{tag}.png")
                    except Exception as exc:
                        log.warning("%s %s A=%d failed: %s", label, method, A, exc)
                        rows.append(_row(label, method, A, kernel, noise, mode, sigma, status=f"error: {exc}"))

    if config.include_drt and A == max(config.projections):
        try:
            drt = double_rotation_test(truth)
            rows.append(_row(label, "drt", A, "bicubic", 0.0, "none", 0.0, drt, truth, clean))
        except Exception as exc:
            rows.append(_row(label, "drt", A, "bicubic", 0.0, "none", 0.0, status=f"error: {exc}"))
    return rows


def run_rows(config: ExperimentConfig, maps_dir: str | Path | None = None) -> list[dict]:
    """Execute every benchmark cell; row order is independent of ``workers``."""
    jobs = [(i, A) for i in range(len(config.phantoms)) for A in config.projections]
    maps = str(maps_dir) if maps_dir is not None else None
    if config.workers <= 1 or len(jobs) <= 1:
        results = [_run_job(config, i, A, maps) for i, A in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_job, config, i, A, maps) for i, A in jobs]
            results = [f.result() for f in futures]
    return [row for part in results for row in part]


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def run_benchmark(config: ExperimentConfig, out_dir: str | Path) -> Path:
    """Run ``config`` and write ``report.csv``, ``manifest.json``, ``summary.md``.

    Returns the CSV path.  Error maps go to ``out_dir/maps`` when enabled.
    """
    from ditrecon import __version__

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    maps_dir = None
    if config.error_maps:
        maps_dir = out / "maps"
        maps_dir.mkdir(exist_ok=True)
    rows = run_rows(config, maps_dir)
    csv_path = out / "report.csv"
    csv_path.write_text(rows_to_csv(rows))
    manifest = {
        "config": config.to_dict(),
        "seed": config.seed,
        "tool": "ditrecon",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "rows": len(rows),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "summary.md").write_text(summarize(rows))
    return csv_path


# -- tables ---------------------------------------------------------------------


def _num(v: str) -> float:
    if v == "exact":
        return math.inf
    return float(v) if v not in ("", None) else math.nan


def _mean(vals: list[float]) -> float:
    vals = [v for v in vals if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan


def summarize(rows: list[dict]) -> str:
    """Markdown pivot tables mirroring the usual result layouts."""
    ok = [r for r in rows if r.get("status") == "ok"]
    lines: list[str] = []

    def cell(sel, key):
        v = _mean([_num(r[key]) for r in sel])
        return "exact" if math.isinf(v) else ("-" if math.isnan(v) else f"{v:.2f}")

    dit = [r for r in ok if r["method"] == "dit" and r["denoise"] == "none"]
    kernels = sorted({r["kernel"] for r in dit})
    if dit:
        lines.append("## Direct method: kernels vs projections (suite average)\n")
        for noise in sorted({r["noise%"] for r in dit}, key=float):
            lines.append(f"### noise {noise}%\n")
            lines.append("| A | " + " | ".join(f"{k} PSNR | {k} P-RP" for k in kernels) + " |")
            lines.append("|---" * (1 + 2 * len(kernels)) + "|")
            for A in sorted({int(r["A"]) for r in dit}, reverse=True):
                sel = [r for r in dit if int(r["A"]) == A and r["noise%"] == noise]
                parts = []
                for k in kernels:
                    ks = [r for r in sel if r["kernel"] == k]
                    parts += [cell(ks, "psnr"), cell(ks, "p_rp")]
                lines.append(f"| {A} | " + " | ".join(parts) + " |")
            lines.append("")

    clean = [r for r in ok if r["noise%"] == "0"]
    if clean:
        lines.append("## Method comparison, noise-free\n")
        lines.append("| image | A | method | PSNR | P-RP | SSIM | SDR |")
        lines.append("|---|---|---|---|---|---|---|")
        for r in clean:
            if r["method"] == "dit" and r["kernel"] != "cubic" and "cubic" in kernels:
                continue
            lines.append(
                f"| {r['image']} | {r['A']} | {r['method']} | {r['psnr']} | {r['p_rp']} | {r['ssim']} | {r['sdr']} |"
            )
        lines.append("")

    noisy = [r for r in ok if r["noise%"] != "0" and r["method"] in ("dit", "fbp-m")]
    if noisy:
        lines.append("## Noise and denoising (average over images and A)\n")
        lines.append("| denoise | noise % | method | PSNR | P-RP | SSIM |")
        lines.append("|---|---|---|---|---|---|")
        for mode in DENOISE_MODES:
            for noise in sorted({r["noise%"] for r in noisy}, key=float):
                for method in ("dit", "fbp-m"):
                    sel = [
                        r
                        for r in noisy
                        if r["denoise"] == mode and r["noise%"] == noise and r["method"] == method
                        and r["kernel"] in ("cubic", "n/a")
                    ]
                    if sel:
                        lines.append(
                            f"| {mode} | {noise} | {method} | {cell(sel, 'psnr')} | {cell(sel, 'p_rp')} | {cell(sel, 'ssim')} |"
                        )
        lines.append("")
    failed = [r for r in rows if r.get("status") != "ok"]
    if failed:
        lines.append(f"{len(failed)} row(s) failed; see the status column of report.csv.\n")
    return "\n".join(lines) + ("\n" if lines else "")
