"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Full-size runs use T = 512.  Results are cached across tests so each
sinogram and reconstruction is computed once per session.
"""

import functools
import json
import math
import time

import numpy as np

from conftest import phantom, record, sinogram
from ditrecon import (
    ImageGrid,
    InterpolationKernel,
    Sinogram,
    double_rotation_test,
    make_phantom,
    psnr,
    reconstruct_dit,
    reprojection_psnr,
    sdr,
    ssim,
)
from ditrecon import dit
from ditrecon.cli import main
from ditrecon.dit import assemble_spectrum, center_to_origin_shift, dc_estimate, hermitian_fill
from ditrecon.fbp import calibrate_mean, calibrate_mean_sigma, filter_projections, reconstruct_fbp, sinogram_mean
from ditrecon.harness import add_wgn, denoise_sigma, gaussian_smooth
from ditrecon.projector import forward_radon
from oracles import brute_dft2, ramp_filter_oracle

SUITE = ("shepp_logan", "disk", "rings", "blobs", "squares", "texture")


@functools.lru_cache(maxsize=None)
def dit_image(kind, angles, kernel="cubic"):
    return reconstruct_dit(sinogram(kind, angles), kernel)


@functools.lru_cache(maxsize=None)
def fbp_image(kind, angles):
    return reconstruct_fbp(sinogram(kind, angles))


def fbp_m(kind, angles):
    return calibrate_mean(fbp_image(kind, angles), sinogram_mean(sinogram(kind, angles)))


def fbp_ms(kind, angles):
    truth = phantom(kind)
    return calibrate_mean_sigma(fbp_image(kind, angles), sinogram_mean(sinogram(kind, angles)), float(truth.pixels.std()))


@functools.lru_cache(maxsize=None)
def p_rp(kind, method, angles):
    img = {"dit": dit_image, "drt": lambda k, a: double_rotation_test(phantom(k))}[method](kind, angles)
    return reprojection_psnr(img, sinogram(kind, angles))


def test_c01_axis_slices_match_brute_force_dft():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    T = 32
    h = T // 2
    worst = 0.0
    for _ in range(20):
        img = rng.random((T, T)) * 255.0
        sino = forward_radon(ImageGrid(img), 8)
        F = brute_dft2(img)
        M = hermitian_fill(assemble_spectrum(sino, InterpolationKernel("cubic")))
        idx = [(n, 0) for n in range(-h, h) if n] + [(0, m) for m in range(-h, h) if m]
        for n, m in idx:
            worst = max(worst, abs(M[n + h, m + h] - F[n + h, m + h]) / abs(F[n + h, m + h]))
        # the origin is the mass term; the first view carries it exactly
        exact_dc = dc_estimate(sino, "single")
        worst = max(worst, abs(exact_dc - F[h, h].real) / abs(F[h, h]))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 10.0
    record(1, ok, f"max relative axis error {worst:.2e} (< 1e-6), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_c02_mean_preservation():
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(20):
        T, A = (16, 32, 64)[i % 3], int(rng.integers(8, 60))
        sino = Sinogram(rng.random((T, A)) * 100.0 + rng.normal(size=(T, A)))
        rec = reconstruct_dit(sino, ("nearest", "linear", "cubic")[i % 3])
        target = dc_estimate(sino) / T**2
        worst = max(worst, abs(rec.pixels.mean() - target) / abs(target))
    ok = worst < 1e-12
    record(2, ok, f"max relative mean deviation {worst:.2e} (< 1e-12)")
    assert ok


def test_c03_hermitian_realness(tmp_path, monkeypatch, capsys):
    rng = np.random.default_rng(303)
    worst = 0.0
    for i in range(20):
        T, A = (16, 32, 64)[i % 3], int(rng.integers(4, 50))
        sino = Sinogram(rng.normal(size=(T, A)) * 10.0)
        M = center_to_origin_shift(hermitian_fill(assemble_spectrum(sino, InterpolationKernel("cubic"))))
        f = np.fft.ifft2(M)
        worst = max(worst, np.abs(f.imag).max() / (np.abs(M).max() / T**2))
        reconstruct_dit(sino)  # must not raise

    # a corrupted spectrum must surface as exit code 3
    main(["phantom", "--kind", "disk", "--size", "16", "--out", str(tmp_path / "p.png")])
    main(["project", "--in", str(tmp_path / "p.png"), "--angles", "8", "--out", str(tmp_path / "s.sino")])
    real_fill = dit.hermitian_fill

    def broken(hp):
        out = real_fill(hp)
        out[2, 9] += 50j
        return out

    monkeypatch.setattr(dit, "hermitian_fill", broken)
    code = main(["reconstruct", "--in", str(tmp_path / "s.sino"), "--out", str(tmp_path / "r.png")])
    ok = worst < 1e-9 and code == 3
    record(3, ok, f"max relative imaginary residual {worst:.2e} (< 1e-9); corrupted spectrum exit code {code} (3)")
    assert ok


def test_c04_shepp_logan_reproduction():
    sino = sinogram("shepp_logan", 800)
    truth = phantom("shepp_logan")
    t0 = time.perf_counter()
    rec = reconstruct_dit(sino, "cubic")
    elapsed = time.perf_counter() - t0
    dit_psnr, dit_ssim = psnr(rec, truth), ssim(rec, truth)
    dit_prp = p_rp("shepp_logan", "dit", 800)
    fbpm_psnr = psnr(fbp_m("shepp_logan", 800), truth)
    checks = {
        "DIT PSNR": (dit_psnr, abs(dit_psnr - 34.21) <= 1.5, "34.21 +- 1.5"),
        "DIT SSIM": (dit_ssim, abs(dit_ssim - 0.998) <= 0.004, "0.998 +- 0.004"),
        "DIT P-RP": (dit_prp, abs(dit_prp - 64.79) <= 2.0, "64.79 +- 2"),
        "FBP-M PSNR": (fbpm_psnr, abs(fbpm_psnr - 25.22) <= 1.5, "25.22 +- 1.5"),
        "runtime s": (elapsed, elapsed < 60.0, "< 60"),
    }
    ok = all(c[1] for c in checks.values())
    detail = "; ".join(f"{k} {v:.4f} [{t}] {'ok' if good else 'MISS'}" for k, (v, good, t) in checks.items())
    record(4, ok, detail)
    assert ok


def test_c05_disk_variance_preservation():
    truth = phantom("disk")
    dit_sdr = sdr(dit_image("disk", 800), truth)
    fbp_sdr = sdr(fbp_image("disk", 800), truth)
    ok_dit = abs(dit_sdr - 1.0) <= 0.005
    ok_fbp = fbp_sdr < 0.75
    record(
        5,
        ok_dit and ok_fbp,
        f"DIT SDR {dit_sdr:.4f} [1 +- 0.005] {'ok' if ok_dit else 'MISS'}; "
        f"FBP SDR {fbp_sdr:.4f} [< 0.75] {'ok' if ok_fbp else 'MISS'}",
    )
    assert ok_dit and ok_fbp


def test_c06_dit_dominates_fbp_ms():
    cells = []
    ok = True
    for kind in ("disk", "shepp_logan"):
        truth = phantom(kind)
        for A in (200, 400, 800):
            d, f = dit_image(kind, A), fbp_ms(kind, A)
            dp, fp, ds, fs = psnr(d, truth), psnr(f, truth), ssim(d, truth), ssim(f, truth)
            good = dp > fp and ds > fs
            ok &= good
            cells.append(f"{kind}@{A}: {dp:.2f}/{fp:.2f} dB, {ds:.3f}/{fs:.3f}{'' if good else ' MISS'}")
    record(6, ok, "DIT/FBP-MS " + "; ".join(cells))
    assert ok


def test_c07_drt_proximity():
    truth = phantom("shepp_logan")
    dit_psnr = psnr(dit_image("shepp_logan", 800), truth)
    drt_psnr = psnr(double_rotation_test(truth), truth)
    gap = p_rp("shepp_logan", "dit", 800) - p_rp("shepp_logan", "drt", 800)
    ok_psnr = abs(dit_psnr - drt_psnr) <= 2.0
    ok_gap = gap >= 5.0
    record(
        7,
        ok_psnr and ok_gap,
        f"|PSNR DIT {dit_psnr:.2f} - DRT {drt_psnr:.2f}| = {abs(dit_psnr - drt_psnr):.2f} [<= 2] "
        f"{'ok' if ok_psnr else 'MISS'}; P-RP gap {gap:.2f} dB [>= 5] {'ok' if ok_gap else 'MISS'}",
    )
    assert ok_psnr and ok_gap


def test_c08_kernel_ordering():
    ok = True
    parts = []
    for A in (800, 400, 200):
        avg = {
            k: float(np.mean([psnr(dit_image(kind, A, k), phantom(kind)) for kind in SUITE]))
            for k in ("nearest", "linear", "cubic")
        }
        good = avg["cubic"] >= avg["linear"] >= avg["nearest"]
        ok &= good
        parts.append(f"A={A}: cubic {avg['cubic']:.2f} >= linear {avg['linear']:.2f} >= nn {avg['nearest']:.2f}"
                     + ("" if good else " MISS"))
    record(8, ok, "suite-average PSNR " + "; ".join(parts))
    assert ok


def test_c09_sparsity_monotonicity():
    ok = True
    parts = []
    for kind in SUITE:
        series = [psnr(dit_image(kind, A), phantom(kind)) for A in (800, 400, 200, 80, 40, 16)]
        good = all(b <= a + 0.3 for a, b in zip(series, series[1:]))
        ok &= good
        parts.append(f"{kind} " + "/".join(f"{v:.1f}" for v in series) + ("" if good else " MISS"))
    record(9, ok, "; ".join(parts))
    assert ok


def test_c10_noise_consistency():
    ok = True
    parts = []
    for kind in ("shepp_logan", "disk"):
        truth = phantom(kind)
        clean = sinogram(kind, 800)
        for pct in (1.0, 2.0, 3.0):
            noisy = add_wgn(clean, pct, [10, int(pct)])
            blur = denoise_sigma(pct)
            pre = gaussian_smooth(noisy, blur)
            fbp_raw = {"none": reconstruct_fbp(noisy), "pre": reconstruct_fbp(pre)}
            fbp_raw["post"] = gaussian_smooth(fbp_raw["none"], blur)
            dit_none = reconstruct_dit(noisy)
            dit = {"none": dit_none, "pre": reconstruct_dit(pre), "post": gaussian_smooth(dit_none, blur)}
            mean_noisy, mean_pre = sinogram_mean(noisy), sinogram_mean(pre)
            fbpm = {
                "none": calibrate_mean(fbp_raw["none"], mean_noisy),
                "pre": calibrate_mean(fbp_raw["pre"], mean_pre),
                "post": calibrate_mean(fbp_raw["post"], mean_noisy),
            }
            d = {m: psnr(v, truth) for m, v in dit.items()}
            f = {m: psnr(v, truth) for m, v in fbpm.items()}
            sym = abs(d["pre"] - d["post"]) < 1.5
            dom = all(d[m] > f[m] for m in d)
            ok &= sym and dom
            parts.append(
                f"{kind} {pct:g}%: DIT none/pre/post {d['none']:.2f}/{d['pre']:.2f}/{d['post']:.2f}, "
                f"FBP-M {f['none']:.2f}/{f['pre']:.2f}/{f['post']:.2f}" + ("" if sym and dom else " MISS")
            )
    record(10, ok, "; ".join(parts))
    assert ok


def test_c11_filter_oracle():
    rng = np.random.default_rng(1111)
    cols = rng.normal(size=(64, 50)) * 30.0 + rng.random(50) * 100.0
    out = filter_projections(Sinogram(cols)).values
    err = max(np.abs(out[:, a] - ramp_filter_oracle(cols[:, a])).max() for a in range(50))
    dc = max(abs(out[:, a].sum()) / abs(cols[:, a].sum()) for a in range(50))
    ok = err < 1e-9 and dc < 1e-9
    record(11, ok, f"max deviation from DFT oracle {err:.2e} (< 1e-9); max relative filtered DC {dc:.2e} (< 1e-9)")
    assert ok


def test_c12_benchmark_determinism(tmp_path):
    cfg = {
        "phantoms": ["shepp_logan", "disk", "texture"],
        "size": 64,
        "projections": [64, 16],
        "kernels": ["nearest", "linear", "cubic"],
        "methods": ["dit", "fbp", "fbp-m", "fbp-ms"],
        "noise_levels": [0.0, 1.0, 3.0],
        "denoise": ["none", "pre", "post"],
        "seed": 12345,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    codes = [main(["bench", "--config", str(path), "--threads", "1", "--out", str(tmp_path / run)]) for run in "ab"]
    a = (tmp_path / "a" / "report.csv").read_bytes()
    b = (tmp_path / "b" / "report.csv").read_bytes()
    rows = a.count(b"\n") - 1
    ok = codes == [0, 0] and a == b and rows > 0
    record(12, ok, f"two bench runs, {rows} rows each: {'byte-identical' if a == b else 'DIFFERENT'} CSV")
    assert ok
