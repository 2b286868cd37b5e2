"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or format error,
3 internal-consistency failure (e.g. a non-Hermitian spectrum).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ditrecon.dit import reconstruct_dit
from ditrecon.errors import ConsistencyError, DegenerateInputError, FormatError, InvalidArgumentError
from ditrecon.fbp import calibrate_mean, calibrate_mean_sigma, reconstruct_fbp, sinogram_mean
from ditrecon.grid import PHANTOM_KINDS, ImageGrid, make_phantom, read_image, write_image
from ditrecon.harness import (
    DEFAULT_PROJECTIONS,
    ExperimentConfig,
    add_wgn,
    denoise_sigma,
    gaussian_smooth,
    rows_to_csv,
    run_benchmark,
)
from ditrecon.metrics import error_map, psnr, reprojection_psnr, sdr, ssim
from ditrecon.projector import double_rotation_test, export_sinogram_csv, forward_radon, read_sinogram, write_sinogram

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONSISTENCY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: error: {message}")


def load_image(path: str | Path) -> ImageGrid:
    """PNG/PGM/PPM via :func:`read_image`; ``.npy`` holds raw float64 pixels."""
    if str(path).endswith(".npy"):
        try:
            return ImageGrid(np.load(path, allow_pickle=False))
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return read_image(path)


def save_image(img: ImageGrid, path: str | Path) -> None:
    """Write 8-bit PNG/PGM, or lossless float64 when the suffix is ``.npy``."""
    if str(path).endswith(".npy"):
        np.save(path, img.pixels)
    else:
        write_image(img, path)


def _threads(value: int | None) -> int:
    return value if value and value > 0 else (os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ditrecon", description="Direct spectrum tomographic reconstruction toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ph = sub.add_parser("phantom", help="generate a test image")
    ph.add_argument("--kind", choices=PHANTOM_KINDS, default="shepp_logan")
    ph.add_argument("--size", type=int, default=512)
    ph.add_argument("--out", required=True)

    pr = sub.add_parser("project", help="forward-project an image into a sinogram")
    pr.add_argument("--in", dest="inp", required=True)
    pr.add_argument("--angles", type=int, default=800)
    pr.add_argument("--noise-pct", type=float, default=0.0)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", required=True)
    pr.add_argument("--csv", help="also export the sinogram as CSV")

    rc = sub.add_parser("reconstruct", help="reconstruct an image from a sinogram")
    rc.add_argument("--method", choices=("dit", "fbp", "fbp-m", "fbp-ms"), default="dit")
    rc.add_argument("--kernel", choices=("nn", "linear", "cubic"), default="cubic")
    rc.add_argument("--in", dest="inp", required=True)
    rc.add_argument("--out", required=True)
    rc.add_argument("--truth", help="ground-truth image (required by fbp-ms)")
    rc.add_argument("--noise-pct", type=float, default=0.0, help="noise level; sets the denoise width")
    rc.add_argument("--denoise", choices=("none", "pre", "post"), default="none")
    rc.add_argument("--threads", type=int, default=None)

    ev = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    ev.add_argument("--recon", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--sino", help="measured sinogram for reprojection PSNR")
    ev.add_argument("--image", help="label for the image column (default: truth file stem)")
    ev.add_argument("--method", default="")
    ev.add_argument("--kernel", default="")
    ev.add_argument("--noise-pct", type=float, default=0.0)
    ev.add_argument("--denoise", choices=("none", "pre", "post"), default="none")
    ev.add_argument("--error-map", help="write a signed error PNG (plus .csv with rho)")
    ev.add_argument("--out", help="write the CSV here instead of stdout")

    be = sub.add_parser("bench", help="run a benchmark sweep")
    be.add_argument("--config", help="JSON file with ExperimentConfig fields; flags below override")
    be.add_argument("--phantoms", nargs="*")
    be.add_argument("--size", type=int)
    be.add_argument("--angles", type=int, nargs="+")
    be.add_argument("--kernel", choices=("nn", "linear", "cubic"), nargs="+")
    be.add_argument("--methods", choices=("dit", "fbp", "fbp-m", "fbp-ms"), nargs="+")
    be.add_argument("--noise-pct", type=float, nargs="+")
    be.add_argument("--denoise", choices=("none", "pre", "post"), nargs="+")
    be.add_argument("--seed", type=int)
    be.add_argument("--no-drt", action="store_true")
    be.add_argument("--error-maps", action="store_true")
    be.add_argument("--threads", type=int, default=None)
    be.add_argument("--out", required=True, help="output directory")

    dr = sub.add_parser("drt", help="double rotation baseline (+45 then -45 degrees)")
    dr.add_argument("--in", dest="inp", required=True)
    dr.add_argument("--out", required=True)
    dr.add_argument("--sino", help="sinogram of the input, for reprojection PSNR")
    return p


def _echo(config: dict) -> None:
    print("config: " + json.dumps(config, sort_keys=True, default=str), file=sys.stderr)


def _cmd_phantom(args) -> int:
    save_image(make_phantom(args.kind, args.size), args.out)
    return EXIT_OK


def _cmd_project(args) -> int:
    sino = forward_radon(load_image(args.inp), args.angles)
    sino = add_wgn(sino, args.noise_pct, args.seed)
    write_sinogram(sino, args.out)
    if args.csv:
        export_sinogram_csv(sino, args.csv)
    return EXIT_OK


def reconstruct(method, sino, *, kernel="cubic", truth=None, noise_pct=0.0, denoise="none", workers=1):
    """The reconstruct subcommand as a library call."""
    if method == "fbp-ms" and truth is None:
        raise UsageError("fbp-ms calibration requires the ground-truth sigma: pass --truth")
    blur = denoise_sigma(noise_pct)
    if denoise == "pre":
        sino = gaussian_smooth(sino, blur)
    if method == "dit":
        img = reconstruct_dit(sino, kernel, workers=workers)
    else:
        img = reconstruct_fbp(sino, workers=workers)
        if method == "fbp-m":
            img = calibrate_mean(img, sinogram_mean(sino))
        elif method == "fbp-ms":
            img = calibrate_mean_sigma(img, sinogram_mean(sino), float(truth.pixels.std()))
    if denoise == "post":
        img = gaussian_smooth(img, blur)
    return img


def _cmd_reconstruct(args) -> int:
    if args.method == "fbp-ms" and not args.truth:
        raise UsageError("fbp-ms calibration requires the ground-truth sigma: pass --truth")
    truth = load_image(args.truth) if args.truth else None
    img = reconstruct(
        args.method,
        read_sinogram(args.inp),
        kernel=args.kernel,
        truth=truth,
        noise_pct=args.noise_pct,
        denoise=args.denoise,
        workers=args.threads,
    )
    save_image(img, args.out)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    recon, truth = load_image(args.recon), load_image(args.truth)
    sino = read_sinogram(args.sino) if args.sino else None
    row = {
        "image": args.image or Path(args.truth).stem,
        "method": args.method,
        "A": sino.angles if sino is not None else "",
        "kernel": args.kernel,
        "noise%": f"{args.noise_pct:g}",
        "denoise": args.denoise,
        "psnr": f"{psnr(recon, truth):.6f}",
        "p_rp": f"{reprojection_psnr(recon, sino):.6f}" if sino is not None else "",
        "ssim": f"{ssim(recon, truth):.6f}",
        "sdr": f"{sdr(recon, truth):.6f}",
        "ssim_global": "",
        "noise_sigma": "",
        "status": "ok",
    }
    text = rows_to_csv([row])
    if args.error_map:
        error_map(recon, truth, args.error_map)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_bench(args) -> int:
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    overrides = {
        "phantoms": args.phantoms,
        "size": args.size,
        "projections": args.angles,
        "kernels": args.kernel,
        "methods": args.methods,
        "noise_levels": args.noise_pct,
        "denoise": args.denoise,
        "seed": args.seed,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_drt:
        base["include_drt"] = False
    if args.error_maps:
        base["error_maps"] = True
    base["workers"] = args.threads
    base.setdefault("projections", list(DEFAULT_PROJECTIONS))
    config = ExperimentConfig(**base)
    _echo({"command": "bench", **config.to_dict(), "out": args.out})
    path = run_benchmark(config, args.out)
    print(path, file=sys.stderr)
    return EXIT_OK


def _cmd_drt(args) -> int:
    img = load_image(args.inp)
    out = double_rotation_test(img)
    save_image(out, args.out)
    line = f"psnr={psnr(out, img):.6f}"
    if args.sino:
        line += f" p_rp={reprojection_psnr(out, read_sinogram(args.sino)):.6f}"
    print(line)
    return EXIT_OK


_COMMANDS = {
    "phantom": _cmd_phantom,
    "project": _cmd_project,
    "reconstruct": _cmd_reconstruct,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
    "drt": _cmd_drt,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if hasattr(args, "threads"):
        args.threads = _threads(args.threads)
    if args.command != "bench":
        _echo(vars(args))
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ditrecon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConsistencyError as exc:
        print(f"ditrecon: internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (FormatError, InvalidArgumentError, DegenerateInputError, OSError, ValueError, TypeError) as exc:
        print(f"ditrecon: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
