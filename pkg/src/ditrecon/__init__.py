"""Direct spectral inversion of parallel-beam Radon data.

The reconstruction computes each sample of the 2D image spectrum straight
from the sinogram (no ramp filter, no frequency-domain regridding) and
inverts it with a single 2D IDFT.  A ramp-filter FBP baseline, a bicubic
rotate-and-sum projector, image-quality metrics and a benchmark harness are
included for comparison.
"""

from ditrecon.errors import (
    ConsistencyError,
    DegenerateInputError,
    FormatError,
    InvalidArgumentError,
)
from ditrecon.grid import ImageGrid, InterpolationKernel, MetricsReport, Sinogram, make_phantom
from ditrecon.projector import double_rotation_test, forward_radon, rotate_image
from ditrecon.dit import reconstruct_dit
from ditrecon.fbp import calibrate_mean, calibrate_mean_sigma, reconstruct_fbp
from ditrecon.metrics import psnr, reprojection_psnr, sdr, ssim

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "DegenerateInputError",
    "FormatError",
    "ImageGrid",
    "InterpolationKernel",
    "InvalidArgumentError",
    "MetricsReport",
    "Sinogram",
    "calibrate_mean",
    "calibrate_mean_sigma",
    "double_rotation_test",
    "forward_radon",
    "make_phantom",
    "psnr",
    "reconstruct_dit",
    "reconstruct_fbp",
    "reprojection_psnr",
    "rotate_image",
    "sdr",
    "ssim",
]
