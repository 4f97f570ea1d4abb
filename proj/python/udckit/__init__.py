"""Scattering-aware under-display-camera degradation synthesis and restoration."""

from ._core import (
    compute_m,
    convolve,
    degrade,
    estimate,
    gaussian_kernel,
    net_selftest,
    psnr,
    restore,
    ssim,
    tonemap_forward,
    tonemap_inverse,
)

__all__ = [
    "compute_m",
    "convolve",
    "degrade",
    "estimate",
    "gaussian_kernel",
    "net_selftest",
    "psnr",
    "restore",
    "ssim",
    "tonemap_forward",
    "tonemap_inverse",
]
