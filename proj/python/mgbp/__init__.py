"""Multi-grid back-projection and activation-freeze filter analysis."""

from ._core import (
    ConvNet,
    analyze,
    contraction_norm,
    downscale,
    effective_filter,
    effective_residual,
    explicit_fr,
    filter_spectrum,
    forward,
    ibp,
    mgbp,
    psnr,
    random_network,
    ssim,
    unfold_schedule,
    upscale,
    zero_biases,
)

__all__ = [
    "ConvNet",
    "analyze",
    "contraction_norm",
    "downscale",
    "effective_filter",
    "effective_residual",
    "explicit_fr",
    "filter_spectrum",
    "forward",
    "ibp",
    "mgbp",
    "psnr",
    "random_network",
    "ssim",
    "unfold_schedule",
    "upscale",
    "zero_biases",
]
