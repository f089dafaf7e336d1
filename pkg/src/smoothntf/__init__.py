"""Smoothness-penalized non-negative CP tensor factorization with missing entries."""

from .crossval import CvResult, cv_select_alpha, mask_partition
from .data import ToySpec, bspline_basis, make_mask, pixelwise_mask, toy_generate, uniform_mask
from .diagnostics import CoercivityVerdict, coercivity_check, nmse, psnr, sim_score, ssim
from .errors import TensorFormatError, UnsupportedOperationError
from .model import (
    FactorModel,
    NormalizedFactorModel,
    denormalize,
    gradient_objective,
    loss_weighted,
    normalize,
    objective,
    penalty_normalized,
    penalty_unnormalized,
    reconstruct,
)
from .penalties import (
    NormSpec,
    PenaltyConfig,
    SplineRoughness,
    TotalVariation,
    seminorm_gradient_sq,
    seminorm_value,
    spline_roughness_matrix,
    tv_seminorm,
)
from .solvers import FitReport, SolverConfig, grad_fit, hals_fit, init_random, init_svd
from .tensors import (
    frobenius_inner,
    frobenius_norm,
    hadamard,
    khatri_rao,
    mode_fold,
    mode_unfold,
    outer_rank_one,
)

__version__ = "0.1.0"

__all__ = [
    "CvResult",
    "cv_select_alpha",
    "mask_partition",
    "ToySpec",
    "bspline_basis",
    "make_mask",
    "pixelwise_mask",
    "toy_generate",
    "uniform_mask",
    "CoercivityVerdict",
    "coercivity_check",
    "nmse",
    "psnr",
    "sim_score",
    "ssim",
    "TensorFormatError",
    "UnsupportedOperationError",
    "FactorModel",
    "NormalizedFactorModel",
    "denormalize",
    "gradient_objective",
    "loss_weighted",
    "normalize",
    "objective",
    "penalty_normalized",
    "penalty_unnormalized",
    "reconstruct",
    "NormSpec",
    "PenaltyConfig",
    "SplineRoughness",
    "TotalVariation",
    "seminorm_gradient_sq",
    "seminorm_value",
    "spline_roughness_matrix",
    "tv_seminorm",
    "FitReport",
    "SolverConfig",
    "grad_fit",
    "hals_fit",
    "init_random",
    "init_svd",
    "frobenius_inner",
    "frobenius_norm",
    "hadamard",
    "khatri_rao",
    "mode_fold",
    "mode_unfold",
    "outer_rank_one",
]
