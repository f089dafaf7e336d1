"""Synthetic data: smooth low-rank toy tensors and missing-data masks.

The toy generator builds a cubic third-order tensor whose first two modes
are non-negative random combinations of 7 cubic B-spline bumps (so the true
factors are smooth), while the third mode is plain uniform noise.  Gaussian
noise is added at a prescribed noise-to-signal percentage and entries are
hidden uniformly at random.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .model import FactorModel, NormalizedFactorModel, normalize, reconstruct
from .tensors import as_weight_mask, frobenius_norm

__all__ = [
    "ToySpec",
    "bspline_basis",
    "toy_generate",
    "make_mask",
    "uniform_mask",
    "pixelwise_mask",
    "mask_from_values",
]

N_BASIS = 7
SPLINE_ORDER = 4  # cubic


def bspline_basis(n_points: int) -> np.ndarray:
    """Clamped cubic B-spline basis on [0, 1], evaluated mid-grid.

    Returns an (n_points, 7) non-negative matrix whose rows sum to one;
    evaluation points are u_i = (i - 0.5) / n_points.
    """
    if n_points < N_BASIS + 1:
        raise ValueError(f"need at least {N_BASIS + 1} points for the spline basis")
    degree = SPLINE_ORDER - 1
    interior = N_BASIS - SPLINE_ORDER + 2
    knots = np.concatenate(
        [np.zeros(degree), np.linspace(0.0, 1.0, interior), np.ones(degree)]
    )
    u = (np.arange(n_points) + 0.5) / n_points
    return BSpline.design_matrix(u, knots, degree).toarray()


@dataclass(frozen=True)
class ToySpec:
    """Size and randomness knobs for one toy instance."""

    size: int
    rank: int
    noise_percent: float = 10.0
    missing_fraction: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.size < N_BASIS + 1:
            raise ValueError(f"size must be at least {N_BASIS + 1}")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if not 0.0 <= self.noise_percent < 100.0:
            raise ValueError("noise_percent must be in [0, 100)")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ValueError("missing_fraction must be in [0, 1)")


def toy_generate(spec: ToySpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, NormalizedFactorModel]:
    """Build one toy instance.

    Returns (clean tensor, noisy tensor, weight mask, true model).  Modes 0
    and 1 mix the spline basis with uniform coefficients; with probability
    one half a mode-1 column has a contiguous third of its coefficients
    zeroed so some true factors vanish on an interval.  The noise scale is
    sigma = (100 / noise_percent - 1)^{-1/2} * ||Y||_F / ||E||_F.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    basis = bspline_basis(spec.size)
    coef_a = rng.uniform(size=(N_BASIS, spec.rank))
    coef_b = rng.uniform(size=(N_BASIS, spec.rank))
    span = max(1, N_BASIS // 3)
    for r in range(spec.rank):
        if rng.uniform() < 0.5:
            start = int(rng.integers(0, N_BASIS - span + 1))
            coef_b[start : start + span, r] = 0.0
    a1 = basis @ coef_a
    a2 = basis @ coef_b
    a3 = rng.uniform(size=(spec.size, spec.rank))
    truth_raw = FactorModel(factors=(a1, a2, a3))
    y = reconstruct(truth_raw)

    noise = rng.standard_normal(y.shape)
    if spec.noise_percent > 0.0:
        sigma = (100.0 / spec.noise_percent - 1.0) ** -0.5
        sigma *= frobenius_norm(y) / frobenius_norm(noise)
    else:
        sigma = 0.0
    x = y + sigma * noise
    w = uniform_mask(y.shape, spec.missing_fraction, rng=rng)
    return y, x, w, normalize(truth_raw)


def uniform_mask(
    shape, fraction: float, seed: int | None = None, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Binary mask hiding each cell independently with the given probability."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("missing fraction must be in [0, 1)")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(seed))
    return (rng.uniform(size=tuple(shape)) >= fraction).astype(np.float64)


def pixelwise_mask(shape, fraction: float, seed: int | None = None) -> np.ndarray:
    """Hide every channel of an exact fraction of pixel positions.

    ``shape`` must be (H, W, C); exactly round(fraction * H * W) positions
    are zeroed across all channels.
    """
    shape = tuple(shape)
    if len(shape) != 3:
        raise ValueError("pixelwise masks need an (H, W, C) shape")
    if not 0.0 <= fraction < 1.0:
        raise ValueError("missing fraction must be in [0, 1)")
    h, w, _ = shape
    n_hide = int(round(fraction * h * w))
    rng = np.random.Generator(np.random.Philox(seed))
    flat = rng.permutation(h * w)[:n_hide]
    mask = np.ones(shape)
    rows, cols = np.unravel_index(flat, (h, w))
    mask[rows, cols, :] = 0.0
    return mask


def mask_from_values(shape, values: np.ndarray) -> np.ndarray:
    """Hide every channel of the pixels whose stencil value is zero."""
    shape = tuple(shape)
    if len(shape) != 3:
        raise ValueError("stencil masks need an (H, W, C) shape")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != shape[:2]:
        raise ValueError(f"stencil shape {values.shape} does not match image {shape[:2]}")
    mask = np.ones(shape)
    mask[values == 0] = 0.0
    return mask


def make_mask(
    shape,
    kind: str,
    fraction: float | None = None,
    seed: int | None = None,
    stencil: np.ndarray | None = None,
) -> np.ndarray:
    """Dispatch mask construction by kind: uniform, pixelwise or stencil."""
    if kind == "uniform":
        if fraction is None:
            raise ValueError("uniform masks need a fraction")
        return uniform_mask(shape, fraction, seed)
    if kind == "pixelwise":
        if fraction is None:
            raise ValueError("pixelwise masks need a fraction")
        return pixelwise_mask(shape, fraction, seed)
    if kind == "stencil":
        if stencil is None:
            raise ValueError("stencil masks need the stencil values")
        return as_weight_mask(mask_from_values(shape, stencil))
    raise ValueError(f"unknown mask kind {kind!r}")
