"""Mask coercivity diagnostic and evaluation metrics.

The coercivity check decides whether the penalized objective grows without
bound as the parameters do, which is what guarantees a global minimizer
exists.  The criterion is purely combinatorial: among the modes that carry no
penalty, no choice of fixed coordinates may select an all-missing slice of
the weight mask.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.signal import fftconvolve

from .model import NormalizedFactorModel
from .tensors import as_tensor, as_weight_mask, frobenius_norm

__all__ = [
    "CoercivityVerdict",
    "coercivity_check",
    "nmse",
    "sim_score",
    "psnr",
    "ssim",
]

_BRUTE_FORCE_MAX_RANK = 8


@dataclass(frozen=True)
class CoercivityVerdict:
    """Outcome of the mask check.

    ``witness`` maps unpenalized mode -> coordinate of an all-zero slice of
    the mask; it is None exactly when the check passes.  A model fitted on a
    non-coercive instance may still terminate, but a global minimum is not
    guaranteed to exist.
    """

    coercive: bool
    witness: dict[int, int] | None = None

    def __post_init__(self):
        if self.coercive != (self.witness is None):
            raise ValueError("witness must be present iff the check fails")


def coercivity_check(w: np.ndarray, alpha) -> CoercivityVerdict:
    """Scan for an all-missing slice over the unpenalized modes.

    Reduces the mask by max over the penalized modes, then looks for a zero
    in the reduction.  With every mode penalized the only way to fail is an
    all-zero mask; with no mode penalized any single missing entry fails.
    """
    w = as_weight_mask(w)
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.size != w.ndim:
        raise ValueError(f"need one penalty weight per mode, got {alpha.size} for order {w.ndim}")
    if np.any(alpha < 0):
        raise ValueError("penalty weights must be non-negative")
    free_modes = [n for n in range(w.ndim) if alpha[n] == 0.0]
    penalized = tuple(n for n in range(w.ndim) if alpha[n] > 0.0)
    reduced = w.max(axis=penalized) if penalized else w
    zeros = np.argwhere(np.asarray(reduced) == 0.0)
    if zeros.shape[0] == 0:
        return CoercivityVerdict(coercive=True)
    first = zeros[0]
    witness = {mode: int(first[k]) for k, mode in enumerate(free_modes)}
    return CoercivityVerdict(coercive=False, witness=witness)


def nmse(y_true: np.ndarray, y_hat: np.ndarray) -> float:
    """Squared Frobenius error normalized by the truth's squared norm."""
    y_true = as_tensor(y_true)
    y_hat = as_tensor(y_hat)
    if y_true.shape != y_hat.shape:
        raise ValueError(f"shape mismatch {y_true.shape} vs {y_hat.shape}")
    denom = frobenius_norm(y_true) ** 2
    if denom == 0.0:
        raise ValueError("nmse is undefined for a zero reference tensor")
    return frobenius_norm(y_true - y_hat) ** 2 / denom


def _sim_matrix(truth: NormalizedFactorModel, estimate: NormalizedFactorModel) -> np.ndarray:
    s = np.ones((truth.rank, estimate.rank))
    for a, b in zip(truth.factors, estimate.factors):
        s *= a.T @ b
    return s


def sim_score(truth: NormalizedFactorModel, estimate: NormalizedFactorModel) -> float:
    """Best component matching of two normalized models.

    Maximizes over component permutations the mean across components of the
    product across modes of column inner products.  Exact enumeration up to
    rank 8, optimal linear assignment beyond.
    """
    if truth.n_modes != estimate.n_modes or truth.shape != estimate.shape:
        raise ValueError("models must share mode count and dimensions")
    if truth.rank != estimate.rank:
        raise ValueError("models must share the same rank")
    s = _sim_matrix(truth, estimate)
    r = truth.rank
    if r <= _BRUTE_FORCE_MAX_RANK:
        best = max(
            sum(s[i, perm[i]] for i in range(r))
            for perm in itertools.permutations(range(r))
        )
    else:
        rows, cols = linear_sum_assignment(s, maximize=True)
        best = float(s[rows, cols].sum())
    return min(max(best / r, 0.0), 1.0)


def _as_image(img: np.ndarray) -> np.ndarray:
    img = as_tensor(img)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ValueError("images must be H x W or H x W x C arrays")
    return img


def _selection(mask, shape) -> np.ndarray | None:
    if mask is None:
        return None
    sel = np.asarray(mask).astype(bool)
    if sel.ndim == 2:
        sel = np.repeat(sel[:, :, None], shape[2], axis=2)
    if sel.shape != shape:
        raise ValueError(f"metric mask shape {sel.shape} does not match image {shape}")
    return sel


def psnr(img_true: np.ndarray, img_hat: np.ndarray, max_value: float = 255.0, mask=None) -> float:
    """Peak signal-to-noise ratio in dB; infinite for identical inputs.

    ``mask`` restricts the mean squared error to selected entries (e.g. the
    missing pixels of a completion task).
    """
    a = _as_image(img_true)
    b = _as_image(img_hat)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    sel = _selection(mask, a.shape)
    diff = (a - b) ** 2
    mse = float(diff[sel].mean()) if sel is not None else float(diff.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2


def _local_ssim(x: np.ndarray, y: np.ndarray, win: np.ndarray) -> np.ndarray:
    mu_x = fftconvolve(x, win, mode="valid")
    mu_y = fftconvolve(y, win, mode="valid")
    xx = fftconvolve(x * x, win, mode="valid") - mu_x**2
    yy = fftconvolve(y * y, win, mode="valid") - mu_y**2
    xy = fftconvolve(x * y, win, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * xy + _SSIM_C2)
    den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (xx + yy + _SSIM_C2)
    return num / den


def ssim(img_true: np.ndarray, img_hat: np.ndarray, mask=None) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows.

    Channel-last color images are scored per channel and averaged.  ``mask``
    restricts the mean to windows centered on selected pixels.  Constants
    assume the usual 8-bit dynamic range (peak 255).
    """
    a = _as_image(img_true)
    b = _as_image(img_hat)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    h, w, _ = a.shape
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW} pixels in each direction")
    sel = _selection(mask, a.shape)
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    margin = (_SSIM_WINDOW - 1) // 2
    values = []
    for c in range(a.shape[2]):
        local = _local_ssim(a[:, :, c], b[:, :, c], win)
        if sel is None:
            values.append(local.ravel())
        else:
            keep = sel[margin : h - margin, margin : w - margin, c]
            values.append(local[keep])
    values = np.concatenate(values)
    if values.size == 0:
        raise ValueError("metric mask selects no window centers")
    return float(values.mean())
