"""K-fold cross-validation over the penalty weight.

The observed entries of the weight mask are split into disjoint binary
folds.  For each candidate weight the model is fitted with one side of the
split and scored by the weighted loss on the other side; the weight with the
smallest mean holdout loss wins, ties going to the smaller (less smoothed)
value.

Two train/score conventions are supported: ``train-rest`` fits on everything
except the scored fold (the usual k-fold arrangement, the default) and
``train-one`` fits on a single fold and scores on the rest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import coercivity_check
from .model import loss_weighted
from .solvers import SolverConfig, grad_fit, hals_fit
from .tensors import as_weight_mask

__all__ = ["CvResult", "mask_partition", "cv_select_alpha"]

CONVENTIONS = ("train-rest", "train-one")


def mask_partition(w: np.ndarray, k: int = 5, seed: int | None = None) -> list[np.ndarray]:
    """Split the observed entries into k disjoint binary masks.

    Fold sizes differ by at most one; missing entries stay zero in every
    fold.  Deterministic for a given seed (counter-based PRNG).
    """
    w = as_weight_mask(w)
    observed = np.flatnonzero(w.ravel() > 0)
    if observed.size < k:
        raise ValueError(f"need at least {k} observed entries, found {observed.size}")
    rng = np.random.Generator(np.random.Philox(seed))
    order = rng.permutation(observed)
    masks = []
    for chunk in np.array_split(order, k):
        m = np.zeros(w.size)
        m[chunk] = 1.0
        masks.append(m.reshape(w.shape))
    return masks


@dataclass(frozen=True)
class CvResult:
    """Grid of candidate weights with per-fold and mean holdout losses.

    ``fold_scores`` has one row per fold and one column per grid point; NaN
    marks a skipped (non-coercive) cell.  ``mean_scores`` is NaN for a
    disqualified grid point (all folds skipped).
    """

    grid: tuple[float, ...]
    fold_scores: np.ndarray
    mean_scores: np.ndarray
    selected_alpha: float
    selected_index: int


def cv_select_alpha(
    x: np.ndarray,
    w: np.ndarray,
    grid,
    cfg: SolverConfig,
    solver: str = "grad",
    folds: int = 5,
    seed: int | None = None,
    convention: str = "train-rest",
) -> CvResult:
    """Pick the penalty weight by k-fold holdout loss.

    ``cfg.penalty.alpha`` acts as a unit pattern: each grid value scales the
    strictly positive entries, the zero entries stay unpenalized.
    """
    grid = tuple(float(a) for a in grid)
    if not grid:
        raise ValueError("the candidate grid must be non-empty")
    if any(a < 0 for a in grid):
        raise ValueError("candidate weights must be non-negative")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    if solver not in ("hals", "grad"):
        raise ValueError(f"unknown solver {solver!r}")
    fit = hals_fit if solver == "hals" else grad_fit

    pattern = np.asarray(cfg.penalty.alpha, dtype=np.float64)
    pattern = (pattern > 0).astype(np.float64)
    fold_masks = mask_partition(w, folds, seed)

    scores = np.full((folds, len(grid)), np.nan)
    for k in range(folds):
        if convention == "train-rest":
            train = w * (1.0 - fold_masks[k])
            score_mask = w * fold_masks[k]
        else:
            train = w * fold_masks[k]
            score_mask = w * (1.0 - fold_masks[k])
        for j, a in enumerate(grid):
            alpha_vec = tuple(pattern * a)
            penalty = replace(cfg.penalty, alpha=alpha_vec)
            if not coercivity_check(train, alpha_vec).coercive:
                warnings.warn(
                    f"fold {k}, alpha {a}: training mask fails the coercivity check; skipped",
                    stacklevel=2,
                )
                continue
            cell_cfg = replace(cfg, penalty=penalty)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model, _ = fit(x, train, cell_cfg)
            scores[k, j] = loss_weighted(x, score_mask, model)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(scores, axis=0)
    if np.all(np.isnan(means)):
        raise ValueError("every grid point was disqualified by the coercivity check")

    best_idx = None
    for j in range(len(grid)):
        if math.isnan(means[j]):
            continue
        if (
            best_idx is None
            or means[j] < means[best_idx]
            or (means[j] == means[best_idx] and grid[j] < grid[best_idx])
        ):
            best_idx = j
    return CvResult(
        grid=grid,
        fold_scores=scores,
        mean_scores=means,
        selected_alpha=grid[best_idx],
        selected_index=best_idx,
    )
