"""Solvers for the penalized weighted factorization problem.

Two routes to the same criterion:

* :func:`hals_fit` -- hierarchical alternating least squares on the
  normalized parameterization.  Each sweep visits one component at a time,
  updates its column in every mode by a projected gradient descent on the
  non-negative orthant followed by renormalization, then refreshes the
  component's scale in closed form.
* :func:`grad_fit` -- bound-constrained quasi-Newton (L-BFGS-B) on the
  unnormalized parameterization, treating all factor entries as one
  non-negative vector.  One iteration updates every factor at once.

Both require d = p = 2 with quadratic seminorms, record their objective
trajectory, and stop when the relative objective improvement drops below
``rel_tol`` or the iteration budget runs out.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .diagnostics import coercivity_check
from .errors import UnsupportedOperationError
from .model import (
    FactorModel,
    NormalizedFactorModel,
    _gradient_raw,
    _objective_raw,
    _reconstruct_raw,
    default_sphere_element,
    denormalize,
    normalize,
)
from .penalties import PenaltyConfig
from .tensors import as_tensor, as_weight_mask, mode_unfold, outer_rank_one

__all__ = [
    "SolverConfig",
    "FitReport",
    "init_svd",
    "init_random",
    "lambda_update",
    "hals_subproblem",
    "hals_fit",
    "grad_fit",
]

_ARMIJO_SHRINK = 0.5
_ARMIJO_SLOPE = 1e-4


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver settings.

    ``init`` selects the starting point ("svd" or "random"); ``inner_iters``
    bounds the per-column projected descent inside a HALS sweep;
    ``lambda_update_includes_penalty`` keeps the scale update an exact
    minimizer of the penalized objective (disabling it reverts to the plain
    least-squares scale, which can break monotone descent).
    """

    rank: int
    penalty: PenaltyConfig
    max_iter: int = 10000
    rel_tol: float = 1e-6
    init: str = "svd"
    seed: int | None = None
    inner_iters: int = 20
    lambda_update_includes_penalty: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be at least 1")
        if self.init not in ("svd", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class FitReport:
    """Objective trajectory plus run statistics for one fit."""

    objective_trajectory: list[float]
    elapsed_seconds: list[float]
    iterations: int
    tpi_seconds: float
    converged: bool
    model: FactorModel | NormalizedFactorModel
    seed: int | None = None
    coercive: bool = True


def _require_observed(w: np.ndarray) -> None:
    if not np.any(w > 0):
        raise ValueError("all entries are missing: the weight mask is identically zero")


def _require_solver_setting(penalty: PenaltyConfig) -> None:
    if penalty.d != 2 or penalty.p != 2:
        raise UnsupportedOperationError(
            f"solvers support d = p = 2 only, got d={penalty.d}, p={penalty.p}"
        )
    for n, a in enumerate(penalty.alpha):
        if a > 0 and not penalty.mu[n].is_quadratic:
            raise UnsupportedOperationError(
                f"mode {n}: solvers need a quadratic seminorm (TV-2 or spline roughness)"
            )


def init_svd(x: np.ndarray, w: np.ndarray, rank: int) -> NormalizedFactorModel:
    """Start from singular vectors of the mean-imputed unfoldings.

    Missing entries are filled with the mean of the observed ones; each
    mode's factor takes the absolute value of the leading left singular
    vectors, padded with uniform unit columns when the mode is shorter than
    the rank.
    """
    x = as_tensor(x)
    w = as_weight_mask(w)
    if x.shape != w.shape:
        raise ValueError(f"data/mask shape mismatch {x.shape} vs {w.shape}")
    _require_observed(w)
    observed = w > 0
    filled = np.where(observed, x, x[observed].mean())
    factors = []
    for n in range(x.ndim):
        u, _, _ = np.linalg.svd(mode_unfold(filled, n), full_matrices=False)
        k = min(rank, u.shape[1])
        f = np.abs(u[:, :k])
        if k < rank:
            pad = np.tile(default_sphere_element(x.shape[n])[:, None], (1, rank - k))
            f = np.hstack([f, pad])
        factors.append(f)
    return normalize(FactorModel(factors=tuple(factors)))


def init_random(shape, rank: int, seed: int | None = None) -> NormalizedFactorModel:
    """Uniform(0, 1) factor entries, columns normalized; counter-based PRNG."""
    rng = np.random.Generator(np.random.Philox(seed))
    factors = tuple(rng.uniform(size=(d, rank)) for d in shape)
    return normalize(FactorModel(factors=factors))


def _kr_column(columns: list[np.ndarray], skip: int | None) -> np.ndarray:
    """Rank-one Khatri-Rao column over the modes except ``skip``.

    Ordering matches :func:`smoothntf.tensors.mode_unfold` columns: the
    lowest retained mode varies fastest.
    """
    v = None
    for m, col in enumerate(columns):
        if m == skip:
            continue
        v = col if v is None else np.outer(col, v).ravel()
    if v is None:
        raise ValueError("at least one mode must remain")
    return v


def _penalty_quadratic_sum(penalty: PenaltyConfig, columns: list[np.ndarray]) -> float:
    total = 0.0
    for n, a in enumerate(penalty.alpha):
        if a > 0:
            total += a * penalty.mu[n].value(columns[n]) ** 2
    return total


def lambda_update(
    x_r: np.ndarray,
    w: np.ndarray,
    columns: list[np.ndarray],
    penalty: PenaltyConfig,
    include_penalty: bool = True,
) -> float:
    """Closed-form non-negative scale for one component.

    Minimizes ||W * (X_r - lam * T)||^2 over lam >= 0 with T the outer
    product of the unit columns; with ``include_penalty`` the quadratic
    penalty term in lam is folded into the denominator so the update is the
    exact minimizer of the penalized objective (d = 2).
    """
    w2 = w * w
    t = outer_rank_one(columns)
    num = float(np.dot((w2 * x_r).ravel(), t.ravel()))
    den = float(np.dot(w2.ravel(), (t * t).ravel()))
    if include_penalty:
        den += _penalty_quadratic_sum(penalty, columns)
    if den <= 0.0:
        return 0.0
    return max(num / den, 0.0)


def _project_descend(
    q: np.ndarray,
    pen_mat: np.ndarray | None,
    c: np.ndarray,
    v0: np.ndarray,
    max_steps: int,
) -> np.ndarray:
    """Projected gradient descent with Armijo backtracking on the quadratic

        f(v) = v' diag(q) v + v' P v - 2 c' v,   v >= 0,

    never returning a point worse than the start.  The trial step carries
    over between iterations (doubled after each acceptance) so the search
    settles near the inverse curvature without a Lipschitz estimate.
    """

    def value_and_curve(v: np.ndarray) -> tuple[float, np.ndarray]:
        hv = q * v
        if pen_mat is not None:
            hv = hv + pen_mat @ v
        return float(v @ hv - 2.0 * (c @ v)), hv

    v = np.maximum(v0, 0.0)
    f_v, hv = value_and_curve(v)
    f_scale = abs(f_v) + 1e-30
    step = 1.0
    for _ in range(max_steps):
        g = 2.0 * (hv - c)
        accepted = False
        t = step
        while t > 1e-20:
            cand = np.maximum(v - t * g, 0.0)
            slope = float(g @ (cand - v))
            # a vanishing predicted decrease means the warm start is stationary
            if slope >= -1e-13 * f_scale:
                break
            f_cand, h_cand = value_and_curve(cand)
            if f_cand <= f_v + _ARMIJO_SLOPE * slope:
                v, f_v, hv = cand, f_cand, h_cand
                step = t * 2.0
                accepted = True
                break
            t *= _ARMIJO_SHRINK
        if not accepted:
            break
    return v


def _column_quadratic(
    w2_unfold: np.ndarray,
    w2x_unfold: np.ndarray,
    columns: list[np.ndarray],
    lam: float,
    mode: int,
    penalty: PenaltyConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (q, c) of the separable part of the column objective.

    f(v) = sum_i q_i v_i^2 - 2 c_i v_i + const over the mode-``mode``
    unfolding rows, with the other modes' columns held fixed.  Because the
    follow-up rescale multiplies the component scale by ||v||, the other
    modes' penalty terms grow by ||v||^2; that cross term is a uniform
    diagonal contribution lam^2 * sum_{m != mode} alpha_m mu_m(col_m)^2,
    included here so the whole update can never increase the objective.
    """
    k = _kr_column(columns, skip=mode)
    q = (lam * lam) * (w2_unfold @ (k * k))
    c = lam * (w2x_unfold @ k)
    cross = 0.0
    for m, a in enumerate(penalty.alpha):
        if m != mode and a > 0:
            cross += a * penalty.mu[m].value(columns[m]) ** 2
    if cross > 0.0:
        q = q + (lam * lam) * cross
    return q, c


def _rescale(v: np.ndarray, lam: float, penalty: PenaltyConfig, mode: int) -> tuple[np.ndarray, float]:
    norm = penalty.nu[mode].value(v)
    if norm <= 0.0:
        return default_sphere_element(v.size, penalty.nu[mode]), 0.0
    return v / norm, lam * norm


def hals_subproblem(
    x_r: np.ndarray,
    w: np.ndarray,
    columns: list[np.ndarray],
    lam: float,
    mode: int,
    penalty: PenaltyConfig,
    inner_iters: int = 20,
) -> tuple[np.ndarray, float]:
    """Update one component's mode-``mode`` column.

    Descends the component objective over the non-negative orthant starting
    from the current column, then renormalizes, moving the column's norm
    into the scale.  A column that collapses to zero is replaced by the
    default sphere element with a zero scale.
    """
    w2 = w * w
    q, c = _column_quadratic(
        mode_unfold(w2, mode), mode_unfold(w2 * x_r, mode), columns, lam, mode, penalty
    )
    pen_mat = None
    a = penalty.alpha[mode]
    if a > 0 and lam > 0:
        pen_mat = (a * lam * lam) * penalty.mu[mode].quadratic_matrix(columns[mode].size)
    v = _project_descend(q, pen_mat, c, columns[mode], inner_iters)
    return _rescale(v, lam, penalty, mode)


def hals_fit(
    x: np.ndarray,
    w: np.ndarray,
    cfg: SolverConfig,
    init_model: NormalizedFactorModel | None = None,
) -> tuple[NormalizedFactorModel, FitReport]:
    """Alternating component-wise descent on the normalized problem.

    One iteration sweeps every component: rebuild that component's partial
    residual, update its column in each mode, refresh its scale, restore the
    residual.  The objective never increases along the sweep.
    """
    x = as_tensor(x)
    w = as_weight_mask(w)
    if x.shape != w.shape:
        raise ValueError(f"data/mask shape mismatch {x.shape} vs {w.shape}")
    _require_observed(w)
    _require_solver_setting(cfg.penalty)
    penalty = cfg.penalty
    if penalty.n_modes != x.ndim:
        raise ValueError("penalty mode count does not match the tensor order")

    verdict = coercivity_check(w, penalty.alpha)
    if not verdict.coercive:
        warnings.warn(
            "weight mask fails the coercivity check: a global minimum may not exist",
            stacklevel=2,
        )

    if init_model is None:
        if cfg.init == "svd":
            init_model = init_svd(x, w, cfg.rank)
        else:
            init_model = init_random(x.shape, cfg.rank, cfg.seed)
    if init_model.rank != cfg.rank or init_model.shape != x.shape:
        raise ValueError("initial model does not match the requested rank/shape")

    lam = init_model.lambdas.copy()
    factors = [f.copy() for f in init_model.factors]
    rank = cfg.rank
    n_modes = x.ndim
    w2 = w * w
    w2_unfolds = [mode_unfold(w2, n) for n in range(n_modes)]
    pen_mats = [
        penalty.mu[n].quadratic_matrix(x.shape[n]) if penalty.alpha[n] > 0 else None
        for n in range(n_modes)
    ]

    def current_objective(resid: np.ndarray) -> float:
        wr = w * resid
        loss = float(np.dot(wr.ravel(), wr.ravel()))
        pen = 0.0
        for n, a in enumerate(penalty.alpha):
            if a == 0.0:
                continue
            vals = penalty.mu[n].column_values(factors[n])
            pen += a * float(np.dot(lam**2, vals**2))
        return loss + pen

    resid = x - _reconstruct_raw(factors, lam)
    trajectory = [current_objective(resid)]
    elapsed = [0.0]
    converged = False
    t0 = time.perf_counter()
    sweeps = 0
    for _ in range(cfg.max_iter):
        resid = x - _reconstruct_raw(factors, lam)
        for r in range(rank):
            cols = [factors[n][:, r] for n in range(n_modes)]
            t_r = outer_rank_one(cols)
            x_r = resid + lam[r] * t_r
            w2x_r = w2 * x_r
            for n in range(n_modes):
                q, c = _column_quadratic(
                    w2_unfolds[n], mode_unfold(w2x_r, n), cols, float(lam[r]), n, penalty
                )
                pen_mat = None
                if pen_mats[n] is not None and lam[r] > 0:
                    pen_mat = (penalty.alpha[n] * lam[r] * lam[r]) * pen_mats[n]
                v = _project_descend(q, pen_mat, c, cols[n], cfg.inner_iters)
                col, lam_r = _rescale(v, float(lam[r]), penalty, n)
                cols[n] = col
                lam[r] = lam_r
                factors[n][:, r] = col
            t_r = outer_rank_one(cols)
            num = float(np.dot(w2x_r.ravel(), t_r.ravel()))
            den = float(np.dot(w2.ravel(), (t_r * t_r).ravel()))
            if cfg.lambda_update_includes_penalty:
                den += _penalty_quadratic_sum(penalty, cols)
            lam[r] = max(num / den, 0.0) if den > 0.0 else 0.0
            resid = x_r - lam[r] * t_r
        sweeps += 1
        obj = current_objective(resid)
        trajectory.append(obj)
        elapsed.append(time.perf_counter() - t0)
        prev = trajectory[-2]
        if prev > 0.0 and (prev - obj) / prev < cfg.rel_tol:
            converged = True
            break
        if prev == 0.0:
            converged = True
            break

    model = NormalizedFactorModel(
        lambdas=lam, factors=tuple(f.copy() for f in factors), nu=penalty.nu
    )
    total = time.perf_counter() - t0
    report = FitReport(
        objective_trajectory=trajectory,
        elapsed_seconds=elapsed,
        iterations=sweeps,
        tpi_seconds=total / max(sweeps, 1),
        converged=converged,
        model=model,
        seed=cfg.seed,
        coercive=verdict.coercive,
    )
    return model, report


def _pack(factors: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([f.ravel() for f in factors])


def _unpack(vec: np.ndarray, shape: tuple[int, ...], rank: int) -> list[np.ndarray]:
    out = []
    pos = 0
    for d in shape:
        out.append(vec[pos : pos + d * rank].reshape(d, rank))
        pos += d * rank
    return out


def grad_fit(
    x: np.ndarray,
    w: np.ndarray,
    cfg: SolverConfig,
    init_model: FactorModel | NormalizedFactorModel | None = None,
) -> tuple[FactorModel, FitReport]:
    """Bound-constrained quasi-Newton descent on the unnormalized problem.

    All factor entries form one vector constrained to the non-negative
    orthant; L-BFGS-B supplies the limited-memory direction, gradient
    projection and a sufficient-decrease line search.  The stopping rule is
    the same relative objective improvement used by :func:`hals_fit`.
    """
    x = as_tensor(x)
    w = as_weight_mask(w)
    if x.shape != w.shape:
        raise ValueError(f"data/mask shape mismatch {x.shape} vs {w.shape}")
    _require_observed(w)
    _require_solver_setting(cfg.penalty)
    penalty = cfg.penalty
    if penalty.n_modes != x.ndim:
        raise ValueError("penalty mode count does not match the tensor order")

    verdict = coercivity_check(w, penalty.alpha)
    if not verdict.coercive:
        warnings.warn(
            "weight mask fails the coercivity check: a global minimum may not exist",
            stacklevel=2,
        )

    if init_model is None:
        if cfg.init == "svd":
            init_model = init_svd(x, w, cfg.rank)
        else:
            init_model = init_random(x.shape, cfg.rank, cfg.seed)
    if isinstance(init_model, NormalizedFactorModel):
        init_model = denormalize(init_model)
    if init_model.rank != cfg.rank or init_model.shape != x.shape:
        raise ValueError("initial model does not match the requested rank/shape")

    w2 = w * w
    shape = x.shape
    rank = cfg.rank

    def fun(vec: np.ndarray):
        factors = _unpack(vec, shape, rank)
        f = _objective_raw(x, w2, penalty, factors)
        g = _gradient_raw(x, w2, penalty, factors)
        return f, _pack(g)

    x0 = _pack([f.copy() for f in init_model.factors])
    trajectory = [_objective_raw(x, w2, penalty, _unpack(x0, shape, rank))]
    elapsed = [0.0]
    state = {"x": x0.copy(), "converged": False}
    t0 = time.perf_counter()

    def callback(xk: np.ndarray):
        obj = _objective_raw(x, w2, penalty, _unpack(xk, shape, rank))
        trajectory.append(obj)
        elapsed.append(time.perf_counter() - t0)
        state["x"] = xk.copy()
        prev = trajectory[-2]
        if prev == 0.0 or (prev - obj) / prev < cfg.rel_tol:
            state["converged"] = True
            raise StopIteration

    try:
        res = minimize(
            fun,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None)] * x0.size,
            callback=callback,
            options={"maxiter": cfg.max_iter, "ftol": 0.0, "gtol": 0.0, "maxls": 50},
        )
        final_x = state["x"] if state["converged"] else res.x
        if not state["converged"] and res.status == 0:
            # proper first-order convergence also counts
            state["converged"] = True
    except StopIteration:
        final_x = state["x"]

    final_factors = _unpack(np.maximum(final_x, 0.0), shape, rank)
    final_obj = _objective_raw(x, w2, penalty, final_factors)
    if final_obj > trajectory[-1]:
        # keep the best recorded iterate if the raw result regressed
        final_factors = _unpack(np.maximum(state["x"], 0.0), shape, rank)
    else:
        trajectory[-1] = min(trajectory[-1], final_obj)

    model = FactorModel(factors=tuple(np.array(f) for f in final_factors))
    iterations = len(trajectory) - 1
    total = time.perf_counter() - t0
    report = FitReport(
        objective_trajectory=trajectory,
        elapsed_seconds=elapsed,
        iterations=iterations,
        tpi_seconds=total / max(iterations, 1),
        converged=state["converged"],
        model=model,
        seed=cfg.seed,
        coercive=verdict.coercive,
    )
    return model, report
