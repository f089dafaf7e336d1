"""Factor models, weighted losses, penalties and the full objective.

Two parameterizations of the same rank-R non-negative model are supported:

* ``FactorModel`` -- raw non-negative factor matrices A^(n), one per mode.
* ``NormalizedFactorModel`` -- per-component scales lambda_r plus factor
  matrices whose columns have unit norm, which removes the scaling
  indeterminacy of the raw form.

The weighted squared loss ``||W * (X - Xhat)||_F^2`` pairs with a smoothness
penalty in either parameterization; for d = p the two penalties agree exactly
after normalization, making the two objectives two views of one criterion.
The analytic gradient is provided for the unnormalized objective in the
d = p = 2 setting with quadratic seminorms and L2 column norms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnsupportedOperationError
from .penalties import NormSpec, PenaltyConfig
from .tensors import as_tensor, khatri_rao, mode_unfold

__all__ = [
    "FactorModel",
    "NormalizedFactorModel",
    "default_sphere_element",
    "reconstruct",
    "normalize",
    "denormalize",
    "loss_weighted",
    "penalty_normalized",
    "penalty_unnormalized",
    "objective",
    "gradient_objective",
]

_UNIT_NORM_TOL = 1e-8


def _validated_factors(factors: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
    if len(factors) == 0:
        raise ValueError("a factor model needs at least one mode")
    out = []
    rank = None
    for n, f in enumerate(factors):
        f = np.array(f, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError(f"mode-{n} factor must be a matrix, got ndim={f.ndim}")
        if not np.all(np.isfinite(f)):
            raise ValueError(f"mode-{n} factor has non-finite entries")
        if np.any(f < 0):
            raise ValueError(f"mode-{n} factor has negative entries")
        if rank is None:
            rank = f.shape[1]
        elif f.shape[1] != rank:
            raise ValueError("all factor matrices must share the same column count")
        out.append(f)
    if rank < 1:
        raise ValueError("rank must be at least 1")
    return tuple(out)


@dataclass(frozen=True)
class FactorModel:
    """Non-negative factor matrices A^(n) of shape (I_n, R)."""

    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", _validated_factors(self.factors))

    @property
    def n_modes(self) -> int:
        return len(self.factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


@dataclass(frozen=True)
class NormalizedFactorModel:
    """Scales lambda_r >= 0 plus factor matrices with unit-norm columns."""

    lambdas: np.ndarray
    factors: tuple[np.ndarray, ...]
    nu: tuple[NormSpec, ...] | None = None

    def __post_init__(self):
        factors = _validated_factors(self.factors)
        lam = np.array(self.lambdas, dtype=np.float64).reshape(-1)
        if lam.size != factors[0].shape[1]:
            raise ValueError("need one scale per component")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("scales must be finite and non-negative")
        nu = self.nu if self.nu is not None else tuple(NormSpec() for _ in factors)
        if len(nu) != len(factors):
            raise ValueError("need one norm per mode")
        for n, f in enumerate(factors):
            for r in range(f.shape[1]):
                v = nu[n].value(f[:, r])
                if abs(v - 1.0) > _UNIT_NORM_TOL:
                    raise ValueError(
                        f"column {r} of mode {n} has norm {v!r}, expected 1"
                    )
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "nu", tuple(nu))

    @property
    def n_modes(self) -> int:
        return len(self.factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


def default_sphere_element(length: int, nu: NormSpec | None = None) -> np.ndarray:
    """Deterministic unit-norm positive vector used for zero-norm columns."""
    nu = nu or NormSpec()
    v = np.ones(length)
    return v / nu.value(v)


def _reconstruct_raw(factors: Sequence[np.ndarray], lambdas: np.ndarray | None = None) -> np.ndarray:
    head = factors[0] if lambdas is None else factors[0] * np.asarray(lambdas)[None, :]
    if len(factors) == 1:
        return head.sum(axis=1)
    shape = tuple(f.shape[0] for f in factors)
    unfolded = head @ khatri_rao(factors, skip=0).T
    return np.reshape(unfolded, shape, order="F")


def reconstruct(model: FactorModel | NormalizedFactorModel) -> np.ndarray:
    """Dense tensor sum of the model's rank-one components."""
    if isinstance(model, NormalizedFactorModel):
        return _reconstruct_raw(model.factors, model.lambdas)
    return _reconstruct_raw(model.factors)


def normalize(model: FactorModel, nu: Sequence[NormSpec] | None = None) -> NormalizedFactorModel:
    """Pull each column's norm into a per-component scale.

    lambda_r is the product of the column norms across modes; zero-norm
    columns are replaced by the default sphere element (their scale is
    already zero, so the reconstruction is unchanged).
    """
    nu = tuple(nu) if nu is not None else tuple(NormSpec() for _ in model.factors)
    rank = model.rank
    lam = np.ones(rank)
    factors = []
    for n, f in enumerate(model.factors):
        g = f.copy()
        for r in range(rank):
            v = nu[n].value(f[:, r])
            lam[r] *= v
            if v > 0:
                g[:, r] = f[:, r] / v
            else:
                g[:, r] = default_sphere_element(f.shape[0], nu[n])
        factors.append(g)
    return NormalizedFactorModel(lambdas=lam, factors=tuple(factors), nu=nu)


def denormalize(model: NormalizedFactorModel) -> FactorModel:
    """Spread each scale evenly across the modes: a^(n)_r = lambda_r^{1/N} * col."""
    n_modes = model.n_modes
    scale = model.lambdas ** (1.0 / n_modes)
    factors = tuple(f * scale[None, :] for f in model.factors)
    return FactorModel(factors=factors)


def _loss_raw(x: np.ndarray, w: np.ndarray, xhat: np.ndarray) -> float:
    resid = w * (x - xhat)
    return float(np.dot(resid.ravel(), resid.ravel()))


def loss_weighted(x: np.ndarray, w: np.ndarray, model: FactorModel | NormalizedFactorModel) -> float:
    """Weighted squared error ||W * (X - reconstruct(model))||_F^2."""
    x = as_tensor(x)
    w = as_tensor(w)
    if x.shape != w.shape:
        raise ValueError(f"data/mask shape mismatch {x.shape} vs {w.shape}")
    if model.shape != x.shape:
        raise ValueError(f"model shape {model.shape} does not match data shape {x.shape}")
    return _loss_raw(x, w, reconstruct(model))


def _check_penalty_modes(cfg: PenaltyConfig, n_modes: int) -> None:
    if cfg.n_modes != n_modes:
        raise ValueError(
            f"penalty configured for {cfg.n_modes} modes, model has {n_modes}"
        )


def penalty_normalized(cfg: PenaltyConfig, model: NormalizedFactorModel) -> float:
    """sum_n alpha_n sum_r lambda_r^d mu_n(col)^p."""
    _check_penalty_modes(cfg, model.n_modes)
    lam_d = model.lambdas ** cfg.d
    total = 0.0
    for n, a in enumerate(cfg.alpha):
        if a == 0.0:
            continue
        mu = cfg.mu[n]
        vals = np.array([mu.value(model.factors[n][:, r]) for r in range(model.rank)])
        total += a * float(np.dot(lam_d, vals**cfg.p))
    return total


def penalty_unnormalized(cfg: PenaltyConfig, model: FactorModel) -> float:
    """sum_n alpha_n sum_r nu_n(a)^{d-p} mu_n(a)^p prod_{m != n} nu_m(a)^d."""
    _check_penalty_modes(cfg, model.n_modes)
    rank = model.rank
    norms = np.array(
        [[cfg.nu[n].value(model.factors[n][:, r]) for r in range(rank)]
         for n in range(model.n_modes)]
    )
    total = 0.0
    for n, a in enumerate(cfg.alpha):
        if a == 0.0:
            continue
        mu = cfg.mu[n]
        for r in range(rank):
            mu_p = mu.value(model.factors[n][:, r]) ** cfg.p
            if mu_p == 0.0:
                continue
            others = np.prod([norms[m, r] ** cfg.d for m in range(model.n_modes) if m != n])
            total += a * norms[n, r] ** (cfg.d - cfg.p) * mu_p * float(others)
    return total


def objective(
    x: np.ndarray,
    w: np.ndarray,
    cfg: PenaltyConfig,
    model: FactorModel | NormalizedFactorModel,
) -> float:
    """Weighted loss plus the penalty matching the model's parameterization."""
    loss = loss_weighted(x, w, model)
    if isinstance(model, NormalizedFactorModel):
        return loss + penalty_normalized(cfg, model)
    return loss + penalty_unnormalized(cfg, model)


def _require_quadratic_setting(cfg: PenaltyConfig) -> None:
    if cfg.d != 2 or cfg.p != 2:
        raise UnsupportedOperationError(
            f"gradients are implemented for d = p = 2 only, got d={cfg.d}, p={cfg.p}"
        )
    for n, a in enumerate(cfg.alpha):
        if a > 0 and not cfg.mu[n].is_quadratic:
            raise UnsupportedOperationError(
                f"mode {n}: gradient needs a quadratic seminorm (TV-2 or spline roughness)"
            )
        if cfg.nu[n].kind != "l2":
            raise UnsupportedOperationError("gradients require L2 column norms")


def _objective_raw(
    x: np.ndarray, w2: np.ndarray, cfg: PenaltyConfig, factors: Sequence[np.ndarray]
) -> float:
    """Loss + penalty evaluated on raw factor arrays (w2 = W * W).

    Solver-internal fast path for d = p = 2 with quadratic seminorms;
    skips model validation and reuses cached seminorm matrices.
    """
    xhat = _reconstruct_raw(factors)
    resid = x - xhat
    loss = float(np.dot(resid.ravel(), (w2 * resid).ravel()))
    rank = factors[0].shape[1]
    n_modes = len(factors)
    sq = np.array([np.sum(f * f, axis=0) for f in factors])  # n_modes x R
    pen = 0.0
    for n, a in enumerate(cfg.alpha):
        if a == 0.0:
            continue
        m = cfg.mu[n].quadratic_matrix(factors[n].shape[0])
        quad = np.sum(factors[n] * (m @ factors[n]), axis=0)  # mu^2 per column
        others = np.ones(rank)
        for mm in range(n_modes):
            if mm != n:
                others *= sq[mm]
        pen += a * float(np.dot(quad, others))
    return loss + pen


def _gradient_raw(
    x: np.ndarray, w2: np.ndarray, cfg: PenaltyConfig, factors: Sequence[np.ndarray]
) -> list[np.ndarray]:
    n_modes = len(factors)
    rank = factors[0].shape[1]
    xhat = _reconstruct_raw(factors)
    z = w2 * (x - xhat)
    sq = np.array([np.sum(f * f, axis=0) for f in factors])  # squared L2 per column
    mats = [
        cfg.mu[n].quadratic_matrix(factors[n].shape[0]) if cfg.alpha[n] > 0 else None
        for n in range(n_modes)
    ]
    quads = np.zeros((n_modes, rank))
    for n in range(n_modes):
        if mats[n] is not None:
            quads[n] = np.sum(factors[n] * (mats[n] @ factors[n]), axis=0)

    grads = []
    for n in range(n_modes):
        g = -2.0 * mode_unfold(z, n) @ khatri_rao(factors, skip=n)
        prod_excl = np.ones(rank)
        for m in range(n_modes):
            if m != n:
                prod_excl *= sq[m]
        if cfg.alpha[n] > 0:
            g += 2.0 * cfg.alpha[n] * (mats[n] @ factors[n]) * prod_excl[None, :]
        coef = np.zeros(rank)
        for n2 in range(n_modes):
            if n2 == n or cfg.alpha[n2] == 0.0:
                continue
            prod2 = np.ones(rank)
            for m in range(n_modes):
                if m != n and m != n2:
                    prod2 *= sq[m]
            coef += cfg.alpha[n2] * quads[n2] * prod2
        if np.any(coef != 0.0):
            g += 2.0 * factors[n] * coef[None, :]
        grads.append(g)
    return grads


def gradient_objective(
    x: np.ndarray, w: np.ndarray, cfg: PenaltyConfig, model: FactorModel
) -> list[np.ndarray]:
    """Gradient of the unnormalized objective w.r.t. each factor matrix.

    Valid for d = p = 2 with quadratic seminorms and L2 norms.  The residual
    is weighted by W * W because the loss squares the weights.
    """
    x = as_tensor(x)
    w = as_tensor(w)
    if x.shape != w.shape or model.shape != x.shape:
        raise ValueError("data, mask and model shapes must agree")
    _check_penalty_modes(cfg, model.n_modes)
    _require_quadratic_setting(cfg)
    return _gradient_raw(x, w * w, cfg, model.factors)
