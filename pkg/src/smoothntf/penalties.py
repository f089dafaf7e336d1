"""Per-mode norms and smoothness seminorms.

Two seminorm families are shipped: total-variation p-norms and the roughness
of the natural cubic spline interpolant (L2 norm of its second derivative).
Both vanish on a nontrivial subspace -- constants for TV, functions affine in
the knots for spline roughness -- which is what lets them act as smoothness
penalties rather than norms.

The quadratic kinds (TV-2 and spline roughness) expose a symmetric PSD matrix
M with mu(a)^2 = a' M a; those matrices are cached per vector length since the
solvers evaluate them in the innermost loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.linalg import cholesky_banded, solve_banded

from .errors import UnsupportedOperationError

__all__ = [
    "tv_seminorm",
    "first_difference_matrix",
    "spline_roughness_matrix",
    "NormSpec",
    "TotalVariation",
    "SplineRoughness",
    "SeminormSpec",
    "seminorm_value",
    "seminorm_gradient_sq",
    "PenaltyConfig",
    "default_spline_knots",
]


def tv_seminorm(a: np.ndarray, p: float) -> float:
    """Total variation p-norm: the p-norm of consecutive differences.

    ``p`` may be ``math.inf``; a length-1 vector has no differences and
    scores 0.
    """
    if p < 1:
        raise ValueError(f"total variation requires p >= 1, got {p}")
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError("tv_seminorm expects a 1-D vector")
    if a.size <= 1:
        return 0.0
    d = np.abs(np.diff(a))
    if math.isinf(p):
        return float(d.max())
    return float(np.sum(d**p) ** (1.0 / p))


def first_difference_matrix(n: int) -> np.ndarray:
    """(n-1) x n matrix D with (Da)_i = a_i - a_{i+1}."""
    d = np.zeros((max(n - 1, 0), n))
    for i in range(n - 1):
        d[i, i] = 1.0
        d[i, i + 1] = -1.0
    return d


@lru_cache(maxsize=128)
def _tv2_matrix(n: int) -> np.ndarray:
    d = first_difference_matrix(n)
    m = d.T @ d
    m.setflags(write=False)
    return m


def default_spline_knots(n: int) -> tuple[float, ...]:
    """Equispaced interior knots u_i = (i - 0.5)/n, strictly inside (0, 1)."""
    return tuple((i + 0.5) / n for i in range(n))


@lru_cache(maxsize=128)
def _spline_factor(knots: tuple[float, ...]) -> np.ndarray:
    """Factor B with K = B' B for the roughness form at these knots.

    B = L^{-1} Q' where R = L L'; evaluating the form as ||B a||^2 is exact
    on (numerically) affine vectors, where the dense form cancels badly.
    """
    u = np.asarray(knots, dtype=np.float64)
    if u.ndim != 1 or u.size < 2:
        raise ValueError("spline roughness requires at least 2 knots")
    if not (u[0] > 0.0 and u[-1] < 1.0):
        raise ValueError("knots must lie strictly inside (0, 1)")
    if np.any(np.diff(u) <= 0):
        raise ValueError("knots must be strictly increasing")
    n = u.size
    if n == 2:
        b = np.zeros((1, 2))
        b.setflags(write=False)
        return b
    h = np.diff(u)
    q = np.zeros((n, n - 2))
    for j in range(1, n - 1):
        q[j - 1, j - 1] = 1.0 / h[j - 1]
        q[j, j - 1] = -1.0 / h[j - 1] - 1.0 / h[j]
        q[j + 1, j - 1] = 1.0 / h[j]
    # R in lower banded form for the banded Cholesky.
    bands = np.zeros((2, n - 2))
    bands[0] = (h[:-1] + h[1:]) / 3.0
    bands[1, :-1] = h[1:-1] / 6.0
    chol = cholesky_banded(bands, lower=True)
    b = solve_banded((1, 0), chol, q.T)
    b.setflags(write=False)
    return b


@lru_cache(maxsize=128)
def _spline_matrix(knots: tuple[float, ...]) -> np.ndarray:
    b = _spline_factor(knots)
    k = b.T @ b
    k = (k + k.T) / 2.0
    k.setflags(write=False)
    return k


def spline_roughness_matrix(knots: Sequence[float]) -> np.ndarray:
    """Quadratic form of natural-cubic-spline roughness.

    For strictly increasing knots u_1 < ... < u_I in (0, 1), returns the
    symmetric PSD matrix K such that a' K a equals the integral over [0, 1]
    of the squared second derivative of the natural cubic spline
    interpolating (u_i, a_i).  Built as K = Q R^{-1} Q' where Q holds the
    scaled second differences and R the tridiagonal Gram matrix of the
    second-derivative hat basis (with h_i = u_{i+1} - u_i):

        Q[i-1, i] = 1/h_{i-1},  Q[i, i] = -1/h_{i-1} - 1/h_i,  Q[i+1, i] = 1/h_i
        R[i, i] = (h_{i-1} + h_i)/3,  R[i, i+1] = R[i+1, i] = h_i/6

    The interpolant is linear outside the knot range, so the natural
    boundary contributes nothing to the integral.  With fewer than three
    knots the interpolant is affine and K is the zero matrix.
    """
    return np.array(_spline_matrix(tuple(float(u) for u in knots)))


@dataclass(frozen=True)
class NormSpec:
    """Per-mode norm used to place factor columns on the unit sphere."""

    kind: str = "l2"

    def __post_init__(self):
        if self.kind != "l2":
            raise ValueError(f"unsupported norm kind: {self.kind!r}")

    def value(self, a: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


@dataclass(frozen=True)
class TotalVariation:
    """TV-p seminorm; only p = 2 has a quadratic form and gradient."""

    p: float = 2.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"total variation requires p >= 1, got {self.p}")

    @property
    def is_quadratic(self) -> bool:
        return self.p == 2.0

    def value(self, a: np.ndarray) -> float:
        return tv_seminorm(np.asarray(a, dtype=np.float64), self.p)

    def column_values(self, f: np.ndarray) -> np.ndarray:
        """Seminorm of every column of a factor matrix at once."""
        f = np.asarray(f, dtype=np.float64)
        if f.shape[0] <= 1:
            return np.zeros(f.shape[1])
        d = np.abs(np.diff(f, axis=0))
        if math.isinf(self.p):
            return d.max(axis=0)
        return np.sum(d**self.p, axis=0) ** (1.0 / self.p)

    def quadratic_matrix(self, length: int) -> np.ndarray:
        if not self.is_quadratic:
            raise UnsupportedOperationError(
                f"TV-{self.p} has no quadratic form; only TV-2 does"
            )
        return _tv2_matrix(length)


@dataclass(frozen=True)
class SplineRoughness:
    """Natural-cubic-spline roughness seminorm.

    ``knots=None`` uses the default equispaced interior knots for whatever
    vector length the seminorm is applied to; explicit knots pin the length.
    """

    knots: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.knots is not None:
            object.__setattr__(self, "knots", tuple(float(u) for u in self.knots))

    @property
    def is_quadratic(self) -> bool:
        return True

    def knots_for(self, length: int) -> tuple[float, ...]:
        if self.knots is None:
            return default_spline_knots(length)
        if len(self.knots) != length:
            raise ValueError(
                f"seminorm has {len(self.knots)} knots but was applied to a "
                f"length-{length} vector"
            )
        return self.knots

    def quadratic_matrix(self, length: int) -> np.ndarray:
        if length == 1:
            return np.zeros((1, 1))
        return _spline_matrix(self.knots_for(length))

    def value(self, a: np.ndarray) -> float:
        a = np.asarray(a, dtype=np.float64)
        if a.size == 1:
            return 0.0
        # evaluate through the factor: exact on affine vectors
        return float(np.linalg.norm(_spline_factor(self.knots_for(a.size)) @ a))

    def column_values(self, f: np.ndarray) -> np.ndarray:
        """Seminorm of every column of a factor matrix at once."""
        f = np.asarray(f, dtype=np.float64)
        if f.shape[0] <= 1:
            return np.zeros(f.shape[1])
        return np.linalg.norm(_spline_factor(self.knots_for(f.shape[0])) @ f, axis=0)


SeminormSpec = Union[TotalVariation, SplineRoughness]


def seminorm_value(spec: SeminormSpec, a: np.ndarray) -> float:
    return spec.value(a)


def seminorm_gradient_sq(spec: SeminormSpec, a: np.ndarray) -> np.ndarray:
    """Gradient of the squared seminorm, 2 M a.  Quadratic kinds only."""
    if not spec.is_quadratic:
        raise UnsupportedOperationError(
            "gradient of the squared seminorm requires a quadratic kind"
        )
    a = np.asarray(a, dtype=np.float64)
    return 2.0 * (spec.quadratic_matrix(a.size) @ a)


@dataclass(frozen=True)
class PenaltyConfig:
    """Smoothness penalty: per-mode weights, exponents, seminorms, norms.

    ``mu[n]`` may be None only where ``alpha[n] == 0``.  Exponents must
    satisfy d >= p >= 1.
    """

    alpha: tuple[float, ...]
    mu: tuple[SeminormSpec | None, ...]
    d: int = 2
    p: int = 2
    nu: tuple[NormSpec, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if any(a < 0 for a in alpha):
            raise ValueError("penalty weights must be non-negative")
        if not (self.d >= self.p >= 1):
            raise ValueError(f"exponents must satisfy d >= p >= 1, got d={self.d}, p={self.p}")
        if len(self.mu) != len(alpha):
            raise ValueError("need one seminorm slot per mode")
        for n, (a, m) in enumerate(zip(alpha, self.mu)):
            if a > 0 and m is None:
                raise ValueError(f"mode {n} is penalized (alpha > 0) but has no seminorm")
        nu = self.nu
        if nu is None:
            nu = tuple(NormSpec() for _ in alpha)
        object.__setattr__(self, "nu", tuple(nu))
        if len(self.nu) != len(alpha):
            raise ValueError("need one norm per mode")

    @property
    def n_modes(self) -> int:
        return len(self.alpha)

    @classmethod
    def unpenalized(cls, n_modes: int) -> "PenaltyConfig":
        return cls(alpha=(0.0,) * n_modes, mu=(None,) * n_modes)

    @classmethod
    def for_modes(
        cls,
        alpha: Sequence[float],
        seminorm: SeminormSpec,
        d: int = 2,
        p: int = 2,
    ) -> "PenaltyConfig":
        """Apply one seminorm kind to every penalized mode."""
        alpha = tuple(float(a) for a in alpha)
        mu = tuple(seminorm if a > 0 else None for a in alpha)
        return cls(alpha=alpha, mu=mu, d=d, p=p)
