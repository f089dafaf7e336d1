import math

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from smoothntf.errors import UnsupportedOperationError
from smoothntf.penalties import (
    NormSpec,
    PenaltyConfig,
    SplineRoughness,
    TotalVariation,
    default_spline_knots,
    first_difference_matrix,
    seminorm_gradient_sq,
    seminorm_value,
    spline_roughness_matrix,
    tv_seminorm,
)


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def spline_integral_oracle(knots, a):
    """Exact integral of the squared second derivative of the natural
    cubic interpolant: piecewise linear a'' makes each piece a quadratic."""
    cs = CubicSpline(knots, a, bc_type="natural")
    c2 = cs(knots, 2)
    h = np.diff(knots)
    return float(np.sum(h * (c2[:-1] ** 2 + c2[:-1] * c2[1:] + c2[1:] ** 2) / 3.0))


class TestTotalVariation:
    def test_p1(self):
        assert tv_seminorm(np.array([1.0, 2.0, 4.0]), 1) == pytest.approx(3.0)

    def test_p_inf(self):
        assert tv_seminorm(np.array([1.0, 2.0, 4.0]), math.inf) == pytest.approx(2.0)

    def test_constant_vector(self):
        for p in (1, 2, math.inf):
            assert tv_seminorm(np.array([5.0, 5.0, 5.0]), p) == 0.0

    def test_length_one(self):
        assert tv_seminorm(np.array([3.0]), 2) == 0.0

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            tv_seminorm(np.array([1.0, 2.0]), 0.5)

    def test_quadratic_form_matches_value(self):
        g = rng(1)
        a = g.normal(size=7)
        m = TotalVariation(2.0).quadratic_matrix(7)
        assert a @ m @ a == pytest.approx(tv_seminorm(a, 2) ** 2, rel=1e-12)

    def test_difference_matrix_factorization(self):
        d = first_difference_matrix(5)
        assert np.allclose(d.T @ d, TotalVariation(2.0).quadratic_matrix(5))

    def test_null_space_is_exactly_constants(self):
        g = rng(2)
        a = g.normal(size=6)
        if tv_seminorm(a, 2) == 0.0:
            assert np.allclose(np.diff(a), 0.0)
        assert tv_seminorm(np.full(6, 2.5), 2) == 0.0


class TestSplineRoughnessMatrix:
    def test_two_knots_zero_matrix(self):
        assert np.array_equal(spline_roughness_matrix((0.2, 0.7)), np.zeros((2, 2)))

    def test_affine_vector_in_null_space(self):
        u = np.asarray(default_spline_knots(6))
        a = 2.0 * u + 1.0
        spec = SplineRoughness()
        assert spec.value(a) ** 2 <= 1e-12
        k = spline_roughness_matrix(u)
        assert abs(a @ k @ a) <= 1e-10

    def test_quadrature_oracle(self):
        g = rng(3)
        u = np.asarray(default_spline_knots(6))
        a = g.normal(size=6)
        k = spline_roughness_matrix(u)
        assert a @ k @ a == pytest.approx(spline_integral_oracle(u, a), rel=1e-8)

    def test_oracle_over_sizes(self):
        g = rng(4)
        for size in range(4, 13):
            u = np.sort(g.uniform(0.05, 0.95, size=size))
            a = g.normal(size=size)
            k = spline_roughness_matrix(u)
            assert a @ k @ a == pytest.approx(spline_integral_oracle(u, a), rel=1e-8)

    def test_symmetric_psd_with_two_zero_modes(self):
        for size in (3, 5, 9):
            k = spline_roughness_matrix(default_spline_knots(size))
            assert np.allclose(k, k.T)
            ev = np.linalg.eigvalsh(k)
            scale = max(ev.max(), 1.0)
            assert np.all(ev >= -1e-9 * scale)
            assert np.sum(np.abs(ev) <= 1e-9 * scale) == 2

    def test_rejects_bad_knots(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            spline_roughness_matrix((0.2, 0.2, 0.6))
        with pytest.raises(ValueError, match="inside"):
            spline_roughness_matrix((0.0, 0.5, 0.9))
        with pytest.raises(ValueError, match="at least 2"):
            spline_roughness_matrix((0.5,))


class TestSeminormInterface:
    def test_tv2_worked_example(self):
        spec = TotalVariation(2.0)
        a = np.array([0.0, 2.0])
        assert seminorm_value(spec, a) == pytest.approx(2.0)
        assert np.allclose(seminorm_gradient_sq(spec, a), [-4.0, 4.0])

    def test_spline_gradient_vanishes_on_affine(self):
        u = np.asarray(default_spline_knots(5))
        a = -1.5 * u + 0.25
        grad = seminorm_gradient_sq(SplineRoughness(), a)
        assert np.max(np.abs(grad)) <= 1e-12

    @pytest.mark.parametrize("spec", [TotalVariation(2.0), SplineRoughness()])
    def test_gradient_matches_finite_differences(self, spec):
        g = rng(5)
        a = g.normal(size=6)
        grad = seminorm_gradient_sq(spec, a)
        h = 1e-6
        fd = np.zeros_like(a)
        for i in range(a.size):
            ap, am = a.copy(), a.copy()
            ap[i] += h
            am[i] -= h
            fd[i] = (seminorm_value(spec, ap) ** 2 - seminorm_value(spec, am) ** 2) / (2 * h)
        assert np.max(np.abs(fd - grad)) / np.max(np.abs(grad)) < 1e-6

    def test_gradient_rejected_for_non_quadratic(self):
        for p in (1.0, math.inf):
            with pytest.raises(UnsupportedOperationError):
                seminorm_gradient_sq(TotalVariation(p), np.array([1.0, 2.0]))

    @pytest.mark.parametrize("spec", [TotalVariation(1.0), TotalVariation(2.0),
                                      TotalVariation(math.inf), SplineRoughness()])
    @pytest.mark.parametrize("c", [-2.0, 0.5, 3.0])
    def test_absolute_homogeneity(self, spec, c):
        a = rng(6).normal(size=7)
        assert seminorm_value(spec, c * a) == pytest.approx(
            abs(c) * seminorm_value(spec, a), rel=1e-12, abs=1e-12
        )

    def test_column_values_match_scalar_path(self):
        g = rng(7)
        f = g.normal(size=(6, 4))
        for spec in (TotalVariation(1.0), TotalVariation(2.0), SplineRoughness()):
            want = [seminorm_value(spec, f[:, r]) for r in range(4)]
            assert np.allclose(spec.column_values(f), want, atol=1e-12)


class TestNormSpec:
    def test_l2_properties(self):
        nu = NormSpec()
        g = rng(8)
        a, b = g.normal(size=5), g.normal(size=5)
        assert nu.value(np.zeros(5)) == 0.0
        assert nu.value(2.0 * a) == pytest.approx(2.0 * nu.value(a))
        assert nu.value(a + b) <= nu.value(a) + nu.value(b) + 1e-12

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            NormSpec(kind="l1")


class TestPenaltyConfig:
    def test_requires_d_ge_p_ge_1(self):
        with pytest.raises(ValueError, match="d >= p >= 1"):
            PenaltyConfig(alpha=(1.0,), mu=(TotalVariation(2.0),), d=1, p=2)
        with pytest.raises(ValueError, match="d >= p >= 1"):
            PenaltyConfig(alpha=(1.0,), mu=(TotalVariation(2.0),), d=2, p=0)

    def test_requires_seminorm_on_penalized_modes(self):
        with pytest.raises(ValueError, match="no seminorm"):
            PenaltyConfig(alpha=(1.0, 0.0), mu=(None, None))

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError, match="non-negative"):
            PenaltyConfig(alpha=(-0.5,), mu=(TotalVariation(2.0),))

    def test_for_modes_broadcast(self):
        cfg = PenaltyConfig.for_modes((0.1, 0.0, 0.2), SplineRoughness())
        assert cfg.mu[0] is not None and cfg.mu[1] is None and cfg.mu[2] is not None

    def test_matrix_cache_reused(self):
        spec = SplineRoughness()
        assert spec.quadratic_matrix(8) is spec.quadratic_matrix(8)
