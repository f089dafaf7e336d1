import itertools
import math

import numpy as np
import pytest

from smoothntf.diagnostics import coercivity_check, nmse, psnr, sim_score, ssim
from smoothntf.model import FactorModel, normalize


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def coercivity_oracle(w, alpha):
    """Enumerate every candidate slice over the unpenalized modes."""
    free = [n for n in range(w.ndim) if alpha[n] == 0.0]
    if not free:
        return bool(np.any(w > 0))
    for coords in itertools.product(*(range(w.shape[n]) for n in free)):
        slicer = [slice(None)] * w.ndim
        for n, j in zip(free, coords):
            slicer[n] = j
        if not np.any(w[tuple(slicer)] > 0):
            return False
    return True


class TestCoercivity:
    def test_missing_slice_of_free_mode(self):
        w = np.ones((3, 3, 3))
        w[:, :, 2] = 0.0
        verdict = coercivity_check(w, (1.0, 1.0, 0.0))
        assert not verdict.coercive
        assert verdict.witness == {2: 2}

    def test_all_modes_penalized_needs_one_observation(self):
        g = rng(1)
        w = (g.uniform(size=(3, 4)) > 0.9).astype(float)
        w[1, 2] = 1.0
        assert coercivity_check(w, (1.0, 1.0)).coercive

    def test_zero_mask_never_coercive(self):
        w = np.zeros((2, 3, 2))
        for alpha in [(1.0, 1.0, 1.0), (1.0, 0.0, 0.0), (0.0, 0.0, 0.0)]:
            verdict = coercivity_check(w, alpha)
            assert not verdict.coercive
            assert verdict.witness is not None

    def test_agrees_with_enumeration_on_random_masks(self):
        g = rng(2)
        for _ in range(200):
            n_modes = int(g.integers(1, 5))
            dims = [int(g.integers(1, 5)) for _ in range(n_modes - 1)] + [int(g.integers(1, 4))]
            w = (g.uniform(size=dims) > g.uniform(0.2, 0.9)).astype(float)
            alpha = tuple(float(v) for v in g.integers(0, 2, size=n_modes))
            verdict = coercivity_check(w, alpha)
            assert verdict.coercive == coercivity_oracle(w, alpha)
            if not verdict.coercive:
                free = [n for n in range(n_modes) if alpha[n] == 0.0]
                assert sorted(verdict.witness) == free
                slicer = [slice(None)] * n_modes
                for n, j in verdict.witness.items():
                    slicer[n] = j
                assert not np.any(w[tuple(slicer)] > 0)

    def test_alpha_length_mismatch(self):
        with pytest.raises(ValueError, match="per mode"):
            coercivity_check(np.ones((2, 2)), (1.0,))


class TestNmse:
    def test_exact_and_zero_estimates(self):
        y = rng(3).normal(size=(4, 4))
        assert nmse(y, y) == 0.0
        assert nmse(y, np.zeros_like(y)) == pytest.approx(1.0)

    def test_matches_loop(self):
        g = rng(4)
        y, yh = g.normal(size=(3, 3, 2)), g.normal(size=(3, 3, 2))
        num = sum((y[i] - yh[i]) ** 2 for i in np.ndindex(y.shape))
        den = sum(y[i] ** 2 for i in np.ndindex(y.shape))
        assert nmse(y, yh) == pytest.approx(num / den, rel=1e-12)

    def test_scale_invariance(self):
        g = rng(5)
        y, yh = g.normal(size=(4, 3)), g.normal(size=(4, 3))
        for c in (0.5, -3.0):
            assert nmse(c * y, c * yh) == pytest.approx(nmse(y, yh), rel=1e-12)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            nmse(np.zeros((2, 2)), np.ones((2, 2)))


def random_normalized(seed, dims=(5, 4, 3), rank=3):
    g = rng(seed)
    return normalize(FactorModel(factors=tuple(g.uniform(0.05, 1.0, size=(d, rank)) for d in dims)))


class TestSimScore:
    def test_identical_models_score_one(self):
        m = random_normalized(6)
        assert sim_score(m, m) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_supports_score_zero(self):
        a = FactorModel(factors=(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]])))
        b = FactorModel(factors=(np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]])))
        assert sim_score(normalize(a), normalize(b)) == 0.0

    def test_invariant_under_column_permutation(self):
        m = random_normalized(7)
        perm = [2, 0, 1]
        permuted = normalize(
            FactorModel(factors=tuple(f[:, perm] for f in m.factors))
        )
        assert sim_score(m, permuted) == pytest.approx(1.0, abs=1e-10)
        other = random_normalized(8)
        assert sim_score(m, other) == pytest.approx(
            sim_score(m, normalize(FactorModel(factors=tuple(f[:, perm] for f in other.factors)))),
            abs=1e-12,
        )

    def test_large_rank_uses_assignment(self):
        m = random_normalized(9, dims=(12, 11), rank=10)
        assert sim_score(m, m) == pytest.approx(1.0, abs=1e-10)

    def test_rank_mismatch_rejected(self):
        with pytest.raises(ValueError, match="rank"):
            sim_score(random_normalized(10, rank=2), random_normalized(10, rank=3))


class TestPsnr:
    def test_identical_images_infinite(self):
        img = rng(11).uniform(0, 255, size=(16, 16, 3))
        assert math.isinf(psnr(img, img))

    def test_constant_offset_closed_form(self):
        img = np.full((16, 16, 3), 100.0)
        assert psnr(img, img + 10.0) == pytest.approx(10 * math.log10(255**2 / 100), abs=1e-9)

    def test_mask_restricts_mse(self):
        img = np.full((8, 8, 3), 50.0)
        other = img.copy()
        other[0, 0, :] += 20.0
        sel = np.zeros(img.shape, dtype=bool)
        sel[0, 0, :] = True
        assert psnr(img, other, mask=sel) == pytest.approx(10 * math.log10(255**2 / 400))
        assert math.isinf(psnr(img, other, mask=~sel))


def ssim_window_oracle(a, b):
    """Direct per-window loop with the same 11x11 Gaussian weights."""
    half = 5.0
    g1 = np.exp(-((np.arange(11) - half) ** 2) / (2 * 1.5**2))
    win = np.outer(g1, g1)
    win /= win.sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    h, w = a.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            pa = a[i : i + 11, j : j + 11]
            pb = b[i : i + 11, j : j + 11]
            mua = (win * pa).sum()
            mub = (win * pb).sum()
            va = (win * pa * pa).sum() - mua**2
            vb = (win * pb * pb).sum() - mub**2
            cov = (win * pa * pb).sum() - mua * mub
            vals.append(
                ((2 * mua * mub + c1) * (2 * cov + c2))
                / ((mua**2 + mub**2 + c1) * (va + vb + c2))
            )
    return float(np.mean(vals))


class TestSsim:
    def test_identical_images_score_one(self):
        img = rng(12).uniform(0, 255, size=(16, 16, 3))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_matches_window_oracle(self):
        g = rng(13)
        a = g.uniform(0, 255, size=(18, 15))
        b = np.clip(a + g.normal(0, 20, size=a.shape), 0, 255)
        assert ssim(a, b) == pytest.approx(ssim_window_oracle(a, b), abs=1e-6)

    def test_color_is_mean_of_channels(self):
        g = rng(14)
        a = g.uniform(0, 255, size=(16, 16, 3))
        b = g.uniform(0, 255, size=(16, 16, 3))
        per_channel = [ssim(a[:, :, c], b[:, :, c]) for c in range(3)]
        assert ssim(a, b) == pytest.approx(np.mean(per_channel), abs=1e-12)

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            ssim(np.ones((8, 8)), np.ones((8, 8)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ssim(np.ones((16, 16)), np.ones((16, 17)))
