import numpy as np
import pytest

from smoothntf.data import (
    ToySpec,
    bspline_basis,
    make_mask,
    mask_from_values,
    pixelwise_mask,
    toy_generate,
    uniform_mask,
)
from smoothntf.model import reconstruct
from smoothntf.tensors import frobenius_norm


class TestBsplineBasis:
    def test_shape_and_partition_of_unity(self):
        b = bspline_basis(30)
        assert b.shape == (30, 7)
        assert np.all(b >= 0)
        assert np.allclose(b.sum(axis=1), 1.0)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            bspline_basis(7)


class TestToyGenerate:
    def test_noise_scale_formula(self):
        # at 10 percent noise the scale is ||Y|| / (3 ||E||)
        y, x, _, _ = toy_generate(ToySpec(size=12, rank=2, noise_percent=10.0, seed=0))
        e = x - y
        assert frobenius_norm(e) == pytest.approx(frobenius_norm(y) / 3.0, rel=1e-12)

    def test_factors_non_negative_and_truth_valid(self):
        _, _, _, truth = toy_generate(ToySpec(size=15, rank=3, seed=1))
        for f in truth.factors:
            assert np.all(f >= 0)
            assert np.allclose(np.linalg.norm(f, axis=0), 1.0, atol=1e-10)
        assert np.all(truth.lambdas >= 0)

    def test_clean_tensor_matches_truth_model(self):
        y, _, _, truth = toy_generate(ToySpec(size=10, rank=2, seed=2))
        assert np.allclose(reconstruct(truth), y, atol=1e-10)

    def test_missing_fraction_drives_mask(self):
        _, _, w, _ = toy_generate(
            ToySpec(size=20, rank=2, missing_fraction=0.5, seed=3)
        )
        frac = 1.0 - w.mean()
        assert 0.4 < frac < 0.6

    def test_zero_noise_allowed(self):
        y, x, _, _ = toy_generate(ToySpec(size=10, rank=2, noise_percent=0.0, seed=4))
        assert np.array_equal(x, y)

    def test_deterministic_given_seed(self):
        a = toy_generate(ToySpec(size=10, rank=2, missing_fraction=0.3, seed=9))
        b = toy_generate(ToySpec(size=10, rank=2, missing_fraction=0.3, seed=9))
        for xa, xb in zip(a[:3], b[:3]):
            assert np.array_equal(xa, xb)

    def test_size_too_small(self):
        with pytest.raises(ValueError, match="at least"):
            ToySpec(size=7, rank=2)


class TestUniformMask:
    def test_zero_fraction_gives_all_ones(self):
        assert np.array_equal(uniform_mask((4, 4), 0.0, seed=0), np.ones((4, 4)))

    def test_fraction_out_of_range(self):
        with pytest.raises(ValueError):
            uniform_mask((4, 4), 1.0, seed=0)

    def test_binary_and_deterministic(self):
        a = uniform_mask((10, 10, 3), 0.4, seed=5)
        b = uniform_mask((10, 10, 3), 0.4, seed=5)
        assert np.array_equal(a, b)
        assert set(np.unique(a)) <= {0.0, 1.0}


class TestPixelwiseMask:
    def test_exact_count_across_channels(self):
        m = pixelwise_mask((10, 10, 3), 0.8, seed=1)
        pixel_gone = np.all(m == 0.0, axis=2)
        pixel_kept = np.all(m == 1.0, axis=2)
        assert pixel_gone.sum() == 80
        assert pixel_kept.sum() == 20
        assert np.all(pixel_gone | pixel_kept)

    def test_requires_channel_shape(self):
        with pytest.raises(ValueError, match="shape"):
            pixelwise_mask((10, 10), 0.5, seed=0)


class TestStencilMask:
    def test_zero_pixels_masked_across_channels(self):
        stencil = np.ones((4, 5)) * 255.0
        stencil[1, 2] = 0.0
        m = mask_from_values((4, 5, 3), stencil)
        assert np.all(m[1, 2, :] == 0.0)
        assert m.sum() == 4 * 5 * 3 - 3

    def test_all_bright_stencil_gives_all_ones(self):
        m = make_mask((4, 5, 3), "stencil", stencil=np.full((4, 5), 255.0))
        assert np.array_equal(m, np.ones((4, 5, 3)))

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="match"):
            mask_from_values((4, 5, 3), np.ones((5, 4)))


def test_make_mask_dispatch_errors():
    with pytest.raises(ValueError, match="unknown mask kind"):
        make_mask((4, 4), "speckle")
    with pytest.raises(ValueError, match="fraction"):
        make_mask((4, 4), "uniform")
