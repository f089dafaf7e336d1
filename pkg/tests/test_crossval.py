import warnings

import numpy as np
import pytest

from smoothntf.crossval import cv_select_alpha, mask_partition
from smoothntf.data import ToySpec, toy_generate
from smoothntf.model import loss_weighted
from smoothntf.penalties import PenaltyConfig, SplineRoughness
from smoothntf.solvers import SolverConfig, grad_fit


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


class TestMaskPartition:
    def test_disjoint_cover_of_observed_set(self):
        g = rng(1)
        w = (g.uniform(size=(6, 5, 4)) > 0.4).astype(float)
        folds = mask_partition(w, 5, seed=3)
        union = sum(folds)
        assert np.array_equal(union > 0, w > 0)
        assert union.max() == 1.0  # pairwise disjoint
        for f in folds:
            assert set(np.unique(f)) <= {0.0, 1.0}
            assert np.all(f[w == 0] == 0.0)

    def test_balanced_sizes(self):
        w = np.ones((4, 5))
        folds = mask_partition(w, 3, seed=0)
        sizes = [int(f.sum()) for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_deterministic_given_seed(self):
        w = (rng(2).uniform(size=(5, 5)) > 0.3).astype(float)
        a = mask_partition(w, 4, seed=11)
        b = mask_partition(w, 4, seed=11)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa, fb)

    def test_too_few_observed_entries(self):
        w = np.zeros((3, 3))
        w[0, 0] = 1.0
        with pytest.raises(ValueError, match="observed"):
            mask_partition(w, 5)


def toy_cfg(rank=2, max_iter=200):
    pen = PenaltyConfig.for_modes((1.0, 1.0, 0.0), SplineRoughness())
    return SolverConfig(rank=rank, penalty=pen, max_iter=max_iter, rel_tol=1e-6)


@pytest.fixture(scope="module")
def instance():
    _, x, w, _ = toy_generate(ToySpec(size=10, rank=2, missing_fraction=0.2, seed=4))
    return x, w


class TestCvSelectAlpha:

    def test_single_grid_point_selected(self, instance):
        x, w = instance
        result = cv_select_alpha(x, w, [0.01], toy_cfg(), folds=3, seed=0)
        assert result.selected_alpha == 0.01
        assert result.fold_scores.shape == (3, 1)

    def test_holdout_score_is_loss_on_holdout_mask(self, instance):
        x, w = instance
        folds = mask_partition(w, 3, seed=5)
        train = w * (1.0 - folds[0])
        holdout = w * folds[0]
        cfg = toy_cfg()
        pen = PenaltyConfig.for_modes((0.01, 0.01, 0.0), SplineRoughness())
        from dataclasses import replace

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, _ = grad_fit(x, train, replace(cfg, penalty=pen))
            result = cv_select_alpha(x, w, [0.01], cfg, solver="grad", folds=3, seed=5)
        assert result.fold_scores[0, 0] == pytest.approx(
            loss_weighted(x, holdout, model), rel=1e-6
        )

    def test_selection_minimizes_mean_score(self, instance):
        x, w = instance
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = cv_select_alpha(x, w, [1e-3, 1e-1, 10.0], toy_cfg(), folds=3, seed=1)
        finite = ~np.isnan(result.mean_scores)
        assert result.mean_scores[result.selected_index] == np.nanmin(result.mean_scores)
        assert finite[result.selected_index]

    def test_alpha_zero_disqualified_when_entries_missing(self, instance):
        # an unpenalized fit on a mask with holes has no coercivity guarantee
        x, w = instance
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = cv_select_alpha(x, w, [0.0, 1e-2], toy_cfg(), folds=3, seed=2)
        assert np.isnan(result.mean_scores[0])
        assert result.selected_alpha == 1e-2

    def test_train_one_convention_runs(self, instance):
        x, w = instance
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = cv_select_alpha(
                x, w, [1e-2], toy_cfg(), folds=3, seed=3, convention="train-one"
            )
        assert np.isfinite(result.mean_scores[0])

    def test_tie_breaks_to_smaller_alpha(self):
        g = rng(6)
        x = g.uniform(size=(6, 6, 6))
        w = np.ones(x.shape)
        # duplicate grid value forces an exact tie
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = cv_select_alpha(
                x, w, [1e-2, 1e-2], toy_cfg(max_iter=30), folds=2, seed=0
            )
        assert result.selected_index == 0

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            cv_select_alpha(np.ones((3, 3, 3)), np.ones((3, 3, 3)), [], toy_cfg())

    def test_unknown_convention_rejected(self):
        with pytest.raises(ValueError, match="convention"):
            cv_select_alpha(
                np.ones((3, 3, 3)), np.ones((3, 3, 3)), [0.1], toy_cfg(), convention="loocv"
            )
