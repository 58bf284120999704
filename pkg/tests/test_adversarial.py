import math

import numpy as np
import pytest

from facepriv.adversarial import (
    AffineClassifier,
    PerturbationConfig,
    classify,
    deepfool_affine,
    fooling_rate,
    lp_norm,
    project_lp_ball,
    universal_perturbation,
)
from facepriv.errors import DimensionError, NoBoundaryError, ParameterError
from facepriv.rng import RandomSource


def min_norm_boundary_distance(clf, x):
    """Distance to the nearest pairwise boundary via least-squares minimum-norm steps."""
    s = clf.weights @ x + clf.biases
    k = int(np.argmax(s))
    best = math.inf
    for l in range(clf.n_classes):
        if l == k:
            continue
        a = (clf.weights[l] - clf.weights[k])[None, :]
        if not np.any(a):
            continue
        r, *_ = np.linalg.lstsq(a, np.array([s[k] - s[l]]), rcond=None)
        best = min(best, float(np.linalg.norm(r)))
    return best


def two_class(w, b=0.0):
    return AffineClassifier(np.array([w, np.zeros(len(w))]), np.array([b, 0.0]))


class TestClassify:
    clf = AffineClassifier(np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros(2), ("one", "two"))

    def test_positive(self):
        assert classify(self.clf, [2, 0]) == 0

    def test_negative(self):
        assert classify(self.clf, [-1, 0]) == 1

    def test_tie_goes_low(self):
        assert classify(self.clf, [0, 5]) == 0

    def test_dimension(self):
        with pytest.raises(DimensionError):
            classify(self.clf, [1, 2, 3])

    def test_labels(self):
        assert self.clf.labels == ("one", "two")
        with pytest.raises(DimensionError):
            AffineClassifier(np.eye(2), np.zeros(2), ("a",))
        with pytest.raises(ParameterError):
            AffineClassifier(np.ones((1, 2)), np.zeros(1))


class TestDeepFool:
    def test_analytic_example(self):
        clf = two_class([3.0, 4.0])
        r = deepfool_affine(clf, np.array([2.0, 1.0]))
        assert np.linalg.norm(r) == pytest.approx(2.0, abs=1e-12)
        assert r == pytest.approx([-1.2, -1.6], abs=1e-12)
        assert classify(clf, np.array([2.0, 1.0]) + 1.02 * r) == 1

    def test_on_boundary(self):
        clf = two_class([3.0, 4.0])
        x = np.array([4.0, -3.0])  # 3*4 - 4*3 = 0
        r = deepfool_affine(clf, x)
        assert np.linalg.norm(r) == 0
        # the point is a tie; any step along the normal's negative side flips it
        assert classify(clf, x) == 0
        assert classify(clf, x - 1e-9 * np.array([3.0, 4.0])) == 1

    def test_three_class_nearest(self):
        clf = AffineClassifier(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), np.array([0.0, 0.0, 0.0]))
        x = np.array([2.0, 1.5])
        r = deepfool_affine(clf, x)
        assert np.linalg.norm(r) == pytest.approx(min_norm_boundary_distance(clf, x), abs=1e-12)
        assert classify(clf, x + 1.02 * r) == 1

    def test_degenerate(self):
        clf = AffineClassifier(np.ones((3, 2)), np.array([1.0, 0.0, 0.0]))
        with pytest.raises(NoBoundaryError):
            deepfool_affine(clf, np.zeros(2))

    def test_random_exactness(self):
        gen = np.random.default_rng(0)
        for _ in range(300):
            d, K = int(gen.integers(1, 33)), int(gen.integers(2, 9))
            clf = AffineClassifier(gen.normal(size=(K, d)), gen.normal(size=K))
            x = gen.normal(size=d) * 3
            r = deepfool_affine(clf, x)
            assert np.linalg.norm(r) == pytest.approx(min_norm_boundary_distance(clf, x), abs=1e-9)
            assert classify(clf, x + 1.02 * r) != classify(clf, x)


class TestProjection:
    def test_on_boundary_unchanged(self):
        assert project_lp_ball([3.0, 4.0], 5, 2).tolist() == [3.0, 4.0]

    def test_l2_scaled(self):
        assert project_lp_ball([3.0, 4.0], 2.5, 2) == pytest.approx([1.5, 2.0], abs=1e-15)

    def test_linf_clamp(self):
        assert project_lp_ball([3.0, -4.0], 2, "inf").tolist() == [2.0, -2.0]

    def test_rejects_bad_radius_and_norm(self):
        with pytest.raises(ParameterError):
            project_lp_ball([1.0], 0, 2)
        with pytest.raises(ParameterError):
            project_lp_ball([1.0], 1, 1)

    def test_idempotent_and_bounded(self):
        gen = np.random.default_rng(1)
        for p in (2, math.inf):
            for _ in range(200):
                v = gen.normal(size=int(gen.integers(1, 20))) * gen.uniform(0.1, 10)
                xi = float(gen.uniform(0.01, 5))
                once = project_lp_ball(v, xi, p)
                assert lp_norm(once, p) <= xi
                assert np.array_equal(project_lp_ball(once, xi, p), once)


def separable_data(seed, n=200, d=10):
    gen = np.random.default_rng(seed)
    mu = np.zeros(d)
    mu[0] = 4.0
    x = np.vstack([gen.normal(size=(n // 2, d)) + mu, gen.normal(size=(n // 2, d)) - mu])
    w = 2 * mu
    clf = AffineClassifier(np.vstack([w, -w]) / 2, np.zeros(2))
    return x, clf


class TestUniversal:
    def test_delta_one_returns_zero(self):
        x, clf = separable_data(0)
        res = universal_perturbation(x, clf, PerturbationConfig(xi=1.0, delta=1.0), 0)
        assert not res.v.any() and res.achieved_fooling_rate == 0 and res.iterations_used == 0

    def test_tiny_radius(self):
        x, clf = separable_data(0)
        cfg = PerturbationConfig(xi=1e-12, delta=0.0, max_outer_iters=3)
        res = universal_perturbation(x, clf, cfg, 0)
        assert np.linalg.norm(res.v) <= 1e-12
        assert res.achieved_fooling_rate == 0 and res.iterations_used == 3

    def test_single_point(self):
        clf = two_class([3.0, 4.0])
        x = np.array([[2.0, 1.0]])
        res = universal_perturbation(x, clf, PerturbationConfig(xi=100, delta=0.0), 0)
        r = deepfool_affine(clf, x[0])
        assert res.achieved_fooling_rate == 1.0 and res.iterations_used == 1
        assert res.v == pytest.approx(1.02 * r, abs=1e-12)

    @pytest.mark.parametrize("p", [2, math.inf])
    def test_norm_bound_and_consistency(self, p):
        gen = np.random.default_rng(3)
        clf = AffineClassifier(gen.normal(size=(4, 6)), gen.normal(size=4))
        x = gen.normal(size=(100, 6))
        cfg = PerturbationConfig(xi=0.7, delta=0.05, p_norm=p, max_outer_iters=5)
        res = universal_perturbation(x, clf, cfg, RandomSource(4))
        assert lp_norm(res.v, p) <= 0.7 + 1e-9
        assert fooling_rate(x, clf, res.v) == res.achieved_fooling_rate
        held_out = gen.normal(size=(100, 6))
        assert 0 <= fooling_rate(held_out, clf, res.v) <= 1

    def test_step_cap(self):
        clf = two_class([1.0, 0.0])
        x = np.array([[5.0, 0.0]])
        cfg = PerturbationConfig(xi=100, delta=0.0, per_step_cap=1.0, max_outer_iters=1)
        res = universal_perturbation(x, clf, cfg, 0)
        assert np.linalg.norm(res.v) == pytest.approx(1.02, abs=1e-12)

    def test_seed_determinism(self):
        gen = np.random.default_rng(8)
        clf = AffineClassifier(gen.normal(size=(5, 8)), gen.normal(size=5))
        x = gen.normal(size=(80, 8))
        cfg = PerturbationConfig(xi=1.0, delta=0.0, max_outer_iters=4)
        a = universal_perturbation(x, clf, cfg, RandomSource(1))
        b = universal_perturbation(x, clf, cfg, RandomSource(1))
        assert np.array_equal(a.v, b.v)

    def test_fooling_rate_zero_vector(self):
        x, clf = separable_data(2)
        assert fooling_rate(x, clf, np.zeros(10)) == 0.0

    def test_binary_rate_bounded_by_majority_share(self):
        # one additive v moves every score difference by the same amount, so only
        # one side of a two-class boundary can be flipped
        x, clf = separable_data(5)
        labels = clf.predict(x)
        share = max(np.mean(labels == 0), np.mean(labels == 1))
        res = universal_perturbation(x, clf, PerturbationConfig(xi=50.0, delta=0.0, max_outer_iters=20), 0)
        assert res.achieved_fooling_rate <= share
