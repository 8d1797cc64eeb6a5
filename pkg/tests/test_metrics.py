import math

import numpy as np
import pytest

from acds.errors import PreconditionError, UndefinedMetricError
from acds.metrics import (
    auc,
    h_measure,
    roc,
    roc_convex_hull,
    spearman,
    tpr_fpr_accuracy,
)


def mann_whitney_auc(scores, labels):
    """Brute-force pair-counting oracle: concordant + half ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def h_measure_numeric(scores, labels, grid=20001):
    """Numeric-integration oracle over the beta(2,2) cost distribution."""
    labels = np.asarray(labels)
    pi1 = labels.mean()
    pi0 = 1.0 - pi1
    hull = np.array(roc_convex_hull(roc(scores, labels)))
    c = np.linspace(0.0, 1.0, grid)
    w = 6.0 * c * (1.0 - c)
    # loss of each hull point at each cost, minimized over points
    losses = (
        c[None, :] * pi0 * hull[:, 0][:, None]
        + (1.0 - c[None, :]) * pi1 * (1.0 - hull[:, 1])[:, None]
    )
    l_model = np.trapezoid(losses.min(axis=0) * w, c)
    l_max = np.trapezoid(np.minimum(c * pi0, (1 - c) * pi1) * w, c)
    return 1.0 - l_model / l_max


class TestRocAuc:
    def test_perfect(self):
        assert auc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == pytest.approx(1.0)

    def test_anti_perfect(self):
        assert auc([0.2, 0.3, 0.8, 0.9], [1, 1, 0, 0]) == pytest.approx(0.0)

    def test_ties_half_credit(self):
        assert auc([0.8, 0.8, 0.2, 0.2], [1, 0, 1, 0]) == pytest.approx(0.5)

    def test_curve_endpoints_and_monotone(self):
        rng = np.random.default_rng(0)
        scores = rng.random(50)
        labels = rng.integers(0, 2, 50)
        labels[0], labels[1] = 0, 1
        curve = roc(scores, labels)
        assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
        assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0
        assert all(a <= b for a, b in zip(curve.fpr, curve.fpr[1:]))
        assert all(a <= b for a, b in zip(curve.tpr, curve.tpr[1:]))

    def test_matches_mann_whitney_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(4, 60))
            scores = rng.choice(np.linspace(0, 1, 11), size=n)
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert auc(scores, labels) == pytest.approx(
                mann_whitney_auc(scores, labels), abs=1e-9
            )

    def test_single_class_errors(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.1, 0.2], [1, 1])

    def test_complement_symmetry_tie_free(self):
        rng = np.random.default_rng(3)
        scores = rng.permutation(np.linspace(0.01, 0.99, 30))
        labels = rng.integers(0, 2, 30)
        labels[:2] = [0, 1]
        assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(9)
        scores = rng.random(40)
        labels = rng.integers(0, 2, 40)
        labels[:2] = [0, 1]
        assert auc(scores, labels) == auc(np.exp(3 * scores), labels)


class TestRates:
    def test_all_correct(self):
        assert tpr_fpr_accuracy([0.9, 0.8, 0.1], [1, 1, 0]) == (1.0, 0.0, 1.0)

    def test_all_positive_prediction(self):
        tp, fp, acc = tpr_fpr_accuracy([0.9, 0.8, 0.9, 0.8], [1, 0, 1, 0])
        assert (tp, fp) == (1.0, 1.0)
        assert acc == pytest.approx(0.5)  # prevalence

    def test_mixed_confusion(self):
        tp, fp, acc = tpr_fpr_accuracy([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0])
        assert tp == pytest.approx(0.5)
        assert fp == pytest.approx(0.5)
        assert acc == pytest.approx(0.5)

    def test_threshold_boundary_positive(self):
        tp, fp, acc = tpr_fpr_accuracy([0.5, 0.49], [1, 0])
        assert (tp, fp, acc) == (1.0, 0.0, 1.0)


class TestHMeasure:
    def test_perfect_separation(self):
        scores = [0.9, 0.8, 0.7, 0.2, 0.1, 0.05]
        labels = [1, 1, 1, 0, 0, 0]
        assert h_measure(scores, labels) == pytest.approx(1.0, abs=1e-6)

    def test_constant_scores_zero(self):
        scores = [0.5] * 10
        labels = [1, 0] * 5
        assert h_measure(scores, labels) == pytest.approx(0.0, abs=1e-9)

    def test_matches_numeric_integration(self):
        rng = np.random.default_rng(123)
        for _ in range(50):
            n = int(rng.integers(10, 120))
            scores = rng.choice(np.linspace(0, 1, 21), size=n)
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            closed = h_measure(scores, labels)
            numeric = h_measure_numeric(scores, labels)
            assert closed == pytest.approx(numeric, abs=1e-4)

    def test_monotone_invariance_exact(self):
        rng = np.random.default_rng(5)
        scores = rng.random(60)
        labels = rng.integers(0, 2, 60)
        labels[:2] = [0, 1]
        a = h_measure(scores, labels)
        b = h_measure(np.exp(scores) + 3.0, labels)
        assert a == b

    def test_random_scores_near_zero(self):
        rng = np.random.default_rng(77)
        scores = rng.random(10000)
        labels = np.array([0, 1] * 5000)
        h = h_measure(scores, labels)
        assert 0.0 <= h < 0.02

    def test_single_class_errors(self):
        with pytest.raises(UndefinedMetricError):
            h_measure([0.4, 0.5], [0, 0])


class TestSpearman:
    def test_identical(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_example_exact(self):
        assert spearman([1, 2, 3, 4], [1, 2, 4, 3]) == 0.8

    def test_constant_errors(self):
        with pytest.raises(UndefinedMetricError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_short_errors(self):
        with pytest.raises(PreconditionError):
            spearman([1, 2], [1, 2])

    def test_matches_scipy_with_ties(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(3, 40))
            xs = rng.choice(np.arange(8), size=n).astype(float)
            ys = rng.choice(np.arange(8), size=n).astype(float)
            if np.all(xs == xs[0]) or np.all(ys == ys[0]):
                continue
            expected = scipy_stats.spearmanr(xs, ys).statistic
            assert spearman(xs, ys) == pytest.approx(expected, abs=1e-12)
