"""Classifier performance metrics: ROC/AUC, rates, H-measure, Spearman.

Scores are probabilities (or any monotone score) of the positive
"above-average" class; labels are 0/1 with 1 positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionError, UndefinedMetricError


@dataclass(frozen=True)
class RocCurve:
    """Threshold-swept (FPR, TPR) points from (0,0) to (1,1)."""

    fpr: tuple[float, ...]
    tpr: tuple[float, ...]

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr, self.tpr))


def _check_binary(labels: np.ndarray) -> tuple[int, int]:
    pos = int((labels == 1).sum())
    neg = int((labels == 0).sum())
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("both classes must be present")
    if pos + neg != labels.size:
        raise UndefinedMetricError("labels must be 0/1")
    return pos, neg


def roc(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """ROC points swept over the distinct scores, descending.

    Tied scores collapse into a single sweep step, which makes the
    trapezoidal area equal to the tie-corrected Mann-Whitney statistic.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos, neg = _check_binary(labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    fpr = [0.0]
    tpr = [0.0]
    tp = 0
    fp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        tp += int((y[i:j] == 1).sum())
        fp += int((y[i:j] == 0).sum())
        fpr.append(fp / neg)
        tpr.append(tp / pos)
        i = j
    return RocCurve(fpr=tuple(fpr), tpr=tuple(tpr))


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Trapezoidal area under the ROC curve (ties half-counted)."""
    curve = roc(scores, labels)
    fpr = np.asarray(curve.fpr)
    tpr = np.asarray(curve.tpr)
    return float(_trapezoid(tpr, fpr))


def tpr_fpr_accuracy(
    scores: Sequence[float],
    labels: Sequence[int],
    threshold: float = 0.5,
) -> tuple[float, float, float]:
    """(TP rate, FP rate, accuracy) at a score threshold; score >= t is positive."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos, neg = _check_binary(labels)
    predicted = scores >= threshold
    tp = int((predicted & (labels == 1)).sum())
    fp = int((predicted & (labels == 0)).sum())
    tn = neg - fp
    return tp / pos, fp / neg, (tp + tn) / (pos + neg)


def roc_convex_hull(curve: RocCurve) -> list[tuple[float, float]]:
    """Upper concave envelope of the ROC points, from (0,0) to (1,1)."""
    points = sorted(set(zip(curve.fpr, curve.tpr)))
    hull: list[tuple[float, float]] = []
    for p in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _beta22_first_moment(a: float, b: float) -> float:
    # integral of c * 6c(1-c) dc over [a, b]
    f = lambda c: 2.0 * c**3 - 1.5 * c**4
    return f(b) - f(a)


def _beta22_complement_moment(a: float, b: float) -> float:
    # integral of (1-c) * 6c(1-c) dc over [a, b]
    f = lambda c: 3.0 * c**2 - 4.0 * c**3 + 1.5 * c**4
    return f(b) - f(a)


def h_measure(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Hand's H with a beta(2,2) severity distribution over the cost ratio.

    H = 1 - L / L_max, where L is the expected minimum misclassification
    loss over the ROC convex hull when the cost ratio c (the share of
    total cost carried by a false positive) is drawn from beta(2,2), and
    L_max is the same expectation for a scoreless classifier. Class priors
    are the empirical frequencies. Computed in closed form per hull
    segment; depends only on the hull, hence invariant under strictly
    increasing score transforms.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos, neg = _check_binary(labels)
    n = pos + neg
    pi1 = pos / n
    pi0 = neg / n

    hull = roc_convex_hull(roc(scores, labels))

    # Hull point j minimizes c*pi0*fpr + (1-c)*pi1*(1-tpr) for c between the
    # breakpoints of its adjacent segment slopes: c(s) = pi1*s/(pi0 + pi1*s).
    def breakpoint(slope: float) -> float:
        if math.isinf(slope):
            return 1.0
        return pi1 * slope / (pi0 + pi1 * slope)

    slopes = []
    for (x1, y1), (x2, y2) in zip(hull[:-1], hull[1:]):
        if x2 == x1:
            slopes.append(math.inf)
        else:
            slopes.append((y2 - y1) / (x2 - x1))

    loss = 0.0
    for j, (f, t) in enumerate(hull):
        c_hi = breakpoint(slopes[j - 1]) if j > 0 else 1.0
        c_lo = breakpoint(slopes[j]) if j < len(slopes) else 0.0
        if c_hi <= c_lo:
            continue
        loss += pi0 * f * _beta22_first_moment(c_lo, c_hi)
        loss += pi1 * (1.0 - t) * _beta22_complement_moment(c_lo, c_hi)

    # Scoreless baseline: predict all-positive for c <= pi1, else all-negative.
    loss_max = pi0 * _beta22_first_moment(0.0, pi1)
    loss_max += pi1 * _beta22_complement_moment(pi1, 1.0)
    return 1.0 - loss / loss_max


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size:
        raise PreconditionError("sequences must have equal length")
    if xs.size < 3:
        raise PreconditionError("need at least 3 pairs")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise UndefinedMetricError("correlation undefined for constant input")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    return float((dx * dy).sum() / math.sqrt((dx * dx).sum() * (dy * dy).sum()))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j < values.size and values[order[j]] == values[order[i]]:
            j += 1
        # 1-based ranks, tied values share the average rank
        avg = (i + j + 1) / 2.0
        for kidx in range(i, j):
            ranks[order[kidx]] = avg
        i = j
    return ranks
