"""Contingency-table and information-theoretic helpers for discrete data.

Values may be any hashable level; ``None`` (a missing discrete value) is
treated as its own level so that every statistic sees the same n.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from typing import Hashable, Sequence

import numpy as np

_MISSING = "__missing__"


def _canon(value) -> Hashable:
    return _MISSING if value is None else value


def _codes(values: Sequence) -> "np.ndarray":
    keys = np.array([str(_canon(v)) for v in values], dtype=object)
    _, inverse = np.unique(keys, return_inverse=True)
    return inverse


def chi2_statistic(xs: Sequence, ys: Sequence) -> float:
    """Pearson chi-squared statistic of the xs-by-ys contingency table."""
    n = len(xs)
    if n == 0:
        return 0.0
    x_codes = _codes(xs)
    y_codes = _codes(ys)
    nx = int(x_codes.max()) + 1
    ny = int(y_codes.max()) + 1
    observed = np.zeros((nx, ny))
    np.add.at(observed, (x_codes, y_codes), 1.0)
    row = observed.sum(axis=1, keepdims=True)
    col = observed.sum(axis=0, keepdims=True)
    expected = row @ col / n
    mask = expected > 0
    return float(((observed - expected)[mask] ** 2 / expected[mask]).sum())


def entropy_bits(counts: Sequence[int]) -> float:
    """Shannon entropy (base 2) of a count vector."""
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def value_entropy(xs: Sequence) -> float:
    return entropy_bits(list(Counter(_canon(x) for x in xs).values()))


def info_gain_bits(xs: Sequence, ys: Sequence) -> float:
    """Mutual information I(X;Y) in bits, computed as H(Y) - H(Y|X)."""
    n = len(ys)
    if n == 0:
        return 0.0
    h_y = value_entropy(ys)
    groups: defaultdict[Hashable, Counter] = defaultdict(Counter)
    for x, y in zip(xs, ys):
        groups[_canon(x)][_canon(y)] += 1
    h_y_given_x = 0.0
    for counter in groups.values():
        size = sum(counter.values())
        h_y_given_x += size / n * entropy_bits(list(counter.values()))
    gain = h_y - h_y_given_x
    return max(gain, 0.0)


def symmetrical_uncertainty(xs: Sequence, ys: Sequence) -> float:
    """SU(X,Y) = 2 I(X;Y) / (H(X) + H(Y)); 0 when both are constant."""
    h_x = value_entropy(xs)
    h_y = value_entropy(ys)
    if h_x + h_y == 0.0:
        return 0.0
    return 2.0 * info_gain_bits(xs, ys) / (h_x + h_y)
