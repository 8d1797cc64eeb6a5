"""Training-fold preprocessing: z-scoring, target binarization, CAIM.

All fitters consume training data only and produce immutable state that
replays deterministically on unseen records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DiscretizationError, InsufficientDataError, SchemaError

BIN_TARGET = "bin-target"
CAIM = "caim"
BINNING_MODES = (BIN_TARGET, CAIM)

CLASS_BELOW = 0
CLASS_ABOVE = 1
CLASS_NAMES = ("below-average", "above-average")


@dataclass(frozen=True)
class ZScaler:
    """Per-feature mean and sample sd; constant features transform to 0."""

    means: dict[str, float]
    sds: dict[str, float]
    constant: frozenset[str]
    fit_n: int

    def transform_value(self, name: str, value):
        if name not in self.means:
            raise SchemaError(f"z-scaler was not fit for feature {name!r}")
        if value is None:
            return None
        value = float(value)
        if math.isnan(value):
            return value
        if name in self.constant:
            return 0.0
        return (value - self.means[name]) / self.sds[name]

    def transform_column(self, name: str, values: np.ndarray) -> np.ndarray:
        if name not in self.means:
            raise SchemaError(f"z-scaler was not fit for feature {name!r}")
        values = np.asarray(values, dtype=float)
        if name in self.constant:
            out = np.zeros_like(values)
            out[np.isnan(values)] = np.nan
            return out
        return (values - self.means[name]) / self.sds[name]


def fit_zscaler(columns: Mapping[str, Sequence[float]]) -> ZScaler:
    """Fit means/sds per numeric feature, ignoring missing (NaN) entries."""
    means: dict[str, float] = {}
    sds: dict[str, float] = {}
    constant: set[str] = set()
    fit_n = 0
    for name, values in columns.items():
        arr = np.asarray(values, dtype=float)
        fit_n = max(fit_n, arr.size)
        present = arr[~np.isnan(arr)]
        if present.size < 2:
            # Degenerate feature in this fold: behave like a constant.
            means[name] = float(present[0]) if present.size else 0.0
            sds[name] = 1.0
            constant.add(name)
            continue
        mean = float(present.mean())
        sd = float(present.std(ddof=1))
        means[name] = mean
        if sd == 0.0:
            sds[name] = 1.0
            constant.add(name)
        else:
            sds[name] = sd
    if fit_n < 2:
        raise InsufficientDataError("z-scaler requires at least 2 records")
    return ZScaler(
        means=means, sds=sds, constant=frozenset(constant), fit_n=fit_n
    )


def apply_zscaler(scaler: ZScaler, row: Mapping[str, float]) -> dict[str, float]:
    """Transform one record's numeric fields; unknown field names error."""
    return {name: scaler.transform_value(name, value) for name, value in row.items()}


@dataclass(frozen=True)
class TargetBinarizer:
    """Plus/minus-the-mean binarization of the outcome delta.

    Deltas at or above the training mean are labeled above-average.
    """

    threshold_mean: float
    fit_n: int

    def binarize(self, delta: float) -> int:
        return CLASS_ABOVE if delta >= self.threshold_mean else CLASS_BELOW

    def binarize_many(self, deltas: Sequence[float]) -> np.ndarray:
        arr = np.asarray(deltas, dtype=float)
        return (arr >= self.threshold_mean).astype(np.int64)


def fit_binarizer(deltas: Sequence[float]) -> TargetBinarizer:
    arr = np.asarray(deltas, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError("binarizer requires at least 2 deltas")
    if np.isnan(arr).any():
        raise InsufficientDataError("binarizer deltas must not be missing")
    return TargetBinarizer(threshold_mean=float(arr.mean()), fit_n=int(arr.size))


@dataclass(frozen=True)
class FeatureScheme:
    """CAIM result for one feature: strictly increasing cuts + criterion."""

    cuts: tuple[float, ...]
    criterion: float

    @property
    def n_intervals(self) -> int:
        return len(self.cuts) + 1


def caim_criterion(cuts: Sequence[float], values: np.ndarray, labels: np.ndarray) -> float:
    """CAIM value of a cut scheme: mean over intervals of max_r^2 / total_r.

    Values exactly equal to a cut fall in the lower interval.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    edges = np.asarray(sorted(cuts), dtype=float)
    idx = np.searchsorted(edges, values, side="left")
    total = 0.0
    n_intervals = len(edges) + 1
    classes = np.unique(labels)
    for r in range(n_intervals):
        mask = idx == r
        count = int(mask.sum())
        if count == 0:
            continue
        max_class = max(int((labels[mask] == c).sum()) for c in classes)
        total += max_class * max_class / count
    return total / n_intervals


def caim_fit(
    values: Sequence[float],
    labels: Sequence[int],
    max_intervals: int | None = None,
) -> FeatureScheme:
    """Greedy CAIM discretization (Kurgan & Cios style).

    Candidate boundaries are midpoints between consecutive distinct sorted
    values. Starting from a single interval, the candidate maximizing the
    criterion is accepted while it improves the criterion or while the
    interval count is below the class count.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    if values.shape != labels.shape:
        raise DiscretizationError("values and labels must align")
    classes = np.unique(labels)
    n_classes = len(classes)
    if n_classes < 2:
        raise DiscretizationError("CAIM requires at least 2 target classes")
    if values.size < n_classes:
        raise DiscretizationError("fewer values than target classes")
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    sorted_labels = labels[order]
    distinct = np.unique(sorted_values)
    if distinct.size < 2:
        raise DiscretizationError("constant feature cannot be discretized")

    # Per-class prefix counts over blocks of equal values let any cut
    # scheme's criterion be evaluated in O(intervals * classes).
    block_edges = np.searchsorted(sorted_values, distinct, side="right")
    class_index = {c: i for i, c in enumerate(classes)}
    label_codes = np.array([class_index[l] for l in sorted_labels])
    prefix = np.zeros((distinct.size + 1, n_classes), dtype=np.int64)
    start = 0
    for b, end in enumerate(block_edges):
        prefix[b + 1] = prefix[b]
        for code in label_codes[start:end]:
            prefix[b + 1][code] += 1
        start = end

    candidates = (distinct[:-1] + distinct[1:]) / 2.0

    def criterion_for(boundary_blocks: list[int]) -> float:
        # boundary_blocks: sorted indices b meaning a cut after block b.
        edges = [0] + [b + 1 for b in boundary_blocks] + [distinct.size]
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            counts = prefix[hi] - prefix[lo]
            m = int(counts.sum())
            if m == 0:
                continue
            mx = int(counts.max())
            total += mx * mx / m
        return total / (len(boundary_blocks) + 1)

    # The classic algorithm's global criterion starts at 0, so the best
    # single boundary is always accepted; later boundaries must improve.
    chosen: list[int] = []
    remaining = list(range(candidates.size))
    current = 0.0
    while remaining:
        if max_intervals is not None and len(chosen) + 1 >= max_intervals:
            break
        best_value = -math.inf
        best_pos = -1
        for pos in remaining:
            trial = sorted(chosen + [pos])
            value = criterion_for(trial)
            if value > best_value:
                best_value = value
                best_pos = pos
        forced = len(chosen) + 1 < n_classes
        if best_value > current or forced:
            chosen = sorted(chosen + [best_pos])
            remaining.remove(best_pos)
            current = best_value
        else:
            break
    cuts = tuple(float(candidates[b]) for b in chosen)
    return FeatureScheme(cuts=cuts, criterion=float(current))


def caim_apply(scheme: FeatureScheme, value) -> int | None:
    """Interval index for a value; None marks a missing input.

    Values equal to a cut map to the lower interval; values beyond the
    outer cuts clamp to the first/last interval.
    """
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return None
    return int(np.searchsorted(np.asarray(scheme.cuts), value, side="left"))
