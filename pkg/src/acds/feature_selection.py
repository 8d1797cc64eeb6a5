"""Feature selection designed to run inside cross-validation folds.

Filters (chi-squared, Relief-F, gain ratio), subset searches (CFS and
consistency, both best-first), a rank-search wrapper, and per-predictor
odds ratios. Every selector is a pure function of its training input
plus an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import PreconditionError
from .features import CONTINUOUS, DISCRETE, FeatureMatrix
from .stats import (
    chi2_statistic,
    info_gain_bits,
    symmetrical_uncertainty,
    value_entropy,
)


@dataclass(frozen=True)
class FeatureScore:
    feature: str
    score: float
    method: str


@dataclass(frozen=True)
class FeatureSubset:
    features: tuple[str, ...]
    method: str
    merit: float


@dataclass(frozen=True)
class OddsRatioReport:
    feature: str
    odds_ratio: float
    ci_low: float
    ci_high: float
    a: int
    b: int
    c: int
    d: int
    corrected: bool


def _require_discrete(matrix: FeatureMatrix, op: str) -> None:
    continuous = [n for n in matrix.names if matrix.kinds[n] == CONTINUOUS]
    if continuous:
        raise PreconditionError(
            f"{op} requires discrete features; continuous without a "
            f"discretization scheme: {continuous}"
        )


def _labels(matrix: FeatureMatrix) -> np.ndarray:
    if matrix.labels is None:
        raise PreconditionError("feature selection requires labels")
    return matrix.labels


def chi2_rank(matrix: FeatureMatrix) -> list[FeatureScore]:
    """Features by descending Pearson chi-squared against the class."""
    _require_discrete(matrix, "chi2_rank")
    y = _labels(matrix)
    scores = [
        FeatureScore(
            feature=name,
            score=chi2_statistic(list(matrix.columns[name]), list(y)),
            method="chi2",
        )
        for name in matrix.names
    ]
    return sorted(scores, key=lambda s: (-s.score, s.feature))


def gain_ratio_rank(matrix: FeatureMatrix) -> list[FeatureScore]:
    """Features by information gain over split information, in bits."""
    _require_discrete(matrix, "gain_ratio_rank")
    y = _labels(matrix)
    scores = []
    for name in matrix.names:
        xs = list(matrix.columns[name])
        split_info = value_entropy(xs)
        if split_info <= 0.0:
            ratio = 0.0
        else:
            ratio = info_gain_bits(xs, list(y)) / split_info
        scores.append(FeatureScore(feature=name, score=ratio, method="gain_ratio"))
    return sorted(scores, key=lambda s: (-s.score, s.feature))


def relief_f(
    matrix: FeatureMatrix,
    k_neighbors: int = 10,
    sample_m: int | None = None,
    seed: int = 0,
) -> list[FeatureScore]:
    """Relief-F weights over mixed features.

    Neighbor search uses Euclidean distance on continuous columns plus 0/1
    categorical mismatch; weight updates use range-normalized value
    differences. ``sample_m`` defaults to a deterministic full pass.
    """
    y = _labels(matrix)
    n = matrix.n
    names = list(matrix.names)
    classes = sorted(int(c) for c in np.unique(y))
    priors = {c: float((y == c).sum()) / n for c in classes}

    ranges: dict[str, float] = {}
    for name in names:
        if matrix.kinds[name] == CONTINUOUS:
            col = np.asarray(matrix.columns[name], dtype=float)
            present = col[~np.isnan(col)]
            span = float(present.max() - present.min()) if present.size else 0.0
            ranges[name] = span if span > 0 else 1.0

    def diff(name: str, i: int, j: int) -> float:
        a = matrix.columns[name][i]
        b = matrix.columns[name][j]
        if matrix.kinds[name] == DISCRETE:
            return 0.0 if _level(a) == _level(b) else 1.0
        fa, fb = float(a), float(b)
        if math.isnan(fa) or math.isnan(fb):
            return 1.0
        return abs(fa - fb) / ranges[name]

    def distance(i: int, j: int) -> float:
        total = 0.0
        for name in names:
            if matrix.kinds[name] == DISCRETE:
                if _level(matrix.columns[name][i]) != _level(matrix.columns[name][j]):
                    total += 1.0
            else:
                fa = float(matrix.columns[name][i])
                fb = float(matrix.columns[name][j])
                if math.isnan(fa) or math.isnan(fb):
                    total += 1.0
                else:
                    total += (fa - fb) ** 2
        return total

    if sample_m is None or sample_m >= n:
        sample = list(range(n))
    else:
        rng = np.random.default_rng(seed)
        sample = sorted(rng.choice(n, size=sample_m, replace=False).tolist())
    m = len(sample)

    weights = {name: 0.0 for name in names}
    truncated = False
    for i in sample:
        dists = sorted(
            (distance(i, j), j) for j in range(n) if j != i
        )
        by_class: dict[int, list[int]] = {c: [] for c in classes}
        for _, j in dists:
            by_class[int(y[j])].append(j)
        own = int(y[i])
        hits = by_class[own][:k_neighbors]
        if len(hits) < k_neighbors:
            truncated = True
        for name in names:
            if hits:
                weights[name] -= sum(diff(name, i, j) for j in hits) / (
                    m * len(hits)
                )
            for c in classes:
                if c == own:
                    continue
                misses = by_class[c][:k_neighbors]
                if not misses:
                    truncated = True
                    continue
                factor = priors[c] / (1.0 - priors[own])
                weights[name] += factor * sum(
                    diff(name, i, j) for j in misses
                ) / (m * len(misses))
    method = "relief_f" + ("(truncated)" if truncated else "")
    scores = [
        FeatureScore(feature=name, score=weights[name], method=method)
        for name in names
    ]
    return sorted(scores, key=lambda s: (-s.score, s.feature))


def _level(value):
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def cfs_merit(
    subset: Sequence[str],
    class_su: Mapping[str, float],
    pair_su: Mapping[tuple[str, str], float],
) -> float:
    """CFS merit: k*mean(feature-class SU) / sqrt(k + k(k-1)*mean pair SU)."""
    k = len(subset)
    if k == 0:
        return 0.0
    r_cf = sum(class_su[f] for f in subset) / k
    if k == 1:
        return r_cf
    pairs = [
        pair_su[_pair_key(a, b)]
        for idx, a in enumerate(subset)
        for b in subset[idx + 1 :]
    ]
    r_ff = sum(pairs) / len(pairs)
    return k * r_cf / math.sqrt(k + k * (k - 1) * r_ff)


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def cfs_best_first(matrix: FeatureMatrix, max_stale: int = 5) -> FeatureSubset:
    """Correlation-based subset selection by best-first forward search.

    Correlations are symmetrical uncertainties; the search stops after
    ``max_stale`` consecutive non-improving expansions.
    """
    _require_discrete(matrix, "cfs_best_first")
    y = list(_labels(matrix))
    names = list(matrix.names)
    class_su = {
        name: symmetrical_uncertainty(list(matrix.columns[name]), y)
        for name in names
    }
    pair_su: dict[tuple[str, str], float] = {}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            pair_su[_pair_key(a, b)] = symmetrical_uncertainty(
                list(matrix.columns[a]), list(matrix.columns[b])
            )

    def merit_of(subset: tuple[str, ...]) -> float:
        return cfs_merit(subset, class_su, pair_su)

    best_subset, best_merit = _best_first_search(
        names, merit_of, maximize=True, max_stale=max_stale
    )
    return FeatureSubset(features=best_subset, method="cfs", merit=best_merit)


def inconsistency_rate(matrix: FeatureMatrix, subset: Sequence[str]) -> float:
    """Sum over projected patterns of (count - majority count), over n."""
    y = _labels(matrix)
    n = matrix.n
    patterns: dict[tuple, list[int]] = {}
    for i in range(n):
        key = tuple(_level(matrix.columns[name][i]) for name in subset)
        counts = patterns.setdefault(key, [0, 0])
        counts[int(y[i])] += 1
    inconsistent = sum(min(c0, c1) for c0, c1 in patterns.values())
    return inconsistent / n


def consistency_best_first(
    matrix: FeatureMatrix, max_stale: int = 5
) -> FeatureSubset:
    """Consistency-based subset search minimizing the inconsistency rate.

    Smaller subsets win ties; the returned subset is never worse than the
    full feature set.
    """
    _require_discrete(matrix, "consistency_best_first")
    names = list(matrix.names)

    def score_of(subset: tuple[str, ...]) -> float:
        return -inconsistency_rate(matrix, subset)

    best_subset, best_score = _best_first_search(
        names, score_of, maximize=True, max_stale=max_stale
    )
    full_rate = inconsistency_rate(matrix, names)
    if full_rate < -best_score:
        return FeatureSubset(
            features=tuple(names), method="consistency", merit=full_rate
        )
    return FeatureSubset(
        features=best_subset, method="consistency", merit=-best_score
    )


def _best_first_search(names, score_of, maximize: bool, max_stale: int):
    """Forward best-first search from the empty subset.

    Expands the best unexpanded node; strict improvements reset the stale
    counter. Ties keep the earlier (smaller) subset.
    """
    start: tuple[str, ...] = ()
    best_subset = start
    best_score = score_of(start)
    open_list: list[tuple[float, tuple[str, ...]]] = [(best_score, start)]
    expanded: set[tuple[str, ...]] = set()
    stale = 0
    while open_list and stale < max_stale:
        open_list.sort(key=lambda item: (-item[0], len(item[1])))
        score, subset = open_list.pop(0)
        if subset in expanded:
            continue
        expanded.add(subset)
        improved = False
        for name in names:
            if name in subset:
                continue
            child = tuple(sorted(subset + (name,)))
            if child in expanded:
                continue
            child_score = score_of(child)
            open_list.append((child_score, child))
            if child_score > best_score:
                best_score = child_score
                best_subset = child
                improved = True
        stale = 0 if improved else stale + 1
    return best_subset, best_score


def rank_search_wrapper(
    ranker: str,
    dataset,
    evaluator_spec,
    folds: int = 5,
    seed: int = 0,
) -> FeatureSubset:
    """Rank features, then pick the prefix with the best nested-CV AUC.

    ``ranker`` is "chi2" or "gain_ratio". Exactly one evaluation runs per
    prefix length; a prefix whose folds all fail to train scores 0. Ties
    prefer the shorter prefix.
    """
    from .evaluation import cross_validate, make_folds

    matrix_labels = _wrapper_matrix(dataset)
    if ranker == "chi2":
        ranking = [s.feature for s in chi2_rank(matrix_labels)]
    elif ranker == "gain_ratio":
        ranking = [s.feature for s in gain_ratio_rank(matrix_labels)]
    else:
        raise PreconditionError(f"unknown ranker {ranker!r}")

    plan = make_folds(
        n=dataset.n,
        k=folds,
        labels=matrix_labels.labels,
        seed=seed,
        stratified=True,
    )
    best_prefix: tuple[str, ...] = ()
    best_auc = -math.inf
    for length in range(1, len(ranking) + 1):
        prefix = tuple(ranking[:length])
        try:
            result = cross_validate(
                dataset.restrict(prefix), evaluator_spec, plan
            )
            prefix_auc = result.row.auc
        except Exception:
            prefix_auc = 0.0
        if prefix_auc > best_auc:
            best_auc = prefix_auc
            best_prefix = prefix
    return FeatureSubset(
        features=best_prefix, method=f"rank_search({ranker})", merit=best_auc
    )


def _wrapper_matrix(dataset) -> FeatureMatrix:
    """Discrete view of a dataset for ranking inside the wrapper."""
    from .models.pipeline import _build_matrix, _fit_preprocessors
    from .preprocess import CAIM

    binarizer, zscaler, schemes, y, _ = _fit_preprocessors(
        dataset.raw, dataset.deltas, CAIM
    )
    return _build_matrix(dataset.raw, CAIM, zscaler, schemes, y)


def odds_ratio(
    exposed: Sequence[int], positive: Sequence[int], feature: str = ""
) -> OddsRatioReport:
    """2x2 odds ratio with a Woolf 95% confidence interval.

    ``exposed`` and ``positive`` are 0/1 vectors. A zero cell triggers the
    Haldane-Anscombe +0.5 correction to every cell, flagged in the report.
    """
    exposed = np.asarray(exposed, dtype=int)
    positive = np.asarray(positive, dtype=int)
    if exposed.shape != positive.shape:
        raise PreconditionError("exposure and outcome must align")
    a = int(((exposed == 1) & (positive == 1)).sum())
    b = int(((exposed == 1) & (positive == 0)).sum())
    c = int(((exposed == 0) & (positive == 1)).sum())
    d = int(((exposed == 0) & (positive == 0)).sum())
    return odds_ratio_from_counts(a, b, c, d, feature=feature)


def odds_ratio_from_counts(
    a: int, b: int, c: int, d: int, feature: str = ""
) -> OddsRatioReport:
    corrected = 0 in (a, b, c, d)
    if corrected:
        fa, fb, fc, fd = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    else:
        fa, fb, fc, fd = float(a), float(b), float(c), float(d)
    if (fa + fb) == 0 or (fc + fd) == 0 or (fa + fc) == 0 or (fb + fd) == 0:
        raise PreconditionError("degenerate 2x2 table: empty row or column")
    ratio = (fa * fd) / (fb * fc)
    se = math.sqrt(1.0 / fa + 1.0 / fb + 1.0 / fc + 1.0 / fd)
    half = 1.96 * se
    return OddsRatioReport(
        feature=feature,
        odds_ratio=ratio,
        ci_low=math.exp(math.log(ratio) - half),
        ci_high=math.exp(math.log(ratio) + half),
        a=a,
        b=b,
        c=c,
        d=d,
        corrected=corrected,
    )


def binarize_at_mean(values: Sequence[float]) -> np.ndarray:
    """Continuous exposure to 0/1 at the mean (>= mean is exposed)."""
    arr = np.asarray(values, dtype=float)
    return (arr >= arr.mean()).astype(int)


def selection_report(
    result: Sequence[FeatureScore] | FeatureSubset,
    seed: int | None = None,
) -> tuple[str, dict]:
    """Selection result as (line-oriented text, JSON-ready document)."""
    if isinstance(result, FeatureSubset):
        lines = [f"method\t{result.method}"]
        if seed is not None:
            lines.append(f"seed\t{seed}")
        lines.append(f"merit\t{result.merit!r}")
        for name in result.features:
            lines.append(f"selected\t{name}")
        doc = {
            "method": result.method,
            "seed": seed,
            "merit": result.merit,
            "selected": list(result.features),
        }
    else:
        scores = list(result)
        method = scores[0].method if scores else "empty"
        lines = [f"method\t{method}"]
        if seed is not None:
            lines.append(f"seed\t{seed}")
        for s in scores:
            lines.append(f"score\t{s.feature}\t{s.score!r}")
        doc = {
            "method": method,
            "seed": seed,
            "scores": [{"feature": s.feature, "score": s.score} for s in scores],
        }
    return "\n".join(lines) + "\n", doc
