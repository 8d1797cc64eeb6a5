"""Stratified cross-validation with strictly fold-scoped fitting.

Every fold fits its own binarizer, z-scaler, CAIM schemes and feature
selector on the training split only, then scores the held-out split.
Pooled out-of-fold scores feed the metric suite; a deliberate
"selection outside folds" diagnostic mode exists to demonstrate the
leakage it would cause.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    FoldPlanError,
    PreconditionError,
    TrainingError,
    UndefinedMetricError,
)
from .feature_selection import (
    cfs_best_first,
    chi2_rank,
    consistency_best_first,
    gain_ratio_rank,
    rank_search_wrapper,
    relief_f,
)
from .metrics import auc, h_measure, spearman, tpr_fpr_accuracy
from .models.base import ModelSpec
from .models.pipeline import Dataset, train
from .models.pipeline import _build_matrix, _fit_preprocessors

IN_FOLD = "in-fold"
LEAKY_FULL_DATA = "full-data-leak"


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic fold assignment; sizes differ by at most one."""

    k: int
    assignment: tuple[int, ...]
    seed: int
    stratified: bool

    @property
    def n(self) -> int:
        return len(self.assignment)

    def fold_indices(self, fold: int) -> np.ndarray:
        arr = np.asarray(self.assignment)
        return np.flatnonzero(arr == fold)

    def splits(self):
        arr = np.asarray(self.assignment)
        for fold in range(self.k):
            test = np.flatnonzero(arr == fold)
            train_idx = np.flatnonzero(arr != fold)
            yield fold, train_idx, test


def make_folds(
    n: int,
    k: int,
    labels: Sequence[int] | None = None,
    seed: int = 0,
    stratified: bool = True,
) -> FoldPlan:
    """Assign instances to k folds, optionally stratifying on 0/1 labels.

    Stratification deals shuffled positives round-robin and then continues
    with the negatives, so per-fold sizes and per-fold positive counts both
    differ by at most one.
    """
    if k < 2:
        raise FoldPlanError("need at least 2 folds")
    if n < k:
        raise FoldPlanError(f"cannot split {n} instances into {k} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    if stratified:
        if labels is None:
            raise FoldPlanError("stratified folds require labels")
        labels = np.asarray(labels)
        pos = np.flatnonzero(labels == 1)
        neg = np.flatnonzero(labels == 0)
        if min(pos.size, neg.size) < k:
            raise FoldPlanError(
                "stratified folds require at least k members of each class"
            )
        pos = rng.permutation(pos)
        neg = rng.permutation(neg)
        for slot, idx in enumerate(pos):
            assignment[idx] = slot % k
        offset = pos.size % k
        for slot, idx in enumerate(neg):
            assignment[idx] = (offset + slot) % k
    else:
        order = rng.permutation(n)
        for slot, idx in enumerate(order):
            assignment[idx] = slot % k
    return FoldPlan(
        k=k,
        assignment=tuple(int(a) for a in assignment),
        seed=seed,
        stratified=stratified,
    )


@dataclass(frozen=True)
class SelectorSpec:
    """In-fold feature selection recipe.

    ``method``: chi2 | gain_ratio | relief_f | cfs | consistency |
    rank_search_chi2 | rank_search_gain_ratio. Rankers require ``top_k``.
    """

    method: str
    top_k: int | None = None
    evaluator: ModelSpec | None = None

    def label(self) -> str:
        return self.method if self.top_k is None else f"{self.method}:{self.top_k}"


def _select_features(
    selector: SelectorSpec, fold_dataset: Dataset, binning: str, seed: int
) -> tuple[str, ...]:
    binarizer, zscaler, schemes, y, _ = _fit_preprocessors(
        fold_dataset.raw, fold_dataset.deltas, binning
    )
    matrix = _build_matrix(fold_dataset.raw, binning, zscaler, schemes, y)
    if selector.method in ("chi2", "gain_ratio", "relief_f"):
        if selector.top_k is None:
            raise FoldPlanError(f"selector {selector.method} requires top_k")
        if selector.method == "chi2":
            ranked = chi2_rank(matrix)
        elif selector.method == "gain_ratio":
            ranked = gain_ratio_rank(matrix)
        else:
            ranked = relief_f(matrix, seed=seed)
        return tuple(s.feature for s in ranked[: selector.top_k])
    if selector.method == "cfs":
        # an empty subset is legal and yields a prior-only model
        return cfs_best_first(matrix).features
    if selector.method == "consistency":
        return consistency_best_first(matrix).features
    if selector.method in ("rank_search_chi2", "rank_search_gain_ratio"):
        ranker = selector.method.removeprefix("rank_search_")
        evaluator = selector.evaluator or ModelSpec(
            method="naive_bayes", binning=binning
        )
        subset = rank_search_wrapper(
            ranker, fold_dataset, evaluator, folds=5, seed=seed
        )
        return subset.features
    raise FoldPlanError(f"unknown selector method {selector.method!r}")


@dataclass(frozen=True)
class MetricsRow:
    """One Table-4-style evaluation row."""

    method: str
    binning: str
    accuracy: float
    auc: float
    tp_rate: float
    fp_rate: float
    h_measure: float
    selector: str | None = None
    seed: int = 0
    folds: int = 0
    partial: bool = False

    def format_table4(self) -> str:
        return (
            f"{self.method}, {self.binning}, {self.accuracy * 100:.1f}%, "
            f"{self.auc:.3f}, {self.tp_rate * 100:.1f}%, "
            f"{self.fp_rate * 100:.1f}%, {self.h_measure:.3f}"
        )


@dataclass
class CvResult:
    row: MetricsRow
    scores: np.ndarray
    labels: np.ndarray
    instance_indices: np.ndarray
    fold_details: list[dict] = field(default_factory=list)


def cross_validate(
    dataset: Dataset,
    spec: ModelSpec,
    plan: FoldPlan,
    selector: SelectorSpec | None = None,
    selection_mode: str = IN_FOLD,
    metric_mode: str = "pooled",
) -> CvResult:
    """Cross-validated metrics with all fitting scoped to each fold.

    ``selection_mode=LEAKY_FULL_DATA`` deliberately fits the selector once
    on the complete dataset (the ref-33 anti-pattern) for leakage
    diagnostics; everything else stays fold-scoped.
    """
    if plan.n != dataset.n:
        raise FoldPlanError("fold plan does not cover the dataset")
    if selection_mode not in (IN_FOLD, LEAKY_FULL_DATA):
        raise FoldPlanError(f"unknown selection mode {selection_mode!r}")

    leaked_names: tuple[str, ...] | None = None
    if selector is not None and selection_mode == LEAKY_FULL_DATA:
        leaked_names = _select_features(
            selector, dataset, spec.binning, seed=_fold_seed(plan.seed, -1)
        )

    pooled_scores: list[float] = []
    pooled_labels: list[int] = []
    pooled_indices: list[int] = []
    fold_details: list[dict] = []
    fold_metrics: list[dict] = []
    partial = False
    for fold, train_idx, test_idx in plan.splits():
        fold_train = dataset.subset(train_idx)
        detail: dict = {"fold": fold, "n_train": int(train_idx.size),
                        "n_test": int(test_idx.size)}
        try:
            if selector is not None:
                if leaked_names is not None:
                    selected = leaked_names
                else:
                    selected = _select_features(
                        selector, fold_train, spec.binning,
                        seed=_fold_seed(plan.seed, fold),
                    )
                detail["selected"] = list(selected)
                model = train(spec, fold_train.restrict(selected))
            else:
                model = train(spec, fold_train)
        except TrainingError as exc:
            partial = True
            detail["skipped"] = str(exc)
            fold_details.append(detail)
            continue
        detail["binarizer_threshold"] = model.binarizer.threshold_mean
        detail["zscaler_means"] = dict(model.zscaler.means)
        detail["caim_cuts"] = {
            name: list(s.cuts) for name, s in model.schemes.items()
        }
        scores = []
        for i in test_idx:
            raw_row = dataset.raw.row(int(i))
            scores.append(model.predict_proba(raw_row).p_above)
        y_test = model.binarizer.binarize_many(dataset.deltas[test_idx])
        pooled_scores.extend(scores)
        pooled_labels.extend(int(v) for v in y_test)
        pooled_indices.extend(int(i) for i in test_idx)
        fold_metrics.append(
            {"scores": np.asarray(scores), "labels": np.asarray(y_test)}
        )
        fold_details.append(detail)

    scores_arr = np.asarray(pooled_scores)
    labels_arr = np.asarray(pooled_labels, dtype=np.int64)
    if scores_arr.size == 0:
        raise TrainingError("every fold was skipped; nothing to evaluate")

    if metric_mode == "pooled":
        metrics = _metric_block(scores_arr, labels_arr)
    elif metric_mode == "fold-averaged":
        metrics = _fold_averaged(fold_metrics)
    else:
        raise FoldPlanError(f"unknown metric mode {metric_mode!r}")

    row = MetricsRow(
        method=spec.method,
        binning=spec.binning,
        accuracy=metrics["accuracy"],
        auc=metrics["auc"],
        tp_rate=metrics["tp_rate"],
        fp_rate=metrics["fp_rate"],
        h_measure=metrics["h"],
        selector=selector.label() if selector is not None else None,
        seed=plan.seed,
        folds=plan.k,
        partial=partial,
    )
    return CvResult(
        row=row,
        scores=scores_arr,
        labels=labels_arr,
        instance_indices=np.asarray(pooled_indices, dtype=np.int64),
        fold_details=fold_details,
    )


def _fold_seed(seed: int, fold: int) -> int:
    return int(
        np.random.SeedSequence(entropy=(seed, fold + 1)).generate_state(1)[0]
    )


def _metric_block(scores: np.ndarray, labels: np.ndarray) -> dict:
    tp_rate, fp_rate, accuracy = tpr_fpr_accuracy(scores, labels)
    return {
        "accuracy": accuracy,
        "tp_rate": tp_rate,
        "fp_rate": fp_rate,
        "auc": auc(scores, labels),
        "h": h_measure(scores, labels),
    }


def _fold_averaged(fold_metrics: list[dict]) -> dict:
    blocks = []
    for fm in fold_metrics:
        try:
            blocks.append(_metric_block(fm["scores"], fm["labels"]))
        except UndefinedMetricError:
            continue
    if not blocks:
        raise UndefinedMetricError("no fold had both classes in its test split")
    return {
        key: float(np.mean([b[key] for b in blocks]))
        for key in ("accuracy", "tp_rate", "fp_rate", "auc", "h")
    }


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[MetricsRow, ...]
    spearman_auc_vs_h: float | None
    failures: tuple[tuple[str, str], ...] = ()

    def format_lines(self) -> list[str]:
        header = "Model\tBinning\tAccuracy\tAUC\tTP rate\tFP rate\tH"
        lines = [header]
        for r in self.rows:
            lines.append(
                f"{r.method}\t{r.binning}\t{r.accuracy * 100:.1f}%\t"
                f"{r.auc:.3f}\t{r.tp_rate * 100:.1f}%\t{r.fp_rate * 100:.1f}%\t"
                f"{r.h_measure:.3f}"
            )
        return lines


def compare_models(
    dataset: Dataset,
    entries: Sequence[tuple[ModelSpec, SelectorSpec | None]],
    plan: FoldPlan,
    metric_mode: str = "pooled",
) -> tuple[ComparisonTable, list[CvResult]]:
    """Evaluate every spec on identical folds; rows sorted by AUC descending."""
    if len(entries) < 2:
        raise FoldPlanError("compare_models needs at least 2 model specs")
    results: list[CvResult] = []
    failures: list[tuple[str, str]] = []
    for spec, selector in entries:
        try:
            results.append(
                cross_validate(
                    dataset, spec, plan, selector=selector, metric_mode=metric_mode
                )
            )
        except Exception as exc:
            failures.append((f"{spec.method}/{spec.binning}", str(exc)))
    ordered = sorted(
        results, key=lambda r: (-r.row.auc, r.row.method, r.row.binning)
    )
    rows = tuple(r.row for r in ordered)
    rho: float | None = None
    if len(rows) >= 3:
        try:
            rho = spearman([r.auc for r in rows], [r.h_measure for r in rows])
        except (UndefinedMetricError, PreconditionError):
            rho = None
    return (
        ComparisonTable(
            rows=rows, spearman_auc_vs_h=rho, failures=tuple(failures)
        ),
        ordered,
    )
