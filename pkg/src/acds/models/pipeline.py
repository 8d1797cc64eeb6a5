"""End-to-end model training: fold-scoped preprocessing plus a classifier.

A TrainedModel carries its own fitted binarizer, z-scaler and CAIM
schemes, so applying it to an unseen record replays exactly the
transformations learned from its training split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..ensemble import SelectionResult, ensemble_average, ensemble_select, vote_max_prob
from ..errors import (
    DiscretizationError,
    PredictionError,
    TrainingError,
)
from ..features import (
    CATEGORICAL,
    CONTINUOUS,
    DISCRETE,
    NUMERIC,
    FeatureMatrix,
    RawMatrix,
    raw_matrix_from_cohort,
    raw_row_from_record,
)
from ..preprocess import (
    CAIM,
    FeatureScheme,
    TargetBinarizer,
    ZScaler,
    caim_apply,
    caim_fit,
    fit_binarizer,
    fit_zscaler,
)
from ..records import Cohort, PatientRecord
from .base import ModelSpec, ProbabilisticPrediction, check_training_labels
from .bayes import Aode, BayesNetK2, NaiveBayes
from .knn import Knn
from .linear import LinearRegClassifier, LogisticRegressionClassifier, Mlp
from .tree import DecisionTree, RandomForest

CLASSIFIERS = {
    "naive_bayes": NaiveBayes,
    "aode": Aode,
    "bayes_net_k2": BayesNetK2,
    "decision_tree": DecisionTree,
    "random_forest": RandomForest,
    "log_regression": LogisticRegressionClassifier,
    "knn": Knn,
    "mlp": Mlp,
    "linear_reg_classifier": LinearRegClassifier,
}

ENSEMBLE_MEMBER_METHODS = (
    "naive_bayes",
    "mlp",
    "random_forest",
    "knn",
    "log_regression",
)


@dataclass
class Dataset:
    """Raw feature matrix plus the outcome deltas it will be trained on.

    Deltas may equally be pre-binarized 0/1 labels: binarizing 0/1 values
    at their mean reproduces them whenever both classes are present.
    """

    raw: RawMatrix
    deltas: np.ndarray

    @property
    def n(self) -> int:
        return len(self.deltas)

    @classmethod
    def from_cohort(cls, cohort: Cohort, service_codes: Sequence[str] | None = None):
        missing = [r.patient_id for r in cohort if r.carla_delta is None]
        if missing:
            raise TrainingError(
                f"records without carla_delta cannot train: {missing[:3]}"
            )
        raw = raw_matrix_from_cohort(cohort, service_codes)
        deltas = np.array([r.carla_delta for r in cohort], dtype=float)
        return cls(raw=raw, deltas=deltas)

    @classmethod
    def from_arrays(
        cls,
        columns: Mapping[str, Sequence],
        kinds: Mapping[str, str],
        deltas: Sequence[float],
        service_codes: Sequence[str] = (),
    ):
        names = tuple(columns.keys())
        cols: dict[str, np.ndarray] = {}
        for name in names:
            if kinds[name] == NUMERIC:
                cols[name] = np.asarray(columns[name], dtype=float)
            else:
                cols[name] = np.asarray(columns[name], dtype=object)
        raw = RawMatrix(
            names=names,
            kinds=dict(kinds),
            columns=cols,
            service_codes=tuple(service_codes),
        )
        return cls(raw=raw, deltas=np.asarray(deltas, dtype=float))

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(raw=self.raw.subset(idx), deltas=self.deltas[idx])

    def restrict(self, names: Sequence[str]) -> "Dataset":
        """Keep only the given feature columns (same rows and deltas).

        An empty selection is legal and trains a prior-only model.
        """
        names = tuple(names)
        raw = RawMatrix(
            names=names,
            kinds={n: self.raw.kinds[n] for n in names},
            columns={n: self.raw.columns[n] for n in names},
            service_codes=tuple(
                c
                for c in self.raw.service_codes
                if f"svc_{c}" in names or f"vol_{c}" in names
            ),
            n_rows=self.raw.n,
        )
        return Dataset(raw=raw, deltas=self.deltas)


@dataclass
class TrainedModel:
    """Immutable trained predictor bundled with its preprocessing."""

    spec: ModelSpec
    binarizer: TargetBinarizer
    zscaler: ZScaler
    schemes: dict[str, FeatureScheme]
    classifier: object
    feature_names: tuple[str, ...]
    feature_kinds: dict[str, str]
    service_codes: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def transform_row(self, raw_row: Mapping[str, object]) -> dict[str, object]:
        """Apply this model's fitted preprocessing to one raw feature row."""
        out: dict[str, object] = {}
        for name in self.feature_names:
            value = raw_row.get(name)
            if self.feature_kinds[name] == NUMERIC:
                if name in self.metadata.get("required_numeric", ()):
                    if value is None or (
                        isinstance(value, (float, int))
                        and math.isnan(float(value))
                    ):
                        raise PredictionError(
                            f"missing required numeric feature {name!r}"
                        )
                if self.spec.binning == CAIM:
                    scheme = self.schemes[name]
                    out[name] = caim_apply(scheme, _none_if_nan(value))
                else:
                    out[name] = self.zscaler.transform_value(
                        name, _none_if_nan(value)
                    )
            else:
                if value is None:
                    out[name] = "Unknown"
                elif isinstance(value, bool):
                    out[name] = "yes" if value else "no"
                else:
                    out[name] = str(value)
        return out

    def predict_proba(self, record) -> ProbabilisticPrediction:
        """Probability of an above-average outcome for a record or raw row."""
        if isinstance(record, PatientRecord):
            raw_row = raw_row_from_record(
                record, self.feature_names, self.feature_kinds
            )
        elif isinstance(record, Mapping):
            raw_row = record
        else:
            raise PredictionError(f"cannot score a {type(record).__name__}")
        row = self.transform_row(raw_row)
        return ProbabilisticPrediction(p_above=self.classifier.predict_row(row))


def _none_if_nan(value):
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def _transformed_kind(raw_kind: str, binning: str) -> str:
    if raw_kind == CATEGORICAL:
        return DISCRETE
    return DISCRETE if binning == CAIM else CONTINUOUS


def _fit_preprocessors(
    raw: RawMatrix, deltas: np.ndarray, binning: str
) -> tuple[TargetBinarizer, ZScaler, dict[str, FeatureScheme], np.ndarray, list[str]]:
    binarizer = fit_binarizer(deltas)
    y = binarizer.binarize_many(deltas)
    check_training_labels(y)
    numeric = {n: raw.columns[n] for n in raw.numeric_names()}
    zscaler = fit_zscaler(numeric) if numeric else ZScaler({}, {}, frozenset(), len(y))
    schemes: dict[str, FeatureScheme] = {}
    constant: list[str] = []
    if binning == CAIM:
        for name in raw.numeric_names():
            values = np.asarray(raw.columns[name], dtype=float)
            present = ~np.isnan(values)
            try:
                schemes[name] = caim_fit(values[present], y[present])
            except DiscretizationError:
                schemes[name] = FeatureScheme(cuts=(), criterion=0.0)
                constant.append(name)
    else:
        constant = sorted(zscaler.constant)
    return binarizer, zscaler, schemes, y, constant


def _build_matrix(
    raw: RawMatrix,
    binning: str,
    zscaler: ZScaler,
    schemes: dict[str, FeatureScheme],
    y: np.ndarray | None,
) -> FeatureMatrix:
    names = tuple(raw.names)
    kinds = {n: _transformed_kind(raw.kinds[n], binning) for n in names}
    columns: dict[str, np.ndarray] = {}
    for name in names:
        col = raw.columns[name]
        if raw.kinds[name] == NUMERIC:
            if binning == CAIM:
                scheme = schemes[name]
                values = np.asarray(col, dtype=float)
                out = np.empty(len(values), dtype=object)
                for i, v in enumerate(values):
                    out[i] = caim_apply(scheme, None if math.isnan(v) else v)
                columns[name] = out
            else:
                columns[name] = zscaler.transform_column(name, col)
        else:
            columns[name] = np.asarray(col, dtype=object)
    return FeatureMatrix(
        names=names, kinds=kinds, columns=columns, labels=y, n_rows=raw.n
    )


class EnsembleClassifier:
    """Multiset of trained member classifiers averaged by multiplicity."""

    method = "ensemble"

    def __init__(self, members, member_methods, multiplicities, path_auc):
        self.members = members
        self.member_methods = list(member_methods)
        self.multiplicities = list(multiplicities)
        self.path_auc = list(path_auc)

    def predict_row(self, row: Mapping[str, object]) -> float:
        probs = [m.predict_row(row) for m in self.members]
        return ensemble_average(probs, self.multiplicities)

    def to_params(self) -> dict:
        return {
            "member_methods": list(self.member_methods),
            "members": [m.to_params() for m in self.members],
            "multiplicities": list(self.multiplicities),
            "path_auc": list(self.path_auc),
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "EnsembleClassifier":
        members = [
            CLASSIFIERS[method].from_params(p, seed=seed)
            for method, p in zip(params["member_methods"], params["members"])
        ]
        return cls(
            members,
            params["member_methods"],
            params["multiplicities"],
            params["path_auc"],
        )


class VoteClassifier:
    """Max-probability voting committee over trained member classifiers."""

    method = "vote"

    def __init__(self, members, member_methods):
        self.members = members
        self.member_methods = list(member_methods)

    def predict_row(self, row: Mapping[str, object]) -> float:
        probs = [m.predict_row(row) for m in self.members]
        return vote_max_prob(probs).winner_p_above

    def to_params(self) -> dict:
        return {
            "member_methods": list(self.member_methods),
            "members": [m.to_params() for m in self.members],
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "VoteClassifier":
        members = [
            CLASSIFIERS[method].from_params(p, seed=seed)
            for method, p in zip(params["member_methods"], params["members"])
        ]
        return cls(members, params["member_methods"])


def _member_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=(seed, index)).generate_state(1)[0])


def train(spec: ModelSpec, dataset: Dataset) -> TrainedModel:
    """Fit preprocessing and the spec's method on a training dataset."""
    if dataset.n == 0:
        raise TrainingError("empty training set")
    if spec.method == "ensemble":
        return _train_ensemble(spec, dataset)
    raw = dataset.raw
    binarizer, zscaler, schemes, y, constant = _fit_preprocessors(
        raw, dataset.deltas, spec.binning
    )
    matrix = _build_matrix(raw, spec.binning, zscaler, schemes, y)
    if spec.method == "vote":
        members = []
        for i, method in enumerate(ENSEMBLE_MEMBER_METHODS):
            cls = CLASSIFIERS[method]
            members.append(
                cls(
                    ModelSpec(method=method, binning=spec.binning).hyperparameters,
                    seed=_member_seed(spec.seed, i),
                ).fit(matrix, y)
            )
        classifier = VoteClassifier(members, ENSEMBLE_MEMBER_METHODS)
    else:
        cls = CLASSIFIERS[spec.method]
        classifier = cls(spec.hyperparameters, seed=spec.seed).fit(matrix, y)
    return _assemble(
        spec, dataset, binarizer, zscaler, schemes, classifier, y, constant
    )


def _train_ensemble(spec: ModelSpec, dataset: Dataset) -> TrainedModel:
    hp = spec.hyperparameters
    rng = np.random.default_rng(spec.seed)
    n = dataset.n
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * float(hp["validation_fraction"]))))
    if n - n_val < 2:
        raise TrainingError("too few records for an ensemble carve-out")
    val_idx = np.sort(perm[:n_val])
    build_idx = np.sort(perm[n_val:])
    build = dataset.subset(build_idx)
    binarizer, zscaler, schemes, y_build, constant = _fit_preprocessors(
        build.raw, build.deltas, spec.binning
    )
    build_matrix = _build_matrix(build.raw, spec.binning, zscaler, schemes, y_build)
    members = []
    for i, method in enumerate(ENSEMBLE_MEMBER_METHODS):
        cls = CLASSIFIERS[method]
        members.append(
            cls(
                ModelSpec(method=method, binning=spec.binning).hyperparameters,
                seed=_member_seed(spec.seed, i),
            ).fit(build_matrix, y_build)
        )
    val = dataset.subset(val_idx)
    y_val = binarizer.binarize_many(val.deltas)
    if len(np.unique(y_val)) < 2:
        raise TrainingError("ensemble validation carve-out has a single class")
    val_matrix = _build_matrix(val.raw, spec.binning, zscaler, schemes, None)
    selection_scores = np.array(
        [[m.predict_row(row) for row in val_matrix.rows()] for m in members]
    )
    result: SelectionResult = ensemble_select(
        selection_scores, y_val, max_steps=int(hp["max_steps"])
    )
    classifier = EnsembleClassifier(
        members,
        ENSEMBLE_MEMBER_METHODS,
        result.multiplicities,
        result.path_auc,
    )
    model = _assemble(
        spec, build, binarizer, zscaler, schemes, classifier, y_build, constant
    )
    model.metadata["validation_size"] = int(n_val)
    model.metadata["selection_path_auc"] = [float(a) for a in result.path_auc]
    return model


def _assemble(
    spec, dataset, binarizer, zscaler, schemes, classifier, y, constant
) -> TrainedModel:
    raw = dataset.raw
    required = [
        name
        for name in raw.numeric_names()
        if not name.startswith("vol_")
        and not np.isnan(np.asarray(raw.columns[name], dtype=float)).any()
    ]
    metadata = {
        "n": int(dataset.n),
        "class_counts": [int((y == 0).sum()), int((y == 1).sum())],
        "required_numeric": required,
        "constant_features": list(constant),
        "converged": bool(getattr(classifier, "converged", True)),
    }
    return TrainedModel(
        spec=spec,
        binarizer=binarizer,
        zscaler=zscaler,
        schemes=schemes,
        classifier=classifier,
        feature_names=tuple(raw.names),
        feature_kinds=dict(raw.kinds),
        service_codes=tuple(raw.service_codes),
        metadata=metadata,
    )


def predict_proba(model: TrainedModel, record) -> ProbabilisticPrediction:
    """Functional form of TrainedModel.predict_proba."""
    return model.predict_proba(record)
