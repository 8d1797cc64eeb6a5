"""Model specs and helpers shared by the classifier implementations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ModelSpecError
from ..features import FeatureMatrix
from ..preprocess import BIN_TARGET, BINNING_MODES, CAIM

METHOD_NAMES = (
    "naive_bayes",
    "aode",
    "bayes_net_k2",
    "decision_tree",
    "random_forest",
    "log_regression",
    "knn",
    "mlp",
    "linear_reg_classifier",
    "ensemble",
    "vote",
)

DISCRETE_ONLY_METHODS = ("aode", "bayes_net_k2")

_DEFAULTS: dict[str, dict] = {
    "naive_bayes": {},
    "aode": {"min_parent_freq": 1},
    # max_parents counts feature parents added by the K2 search on top of
    # the always-present class parent; 0 recovers naive Bayes exactly.
    "bayes_net_k2": {"max_parents": 2},
    "decision_tree": {"min_leaf": 2},
    "random_forest": {
        "n_trees": 100,
        "feature_subset": "sqrt",
        "bootstrap": True,
        "min_leaf": 2,
    },
    "log_regression": {"l2": 1e-4, "tol": 1e-6, "max_iter": 10000},
    "knn": {"k": 5},
    "mlp": {"hidden": 16, "rate": 0.1, "epochs": 500},
    "linear_reg_classifier": {},
    "ensemble": {"validation_fraction": 0.25, "max_steps": 50},
    "vote": {},
}


def default_hyperparameters(method: str) -> dict:
    if method not in _DEFAULTS:
        raise ModelSpecError(f"unknown method {method!r}")
    return dict(_DEFAULTS[method])


@dataclass(frozen=True)
class ModelSpec:
    """Method + binning mode + hyperparameters + seed."""

    method: str
    binning: str = BIN_TARGET
    hyperparameters: Mapping = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ModelSpecError(f"unknown method {self.method!r}")
        if self.binning not in BINNING_MODES:
            raise ModelSpecError(f"unknown binning mode {self.binning!r}")
        if self.method in DISCRETE_ONLY_METHODS and self.binning != CAIM:
            raise ModelSpecError(
                f"{self.method} requires all-discrete inputs (caim binning)"
            )
        merged = default_hyperparameters(self.method)
        unknown = set(self.hyperparameters) - set(merged)
        if unknown:
            raise ModelSpecError(
                f"unknown hyperparameters for {self.method}: {sorted(unknown)}"
            )
        merged.update(self.hyperparameters)
        object.__setattr__(self, "hyperparameters", merged)


@dataclass(frozen=True)
class ProbabilisticPrediction:
    p_above: float

    def __post_init__(self):
        if not (0.0 <= self.p_above <= 1.0):
            raise ModelSpecError(f"probability out of range: {self.p_above}")

    @property
    def predicted_class(self) -> int:
        return 1 if self.p_above >= 0.5 else 0


def level_key(value) -> str:
    """Canonical serializable key for a discrete level (int or str)."""
    if value is None:
        return "m:"
    if isinstance(value, (int, np.integer)):
        return f"i:{int(value)}"
    return f"s:{value}"


def sorted_levels(values: np.ndarray) -> list:
    """Sorted distinct non-missing levels of a discrete column."""
    present = [v for v in values if v is not None]
    levels = sorted(set(present))
    return [int(v) if isinstance(v, (int, np.integer)) else v for v in levels]


def is_missing_continuous(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def check_training_labels(y: np.ndarray) -> None:
    from ..errors import TrainingError

    if y.size == 0:
        raise TrainingError("empty training set")
    if len(np.unique(y)) < 2:
        raise TrainingError("training set contains a single class")


class DesignEncoder:
    """One-hot design-matrix encoder for the linear/MLP family.

    Continuous columns pass through (missing becomes 0, the z-scored
    mean); discrete columns one-hot expand over the training levels, with
    unseen or missing levels encoding to all zeros. Column 0 is the
    intercept.
    """

    def __init__(self, matrix: FeatureMatrix):
        self.continuous = list(matrix.continuous_names())
        self.discrete_levels: dict[str, list] = {
            name: sorted_levels(matrix.columns[name])
            for name in matrix.discrete_names()
        }
        self.discrete = list(matrix.discrete_names())
        self.width = 1 + len(self.continuous) + sum(
            len(v) for v in self.discrete_levels.values()
        )

    def encode_row(self, row: Mapping[str, object]) -> np.ndarray:
        x = np.zeros(self.width)
        x[0] = 1.0
        j = 1
        for name in self.continuous:
            value = row[name]
            x[j] = 0.0 if is_missing_continuous(value) else float(value)
            j += 1
        for name in self.discrete:
            levels = self.discrete_levels[name]
            value = row[name]
            if value is not None:
                value = int(value) if isinstance(value, (int, np.integer)) else value
                try:
                    x[j + levels.index(value)] = 1.0
                except ValueError:
                    pass
            j += len(levels)
        return x

    def encode_matrix(self, matrix: FeatureMatrix) -> np.ndarray:
        return np.vstack([self.encode_row(row) for row in matrix.rows()])

    def to_dict(self) -> dict:
        return {
            "continuous": list(self.continuous),
            "discrete": list(self.discrete),
            "levels": {k: list(v) for k, v in self.discrete_levels.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignEncoder":
        enc = cls.__new__(cls)
        enc.continuous = list(data["continuous"])
        enc.discrete = list(data["discrete"])
        enc.discrete_levels = {k: list(v) for k, v in data["levels"].items()}
        enc.width = 1 + len(enc.continuous) + sum(
            len(v) for v in enc.discrete_levels.values()
        )
        return enc
