"""K-nearest neighbors over mixed continuous/discrete features."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..features import DISCRETE, FeatureMatrix
from .base import check_training_labels, is_missing_continuous


class Knn:
    """Euclidean distance on continuous columns, 0/1 mismatch on discrete.

    A missing value in either member of a continuous pair contributes the
    mismatch penalty 1. Probability is the positive fraction among the k
    nearest neighbors, with all distance ties at the k-th rank included.
    """

    method = "knn"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.k = int(hp.get("k", 5))
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "Knn":
        check_training_labels(y)
        self.names = list(matrix.names)
        self.kinds = {n: matrix.kinds[n] for n in self.names}
        self.rows = [matrix.row(i) for i in range(matrix.n)]
        self.labels = [int(v) for v in y]
        return self

    def _distance2(self, a: Mapping[str, object], b: Mapping[str, object]) -> float:
        total = 0.0
        for name in self.names:
            va, vb = a.get(name), b.get(name)
            if self.kinds[name] == DISCRETE:
                if _level(va) != _level(vb):
                    total += 1.0
            else:
                if is_missing_continuous(va) or is_missing_continuous(vb):
                    total += 1.0
                else:
                    diff = float(va) - float(vb)
                    total += diff * diff
        return total

    def predict_row(self, row: Mapping[str, object]) -> float:
        dists = sorted(
            (self._distance2(row, r), i) for i, r in enumerate(self.rows)
        )
        k = min(self.k, len(dists))
        kth = dists[k - 1][0]
        included = [i for d, i in dists if d <= kth]
        positives = sum(self.labels[i] for i in included)
        return positives / len(included)

    def to_params(self) -> dict:
        return {
            "k": self.k,
            "names": list(self.names),
            "kinds": dict(self.kinds),
            "rows": [
                {n: _encode_cell(r[n]) for n in self.names} for r in self.rows
            ],
            "labels": list(self.labels),
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "Knn":
        model = cls({"k": params["k"]}, seed=seed)
        model.names = list(params["names"])
        model.kinds = dict(params["kinds"])
        model.rows = [
            {n: _decode_cell(r[n]) for n in model.names} for r in params["rows"]
        ]
        model.labels = [int(v) for v in params["labels"]]
        return model


def _level(value):
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _encode_cell(value):
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return str(value)


def _decode_cell(value):
    return value
