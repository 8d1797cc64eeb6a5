"""C4.5-style decision tree (gain-ratio splits) and a bagged forest."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..features import DISCRETE, FeatureMatrix
from ..stats import entropy_bits
from .base import check_training_labels, is_missing_continuous, level_key

_GAIN_EPS = 1e-12


def _class_counts(y: np.ndarray) -> list[int]:
    return [int((y == 0).sum()), int((y == 1).sum())]


def _partition_entropy(branch_labels: list[np.ndarray]) -> tuple[float, float]:
    """(weighted class entropy, split info) of a branch partition, in bits."""
    n = sum(b.size for b in branch_labels)
    h = 0.0
    split_info = 0.0
    for b in branch_labels:
        if b.size == 0:
            continue
        w = b.size / n
        h += w * entropy_bits(_class_counts(b))
        split_info -= w * math.log2(w)
    return h, split_info


class _TreeBuilder:
    def __init__(self, matrix: FeatureMatrix, y: np.ndarray, min_leaf: int,
                 subset_size: int | None = None, rng: np.random.Generator | None = None):
        self.matrix = matrix
        self.y = y
        self.min_leaf = min_leaf
        self.subset_size = subset_size
        self.rng = rng
        self.names = list(matrix.names)

    def build(self, indices: np.ndarray) -> dict:
        labels = self.y[indices]
        counts = _class_counts(labels)
        node = {"counts": counts}
        if counts[0] == 0 or counts[1] == 0 or indices.size < 2 * self.min_leaf:
            node["leaf"] = True
            return node
        best = self._best_split(indices, labels)
        if best is None:
            node["leaf"] = True
            return node
        node["leaf"] = False
        name, kind, detail = best
        node["feature"] = name
        node["kind"] = kind
        if kind == "continuous":
            threshold, left_idx, right_idx = detail
            node["threshold"] = threshold
            node["left"] = self.build(left_idx)
            node["right"] = self.build(right_idx)
        else:
            groups = detail
            node["children"] = {
                key: self.build(idx) for key, idx in groups.items()
            }
        return node

    def _candidate_features(self) -> list[str]:
        if self.subset_size is None or self.subset_size >= len(self.names):
            return self.names
        picked = self.rng.choice(
            len(self.names), size=self.subset_size, replace=False
        )
        return [self.names[i] for i in sorted(picked)]

    def _best_split(self, indices: np.ndarray, labels: np.ndarray):
        parent_h = entropy_bits(_class_counts(labels))
        best_ratio = -math.inf
        best = None
        for name in self._candidate_features():
            col = self.matrix.columns[name][indices]
            if self.matrix.kinds[name] == DISCRETE:
                candidate = self._discrete_split(name, col, indices, labels, parent_h)
            else:
                candidate = self._continuous_split(name, col, indices, labels, parent_h)
            if candidate is not None and candidate[0] > best_ratio:
                best_ratio = candidate[0]
                best = candidate[1]
        return best

    def _discrete_split(self, name, col, indices, labels, parent_h):
        keys = np.array([level_key(v) for v in col], dtype=object)
        groups: dict[str, np.ndarray] = {}
        for key in sorted(set(keys)):
            mask = keys == key
            groups[key] = indices[mask]
        if len(groups) < 2:
            return None
        eligible = sum(1 for idx in groups.values() if idx.size >= self.min_leaf)
        if eligible < 2:
            return None
        branch_labels = [self.y[idx] for idx in groups.values()]
        h, split_info = _partition_entropy(branch_labels)
        gain = parent_h - h
        if gain <= _GAIN_EPS or split_info <= 0.0:
            return None
        return gain / split_info, (name, "discrete", groups)

    def _continuous_split(self, name, col, indices, labels, parent_h):
        values = np.asarray(col, dtype=float)
        missing = np.isnan(values)
        present_vals = np.unique(values[~missing])
        if present_vals.size < 2:
            return None
        best_ratio = -math.inf
        best_detail = None
        thresholds = (present_vals[:-1] + present_vals[1:]) / 2.0
        for t in thresholds:
            left_mask = missing | (values <= t)
            n_left = int(left_mask.sum())
            n_right = values.size - n_left
            if n_left < self.min_leaf or n_right < self.min_leaf:
                continue
            h, split_info = _partition_entropy(
                [labels[left_mask], labels[~left_mask]]
            )
            gain = parent_h - h
            if gain <= _GAIN_EPS or split_info <= 0.0:
                continue
            ratio = gain / split_info
            if ratio > best_ratio:
                best_ratio = ratio
                best_detail = (
                    float(t),
                    indices[left_mask],
                    indices[~left_mask],
                )
        if best_detail is None:
            return None
        return best_ratio, (name, "continuous", best_detail)


def _node_probability(node: dict, row: Mapping[str, object]) -> float:
    while not node["leaf"]:
        value = row.get(node["feature"])
        if node["kind"] == "continuous":
            if is_missing_continuous(value) or float(value) <= node["threshold"]:
                node = node["left"]
            else:
                node = node["right"]
        else:
            child = node["children"].get(level_key(value))
            if child is None:
                # unseen level: answer with this node's own distribution
                break
            node = child
    counts = node["counts"]
    total = counts[0] + counts[1]
    return counts[1] / total if total else 0.5


class DecisionTree:
    """Gain-ratio tree: multiway on discrete columns, thresholds on continuous.

    No post-pruning; a minimum leaf size bounds growth instead. Split
    thresholds are midpoints, so they always lie strictly between two
    observed training values.
    """

    method = "decision_tree"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.min_leaf = int(hp.get("min_leaf", 2))
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "DecisionTree":
        check_training_labels(y)
        builder = _TreeBuilder(matrix, y, self.min_leaf)
        self.root = builder.build(np.arange(y.size))
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        return _node_probability(self.root, row)

    def to_params(self) -> dict:
        return {"min_leaf": self.min_leaf, "root": self.root}

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "DecisionTree":
        model = cls({"min_leaf": params["min_leaf"]}, seed=seed)
        model.root = params["root"]
        return model


class RandomForest:
    """Bagging over gain-ratio trees with per-split feature subsets.

    Probability is the mean of the member trees' leaf class frequencies.
    Per-tree seeds derive from the spec seed, so a parallel build would
    produce the identical forest.
    """

    method = "random_forest"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.n_trees = int(hp.get("n_trees", 100))
        self.feature_subset = hp.get("feature_subset", "sqrt")
        self.bootstrap = bool(hp.get("bootstrap", True))
        self.min_leaf = int(hp.get("min_leaf", 2))
        self.seed = seed

    def _subset_size(self, d: int) -> int | None:
        if self.feature_subset == "sqrt":
            return int(math.ceil(math.sqrt(d)))
        size = int(self.feature_subset)
        return None if size >= d else size

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "RandomForest":
        check_training_labels(y)
        d = len(matrix.names)
        subset = self._subset_size(d)
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees: list[dict] = []
        n = y.size
        for tree_seed in seeds:
            rng = np.random.default_rng(tree_seed)
            if self.bootstrap:
                indices = np.sort(rng.integers(0, n, size=n))
            else:
                indices = np.arange(n)
            builder = _TreeBuilder(
                matrix, y, self.min_leaf, subset_size=subset, rng=rng
            )
            self.trees.append(builder.build(indices))
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        total = 0.0
        for tree in self.trees:
            total += _node_probability(tree, row)
        return total / len(self.trees)

    def to_params(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "feature_subset": self.feature_subset,
            "bootstrap": self.bootstrap,
            "min_leaf": self.min_leaf,
            "trees": self.trees,
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "RandomForest":
        model = cls(
            {
                "n_trees": params["n_trees"],
                "feature_subset": params["feature_subset"],
                "bootstrap": params["bootstrap"],
                "min_leaf": params["min_leaf"],
            },
            seed=seed,
        )
        model.trees = params["trees"]
        return model
