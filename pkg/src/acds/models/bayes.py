"""Bayesian classifiers: naive Bayes, AODE, and a K2-structured network.

All three share the same Laplace add-1 smoothing so that AODE with an
empty super-parent set and K2 with no extra parents reproduce the naive
Bayes posterior bit for bit.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Mapping

import numpy as np

from ..errors import ModelSpecError
from ..features import DISCRETE, FeatureMatrix
from ..stats import chi2_statistic
from .base import check_training_labels, is_missing_continuous, sorted_levels

_VAR_FLOOR = 1e-9


def _smoothed_log(count: int, group_total: int, n_levels: int) -> float:
    return math.log((count + 1.0) / (group_total + n_levels))


def _normalize_two(log0: float, log1: float) -> float:
    m = max(log0, log1)
    e0 = math.exp(log0 - m)
    e1 = math.exp(log1 - m)
    return e1 / (e0 + e1)


def _canon_level(value):
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


class NaiveBayes:
    """Laplace-smoothed discrete likelihoods, Gaussian for continuous."""

    method = "naive_bayes"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "NaiveBayes":
        check_training_labels(y)
        self.n = int(y.size)
        self.class_counts = [int((y == 0).sum()), int((y == 1).sum())]
        self.column_order = list(matrix.names)
        self.kinds = {name: matrix.kinds[name] for name in matrix.names}
        self.tables: dict[str, dict] = {}
        self.gaussians: dict[str, dict] = {}
        for name in matrix.names:
            col = matrix.columns[name]
            if matrix.kinds[name] == DISCRETE:
                levels = sorted_levels(col)
                counts = [[0] * len(levels) for _ in (0, 1)]
                index = {lv: i for i, lv in enumerate(levels)}
                for value, label in zip(col, y):
                    if value is None:
                        continue
                    counts[int(label)][index[_canon_level(value)]] += 1
                self.tables[name] = {
                    "levels": levels,
                    "counts": counts,
                    "totals": [sum(counts[0]), sum(counts[1])],
                }
            else:
                values = np.asarray(col, dtype=float)
                present = ~np.isnan(values)
                overall = values[present]
                overall_var = (
                    float(overall.var(ddof=1)) if overall.size >= 2 else 1.0
                )
                if overall_var <= 0.0:
                    overall_var = 1.0
                means = []
                variances = []
                for c in (0, 1):
                    vals = values[present & (y == c)]
                    if vals.size >= 1:
                        mean = float(vals.mean())
                    else:
                        mean = float(overall.mean()) if overall.size else 0.0
                    if vals.size >= 2:
                        var = float(vals.var(ddof=1))
                        if var <= 0.0:
                            var = _VAR_FLOOR
                    else:
                        var = overall_var
                    means.append(mean)
                    variances.append(max(var, _VAR_FLOOR))
                self.gaussians[name] = {"mean": means, "var": variances}
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        logp = [
            _smoothed_log(self.class_counts[c], self.n, 2) for c in (0, 1)
        ]
        for name in self.column_order:
            value = row.get(name)
            if self.kinds[name] == DISCRETE:
                if value is None:
                    continue
                table = self.tables[name]
                levels = table["levels"]
                try:
                    idx = levels.index(_canon_level(value))
                except ValueError:
                    idx = None
                for c in (0, 1):
                    count = table["counts"][c][idx] if idx is not None else 0
                    logp[c] += _smoothed_log(
                        count, table["totals"][c], len(levels)
                    )
            else:
                if is_missing_continuous(value):
                    continue
                x = float(value)
                g = self.gaussians[name]
                for c in (0, 1):
                    var = g["var"][c]
                    logp[c] += -0.5 * math.log(2.0 * math.pi * var)
                    logp[c] += -((x - g["mean"][c]) ** 2) / (2.0 * var)
        return _normalize_two(logp[0], logp[1])

    def to_params(self) -> dict:
        return {
            "n": self.n,
            "class_counts": list(self.class_counts),
            "column_order": list(self.column_order),
            "kinds": dict(self.kinds),
            "tables": self.tables,
            "gaussians": self.gaussians,
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "NaiveBayes":
        model = cls(seed=seed)
        model.n = params["n"]
        model.class_counts = list(params["class_counts"])
        model.column_order = list(params["column_order"])
        model.kinds = dict(params["kinds"])
        model.tables = params["tables"]
        model.gaussians = params["gaussians"]
        return model


def _require_all_discrete(matrix: FeatureMatrix, method: str) -> None:
    bad = [n for n in matrix.names if matrix.kinds[n] != DISCRETE]
    if bad:
        raise ModelSpecError(
            f"{method} requires all-discrete inputs; continuous: {bad}"
        )


class Aode:
    """Averaged one-dependence estimators over eligible super-parents.

    A super-parent value participates when its training frequency is at
    least ``min_parent_freq``; if no super-parent qualifies for a row the
    prediction falls back to the naive Bayes posterior.
    """

    method = "aode"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.min_parent_freq = int(hp.get("min_parent_freq", 1))
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "Aode":
        check_training_labels(y)
        _require_all_discrete(matrix, "aode")
        self.n = int(y.size)
        self.class_counts = [int((y == 0).sum()), int((y == 1).sum())]
        self.names = list(matrix.names)
        self.levels: dict[str, list] = {}
        codes: dict[str, np.ndarray] = {}
        for name in self.names:
            col = matrix.columns[name]
            levels = sorted_levels(col)
            self.levels[name] = levels
            index = {lv: i for i, lv in enumerate(levels)}
            codes[name] = np.array(
                [index[_canon_level(v)] if v is not None else -1 for v in col],
                dtype=np.int64,
            )
        # value frequency and per-class joint counts per attribute
        self.value_counts: dict[str, list[int]] = {}
        self.joint_counts: dict[str, list[list[int]]] = {}
        for name in self.names:
            v = len(self.levels[name])
            vc = [0] * v
            jc = [[0] * v for _ in (0, 1)]
            for code, label in zip(codes[name], y):
                if code < 0:
                    continue
                vc[code] += 1
                jc[int(label)][code] += 1
            self.value_counts[name] = vc
            self.joint_counts[name] = jc
        # pairwise counts: parent attribute i, child attribute j
        self.pair_counts: dict[str, dict[str, np.ndarray]] = {}
        for pi in self.names:
            vi = len(self.levels[pi])
            self.pair_counts[pi] = {}
            for cj in self.names:
                if cj == pi:
                    continue
                vj = len(self.levels[cj])
                counts = np.zeros((2, vi, vj), dtype=np.int64)
                mask = (codes[pi] >= 0) & (codes[cj] >= 0)
                np.add.at(
                    counts,
                    (y[mask], codes[pi][mask], codes[cj][mask]),
                    1,
                )
                self.pair_counts[pi][cj] = counts
        # shared fallback so that an empty super-parent set reproduces the
        # naive Bayes posterior exactly
        self._nb = NaiveBayes(seed=self.seed).fit(matrix, y)
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        parents = []
        for name in self.names:
            value = row.get(name)
            if value is None:
                continue
            levels = self.levels[name]
            try:
                code = levels.index(_canon_level(value))
            except ValueError:
                continue
            if self.value_counts[name][code] >= self.min_parent_freq:
                parents.append((name, code))
        if not parents:
            return self._nb.predict_row(row)
        log_joints: list[list[float]] = [[], []]
        for pname, pcode in parents:
            vi = len(self.levels[pname])
            for c in (0, 1):
                lj = _smoothed_log(
                    self.joint_counts[pname][c][pcode], self.n, 2 * vi
                )
                parent_class_count = self.joint_counts[pname][c][pcode]
                for cname in self.names:
                    if cname == pname:
                        continue
                    value = row.get(cname)
                    if value is None:
                        continue
                    levels = self.levels[cname]
                    try:
                        ccode = levels.index(_canon_level(value))
                    except ValueError:
                        ccode = None
                    count = (
                        int(self.pair_counts[pname][cname][c, pcode, ccode])
                        if ccode is not None
                        else 0
                    )
                    lj += _smoothed_log(count, parent_class_count, len(levels))
                log_joints[c].append(lj)
        m = max(max(log_joints[0]), max(log_joints[1]))
        p0 = sum(math.exp(v - m) for v in log_joints[0])
        p1 = sum(math.exp(v - m) for v in log_joints[1])
        return p1 / (p0 + p1)

    def to_params(self) -> dict:
        return {
            "n": self.n,
            "class_counts": list(self.class_counts),
            "names": list(self.names),
            "levels": self.levels,
            "min_parent_freq": self.min_parent_freq,
            "value_counts": self.value_counts,
            "joint_counts": self.joint_counts,
            "pair_counts": {
                p: {c: arr.reshape(-1).tolist() for c, arr in children.items()}
                for p, children in self.pair_counts.items()
            },
            "nb": self._nb.to_params(),
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "Aode":
        model = cls(
            {"min_parent_freq": params["min_parent_freq"]}, seed=seed
        )
        model.n = params["n"]
        model.class_counts = list(params["class_counts"])
        model.names = list(params["names"])
        model.levels = {k: list(v) for k, v in params["levels"].items()}
        model.value_counts = params["value_counts"]
        model.joint_counts = params["joint_counts"]
        model.pair_counts = {}
        for p, children in params["pair_counts"].items():
            vi = len(model.levels[p])
            model.pair_counts[p] = {}
            for c, flat in children.items():
                vj = len(model.levels[c])
                model.pair_counts[p][c] = np.array(flat, dtype=np.int64).reshape(
                    2, vi, vj
                )
        model._nb = NaiveBayes.from_params(params["nb"], seed=seed)
        return model


class BayesNetK2:
    """Bayesian network classifier with greedy K2 structure search.

    The variable ordering is the class first, then features by descending
    chi-squared association with the class. Every feature keeps the class
    as a parent; the search adds up to ``max_parents`` extra feature
    parents under the K2 Bayesian-Dirichlet (uniform prior) score.
    """

    method = "bayes_net_k2"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.max_parents = int(hp.get("max_parents", 2))
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "BayesNetK2":
        check_training_labels(y)
        _require_all_discrete(matrix, "bayes_net_k2")
        self.n = int(y.size)
        self.class_counts = [int((y == 0).sum()), int((y == 1).sum())]
        self.names = list(matrix.names)
        self.levels: dict[str, list] = {}
        codes: dict[str, np.ndarray] = {}
        for name in self.names:
            col = matrix.columns[name]
            levels = sorted_levels(col)
            self.levels[name] = levels
            index = {lv: i for i, lv in enumerate(levels)}
            codes[name] = np.array(
                [index[_canon_level(v)] if v is not None else -1 for v in col],
                dtype=np.int64,
            )
        ranked = sorted(
            self.names,
            key=lambda name: (
                -chi2_statistic(list(matrix.columns[name]), list(y)),
                name,
            ),
        )
        self.ordering = list(ranked)
        self.parents: dict[str, list[str]] = {}
        for pos, name in enumerate(self.ordering):
            predecessors = self.ordering[:pos]
            chosen: list[str] = []
            current = self._k2_score(name, chosen, codes, y)
            while len(chosen) < self.max_parents:
                best_score = -math.inf
                best_parent = None
                for cand in predecessors:
                    if cand in chosen:
                        continue
                    score = self._k2_score(name, chosen + [cand], codes, y)
                    if score > best_score:
                        best_score = score
                        best_parent = cand
                if best_parent is None or best_score <= current:
                    break
                chosen.append(best_parent)
                current = best_score
            self.parents[name] = chosen
        # Conditional count tables keyed by (class, extra parent codes)
        self.cpts: dict[str, dict] = {}
        for name in self.names:
            extras = self.parents[name]
            vi = len(self.levels[name])
            table: defaultdict[tuple, list[int]] = defaultdict(lambda: [0] * vi)
            for i in range(self.n):
                vcode = codes[name][i]
                if vcode < 0:
                    continue
                pcodes = [int(codes[p][i]) for p in extras]
                if any(pc < 0 for pc in pcodes):
                    continue
                table[(int(y[i]), *pcodes)][vcode] += 1
            self.cpts[name] = {
                "extras": list(extras),
                "configs": {self._config_key(k): v for k, v in table.items()},
            }
        # class-conditional marginals for fallback when a parent value is
        # missing or unseen at prediction time
        self.marginals: dict[str, list[list[int]]] = {}
        for name in self.names:
            vi = len(self.levels[name])
            jc = [[0] * vi for _ in (0, 1)]
            for code, label in zip(codes[name], y):
                if code < 0:
                    continue
                jc[int(label)][code] += 1
            self.marginals[name] = jc
        return self

    @staticmethod
    def _config_key(config: tuple) -> str:
        return "|".join(str(c) for c in config)

    def _k2_score(
        self,
        name: str,
        extras: list[str],
        codes: dict[str, np.ndarray],
        y: np.ndarray,
    ) -> float:
        """log K2 metric for a node given parents {class} + extras."""
        vi = len(self.levels[name])
        counts: defaultdict[tuple, list[int]] = defaultdict(lambda: [0] * vi)
        for i in range(self.n):
            vcode = codes[name][i]
            if vcode < 0:
                continue
            pcodes = [int(codes[p][i]) for p in extras]
            if any(pc < 0 for pc in pcodes):
                continue
            counts[(int(y[i]), *pcodes)][vcode] += 1
        score = 0.0
        for config_counts in counts.values():
            total = sum(config_counts)
            score += math.lgamma(vi) - math.lgamma(total + vi)
            for c in config_counts:
                score += math.lgamma(c + 1)
        return score

    def predict_row(self, row: Mapping[str, object]) -> float:
        logp = [
            _smoothed_log(self.class_counts[c], self.n, 2) for c in (0, 1)
        ]
        for name in self.names:
            value = row.get(name)
            if value is None:
                continue
            levels = self.levels[name]
            try:
                vcode = levels.index(_canon_level(value))
            except ValueError:
                vcode = None
            extras = self.cpts[name]["extras"]
            pcodes: list[int] | None = []
            for p in extras:
                pvalue = row.get(p)
                if pvalue is None:
                    pcodes = None
                    break
                try:
                    pcodes.append(self.levels[p].index(_canon_level(pvalue)))
                except ValueError:
                    pcodes = None
                    break
            for c in (0, 1):
                if pcodes is None:
                    counts = self.marginals[name][c]
                    group = sum(counts)
                    count = counts[vcode] if vcode is not None else 0
                else:
                    key = self._config_key((c, *pcodes))
                    config = self.cpts[name]["configs"].get(key)
                    count = (
                        config[vcode]
                        if config is not None and vcode is not None
                        else 0
                    )
                    group = sum(config) if config is not None else 0
                logp[c] += _smoothed_log(count, group, len(levels))
        return _normalize_two(logp[0], logp[1])

    def to_params(self) -> dict:
        return {
            "n": self.n,
            "class_counts": list(self.class_counts),
            "names": list(self.names),
            "levels": self.levels,
            "max_parents": self.max_parents,
            "ordering": list(self.ordering),
            "parents": self.parents,
            "cpts": self.cpts,
            "marginals": self.marginals,
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0) -> "BayesNetK2":
        model = cls({"max_parents": params["max_parents"]}, seed=seed)
        model.n = params["n"]
        model.class_counts = list(params["class_counts"])
        model.names = list(params["names"])
        model.levels = {k: list(v) for k, v in params["levels"].items()}
        model.ordering = list(params["ordering"])
        model.parents = {k: list(v) for k, v in params["parents"].items()}
        model.cpts = params["cpts"]
        model.marginals = params["marginals"]
        return model
