"""Feature extraction from patient records and the matrix types.

A RawMatrix holds untransformed columns (numeric floats with NaN for
missing, categorical strings). The modeling pipeline turns it into a
FeatureMatrix whose columns are either continuous (z-scored floats) or
discrete (level values, None for a missing discretized numeric).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError
from .records import Cohort, PatientRecord

NUMERIC = "numeric"
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
DISCRETE = "discrete"

BASE_NUMERIC_FIELDS = (
    "baseline_carla",
    "age_years",
    "toms_symptom_baseline",
    "toms_functioning_baseline",
)
BASE_CATEGORICAL_FIELDS = (
    "gender",
    "race",
    "prior_mobile_crisis",
    "diagnosis_category",
    "payer",
    "location",
    "county",
    "region_type",
)

SERVICE_FLAG_PREFIX = "svc_"
SERVICE_VOLUME_PREFIX = "vol_"


def service_feature_names(codes: Sequence[str]) -> list[str]:
    names = []
    for code in sorted(codes):
        names.append(SERVICE_FLAG_PREFIX + code)
        names.append(SERVICE_VOLUME_PREFIX + code)
    return names


@dataclass
class RawMatrix:
    """Column-major raw features plus per-column kind.

    ``n_rows`` carries the instance count when every column has been
    selected away (a legal outcome of subset selection).
    """

    names: tuple[str, ...]
    kinds: dict[str, str]
    columns: dict[str, np.ndarray]
    service_codes: tuple[str, ...]
    n_rows: int | None = None

    @property
    def n(self) -> int:
        if self.columns:
            return len(next(iter(self.columns.values())))
        return self.n_rows or 0

    def numeric_names(self) -> list[str]:
        return [n for n in self.names if self.kinds[n] == NUMERIC]

    def row(self, i: int) -> dict[str, object]:
        return {name: self.columns[name][i] for name in self.names}

    def subset(self, indices: Sequence[int]) -> "RawMatrix":
        idx = np.asarray(indices)
        return RawMatrix(
            names=self.names,
            kinds=dict(self.kinds),
            columns={n: self.columns[n][idx] for n in self.names},
            service_codes=self.service_codes,
            n_rows=int(idx.size),
        )


def cohort_service_codes(cohort: Cohort) -> tuple[str, ...]:
    codes: set[str] = set()
    for rec in cohort:
        codes |= set(rec.service_profile)
        codes |= set(rec.service_volume)
    return tuple(sorted(codes))


def raw_matrix_from_cohort(
    cohort: Cohort, service_codes: Sequence[str] | None = None
) -> RawMatrix:
    """Extract the full predictor set from a cohort.

    Service receipt becomes a yes/no flag per code plus a numeric encounter
    count; a code absent from a record means flag "no" and count 0.
    """
    codes = tuple(sorted(service_codes)) if service_codes is not None else (
        cohort_service_codes(cohort)
    )
    names: list[str] = []
    kinds: dict[str, str] = {}
    columns: dict[str, np.ndarray] = {}
    recs = list(cohort)

    for field in BASE_NUMERIC_FIELDS:
        names.append(field)
        kinds[field] = NUMERIC
        columns[field] = np.array(
            [_num(getattr(r, field)) for r in recs], dtype=float
        )
    for field in BASE_CATEGORICAL_FIELDS:
        names.append(field)
        kinds[field] = CATEGORICAL
        columns[field] = np.array(
            [_cat(getattr(r, field)) for r in recs], dtype=object
        )
    for code in codes:
        flag = SERVICE_FLAG_PREFIX + code
        names.append(flag)
        kinds[flag] = CATEGORICAL
        columns[flag] = np.array(
            ["yes" if code in r.service_profile else "no" for r in recs],
            dtype=object,
        )
        vol = SERVICE_VOLUME_PREFIX + code
        names.append(vol)
        kinds[vol] = NUMERIC
        columns[vol] = np.array(
            [float(r.service_volume.get(code, 0)) for r in recs], dtype=float
        )
    return RawMatrix(
        names=tuple(names), kinds=kinds, columns=columns, service_codes=codes
    )


def raw_row_from_record(
    record: PatientRecord, names: Sequence[str], kinds: Mapping[str, str]
) -> dict[str, object]:
    """One record's raw feature row for a model's declared feature list."""
    row: dict[str, object] = {}
    for name in names:
        if name.startswith(SERVICE_FLAG_PREFIX):
            code = name[len(SERVICE_FLAG_PREFIX):]
            row[name] = "yes" if code in record.service_profile else "no"
        elif name.startswith(SERVICE_VOLUME_PREFIX):
            code = name[len(SERVICE_VOLUME_PREFIX):]
            row[name] = float(record.service_volume.get(code, 0))
        elif kinds[name] == NUMERIC:
            row[name] = _num(getattr(record, name))
        else:
            row[name] = _cat(getattr(record, name))
    return row


def raw_row_from_request(
    request: Mapping[str, object],
    names: Sequence[str],
    kinds: Mapping[str, str],
) -> dict[str, object]:
    """Raw row from a baseline-only request dict; service features zeroed.

    Missing categorical fields become "Unknown"; missing numeric fields
    become NaN and are validated downstream against the model's required
    feature list.
    """
    row: dict[str, object] = {}
    for name in names:
        if name.startswith(SERVICE_FLAG_PREFIX):
            row[name] = "no"
        elif name.startswith(SERVICE_VOLUME_PREFIX):
            row[name] = 0.0
        elif kinds[name] == NUMERIC:
            value = request.get(name)
            row[name] = float("nan") if value in (None, "") else float(value)
        else:
            value = request.get(name)
            row[name] = _cat(value if value not in (None, "") else None)
    return row


def _num(value) -> float:
    return float("nan") if value is None else float(value)


def _cat(value) -> str:
    if value is None:
        return "Unknown"
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


@dataclass
class FeatureMatrix:
    """Transformed instances ready for a classifier.

    Continuous columns are float arrays (NaN = missing); discrete columns
    are object arrays of levels (None = missing discretized value).
    """

    names: tuple[str, ...]
    kinds: dict[str, str]
    columns: dict[str, np.ndarray]
    labels: np.ndarray | None = None
    n_rows: int | None = None

    @property
    def n(self) -> int:
        if self.columns:
            return len(next(iter(self.columns.values())))
        if self.n_rows is not None:
            return self.n_rows
        return len(self.labels) if self.labels is not None else 0

    def row(self, i: int) -> dict[str, object]:
        return {name: self.columns[name][i] for name in self.names}

    def rows(self):
        for i in range(self.n):
            yield self.row(i)

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaError(f"unknown feature columns: {missing}")
        return FeatureMatrix(
            names=tuple(names),
            kinds={n: self.kinds[n] for n in names},
            columns={n: self.columns[n] for n in names},
            labels=self.labels,
            n_rows=self.n,
        )

    def continuous_names(self) -> list[str]:
        return [n for n in self.names if self.kinds[n] == CONTINUOUS]

    def discrete_names(self) -> list[str]:
        return [n for n in self.names if self.kinds[n] == DISCRETE]


def matrix_from_arrays(
    columns: Mapping[str, Sequence],
    kinds: Mapping[str, str],
    labels: Sequence[int] | None = None,
) -> FeatureMatrix:
    """Build a FeatureMatrix directly from arrays (for tests and harnesses)."""
    names = tuple(columns.keys())
    cols: dict[str, np.ndarray] = {}
    for name in names:
        if kinds[name] == CONTINUOUS:
            cols[name] = np.asarray(columns[name], dtype=float)
        elif kinds[name] == DISCRETE:
            cols[name] = np.asarray(columns[name], dtype=object)
        else:
            raise SchemaError(f"bad column kind {kinds[name]!r} for {name!r}")
    return FeatureMatrix(
        names=names,
        kinds=dict(kinds),
        columns=cols,
        labels=None if labels is None else np.asarray(labels, dtype=np.int64),
    )
