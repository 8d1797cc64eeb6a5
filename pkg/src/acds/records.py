"""Patient records, cohorts, ingestion and descriptive statistics.

Records carry the intake-time predictors plus the CARLA outcome fields
(baseline, final at follow-up, and their delta). Cohorts are immutable
snapshots; every operation here is a pure function.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    DomainError,
    InsufficientDataError,
    IntegrityError,
    PreconditionError,
    SchemaError,
)

GENDERS = ("F", "M", "Unknown")
RACES = ("White", "Black", "Asian", "Other", "Unknown")
DIAGNOSES = ("Anxiety", "Bipolar", "Depression", "Other")
REGION_TYPES = ("Urban", "Rural")

CARLA_MIN = 1.0
CARLA_MAX = 4.0
DELTA_MATCH_TOL = 1e-9

CSV_COLUMNS = (
    "patient_id",
    "baseline_carla",
    "final_carla",
    "carla_delta",
    "gender",
    "race",
    "age_years",
    "toms_symptom_baseline",
    "toms_functioning_baseline",
    "prior_mobile_crisis",
    "diagnosis_category",
    "payer",
    "location",
    "county",
    "region_type",
    "service_profile",
    "service_volume",
    "intake_date",
    "first_seen_date",
)

NUMERIC_FIELDS = (
    "baseline_carla",
    "final_carla",
    "carla_delta",
    "age_years",
    "toms_symptom_baseline",
    "toms_functioning_baseline",
)


@dataclass(frozen=True)
class PatientRecord:
    """One patient's baseline predictors and outcome fields."""

    patient_id: str
    baseline_carla: float
    gender: str
    race: str
    age_years: int
    diagnosis_category: str
    payer: str
    location: str
    county: str
    region_type: str
    intake_date: datetime.date
    first_seen_date: datetime.date
    final_carla: float | None = None
    carla_delta: float | None = None
    toms_symptom_baseline: float | None = None
    toms_functioning_baseline: float | None = None
    prior_mobile_crisis: bool = False
    service_profile: frozenset[str] = frozenset()
    service_volume: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "baseline_carla", float(self.baseline_carla))
        if self.final_carla is not None:
            object.__setattr__(self, "final_carla", float(self.final_carla))
        if self.carla_delta is not None:
            object.__setattr__(self, "carla_delta", float(self.carla_delta))
        if self.toms_symptom_baseline is not None:
            object.__setattr__(
                self, "toms_symptom_baseline", float(self.toms_symptom_baseline)
            )
        if self.toms_functioning_baseline is not None:
            object.__setattr__(
                self,
                "toms_functioning_baseline",
                float(self.toms_functioning_baseline),
            )
        object.__setattr__(self, "age_years", int(self.age_years))
        object.__setattr__(self, "prior_mobile_crisis", bool(self.prior_mobile_crisis))
        _check_carla("baseline_carla", self.baseline_carla)
        if self.final_carla is not None:
            _check_carla("final_carla", self.final_carla)
        if self.carla_delta is not None:
            if self.final_carla is None:
                raise DomainError(
                    f"{self.patient_id}: carla_delta present without final_carla"
                )
            expected = self.final_carla - self.baseline_carla
            if abs(self.carla_delta - expected) > DELTA_MATCH_TOL:
                raise DomainError(
                    f"{self.patient_id}: carla_delta {self.carla_delta} != "
                    f"final - baseline ({expected})"
                )
        elif self.final_carla is not None:
            object.__setattr__(
                self, "carla_delta", self.final_carla - self.baseline_carla
            )
        if self.age_years < 0:
            raise DomainError(f"{self.patient_id}: age_years must be >= 0")
        if self.gender not in GENDERS:
            raise DomainError(f"{self.patient_id}: unknown gender {self.gender!r}")
        if self.race not in RACES:
            raise DomainError(f"{self.patient_id}: unknown race {self.race!r}")
        if self.diagnosis_category not in DIAGNOSES:
            raise DomainError(
                f"{self.patient_id}: unknown diagnosis_category "
                f"{self.diagnosis_category!r}"
            )
        if self.region_type not in REGION_TYPES:
            raise DomainError(
                f"{self.patient_id}: unknown region_type {self.region_type!r}"
            )
        volume = dict(self.service_volume)
        for code, count in volume.items():
            if count < 0:
                raise DomainError(f"{self.patient_id}: negative volume for {code}")
        extra = set(volume) - set(self.service_profile)
        if extra:
            raise DomainError(
                f"{self.patient_id}: volume codes outside profile: {sorted(extra)}"
            )
        object.__setattr__(self, "service_profile", frozenset(self.service_profile))
        object.__setattr__(self, "service_volume", dict(sorted(volume.items())))

    def get(self, name: str):
        return getattr(self, name)


def _check_carla(name: str, value: float) -> None:
    if not (CARLA_MIN <= value <= CARLA_MAX):
        raise DomainError(f"{name} out of range [1.0, 4.0]: {value}")


@dataclass(frozen=True)
class Cohort:
    """Immutable ordered collection of unique patient records."""

    records: tuple[PatientRecord, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for rec in self.records:
            if rec.patient_id in seen:
                raise IntegrityError(f"duplicate patient_id {rec.patient_id!r}")
            seen.add(rec.patient_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    min: float
    max: float
    mean: float
    sd: float


@dataclass(frozen=True)
class ChangeFrequencies:
    deteriorated: int
    no_change: int
    improved: int
    pct_deteriorated: float
    pct_no_change: float
    pct_improved: float

    @property
    def total(self) -> int:
        return self.deteriorated + self.no_change + self.improved


# ---------------------------------------------------------------------------
# Ingestion / serialization


def load_cohort(source, format: str = "csv") -> Cohort:
    """Parse a byte stream, path or bytes into a Cohort.

    ``format`` is ``csv`` (header row with the documented column names) or
    ``jsonl`` (one JSON object per line). Empty string / null means missing.
    """
    text = _read_text(source)
    if format == "csv":
        records = _parse_csv(text)
    elif format in ("jsonl", "json-lines"):
        records = _parse_jsonl(text)
    else:
        raise SchemaError(f"unknown cohort format {format!r}")
    return Cohort(records=tuple(records), provenance=f"loaded ({format})")


def save_cohort(cohort: Cohort, format: str = "csv") -> bytes:
    """Serialize a cohort so that load_cohort round-trips it bit-exactly."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in cohort:
            writer.writerow([_field_to_csv(rec, col) for col in CSV_COLUMNS])
        return buf.getvalue().encode("utf-8")
    if format in ("jsonl", "json-lines"):
        lines = []
        for rec in cohort:
            obj = {col: _field_to_json(rec, col) for col in CSV_COLUMNS}
            lines.append(json.dumps(obj))
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise SchemaError(f"unknown cohort format {format!r}")


def _read_text(source) -> str:
    if isinstance(source, (str,)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _parse_csv(text: str) -> list[PatientRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty input: missing header row")
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise SchemaError(
            f"malformed header: expected {','.join(CSV_COLUMNS)}"
        )
    records = []
    for idx, row in enumerate(reader, start=2):
        if not row or all(cell == "" for cell in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise SchemaError(f"row {idx}: expected {len(CSV_COLUMNS)} columns")
        raw = dict(zip(CSV_COLUMNS, row))
        try:
            records.append(_record_from_strings(raw))
        except DomainError:
            raise
        except (ValueError, KeyError) as exc:
            raise SchemaError(f"row {idx}: {exc}") from exc
    return records


def _parse_jsonl(text: str) -> list[PatientRecord]:
    records = []
    for idx, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {idx}: invalid JSON ({exc})") from exc
        missing = set(CSV_COLUMNS) - set(obj)
        if missing:
            raise SchemaError(f"line {idx}: missing fields {sorted(missing)}")
        try:
            records.append(_record_from_json(obj))
        except DomainError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise SchemaError(f"line {idx}: {exc}") from exc
    return records


def _record_from_strings(raw: Mapping[str, str]) -> PatientRecord:
    def opt_float(key):
        return float(raw[key]) if raw[key] != "" else None

    profile = frozenset(c for c in raw["service_profile"].split(";") if c)
    volume: dict[str, int] = {}
    if raw["service_volume"]:
        for pair in raw["service_volume"].split(";"):
            code, _, count = pair.partition(":")
            volume[code] = int(count)
    return PatientRecord(
        patient_id=raw["patient_id"],
        baseline_carla=float(raw["baseline_carla"]),
        final_carla=opt_float("final_carla"),
        carla_delta=opt_float("carla_delta"),
        gender=raw["gender"] or "Unknown",
        race=raw["race"] or "Unknown",
        age_years=int(raw["age_years"]),
        toms_symptom_baseline=opt_float("toms_symptom_baseline"),
        toms_functioning_baseline=opt_float("toms_functioning_baseline"),
        prior_mobile_crisis=_parse_bool(raw["prior_mobile_crisis"]),
        diagnosis_category=raw["diagnosis_category"],
        payer=raw["payer"],
        location=raw["location"],
        county=raw["county"],
        region_type=raw["region_type"],
        service_profile=profile,
        service_volume=volume,
        intake_date=datetime.date.fromisoformat(raw["intake_date"]),
        first_seen_date=datetime.date.fromisoformat(raw["first_seen_date"]),
    )


def _record_from_json(obj: Mapping) -> PatientRecord:
    volume = obj["service_volume"] or {}
    if not isinstance(volume, dict):
        raise SchemaError("service_volume must be an object")
    return PatientRecord(
        patient_id=str(obj["patient_id"]),
        baseline_carla=float(obj["baseline_carla"]),
        final_carla=_opt(obj["final_carla"], float),
        carla_delta=_opt(obj["carla_delta"], float),
        gender=obj["gender"] or "Unknown",
        race=obj["race"] or "Unknown",
        age_years=int(obj["age_years"]),
        toms_symptom_baseline=_opt(obj["toms_symptom_baseline"], float),
        toms_functioning_baseline=_opt(obj["toms_functioning_baseline"], float),
        prior_mobile_crisis=bool(obj["prior_mobile_crisis"]),
        diagnosis_category=obj["diagnosis_category"],
        payer=obj["payer"],
        location=obj["location"],
        county=obj["county"],
        region_type=obj["region_type"],
        service_profile=frozenset(obj["service_profile"] or []),
        service_volume={str(k): int(v) for k, v in volume.items()},
        intake_date=datetime.date.fromisoformat(obj["intake_date"]),
        first_seen_date=datetime.date.fromisoformat(obj["first_seen_date"]),
    )


def _opt(value, conv):
    return None if value in (None, "") else conv(value)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "y"):
        return True
    if low in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _field_to_csv(rec: PatientRecord, col: str) -> str:
    value = getattr(rec, col)
    if value is None:
        return ""
    if col == "service_profile":
        return ";".join(sorted(value))
    if col == "service_volume":
        return ";".join(f"{k}:{v}" for k, v in sorted(value.items()))
    if col in ("intake_date", "first_seen_date"):
        return value.isoformat()
    if col == "prior_mobile_crisis":
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _field_to_json(rec: PatientRecord, col: str):
    value = getattr(rec, col)
    if col == "service_profile":
        return sorted(value)
    if col == "service_volume":
        return dict(sorted(value.items()))
    if col in ("intake_date", "first_seen_date"):
        return value.isoformat()
    return value


# ---------------------------------------------------------------------------
# Cohort operations


def filter_cohort(
    cohort: Cohort,
    window: tuple[datetime.date, datetime.date],
    new_intakes_only: bool = False,
    required_fields: Iterable[str] = (),
    min_age: int | None = None,
) -> Cohort:
    """Apply the intake-window / completeness filters and return a new cohort.

    ``min_age`` optionally restricts to the adult cohort (the CARLA is an
    adult instrument); filtering to an empty cohort is legal.
    """
    start, end = window
    if start > end:
        raise PreconditionError(f"window start {start} after end {end}")
    required = tuple(required_fields)
    for name in required:
        if name not in CSV_COLUMNS:
            raise SchemaError(f"unknown field {name!r} in required_fields")
    kept = []
    for rec in cohort:
        if not (start <= rec.intake_date <= end):
            continue
        if new_intakes_only and rec.first_seen_date < start:
            continue
        if min_age is not None and rec.age_years < min_age:
            continue
        if any(getattr(rec, name) is None for name in required):
            continue
        kept.append(rec)
    desc = (
        f"window {start.isoformat()}..{end.isoformat()}"
        f"{', new intakes only' if new_intakes_only else ''}"
        f"{', min age ' + str(min_age) if min_age is not None else ''}"
        f"{', require ' + ','.join(required) if required else ''}"
    )
    provenance = f"{cohort.provenance}; filter: {desc}".lstrip("; ")
    return Cohort(records=tuple(kept), provenance=provenance)


def describe(cohort: Cohort, field_name: str) -> DescriptiveStats:
    """Descriptive stats over the non-missing values of a numeric field.

    Uses the sample (n-1) standard deviation.
    """
    if field_name not in NUMERIC_FIELDS:
        raise SchemaError(f"{field_name!r} is not a numeric record field")
    values = [
        getattr(rec, field_name)
        for rec in cohort
        if getattr(rec, field_name) is not None
    ]
    n = len(values)
    if n < 2:
        raise InsufficientDataError(
            f"need at least 2 values of {field_name}, got {n}"
        )
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return DescriptiveStats(
        n=n, min=min(values), max=max(values), mean=mean, sd=math.sqrt(var)
    )


def delta_frequencies(cohort: Cohort) -> ChangeFrequencies:
    """Three-way outcome change counts: delta < 0, exactly 0, > 0."""
    for rec in cohort:
        if rec.carla_delta is None:
            raise PreconditionError(
                f"record {rec.patient_id!r} is missing carla_delta"
            )
    n = len(cohort)
    if n == 0:
        raise PreconditionError("empty cohort has no delta frequencies")
    det = sum(1 for rec in cohort if rec.carla_delta < 0)
    same = sum(1 for rec in cohort if rec.carla_delta == 0)
    imp = n - det - same
    return ChangeFrequencies(
        deteriorated=det,
        no_change=same,
        improved=imp,
        pct_deteriorated=100.0 * det / n,
        pct_no_change=100.0 * same / n,
        pct_improved=100.0 * imp / n,
    )
