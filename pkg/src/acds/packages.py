"""Service-package catalog and per-patient package scoring.

A package substitutes its service profile and volumes into the patient's
feature row (all other features held fixed) and asks the model for the
probability of an above-average outcome; packages are ranked by that
probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import CatalogError, RequestError
from .features import (
    SERVICE_FLAG_PREFIX,
    SERVICE_VOLUME_PREFIX,
    raw_row_from_request,
)
from .records import CARLA_MAX, CARLA_MIN

BASELINE_FIELDS = (
    "baseline_carla",
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
)


@dataclass(frozen=True)
class ServicePackage:
    package_id: str
    name: str
    service_volume: dict[str, int]

    def __post_init__(self):
        if not self.service_volume:
            raise CatalogError(f"package {self.package_id}: empty service set")
        for code, count in self.service_volume.items():
            if count < 1:
                raise CatalogError(
                    f"package {self.package_id}: count for {code} must be >= 1"
                )

    @property
    def service_profile(self) -> frozenset[str]:
        return frozenset(self.service_volume)

    def to_json(self) -> dict:
        return {
            "package_id": self.package_id,
            "name": self.name,
            "service_volume": dict(sorted(self.service_volume.items())),
        }


@dataclass(frozen=True)
class Recommendation:
    package_id: str
    p_above: float
    rank: int


def load_catalog(source) -> list[ServicePackage]:
    """Parse a JSON array of service packages from bytes, text or a path."""
    if isinstance(source, (bytes, str)) and not _looks_like_json(source):
        with open(source, "rb") as fh:
            source = fh.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise CatalogError("catalog must be a JSON array of packages")
    packages = []
    seen = set()
    for obj in data:
        try:
            pkg = ServicePackage(
                package_id=str(obj["package_id"]),
                name=str(obj.get("name", obj["package_id"])),
                service_volume={
                    str(k): int(v) for k, v in obj["service_volume"].items()
                },
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise CatalogError(f"malformed package entry: {obj!r}") from exc
        if pkg.package_id in seen:
            raise CatalogError(f"duplicate package_id {pkg.package_id!r}")
        seen.add(pkg.package_id)
        packages.append(pkg)
    return packages


def save_catalog(packages: Sequence[ServicePackage]) -> bytes:
    return json.dumps(
        [p.to_json() for p in packages], indent=2, sort_keys=False
    ).encode("utf-8")


def _looks_like_json(source) -> bool:
    text = source.decode("utf-8", "ignore") if isinstance(source, bytes) else source
    stripped = text.lstrip()
    return stripped.startswith("[") or stripped.startswith("{")


def validate_request(model, request: Mapping[str, object]) -> dict:
    """Check a baseline-only request against the active model's needs.

    Unknown keys (other than patient_id), a missing required field, or an
    out-of-range CARLA raise RequestError naming the field.
    """
    if not isinstance(request, Mapping):
        raise RequestError("request patient must be a JSON object")
    allowed = set(BASELINE_FIELDS) | {"patient_id"}
    for key in request:
        if key not in allowed:
            raise RequestError(f"unexpected field {key!r} in request")
    required = set(model.metadata.get("required_numeric", ())) & set(
        BASELINE_FIELDS
    )
    for name in sorted(required):
        value = request.get(name)
        if value in (None, ""):
            raise RequestError(f"missing required field {name!r}")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise RequestError(f"field {name!r} must be numeric")
        if math.isnan(value):
            raise RequestError(f"missing required field {name!r}")
    if "baseline_carla" in request and request["baseline_carla"] not in (None, ""):
        carla = float(request["baseline_carla"])
        if not (CARLA_MIN <= carla <= CARLA_MAX):
            raise RequestError(
                f"baseline_carla out of range [1.0, 4.0]: {carla}"
            )
    return dict(request)


def score_packages(
    model,
    request: Mapping[str, object],
    catalog: Sequence[ServicePackage],
    package_ids: Sequence[str] | None = None,
) -> list[Recommendation]:
    """Rank the requested packages by probability of above-average outcome.

    Ties share descending order by package_id so responses stay stable.
    """
    request = validate_request(model, request)
    known_codes = set(model.service_codes)
    selected = list(catalog)
    if package_ids is not None:
        by_id = {p.package_id: p for p in catalog}
        missing = [pid for pid in package_ids if pid not in by_id]
        if missing:
            raise CatalogError(f"unknown package ids: {missing}")
        selected = [by_id[pid] for pid in package_ids]
    for pkg in selected:
        unknown = sorted(set(pkg.service_volume) - known_codes)
        if unknown:
            raise CatalogError(
                f"package {pkg.package_id} uses service codes the model was "
                f"not trained on: {unknown}"
            )
    base_row = raw_row_from_request(
        request, model.feature_names, model.feature_kinds
    )
    scored = []
    for pkg in selected:
        row = dict(base_row)
        for code in model.service_codes:
            flag = SERVICE_FLAG_PREFIX + code
            vol = SERVICE_VOLUME_PREFIX + code
            if flag in row:
                row[flag] = "yes" if code in pkg.service_volume else "no"
            if vol in row:
                row[vol] = float(pkg.service_volume.get(code, 0))
        p = model.predict_proba(row).p_above
        scored.append((pkg.package_id, p))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [
        Recommendation(package_id=pid, p_above=p, rank=i + 1)
        for i, (pid, p) in enumerate(scored)
    ]
