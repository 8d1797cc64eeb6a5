"""Versioned binary model bundles.

Layout: magic "ACDS", u16 format version, method tag, then three
length-prefixed sections (preprocessors, parameters, metadata) encoded
with a canonical tagged binary codec (little-endian, float64), and a
trailing CRC32. Canonical encoding (sorted dict keys, fixed-width
floats) makes equal models produce byte-identical bundles.
"""

from __future__ import annotations

import struct
import zlib
from typing import Any

import numpy as np

from .errors import BundleError, BundleVersionError
from .models.base import ModelSpec
from .models.pipeline import (
    CLASSIFIERS,
    EnsembleClassifier,
    TrainedModel,
    VoteClassifier,
)
from .preprocess import FeatureScheme, TargetBinarizer, ZScaler

MAGIC = b"ACDS"
FORMAT_VERSION = 1

_T_NONE = 0
_T_FALSE = 1
_T_TRUE = 2
_T_INT = 3
_T_FLOAT = 4
_T_STR = 5
_T_BYTES = 6
_T_LIST = 7
_T_DICT = 8
_T_F64ARRAY = 9


def _encode_value(value: Any, out: bytearray) -> None:
    if value is None:
        out.append(_T_NONE)
    elif value is False or (isinstance(value, np.bool_) and not value):
        out.append(_T_FALSE)
    elif value is True or (isinstance(value, np.bool_) and value):
        out.append(_T_TRUE)
    elif isinstance(value, (int, np.integer)):
        out.append(_T_INT)
        out += struct.pack("<q", int(value))
    elif isinstance(value, (float, np.floating)):
        out.append(_T_FLOAT)
        out += struct.pack("<d", float(value))
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(_T_STR)
        out += struct.pack("<I", len(raw))
        out += raw
    elif isinstance(value, bytes):
        out.append(_T_BYTES)
        out += struct.pack("<I", len(value))
        out += value
    elif isinstance(value, np.ndarray) and value.dtype.kind == "f":
        flat = np.ascontiguousarray(value, dtype="<f8")
        out.append(_T_F64ARRAY)
        out += struct.pack("<I", flat.size)
        out += flat.tobytes()
    elif isinstance(value, (list, tuple)) or (
        isinstance(value, np.ndarray) and value.dtype == object
    ):
        items = list(value)
        out.append(_T_LIST)
        out += struct.pack("<I", len(items))
        for item in items:
            _encode_value(item, out)
    elif isinstance(value, np.ndarray):
        _encode_value(value.tolist(), out)
    elif isinstance(value, dict):
        keys = sorted(value)
        out.append(_T_DICT)
        out += struct.pack("<I", len(keys))
        for key in keys:
            if not isinstance(key, str):
                raise BundleError(f"dict keys must be strings, got {key!r}")
            _encode_value(key, out)
            _encode_value(value[key], out)
    else:
        raise BundleError(f"cannot encode value of type {type(value).__name__}")


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.offset = offset

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise BundleError(
                f"integrity error: truncated stream at offset {self.offset}"
            )
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def read_value(self) -> Any:
        tag = self.take(1)[0]
        if tag == _T_NONE:
            return None
        if tag == _T_FALSE:
            return False
        if tag == _T_TRUE:
            return True
        if tag == _T_INT:
            return struct.unpack("<q", self.take(8))[0]
        if tag == _T_FLOAT:
            return struct.unpack("<d", self.take(8))[0]
        if tag == _T_STR:
            (size,) = struct.unpack("<I", self.take(4))
            return self.take(size).decode("utf-8")
        if tag == _T_BYTES:
            (size,) = struct.unpack("<I", self.take(4))
            return self.take(size)
        if tag == _T_LIST:
            (count,) = struct.unpack("<I", self.take(4))
            return [self.read_value() for _ in range(count)]
        if tag == _T_DICT:
            (count,) = struct.unpack("<I", self.take(4))
            out = {}
            for _ in range(count):
                key = self.read_value()
                out[key] = self.read_value()
            return out
        if tag == _T_F64ARRAY:
            (count,) = struct.unpack("<I", self.take(4))
            raw = self.take(count * 8)
            return np.frombuffer(raw, dtype="<f8").copy()
        raise BundleError(
            f"integrity error: unknown tag {tag} at offset {self.offset - 1}"
        )


def _encode_section(value: Any) -> bytes:
    body = bytearray()
    _encode_value(value, body)
    return struct.pack("<I", len(body)) + bytes(body)


def save_model(model: TrainedModel) -> bytes:
    """Serialize a trained model to a self-describing byte bundle."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    method_raw = model.spec.method.encode("utf-8")
    out += struct.pack("<I", len(method_raw))
    out += method_raw

    preprocessors = {
        "binarizer": {
            "threshold_mean": model.binarizer.threshold_mean,
            "fit_n": model.binarizer.fit_n,
        },
        "zscaler": {
            "means": model.zscaler.means,
            "sds": model.zscaler.sds,
            "constant": sorted(model.zscaler.constant),
            "fit_n": model.zscaler.fit_n,
        },
        "schemes": {
            name: {"cuts": list(s.cuts), "criterion": s.criterion}
            for name, s in model.schemes.items()
        },
        "feature_names": list(model.feature_names),
        "feature_kinds": dict(model.feature_kinds),
        "service_codes": list(model.service_codes),
    }
    parameters = {
        "binning": model.spec.binning,
        "seed": model.spec.seed,
        "hyperparameters": dict(model.spec.hyperparameters),
        "classifier": model.classifier.to_params(),
    }
    out += _encode_section(preprocessors)
    out += _encode_section(parameters)
    out += _encode_section(model.metadata)
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def load_model(data: bytes) -> TrainedModel:
    """Parse a bundle back into a TrainedModel, verifying its checksum."""
    if len(data) < 10:
        raise BundleError("integrity error: truncated stream at offset 0")
    if data[:4] != MAGIC:
        raise BundleError("not a model bundle (bad magic)")
    if len(data) < 4 + 2 + 4:
        raise BundleError("integrity error: truncated header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise BundleVersionError(
            f"unsupported bundle version {version} (expected {FORMAT_VERSION})"
        )
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise BundleError(
            f"integrity error: checksum mismatch at offset {len(data) - 4}"
        )
    reader = _Reader(data, offset=6)
    (method_len,) = struct.unpack("<I", reader.take(4))
    method = reader.take(method_len).decode("utf-8")

    sections = []
    for _ in range(3):
        (size,) = struct.unpack("<I", reader.take(4))
        body = _Reader(reader.data, reader.offset)
        value = body.read_value()
        if body.offset != reader.offset + size:
            raise BundleError(
                f"integrity error: section size mismatch at offset {reader.offset}"
            )
        reader.offset += size
        sections.append(value)
    preprocessors, parameters, metadata = sections

    spec = ModelSpec(
        method=method,
        binning=parameters["binning"],
        hyperparameters=parameters["hyperparameters"],
        seed=parameters["seed"],
    )
    binarizer = TargetBinarizer(
        threshold_mean=preprocessors["binarizer"]["threshold_mean"],
        fit_n=preprocessors["binarizer"]["fit_n"],
    )
    zscaler = ZScaler(
        means=preprocessors["zscaler"]["means"],
        sds=preprocessors["zscaler"]["sds"],
        constant=frozenset(preprocessors["zscaler"]["constant"]),
        fit_n=preprocessors["zscaler"]["fit_n"],
    )
    schemes = {
        name: FeatureScheme(cuts=tuple(s["cuts"]), criterion=s["criterion"])
        for name, s in preprocessors["schemes"].items()
    }
    classifier_params = parameters["classifier"]
    if method == "ensemble":
        classifier = EnsembleClassifier.from_params(classifier_params, seed=spec.seed)
    elif method == "vote":
        classifier = VoteClassifier.from_params(classifier_params, seed=spec.seed)
    else:
        classifier = CLASSIFIERS[method].from_params(classifier_params, seed=spec.seed)
    return TrainedModel(
        spec=spec,
        binarizer=binarizer,
        zscaler=zscaler,
        schemes=schemes,
        classifier=classifier,
        feature_names=tuple(preprocessors["feature_names"]),
        feature_kinds=preprocessors["feature_kinds"],
        service_codes=tuple(preprocessors["service_codes"]),
        metadata=metadata,
    )
