"""Filesystem model registry with atomic activation.

Bundles live under content-addressed blob names; an index file maps
(name, version) to blobs and records the single active model. Index
updates go through a temp file and os.replace, so concurrent readers see
either the old or the new state, never a mixture.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from .bundle import load_model
from .errors import RegistryError
from .models.pipeline import TrainedModel


class ModelRegistry:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._active_cache: tuple[tuple[str, int], TrainedModel] | None = None

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _read_index(self) -> dict:
        if not self._index_path.exists():
            return {"active": None, "models": {}}
        with open(self._index_path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def _write_index(self, index: dict) -> None:
        tmp = self._index_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(index, fh, indent=2)
        os.replace(tmp, self._index_path)

    def put(self, name: str, bundle: bytes) -> int:
        """Store a bundle under the next version of ``name``; returns it."""
        load_model(bundle)  # reject anything that does not load cleanly
        digest = hashlib.sha256(bundle).hexdigest()
        blob = self.root / "blobs" / f"{digest}.bundle"
        if not blob.exists():
            tmp = blob.with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                fh.write(bundle)
            os.replace(tmp, blob)
        with self._lock:
            index = self._read_index()
            versions = index["models"].setdefault(name, {})
            version = 1 + max((int(v) for v in versions), default=0)
            versions[str(version)] = f"blobs/{digest}.bundle"
            self._write_index(index)
        return version

    def activate(self, name: str, version: int) -> None:
        with self._lock:
            index = self._read_index()
            versions = index["models"].get(name, {})
            if str(version) not in versions:
                raise RegistryError(f"unknown model {name!r} version {version}")
            index["active"] = [name, int(version)]
            self._write_index(index)
            self._active_cache = None

    def get_active(self) -> TrainedModel:
        """The current active model; loads are cached per activation."""
        with self._lock:
            index = self._read_index()
            if not index.get("active"):
                raise RegistryError("no active model")
            name, version = index["active"][0], int(index["active"][1])
            key = (name, version)
            if self._active_cache and self._active_cache[0] == key:
                return self._active_cache[1]
            rel = index["models"][name][str(version)]
            with open(self.root / rel, "rb") as fh:
                model = load_model(fh.read())
            self._active_cache = (key, model)
            return model

    def active_info(self) -> tuple[str, int]:
        index = self._read_index()
        if not index.get("active"):
            raise RegistryError("no active model")
        return index["active"][0], int(index["active"][1])

    def listing(self) -> dict:
        index = self._read_index()
        return {
            "active": index.get("active"),
            "models": {
                name: sorted(int(v) for v in versions)
                for name, versions in index["models"].items()
            },
        }
