"""JSON-over-HTTP scoring service (stdlib threading server).

Endpoints:
    POST /v1/recommend  {patient: {...}, package_ids?: [...]}
    GET  /v1/packages   catalog listing
    GET  /v1/models     registry listing
    GET  /v1/health     {status, active_model}

Responses are deterministic: identical (model, request, catalog) inputs
produce byte-identical bodies; probabilities carry at most 10
significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence

from .errors import AcdsError, CatalogError, RegistryError, RequestError
from .packages import Recommendation, ServicePackage, load_catalog, score_packages
from .registry import ModelRegistry


def round10(value: float) -> float:
    """Clip a float to 10 significant decimal digits."""
    return float(f"{value:.10g}")


def recommendation_payload(
    name: str, version: int, recommendations: Sequence[Recommendation]
) -> dict:
    return {
        "model": {"name": name, "version": version},
        "recommendations": [
            {
                "package_id": r.package_id,
                "p_above": round10(r.p_above),
                "rank": r.rank,
            }
            for r in recommendations
        ],
    }


@dataclass
class ServiceConfig:
    registry_dir: str | Path
    catalog_path: str | Path
    host: str = "127.0.0.1"
    port: int = 8330


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "acds"

    def log_message(self, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str, field: str | None = None) -> None:
        payload = {"error": {"message": message}}
        if field:
            payload["error"]["field"] = field
        self._send(status, payload)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        registry: ModelRegistry = self.server.registry
        if self.path == "/v1/health":
            try:
                name, version = registry.active_info()
                self._send(
                    200,
                    {
                        "status": "ok",
                        "active_model": {"name": name, "version": version},
                    },
                )
            except RegistryError:
                self._send(503, {"status": "no-active-model"})
        elif self.path == "/v1/packages":
            self._send(
                200, {"packages": [p.to_json() for p in self.server.catalog]}
            )
        elif self.path == "/v1/models":
            self._send(200, registry.listing())
        else:
            self._error(404, f"unknown path {self.path}")

    def do_POST(self):
        if self.path != "/v1/recommend":
            self._error(404, f"unknown path {self.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length)
            body = json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._error(400, "request body must be valid JSON")
            return
        if not isinstance(body, dict) or "patient" not in body:
            self._error(400, "body must be {patient: {...}, package_ids?: []}",
                        field="patient")
            return
        try:
            model = self.server.registry.get_active()
            catalog = list(self.server.catalog)
            for custom in _parse_custom_packages(body, catalog):
                catalog.append(custom)
            recs = score_packages(
                model,
                body["patient"],
                catalog,
                package_ids=body.get("package_ids"),
            )
            name, version = self.server.registry.active_info()
        except RegistryError as exc:
            self._error(503, str(exc))
            return
        except (RequestError, CatalogError) as exc:
            field = _field_from_message(str(exc))
            self._error(400, str(exc), field=field)
            return
        except AcdsError as exc:
            self._error(400, str(exc))
            return
        self._send(200, recommendation_payload(name, version, recs))


def _parse_custom_packages(body: dict, catalog) -> list[ServicePackage]:
    """Ad-hoc what-if packages appended to the catalog for one request."""
    raw = body.get("custom_packages")
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise CatalogError("custom_packages must be an array")
    known = {p.package_id for p in catalog}
    customs = []
    for obj in raw:
        try:
            pkg = ServicePackage(
                package_id=str(obj["package_id"]),
                name=str(obj.get("name", obj["package_id"])),
                service_volume={
                    str(k): int(v) for k, v in obj["service_volume"].items()
                },
            )
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise CatalogError(f"malformed custom package: {obj!r}") from exc
        if pkg.package_id in known:
            raise CatalogError(
                f"custom package id {pkg.package_id!r} collides with the catalog"
            )
        known.add(pkg.package_id)
        customs.append(pkg)
    return customs


def _field_from_message(message: str) -> str | None:
    # error messages name fields in single quotes
    if "'" in message:
        parts = message.split("'")
        if len(parts) >= 3:
            return parts[1]
    return None


class RecommendServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServiceConfig):
        self.registry = ModelRegistry(config.registry_dir)
        self.registry.get_active()  # fail fast when nothing is active
        self.catalog = load_catalog(str(config.catalog_path))
        super().__init__((config.host, config.port), _Handler)


def serve(config: ServiceConfig) -> RecommendServer:
    """Build the HTTP server; caller runs serve_forever()."""
    return RecommendServer(config)
