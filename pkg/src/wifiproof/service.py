"""HTTP/JSON verifier service.

Endpoints::

    POST /observations   batch of observation records -> IngestReport
    POST /claims         LocationClaim                -> LocationCertificate
    GET  /fingerprint    current StableMap
    GET  /health

Observation records may use the store's canonical keys (``obs_time``,
``location``, ``device``, ``bssid``...) or the CSV column names
(``device_id``, ``date``, ``time``, ``ref_name``, ``BSSID``...).

The handler is a thin adapter over :class:`VerifierService`, whose methods
return ``(status, body)`` pairs and can be called without a socket.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional, Tuple

from .core import UTC, LocationClaim
from .errors import ProofError, ValidationError, reason_tag
from .netsets import StableMap
from .store import IngestReport, ObservationStore, record_to_observation, row_to_observation
from .verifier import VerifierConfig, claim_admissible, issue_certificate

log = logging.getLogger(__name__)

Response = Tuple[int, dict]


@dataclass
class ServiceConfig:
    store_path: str
    fingerprint_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    verifier: VerifierConfig = field(default_factory=VerifierConfig)

    def validate(self) -> "ServiceConfig":
        self.verifier.validate()
        Path(self.store_path).mkdir(parents=True, exist_ok=True)
        Path(self.fingerprint_path).parent.mkdir(parents=True, exist_ok=True)
        return self

    @classmethod
    def from_json(cls, doc: dict) -> "ServiceConfig":
        return cls(
            store_path=doc["store"],
            fingerprint_path=doc["fingerprint"],
            host=doc.get("host", "127.0.0.1"),
            port=int(doc.get("port", 8080)),
            verifier=VerifierConfig.from_json(doc.get("verifier", {})),
        )


def _error(status: int, exc_or_reason, message: str = "") -> Response:
    if isinstance(exc_or_reason, BaseException):
        return status, {"error": str(exc_or_reason), "reason": reason_tag(exc_or_reason)}
    return status, {"error": message or exc_or_reason, "reason": exc_or_reason}


def parse_observation_record(rec: dict):
    if not isinstance(rec, dict):
        raise ValidationError("observation record must be an object")
    if "obs_time" in rec:
        return record_to_observation(rec)
    return row_to_observation({k: "" if v is None else str(v) for k, v in rec.items()})


class VerifierService:
    def __init__(
        self,
        store: ObservationStore,
        fingerprint_path,
        config: VerifierConfig,
        clock: Callable[[], datetime] = lambda: datetime.now(UTC),
    ):
        self.store = store
        self.fingerprint_path = Path(fingerprint_path)
        self.config = config.validate()
        self.clock = clock
        self._fp_lock = threading.Lock()
        self._fp_stamp = None
        self._fingerprint: Optional[StableMap] = None

    def fingerprint(self) -> Optional[StableMap]:
        """Current fingerprint, reloaded whenever the file changes on disk."""
        try:
            stat = os.stat(self.fingerprint_path)
        except FileNotFoundError:
            return None
        stamp = (stat.st_mtime_ns, stat.st_size)
        with self._fp_lock:
            if stamp != self._fp_stamp:
                self._fingerprint = StableMap.loads(self.fingerprint_path.read_text(encoding="utf-8"))
                self._fp_stamp = stamp
            return self._fingerprint

    def health(self) -> Response:
        return 200, {"status": "ok", "observations": len(self.store), "fingerprint": self.fingerprint() is not None}

    def get_fingerprint(self) -> Response:
        stable = self.fingerprint()
        if stable is None:
            return _error(404, "NoFingerprint", "no fingerprint has been computed")
        return 200, stable.to_json()

    def post_observations(self, payload) -> Response:
        if isinstance(payload, dict):
            payload = payload.get("observations")
        if not isinstance(payload, list):
            return _error(400, "MalformedPayload", "expected a list of observation records")
        report = IngestReport()
        batch = []
        for rec in payload:
            try:
                batch.append(parse_observation_record(rec))
            except (ProofError, KeyError, TypeError, ValueError) as exc:
                report.reject(reason_tag(exc) if isinstance(exc, ProofError) else "MalformedRecord")
        return 200, self.store.append(batch, report).to_json()

    def post_claim(self, payload) -> Response:
        if not isinstance(payload, dict):
            return _error(400, "MalformedPayload", "expected a claim object")
        try:
            claim = LocationClaim.from_json(payload)
        except ProofError as exc:
            return _error(400, exc)
        now = self.clock()
        if not claim_admissible(claim, self.config, now):
            return _error(409, "PeriodOpen", "the period containing the claim time has not closed")
        stable = self.fingerprint()
        if stable is None:
            return _error(503, "NoFingerprint", "no fingerprint has been computed")
        try:
            cert = issue_certificate(self.store.snapshot(), claim, self.config, stable, now=now)
        except ProofError as exc:
            return _error(400, exc)
        return 200, cert.to_json()

    def dispatch(self, method: str, path: str, body: Optional[bytes]) -> Response:
        route = path.split("?", 1)[0].rstrip("/") or "/"
        if method == "GET" and route == "/health":
            return self.health()
        if method == "GET" and route == "/fingerprint":
            return self.get_fingerprint()
        if method == "POST" and route in ("/observations", "/claims"):
            try:
                payload = json.loads(body or b"null")
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                return _error(400, "MalformedJSON", str(exc))
            if route == "/observations":
                return self.post_observations(payload)
            return self.post_claim(payload)
        if route in ("/health", "/fingerprint", "/observations", "/claims"):
            return _error(405, "MethodNotAllowed", f"{method} {route}")
        return _error(404, "NotFound", route)


class _Handler(BaseHTTPRequestHandler):
    service: VerifierService
    protocol_version = "HTTP/1.1"

    def _respond(self, status: int, body: dict) -> None:
        data = json.dumps(body, sort_keys=True, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _handle(self, method: str) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else None
        try:
            status, payload = self.service.dispatch(method, self.path, body)
        except Exception as exc:  # keep the server alive
            log.exception("unhandled error on %s %s", method, self.path)
            status, payload = _error(500, "InternalError", str(exc))
        self._respond(status, payload)

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)


def make_server(service: VerifierService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Bind a threaded HTTP server for ``service``; port 0 picks a free port."""
    handler = type("Handler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve(config: ServiceConfig) -> None:
    """Run the verifier service until interrupted."""
    config.validate()
    service = VerifierService(ObservationStore.open(config.store_path), config.fingerprint_path, config.verifier)
    server = make_server(service, config.host, config.port)
    log.info("listening on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
