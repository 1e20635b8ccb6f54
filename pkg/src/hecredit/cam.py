"""HTTP service hosting the credit model over ciphertexts, plus its client.

Routes: ``POST /assess`` (request envelope in, response envelope out),
``GET /healthz`` and ``POST /_size`` which echoes the received body length.
"""

from __future__ import annotations

import http.client
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit

from . import ckks
from . import envelope as env
from .model import ModelBundle, evaluate_encrypted

log = logging.getLogger(__name__)

DEFAULT_MAX_BODY = 256 * 1024 * 1024
DEFAULT_TIMEOUT = 30.0


class AssessError(Exception):
    def __init__(self, code: str, detail: str = "", http_status: int = 400):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail
        self.http_status = http_status


def assess(req: env.AssessmentRequest, model: ModelBundle) -> tuple[bytes, float]:
    """Evaluate one request; returns (serialized result ciphertext, t_server in ms)."""
    t0 = time.perf_counter()
    if req.schema_hash and model.schema_hash and req.schema_hash != model.schema_hash:
        raise AssessError("schema_mismatch", f"{req.schema_hash} != {model.schema_hash}")
    try:
        pctx = ckks.deserialize_public(req.context_bytes)
        ct = ckks.deserialize_ct(req.ciphertext_bytes, pctx)
    except env.EnvelopeError as exc:
        raise AssessError(exc.code, exc.detail) from exc
    except ckks.SerializationError as exc:
        raise AssessError("bad_payload", str(exc)) from exc
    if model.dim > pctx.params.slot_count:
        raise AssessError("schema_mismatch", "model wider than slot count")
    try:
        out = evaluate_encrypted(ct, model, pctx)
    except ckks.CkksError as exc:
        raise AssessError("evaluation_failed", str(exc), 500) from exc
    result = ckks.serialize_ct(out, pctx)
    return result, (time.perf_counter() - t0) * 1e3


@dataclass(frozen=True)
class CamConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    max_body: int = DEFAULT_MAX_BODY
    workers: int = 0  # 0 means one per processor

    def __post_init__(self):
        if self.max_body < DEFAULT_MAX_BODY:
            raise ValueError("max_body must admit at least 256 MB")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "CamServer"

    def log_message(self, fmt, *args):
        log.debug("event=http peer=%s %s", self.address_string(), fmt % args)

    def _reply(self, status: int, body: bytes, ctype: str = "application/json"):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str, detail: str = "", cid: str = ""):
        resp = env.error_response(cid, f"{code}: {detail}" if detail else code)
        self._reply(status, env.encode_response(resp))

    def _body(self) -> bytes | None:
        if "chunked" in self.headers.get("Transfer-Encoding", "").lower():
            self.close_connection = True
            self._error(411, "length_required")
            return None
        try:
            n = int(self.headers.get("Content-Length", ""))
        except ValueError:
            self.close_connection = True
            self._error(411, "length_required")
            return None
        if n < 0:
            self.close_connection = True
            self._error(400, "bad_length")
            return None
        if n > self.server.config.max_body:
            self.close_connection = True
            self._error(413, "too_large", f"{n} > {self.server.config.max_body}")
            return None
        return self.rfile.read(n)

    def do_GET(self):
        if self.path == "/healthz":
            self._reply(200, b"ok", "text/plain")
        elif self.path in ("/assess", "/_size"):
            self.send_response(405)
            self.send_header("Allow", "POST")
            self.send_header("Content-Length", "0")
            self.end_headers()
        else:
            self._error(404, "not_found", self.path)

    def do_POST(self):
        if self.path not in ("/assess", "/_size"):
            self._error(404, "not_found", self.path)
            return
        body = self._body()
        if body is None:
            return
        if self.path == "/_size":
            self._reply(200, json.dumps({"size": len(body)}).encode())
            return
        cid = ""
        try:
            req = env.decode_request(body, require_sender=False)
            cid = req.correlation_id
            with self.server.slots:
                result, t_server = assess(req, self.server.model)
        except env.EnvelopeError as exc:
            self._error(400, exc.code, exc.detail, cid)
            return
        except AssessError as exc:
            log.warning("event=assess_error correlation_id=%s code=%s", cid, exc.code)
            self._error(exc.http_status, exc.code, exc.detail, cid)
            return
        except Exception as exc:  # keep serving; report as evaluation failure
            log.exception("event=assess_crash correlation_id=%s", cid)
            self._error(500, "evaluation_failed", type(exc).__name__, cid)
            return
        resp = env.AssessmentResponse(env.VERSION, cid, "ok", None, env.b64encode(result), 0.0, t_server)
        log.info("event=assess correlation_id=%s t_server_ms=%.1f", cid, t_server)
        self._reply(200, env.encode_response(resp))


class CamServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: CamConfig, model: ModelBundle):
        super().__init__((config.host, config.port), _Handler)
        self.config = config
        self.model = model
        self.slots = threading.BoundedSemaphore(config.workers or os.cpu_count() or 1)

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.server_address[0]}:{self.port}/assess"


class CamThread:
    def __init__(self, model: ModelBundle, config: CamConfig = CamConfig(port=0)):
        self.server = CamServer(config, model)
        self._thread = threading.Thread(target=self.server.serve_forever, name="cam", daemon=True)

    @property
    def url(self) -> str:
        return self.server.url

    def start(self) -> "CamThread":
        self._thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=10)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class HttpError(ConnectionError):
    """Connection-level failure; non-2xx statuses are returned, not raised."""


def http_post(url: str, body: bytes, timeout: float = DEFAULT_TIMEOUT) -> tuple[int, bytes]:
    parts = urlsplit(url)
    if parts.scheme != "http" or not parts.hostname:
        raise ValueError(f"unsupported URL {url!r}")
    conn = http.client.HTTPConnection(parts.hostname, parts.port or 80, timeout=timeout)
    try:
        conn.request("POST", parts.path or "/", body=body,
                     headers={"Content-Type": "application/json", "Content-Length": str(len(body))})
        resp = conn.getresponse()
        return resp.status, resp.read()
    except (OSError, http.client.HTTPException) as exc:
        raise HttpError(f"{type(exc).__name__}: {exc}") from exc
    finally:
        conn.close()


def serve(config: CamConfig, model: ModelBundle) -> None:
    with CamServer(config, model) as srv:
        log.info("event=listen url=%s", srv.url)
        srv.serve_forever()
