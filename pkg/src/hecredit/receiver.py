"""Subscribes to the request topic, evaluates locally or via the CAM, replies."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import cam
from . import envelope as env
from .model import ModelBundle
from .mqtt_client import MqttClient

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReceiverConfig:
    broker_host: str = "127.0.0.1"
    broker_port: int = 1883
    request_topic: str = env.REQUEST_TOPIC
    mode: str = "local_cam"  # or "remote_cam"
    cam_url: str | None = None
    model_path: str | None = None
    workers: int = 0  # 0 means one per processor
    http_timeout: float = cam.DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.mode not in ("local_cam", "remote_cam"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "remote_cam" and not self.cam_url:
            raise ValueError("remote_cam mode requires cam_url")


class Receiver:
    def __init__(self, config: ReceiverConfig, model: ModelBundle | None = None):
        if config.mode == "local_cam" and model is None:
            if not config.model_path:
                raise ValueError("local_cam mode requires a model")
            model = ModelBundle.load(config.model_path)
        self.config = config
        self.model = model
        self.pool = ThreadPoolExecutor(config.workers or os.cpu_count() or 1, thread_name_prefix="recv")
        self.client = MqttClient(f"receiver-{uuid.uuid4().hex[:8]}", config.broker_host, config.broker_port,
                                 on_message=self._on_message)
        self.handled = 0
        self._lock = threading.Lock()

    def start(self) -> "Receiver":
        self.client.connect()
        self.client.subscribe(self.config.request_topic)
        log.info("event=receiver_ready topic=%s mode=%s", self.config.request_topic, self.config.mode)
        return self

    def stop(self) -> None:
        self.client.close()
        self.pool.shutdown(wait=True, cancel_futures=True)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _on_message(self, topic: str, payload: bytes) -> None:
        if topic != self.config.request_topic:
            return
        self.pool.submit(self._guarded, payload)

    def _guarded(self, payload: bytes) -> None:
        # the receiver clock starts when a worker picks the request up
        try:
            self.handle(payload)
        except Exception:
            log.exception("event=receiver_crash")

    def handle(self, payload: bytes, t0: float | None = None) -> env.AssessmentResponse | None:
        """Process one request payload and publish the reply; returns the reply."""
        t0 = time.perf_counter() if t0 is None else t0
        resp, topic = self.respond(payload, t0)
        if topic is None:
            log.warning("event=drop reason=unroutable correlation_id=%s", resp.correlation_id)
            return None
        with self._lock:
            self.handled += 1
        self.client.publish(topic, env.encode_response(resp))
        log.info("event=reply correlation_id=%s status=%s mode=%s t_receiver_ms=%.1f t_server_ms=%.1f",
                 resp.correlation_id, resp.status, self.config.mode, resp.t_receiver_ms, resp.t_server_ms)
        return resp

    def respond(self, payload: bytes, t0: float) -> tuple[env.AssessmentResponse, str | None]:
        elapsed = lambda: (time.perf_counter() - t0) * 1e3  # noqa: E731
        try:
            req = env.decode_request(payload)
        except env.EnvelopeError as exc:
            cid = _guess_cid(payload)
            return env.error_response(cid, exc.code, elapsed()), env.parse_reply_topic(payload)
        if self.config.mode == "local_cam":
            try:
                result, t_server = cam.assess(req, self.model)
            except cam.AssessError as exc:
                return env.error_response(req.correlation_id, exc.code, elapsed()), req.reply_topic
            b64 = env.b64encode(result)
        else:
            got = self._remote(req, payload)
            if isinstance(got, str):
                return env.error_response(req.correlation_id, got, elapsed()), req.reply_topic
            b64, t_server = got
        t_recv = elapsed()
        # t_server is measured inside t_receiver; clamp float jitter only
        resp = env.AssessmentResponse(env.VERSION, req.correlation_id, "ok", None, b64,
                                      t_recv, min(t_server, t_recv))
        return resp, req.reply_topic

    def _remote(self, req: env.AssessmentRequest, payload: bytes):
        try:
            status, body = cam.http_post(self.config.cam_url, payload, self.config.http_timeout)
        except (cam.HttpError, ValueError) as exc:
            log.warning("event=cam_unreachable correlation_id=%s error=%s", req.correlation_id, exc)
            return "cam_unreachable"
        try:
            resp = env.decode_response(body)
        except env.EnvelopeError:
            return f"cam_http_{status}"
        if status != 200 or resp.status != "ok":
            return resp.error_detail or f"cam_http_{status}"
        return resp.result_b64, resp.t_server_ms


def _guess_cid(payload: bytes) -> str:
    try:
        doc = json.loads(payload)
        cid = doc.get("correlation_id") if isinstance(doc, dict) else None
    except (UnicodeDecodeError, ValueError):
        return "unknown"
    return cid if isinstance(cid, str) and cid else "unknown"


def serve(config: ReceiverConfig) -> None:
    rx = Receiver(config).start()
    try:
        while rx.client.connected:
            time.sleep(1)
    finally:
        rx.stop()
