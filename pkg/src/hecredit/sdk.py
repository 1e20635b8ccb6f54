"""Customer-side SDK: keys, encryption, request dispatch and result decryption.

Only this module ever holds a :class:`~hecredit.ckks.PrivateContext`.  Raw
and normalized features stay in memory here; the wire carries only the public
context and ciphertexts.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field

import numpy as np

from . import ckks
from . import envelope as env
from .data import NormalizationStats
from .model import ModelBundle, decide, sigmoid
from .mqtt_client import MqttClient, MqttClientError

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 60.0


class SdkError(RuntimeError):
    pass


@dataclass
class _Pending:
    t_start: float
    t_send: float = 0.0
    t_receive: float = 0.0
    future: Future = field(default_factory=Future)


class SdkSession:
    """One key set per session, reused across that session's requests."""

    def __init__(self, prctx: ckks.PrivateContext, stats: NormalizationStats, schema_hash: str,
                 sender_id: str, rng: np.random.Generator):
        self.prctx = prctx
        self.stats = stats
        self.schema_hash = schema_hash
        self.sender_id = sender_id
        self.reply_topic = env.reply_topic_for(sender_id)
        self._rng = rng
        self._rng_lock = threading.Lock()
        self._pending: dict[str, _Pending] = {}
        self._lock = threading.Lock()
        self._context_b64 = env.b64encode(ckks.serialize_public(prctx.public))
        self.client: MqttClient | None = None
        self.dropped = 0

    @classmethod
    def new(cls, params: ckks.SecurityParams, sender_id: str, model: ModelBundle | None = None, *,
            stats: NormalizationStats | None = None, schema_hash: str = "", seed=None) -> "SdkSession":
        """Generate fresh keys; normalization comes from ``model`` or ``stats``."""
        if model is not None:
            stats, schema_hash = model.stats, model.schema_hash
        if stats is None:
            raise SdkError("normalization statistics are required")
        if len(stats.means) > params.slot_count:
            raise SdkError("more features than slots")
        rng = np.random.default_rng(seed)
        return cls(ckks.keygen(params, rng), stats, schema_hash, sender_id, rng)

    @property
    def params(self) -> ckks.SecurityParams:
        return self.prctx.params

    @property
    def dim(self) -> int:
        return len(self.stats.means)

    @property
    def context_b64(self) -> str:
        return self._context_b64

    def _draw_rng(self) -> np.random.Generator:
        with self._rng_lock:
            return np.random.default_rng(self._rng.integers(1 << 63))

    # request side ------------------------------------------------------------

    def encrypt_features(self, x) -> ckks.Ciphertext:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise SdkError(f"expected {self.dim} features, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise SdkError("features must be finite")
        z = self.stats.apply(x)
        pt = ckks.encode(z, self.params)
        return ckks.encrypt_symmetric(pt, self.prctx, self._draw_rng())

    def prepare_request(self, x) -> tuple[env.AssessmentRequest, float]:
        """Encrypt ``x`` into a request; returns it with its t_start stamp."""
        t_start = time.perf_counter()
        ct = self.encrypt_features(x)
        req = env.AssessmentRequest(
            env.VERSION, self.sender_id, uuid.uuid4().hex, self.reply_topic, self._context_b64,
            env.b64encode(ckks.serialize_ct(ct, self.prctx)), self.schema_hash,
        )
        with self._lock:
            self._pending[req.correlation_id] = _Pending(t_start)
        return req, t_start

    def decrypt_request(self, req: env.AssessmentRequest) -> np.ndarray:
        """Self-check: the normalized features carried by ``req``."""
        ct = ckks.deserialize_ct(req.ciphertext_bytes, self.prctx)
        return ckks.decode(ckks.decrypt(ct, self.prctx, flood=False))[: self.dim]

    # transport ---------------------------------------------------------------

    def connect(self, host: str = "127.0.0.1", port: int = 1883) -> None:
        self.client = MqttClient(self.sender_id, host, port, on_message=self._on_message,
                                 on_disconnect=self._on_disconnect)
        self.client.connect()
        self.client.subscribe(self.reply_topic)

    def close(self) -> None:
        if self.client is not None:
            self.client.close()

    def _on_message(self, topic: str, payload: bytes) -> None:
        t = time.perf_counter()
        try:
            resp = env.decode_response(payload)
        except env.EnvelopeError as exc:
            log.warning("event=bad_response sender_id=%s error=%s", self.sender_id, exc)
            return
        with self._lock:
            p = self._pending.get(resp.correlation_id)
            if p is None or p.future.done():
                self.dropped += 1
                p = None
            else:
                p.t_receive = t
        if p is None:
            log.warning("event=unknown_correlation sender_id=%s correlation_id=%s",
                        self.sender_id, resp.correlation_id)
            return
        p.future.set_result(resp)

    def _on_disconnect(self) -> None:
        with self._lock:
            waiting = [p for p in self._pending.values() if not p.future.done()]
        for p in waiting:
            try:
                p.future.set_exception(SdkError("broker disconnected"))
            except Exception:
                pass

    def send(self, req: env.AssessmentRequest) -> int:
        """Publish ``req``; returns the on-wire payload size."""
        if self.client is None:
            raise SdkError("session is not connected")
        payload = env.encode_request(req)
        with self._lock:
            p = self._pending.get(req.correlation_id)
            if p is None:
                raise SdkError("request was not prepared by this session")
            p.t_send = time.perf_counter()
        try:
            self.client.publish(env.REQUEST_TOPIC, payload)
        except MqttClientError as exc:
            raise SdkError(f"publish failed: {exc}") from exc
        return len(payload)

    def await_response(self, correlation_id: str, timeout: float = DEFAULT_TIMEOUT) -> env.AssessmentResponse:
        with self._lock:
            p = self._pending.get(correlation_id)
        if p is None:
            raise SdkError(f"unknown correlation id {correlation_id}")
        try:
            return p.future.result(timeout)
        except FutureTimeout as exc:
            raise SdkError(f"timed out after {timeout} s waiting for {correlation_id}") from exc

    def send_and_await(self, req: env.AssessmentRequest, timeout: float = DEFAULT_TIMEOUT) -> env.AssessmentResponse:
        self.send(req)
        return self.await_response(req.correlation_id, timeout)

    # result side -------------------------------------------------------------

    def decrypt_logit(self, resp: env.AssessmentResponse) -> float:
        ct = ckks.deserialize_ct(resp.result_bytes, self.prctx)
        return float(ckks.decode(ckks.decrypt(ct, self.prctx, rng=self._draw_rng()))[0])

    def finalize(self, resp: env.AssessmentResponse, ground_truth: int | None = None):
        """(probability, decision, TimingRecord) for an ``ok`` response."""
        with self._lock:
            p = self._pending.pop(resp.correlation_id, None)
        if resp.status != "ok":
            raise SdkError(f"assessment failed: {resp.error_detail}")
        logit = self.decrypt_logit(resp)
        prob = sigmoid(logit)
        decision = decide(prob)
        t_end = time.perf_counter()
        if p is None:
            t_start = t_send = t_receive = t_end
        else:
            t_start, t_send, t_receive = p.t_start, p.t_send or p.t_start, p.t_receive or p.t_send
        rec = env.TimingRecord(resp.correlation_id, t_start, t_send, t_receive, t_end,
                               resp.t_receiver_ms, resp.t_server_ms, ground_truth, decision, prob)
        return prob, decision, rec

    def assess(self, x, ground_truth: int | None = None, timeout: float = DEFAULT_TIMEOUT):
        req, _ = self.prepare_request(x)
        resp = self.send_and_await(req, timeout)
        return self.finalize(resp, ground_truth)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
