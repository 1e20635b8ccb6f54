"""JSON + Base64 messages exchanged between senders, receiver and CAM."""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import asdict, dataclass

VERSION = 1
REQUEST_TOPIC = "bank/credit/request"
RESPONSE_PREFIX = "bank/credit/response/"


class EnvelopeError(ValueError):
    """``code`` is a short machine-readable reason, e.g. ``missing_field``."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


def reply_topic_for(sender_id: str) -> str:
    return RESPONSE_PREFIX + sender_id


def b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64decode(text, field: str = "") -> bytes:
    if not isinstance(text, str):
        raise EnvelopeError("bad_base64", field)
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise EnvelopeError("bad_base64", field) from exc


@dataclass(frozen=True)
class AssessmentRequest:
    version: int
    sender_id: str
    correlation_id: str
    reply_topic: str
    context_b64: str
    ciphertext_b64: str
    schema_hash: str = ""

    @property
    def context_bytes(self) -> bytes:
        return b64decode(self.context_b64, "context_b64")

    @property
    def ciphertext_bytes(self) -> bytes:
        return b64decode(self.ciphertext_b64, "ciphertext_b64")


@dataclass(frozen=True)
class AssessmentResponse:
    version: int
    correlation_id: str
    status: str
    error_detail: str | None = None
    result_b64: str | None = None
    t_receiver_ms: float = 0.0
    t_server_ms: float = 0.0

    def __post_init__(self):
        if self.status not in ("ok", "error"):
            raise EnvelopeError("bad_status", str(self.status))
        if self.status == "ok" and self.result_b64 is None:
            raise EnvelopeError("missing_field", "result_b64")
        if self.status == "error" and not self.error_detail:
            raise EnvelopeError("missing_field", "error_detail")

    @property
    def result_bytes(self) -> bytes:
        return b64decode(self.result_b64, "result_b64")


@dataclass(frozen=True)
class TimingRecord:
    correlation_id: str
    t_start: float
    t_send: float
    t_receive: float
    t_end: float
    t_receiver_ms: float
    t_server_ms: float
    ground_truth: int | None
    predicted: int
    probability: float

    @property
    def monotone(self) -> bool:
        return (self.t_start <= self.t_send <= self.t_receive <= self.t_end
                and self.t_server_ms <= self.t_receiver_ms)

    @property
    def round_trip_ms(self) -> float:
        return (self.t_end - self.t_start) * 1e3

    @property
    def start_send_ms(self) -> float:
        return (self.t_send - self.t_start) * 1e3

    @property
    def send_receive_ms(self) -> float:
        return (self.t_receive - self.t_send) * 1e3

    @property
    def receive_end_ms(self) -> float:
        return (self.t_end - self.t_receive) * 1e3


def _load(data) -> dict:
    try:
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EnvelopeError("bad_json", str(exc)) from exc
    if not isinstance(doc, dict):
        raise EnvelopeError("bad_json", "top level must be an object")
    v = doc.get("version")
    if v is None:
        raise EnvelopeError("missing_field", "version")
    if v != VERSION or isinstance(v, bool):
        raise EnvelopeError("unsupported_version", repr(v))
    return doc


def _str(doc: dict, key: str, nonempty: bool = True) -> str:
    if key not in doc or doc[key] is None:
        raise EnvelopeError("missing_field", key)
    v = doc[key]
    if not isinstance(v, str) or (nonempty and not v):
        raise EnvelopeError("bad_field", key)
    return v


def _ms(doc: dict, key: str) -> float:
    v = doc.get(key, 0.0)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
        raise EnvelopeError("bad_field", key)
    return float(v)


def encode_request(req: AssessmentRequest) -> bytes:
    return json.dumps(asdict(req), separators=(",", ":")).encode()


def parse_reply_topic(data) -> str | None:
    """Best-effort reply topic from a possibly malformed request."""
    try:
        doc = json.loads(data)
        topic = doc.get("reply_topic") if isinstance(doc, dict) else None
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if isinstance(topic, str) and topic.startswith(RESPONSE_PREFIX) and len(topic) > len(RESPONSE_PREFIX):
        if "+" not in topic and "#" not in topic:
            return topic
    return None


def decode_request(data, require_sender: bool = True) -> AssessmentRequest:
    """Parse a request; the CAM hop passes ``require_sender=False``."""
    doc = _load(data)
    cid = _str(doc, "correlation_id")
    if require_sender:
        sender = _str(doc, "sender_id")
        topic = _str(doc, "reply_topic")
        if topic != reply_topic_for(sender):
            raise EnvelopeError("bad_reply_topic", topic)
    else:
        sender = doc.get("sender_id") if isinstance(doc.get("sender_id"), str) else ""
        topic = doc.get("reply_topic") if isinstance(doc.get("reply_topic"), str) else ""
    ctx, ct = _str(doc, "context_b64"), _str(doc, "ciphertext_b64")
    for key, val in (("context_b64", ctx), ("ciphertext_b64", ct)):
        b64decode(val, key)
    schema = doc.get("schema_hash", "")
    if not isinstance(schema, str):
        raise EnvelopeError("bad_field", "schema_hash")
    return AssessmentRequest(VERSION, sender, cid, topic, ctx, ct, schema)


def encode_response(resp: AssessmentResponse) -> bytes:
    doc = asdict(resp)
    for k in ("error_detail", "result_b64"):
        if doc[k] is None:
            del doc[k]
    return json.dumps(doc, separators=(",", ":")).encode()


def decode_response(data) -> AssessmentResponse:
    doc = _load(data)
    cid = _str(doc, "correlation_id")
    status = _str(doc, "status")
    if status not in ("ok", "error"):
        raise EnvelopeError("bad_field", "status")
    detail = doc.get("error_detail")
    result = doc.get("result_b64")
    if detail is not None and not isinstance(detail, str):
        raise EnvelopeError("bad_field", "error_detail")
    if status == "ok":
        b64decode(_str(doc, "result_b64"), "result_b64")
    elif not detail:
        raise EnvelopeError("missing_field", "error_detail")
    return AssessmentResponse(VERSION, cid, status, detail, result,
                              _ms(doc, "t_receiver_ms"), _ms(doc, "t_server_ms"))


def error_response(correlation_id: str, detail: str, t_receiver_ms: float = 0.0,
                   t_server_ms: float = 0.0) -> AssessmentResponse:
    return AssessmentResponse(VERSION, correlation_id or "unknown", "error", detail, None,
                              t_receiver_ms, t_server_ms)
