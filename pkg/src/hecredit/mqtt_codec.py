"""MQTT 3.1.1 packet subset at QoS 0: encode, decode and incremental framing.

``decode`` is total: for any byte string it returns a packet with the number
of bytes consumed, returns ``None`` when more bytes are needed, or raises
:class:`ProtocolError`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MAX_REMAINING = (1 << 28) - 1
PROTOCOL_NAME = b"MQTT"
PROTOCOL_LEVEL = 4

CONNECT, CONNACK, PUBLISH, SUBSCRIBE, SUBACK, PINGREQ, PINGRESP, DISCONNECT = 1, 2, 3, 8, 9, 12, 13, 14


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class Connect:
    client_id: str
    keepalive: int = 60
    clean_session: bool = True


@dataclass(frozen=True)
class ConnAck:
    return_code: int = 0
    session_present: bool = False


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    topic_filters: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class SubAck:
    packet_id: int
    granted: tuple[int, ...]


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Connect | ConnAck | Subscribe | SubAck | Publish | PingReq | PingResp | Disconnect


def encode_remaining_length(n: int) -> bytes:
    if not 0 <= n <= MAX_REMAINING:
        raise ValueError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        byte, n = n & 0x7F, n >> 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _utf8(s: str) -> bytes:
    b = s.encode("utf-8")
    if len(b) > 0xFFFF:
        raise ValueError("string longer than 65535 bytes")
    return struct.pack(">H", len(b)) + b


def _check_topic(topic: str, wildcards_ok: bool):
    if not topic:
        raise ValueError("topic must be nonempty")
    if "\x00" in topic:
        raise ValueError("topic contains U+0000")
    if not wildcards_ok and ("+" in topic or "#" in topic):
        raise ValueError("publish topic must not contain wildcards")


def _frame(ptype: int, flags: int, body: bytes) -> bytes:
    return bytes([ptype << 4 | flags]) + encode_remaining_length(len(body)) + body


def encode(p: Packet) -> bytes:
    if isinstance(p, Publish):
        _check_topic(p.topic, False)
        return _frame(PUBLISH, 0, _utf8(p.topic) + bytes(p.payload))
    if isinstance(p, Connect):
        if not 0 <= p.keepalive <= 0xFFFF:
            raise ValueError("keepalive out of range")
        flags = 0x02 if p.clean_session else 0
        body = _utf8(PROTOCOL_NAME.decode()) + bytes([PROTOCOL_LEVEL, flags]) + struct.pack(">H", p.keepalive)
        return _frame(CONNECT, 0, body + _utf8(p.client_id))
    if isinstance(p, ConnAck):
        return _frame(CONNACK, 0, bytes([int(p.session_present), p.return_code]))
    if isinstance(p, Subscribe):
        if not p.topic_filters:
            raise ValueError("subscribe needs at least one topic filter")
        if not 1 <= p.packet_id <= 0xFFFF:
            raise ValueError("packet id out of range")
        body = struct.pack(">H", p.packet_id)
        for topic, qos in p.topic_filters:
            _check_topic(topic, True)
            if qos not in (0, 1, 2):
                raise ValueError("requested QoS must be 0, 1 or 2")
            body += _utf8(topic) + bytes([qos])
        return _frame(SUBSCRIBE, 0x02, body)
    if isinstance(p, SubAck):
        if not 1 <= p.packet_id <= 0xFFFF:
            raise ValueError("packet id out of range")
        if not p.granted or any(g not in (0, 1, 2, 0x80) for g in p.granted):
            raise ValueError("invalid granted QoS list")
        return _frame(SUBACK, 0, struct.pack(">H", p.packet_id) + bytes(p.granted))
    if isinstance(p, PingReq):
        return b"\xc0\x00"
    if isinstance(p, PingResp):
        return b"\xd0\x00"
    if isinstance(p, Disconnect):
        return b"\xe0\x00"
    raise TypeError(f"not an MQTT packet: {p!r}")


def _read_header(buf) -> tuple[int, int, int] | None:
    """(first byte, remaining length, header size) or None if incomplete."""
    if len(buf) < 2:
        return None
    value = 0
    for i in range(4):
        if 1 + i >= len(buf):
            return None
        byte = buf[1 + i]
        value |= (byte & 0x7F) << (7 * i)
        if not byte & 0x80:
            if i > 0 and byte == 0:
                raise ProtocolError("non-minimal remaining length")
            return buf[0], value, 2 + i
    raise ProtocolError("remaining length longer than 4 bytes")


class _Body:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n: int):
        if self.pos + n > len(self.data):
            raise ProtocolError("packet body truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        hi, lo = self.take(2)
        return hi << 8 | lo

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            s = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError("invalid UTF-8 string") from exc
        if "\x00" in s:
            raise ProtocolError("string contains U+0000")
        return s

    def rest(self) -> bytes:
        out = bytes(self.data[self.pos:])
        self.pos = len(self.data)
        return out

    def end(self):
        if self.pos != len(self.data):
            raise ProtocolError("trailing bytes in packet")


_FIXED_FLAGS = {CONNECT: 0, CONNACK: 0, SUBSCRIBE: 2, SUBACK: 0, PINGREQ: 0, PINGRESP: 0, DISCONNECT: 0}


def decode(buf, max_packet: int = MAX_REMAINING) -> tuple[Packet, int] | None:
    hdr = _read_header(buf)
    if hdr is None:
        # still validate the packet type so garbage fails fast
        if len(buf) >= 1:
            _check_type(buf[0])
        return None
    first, rl, hl = hdr
    ptype, flags = _check_type(first)
    if rl > max_packet:
        raise ProtocolError(f"packet of {rl} bytes exceeds limit {max_packet}")
    total = hl + rl
    if len(buf) < total:
        return None
    body = _Body(bytes(buf[hl:total]))
    return _parse(ptype, flags, body), total


def _check_type(first: int) -> tuple[int, int]:
    ptype, flags = first >> 4, first & 0x0F
    if ptype == PUBLISH:
        if flags & 0x06:
            raise ProtocolError("QoS > 0 is not supported")
        if flags & 0x09:
            raise ProtocolError("DUP and RETAIN are not supported")
        return ptype, flags
    if ptype not in _FIXED_FLAGS:
        raise ProtocolError(f"unsupported or reserved packet type {ptype}")
    if flags != _FIXED_FLAGS[ptype]:
        raise ProtocolError(f"bad fixed-header flags for packet type {ptype}")
    return ptype, flags


def _parse(ptype: int, flags: int, b: _Body) -> Packet:
    if ptype == PUBLISH:
        topic = b.string()
        if not topic or "+" in topic or "#" in topic:
            raise ProtocolError("invalid publish topic")
        return Publish(topic, b.rest())
    if ptype == CONNECT:
        if b.string() != "MQTT" or b.u8() != PROTOCOL_LEVEL:
            raise ProtocolError("unsupported protocol name or level")
        cflags = b.u8()
        if cflags & ~0x02:
            raise ProtocolError("only the clean-session connect flag is supported")
        keepalive = b.u16()
        client_id = b.string()
        b.end()
        return Connect(client_id, keepalive, bool(cflags & 0x02))
    if ptype == CONNACK:
        ack, code = b.u8(), b.u8()
        b.end()
        if ack & ~0x01 or code > 5:
            raise ProtocolError("malformed CONNACK")
        return ConnAck(code, bool(ack))
    if ptype == SUBSCRIBE:
        pid = b.u16()
        if pid == 0:
            raise ProtocolError("packet id must be nonzero")
        filters = []
        while b.pos < len(b.data):
            topic = b.string()
            qos = b.u8()
            if not topic or qos > 2:
                raise ProtocolError("invalid subscription")
            filters.append((topic, qos))
        if not filters:
            raise ProtocolError("SUBSCRIBE without topic filters")
        return Subscribe(pid, tuple(filters))
    if ptype == SUBACK:
        pid = b.u16()
        granted = tuple(b.rest())
        if pid == 0 or not granted or any(g not in (0, 1, 2, 0x80) for g in granted):
            raise ProtocolError("malformed SUBACK")
        return SubAck(pid, granted)
    b.end()
    return {PINGREQ: PingReq, PINGRESP: PingResp, DISCONNECT: Disconnect}[ptype]()


class StreamDecoder:
    """Accumulates bytes from a stream and yields whole packets."""

    def __init__(self, max_packet: int = MAX_REMAINING):
        self.buf = bytearray()
        self.max_packet = max_packet

    def feed(self, data: bytes) -> list[Packet]:
        self.buf += data
        out = []
        while True:
            got = decode(self.buf, self.max_packet)
            if got is None:
                return out
            pkt, n = got
            del self.buf[:n]
            out.append(pkt)

    def __len__(self):
        return len(self.buf)
