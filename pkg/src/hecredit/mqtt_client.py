"""Small blocking MQTT 3.1.1 client (QoS 0) with a background reader thread."""

from __future__ import annotations

import itertools
import logging
import socket
import threading
from typing import Callable

from . import mqtt_codec as mc

log = logging.getLogger(__name__)

MessageHandler = Callable[[str, bytes], None]


class MqttClientError(ConnectionError):
    pass


def parse_address(addr: str, default_port: int = 1883) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host:
        return addr, default_port
    return host, int(port)


class MqttClient:
    def __init__(self, client_id: str, host: str = "127.0.0.1", port: int = 1883, *,
                 keepalive: int = 60, on_message: MessageHandler | None = None,
                 on_disconnect: Callable[[], None] | None = None, max_packet: int = mc.MAX_REMAINING):
        self.client_id = client_id
        self.host, self.port = host, port
        self.keepalive = keepalive
        self.on_message = on_message
        self.on_disconnect = on_disconnect
        self.max_packet = max_packet
        self._sock: socket.socket | None = None
        self._send_lock = threading.Lock()
        self._ids = itertools.count(1)
        self._suback: dict[int, threading.Event] = {}
        self._closed = threading.Event()
        self._reader: threading.Thread | None = None
        self._pinger: threading.Thread | None = None

    @property
    def connected(self) -> bool:
        return self._sock is not None and not self._closed.is_set()

    def connect(self, timeout: float = 10.0) -> None:
        sock = socket.create_connection((self.host, self.port), timeout=timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.sendall(mc.encode(mc.Connect(self.client_id, self.keepalive)))
        dec = mc.StreamDecoder(self.max_packet)
        pkts: list = []
        while not pkts:
            chunk = sock.recv(4096)
            if not chunk:
                sock.close()
                raise MqttClientError("broker closed the connection during CONNECT")
            pkts = dec.feed(chunk)
        ack = pkts[0]
        if not isinstance(ack, mc.ConnAck) or ack.return_code != 0:
            sock.close()
            raise MqttClientError(f"connection refused: {ack!r}")
        sock.settimeout(None)
        self._sock = sock
        self._reader = threading.Thread(target=self._read_loop, args=(dec, pkts[1:]),
                                        name=f"mqtt-read-{self.client_id}", daemon=True)
        self._reader.start()
        if self.keepalive:
            self._pinger = threading.Thread(target=self._ping_loop, name=f"mqtt-ping-{self.client_id}",
                                            daemon=True)
            self._pinger.start()

    def _send(self, data: bytes) -> None:
        if not self.connected:
            raise MqttClientError("not connected")
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                self._shutdown()
                raise MqttClientError(str(exc)) from exc

    def subscribe(self, topic: str, timeout: float = 10.0) -> None:
        pid = next(self._ids) % 0xFFFF + 1
        ev = threading.Event()
        self._suback[pid] = ev
        self._send(mc.encode(mc.Subscribe(pid, ((topic, 0),))))
        if not ev.wait(timeout):
            self._suback.pop(pid, None)
            raise MqttClientError(f"no SUBACK for {topic!r}")

    def publish(self, topic: str, payload: bytes) -> int:
        """Send a PUBLISH; returns the payload size in bytes."""
        self._send(mc.encode(mc.Publish(topic, payload)))
        return len(payload)

    def _read_loop(self, dec: mc.StreamDecoder, backlog: list) -> None:
        try:
            for pkt in backlog:
                self._dispatch(pkt)
            while not self._closed.is_set():
                chunk = self._sock.recv(1 << 20)
                if not chunk:
                    break
                for pkt in dec.feed(chunk):
                    self._dispatch(pkt)
        except (OSError, mc.ProtocolError) as exc:
            if not self._closed.is_set():
                log.warning("event=client_read_error client_id=%s error=%s", self.client_id, exc)
        finally:
            self._shutdown()

    def _dispatch(self, pkt) -> None:
        if isinstance(pkt, mc.Publish):
            if self.on_message is not None:
                try:
                    self.on_message(pkt.topic, pkt.payload)
                except Exception:
                    log.exception("event=handler_error client_id=%s topic=%s", self.client_id, pkt.topic)
        elif isinstance(pkt, mc.SubAck):
            ev = self._suback.pop(pkt.packet_id, None)
            if ev is not None:
                ev.set()

    def _ping_loop(self) -> None:
        interval = max(self.keepalive / 2, 0.05)
        while not self._closed.wait(interval):
            try:
                self._send(mc.encode(mc.PingReq()))
            except MqttClientError:
                return

    def _shutdown(self) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
        if self.on_disconnect is not None:
            self.on_disconnect()

    def close(self) -> None:
        if self.connected:
            try:
                self._send(mc.encode(mc.Disconnect()))
            except MqttClientError:
                pass
        self._shutdown()
        if self._reader is not None and self._reader is not threading.current_thread():
            self._reader.join(timeout=5)

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, *exc):
        self.close()
