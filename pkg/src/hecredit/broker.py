"""Exact-topic MQTT relay (QoS 0) on asyncio.

Each session owns a bounded outbound queue drained by its own writer task, so
a slow subscriber can only hurt itself: once its queued bytes exceed the
limit the session is dropped.
"""

from __future__ import annotations

import asyncio
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable

from . import mqtt_codec as mc

log = logging.getLogger(__name__)

DEFAULT_PORT = 1883
DEFAULT_BUFFER = 64 * 1024 * 1024

# observer(client_id, direction, raw bytes); direction is "in" or "out"
Observer = Callable[[str, str, bytes], None]


@dataclass(frozen=True)
class BrokerConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    max_packet: int = mc.MAX_REMAINING
    buffer_limit: int = DEFAULT_BUFFER
    connect_timeout: float = 10.0


@dataclass(eq=False)
class Session:
    client_id: str
    writer: asyncio.StreamWriter
    buffer_limit: int
    subscriptions: set[str] = field(default_factory=set)
    queued: int = 0
    closed: bool = False

    def __post_init__(self):
        self.queue: asyncio.Queue[bytes | None] = asyncio.Queue()

    def enqueue(self, frame: bytes) -> bool:
        if self.closed:
            return False
        if self.queued + len(frame) > self.buffer_limit:
            return False
        self.queued += len(frame)
        self.queue.put_nowait(frame)
        return True


class Broker:
    def __init__(self, config: BrokerConfig = BrokerConfig(), observer: Observer | None = None):
        self.config = config
        self.observer = observer
        self.sessions: dict[str, Session] = {}
        self.topics: dict[str, set[Session]] = {}
        self._server: asyncio.base_events.Server | None = None
        self.port: int | None = None
        self.stats = {"published": 0, "delivered": 0, "dropped_sessions": 0}
        self._tasks: set[asyncio.Task] = set()

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._handle, self.config.host, self.config.port,
                                                  limit=1 << 20)
        self.port = self._server.sockets[0].getsockname()[1]
        log.info("event=listen host=%s port=%d", self.config.host, self.port)
        return self.port

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
        for s in list(self.sessions.values()):
            self._close_session(s, "shutdown")
        for t in list(self._tasks):
            t.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)
        if self._server is not None:
            await self._server.wait_closed()

    # routing -----------------------------------------------------------------

    def route(self, topic: str, payload: bytes) -> int:
        """Queue ``payload`` to every session subscribed to exactly ``topic``."""
        frame = mc.encode(mc.Publish(topic, payload))
        count = 0
        # copy so that overflow drops can mutate the table while we iterate
        for s in list(self.topics.get(topic, ())):
            if s.enqueue(frame):
                count += 1
            elif not s.closed:
                log.warning("event=drop reason=buffer_overflow client_id=%s queued=%d", s.client_id, s.queued)
                self.stats["dropped_sessions"] += 1
                self._close_session(s, "overflow")
        self.stats["published"] += 1
        self.stats["delivered"] += count
        return count

    def _subscribe(self, s: Session, topic: str) -> None:
        s.subscriptions.add(topic)
        self.topics.setdefault(topic, set()).add(s)

    def _close_session(self, s: Session, reason: str, flush: bool = False) -> None:
        """Detach ``s``; with ``flush`` the writer sends what is queued before closing."""
        if s.closed:
            return
        s.closed = True
        for t in s.subscriptions:
            subs = self.topics.get(t)
            if subs is not None:
                subs.discard(s)
                if not subs:
                    del self.topics[t]
        if self.sessions.get(s.client_id) is s:
            del self.sessions[s.client_id]
        s.queue.put_nowait(None)
        if not flush:
            s.writer.close()
        log.info("event=disconnect client_id=%s reason=%s", s.client_id, reason)

    # per-connection ------------------------------------------------------------

    async def _writer_task(self, s: Session) -> None:
        try:
            while True:
                frame = await s.queue.get()
                if frame is None:
                    return
                s.queued -= len(frame)
                if self.observer is not None:
                    self.observer(s.client_id, "out", frame)
                s.writer.write(frame)
                await s.writer.drain()
        except (ConnectionError, OSError):
            self._close_session(s, "write_error")
        finally:
            s.writer.close()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        task = asyncio.current_task()
        self._tasks.add(task)
        try:
            await self._connection(reader, writer)
        finally:
            self._tasks.discard(task)

    async def _connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        dec = mc.StreamDecoder(self.config.max_packet)
        session: Session | None = None
        writer_task = None
        timeout = self.config.connect_timeout
        pending: list = []
        try:
            while True:
                if not pending:
                    chunk = await asyncio.wait_for(reader.read(1 << 20), timeout)
                    if not chunk:
                        break
                    if self.observer is not None:
                        self.observer(session.client_id if session else "", "in", chunk)
                    pending = dec.feed(chunk)
                    continue
                pkt = pending.pop(0)
                if session is None:
                    if not isinstance(pkt, mc.Connect):
                        raise mc.ProtocolError("first packet must be CONNECT")
                    session = self._register(pkt, writer)
                    writer_task = asyncio.create_task(self._writer_task(session))
                    self._tasks.add(writer_task)
                    writer_task.add_done_callback(self._tasks.discard)
                    session.enqueue(mc.encode(mc.ConnAck(0)))
                    timeout = 1.5 * pkt.keepalive if pkt.keepalive else None
                    continue
                if session.closed:
                    break
                if isinstance(pkt, mc.Publish):
                    n = self.route(pkt.topic, pkt.payload)
                    log.debug("event=publish client_id=%s topic=%s bytes=%d delivered=%d",
                              session.client_id, pkt.topic, len(pkt.payload), n)
                elif isinstance(pkt, mc.Subscribe):
                    for topic, _qos in pkt.topic_filters:
                        self._subscribe(session, topic)
                        log.info("event=subscribe client_id=%s topic=%s", session.client_id, topic)
                    # granted QoS 0 for every filter; wildcard filters simply never match
                    session.enqueue(mc.encode(mc.SubAck(pkt.packet_id, (0,) * len(pkt.topic_filters))))
                elif isinstance(pkt, mc.PingReq):
                    session.enqueue(mc.encode(mc.PingResp()))
                elif isinstance(pkt, mc.Disconnect):
                    break
                else:
                    raise mc.ProtocolError(f"unexpected {type(pkt).__name__} from client")
        except asyncio.TimeoutError:
            log.info("event=timeout peer=%s client_id=%s", peer, session.client_id if session else "")
        except mc.ProtocolError as exc:
            log.warning("event=protocol_error peer=%s error=%s", peer, exc)
        except (ConnectionError, OSError):
            pass
        finally:
            if session is not None:
                self._close_session(session, "closed", flush=True)
                if writer_task is not None:
                    try:
                        await asyncio.wait_for(writer_task, 5)
                    except Exception:
                        writer_task.cancel()
            else:
                writer.close()

    def _register(self, pkt: mc.Connect, writer) -> Session:
        old = self.sessions.get(pkt.client_id)
        if old is not None:
            self._close_session(old, "taken_over")
        s = Session(pkt.client_id, writer, self.config.buffer_limit)
        self.sessions[pkt.client_id] = s
        log.info("event=connect client_id=%s keepalive=%d", pkt.client_id, pkt.keepalive)
        return s


class BrokerThread:
    """Runs a :class:`Broker` on its own event loop in a daemon thread."""

    def __init__(self, config: BrokerConfig = BrokerConfig(port=0), observer: Observer | None = None):
        self.broker = Broker(config, observer)
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._run, name="broker", daemon=True)
        self._ready = threading.Event()
        self._error: BaseException | None = None

    def _run(self):
        asyncio.set_event_loop(self._loop)
        try:
            self._loop.run_until_complete(self.broker.start())
        except BaseException as exc:
            self._error = exc
            self._ready.set()
            return
        self._ready.set()
        self._loop.run_forever()
        self._loop.close()

    @property
    def port(self) -> int:
        return self.broker.port

    def start(self) -> "BrokerThread":
        self._thread.start()
        self._ready.wait()
        if self._error is not None:
            raise self._error
        return self

    def call(self, fn, *args):
        """Run ``fn(*args)`` on the broker loop and return its result."""
        async def wrap():
            return fn(*args)
        return asyncio.run_coroutine_threadsafe(wrap(), self._loop).result()

    def stop(self) -> None:
        if self._thread.is_alive():
            fut = asyncio.run_coroutine_threadsafe(self.broker.stop(), self._loop)
            try:
                fut.result(timeout=10)
            finally:
                self._loop.call_soon_threadsafe(self._loop.stop)
                self._thread.join(timeout=10)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(config: BrokerConfig) -> None:
    asyncio.run(Broker(config).serve_forever())
