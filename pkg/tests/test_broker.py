import socket
import threading
import time
from collections import defaultdict

import pytest

from hecredit import mqtt_codec as mc
from hecredit.broker import BrokerConfig, BrokerThread
from hecredit.mqtt_client import MqttClient, MqttClientError


class Inbox:
    def __init__(self):
        self.items = []
        self.cv = threading.Condition()

    def __call__(self, topic, payload):
        with self.cv:
            self.items.append((topic, payload))
            self.cv.notify_all()

    def wait(self, n, timeout=10.0):
        with self.cv:
            self.cv.wait_for(lambda: len(self.items) >= n, timeout)
            return list(self.items)


def _wait_until(pred, timeout=5.0):
    end = time.monotonic() + timeout
    while time.monotonic() < end:
        if pred():
            return True
        time.sleep(0.01)
    return False


@pytest.fixture
def broker():
    with BrokerThread(BrokerConfig(port=0)) as bt:
        yield bt


def _client(bt, cid, inbox=None, **kw):
    c = MqttClient(cid, "127.0.0.1", bt.port, on_message=inbox, **kw)
    c.connect()
    return c


def test_minimal_relay(broker):
    inbox = Inbox()
    sub = _client(broker, "sub", inbox)
    sub.subscribe("a")
    pub = _client(broker, "pub")
    pub.publish("a", b"payload")
    assert inbox.wait(1) == [("a", b"payload")]
    sub.close()
    pub.close()


def test_publish_without_subscribers_is_dropped(broker):
    pub = _client(broker, "pub")
    pub.publish("nobody", b"x")
    assert _wait_until(lambda: broker.broker.stats["published"] == 1)
    assert broker.call(broker.broker.route, "nobody", b"y") == 0
    pub.close()


def test_route_counts_every_exact_subscriber(broker):
    a, b, c = Inbox(), Inbox(), Inbox()
    ca, cb, cc = _client(broker, "a", a), _client(broker, "b", b), _client(broker, "c", c)
    ca.subscribe("t")
    cb.subscribe("t")
    cc.subscribe("t/sub")
    assert broker.call(broker.broker.route, "t", b"same") == 2
    assert a.wait(1) == [("t", b"same")] and b.wait(1) == [("t", b"same")]
    time.sleep(0.1)
    assert c.items == []
    for x in (ca, cb, cc):
        x.close()


def test_wildcard_subscriptions_do_not_match(broker):
    inbox = Inbox()
    s = _client(broker, "s", inbox)
    s.subscribe("bank/#")
    p = _client(broker, "p")
    p.publish("bank/credit", b"x")
    time.sleep(0.2)
    assert inbox.items == []
    s.close()
    p.close()


def test_targeted_reply_delivery(broker):
    one, two = Inbox(), Inbox()
    s1 = _client(broker, "MS_1", one)
    s2 = _client(broker, "MS_2", two)
    s1.subscribe("bank/credit/response/MS_1")
    s2.subscribe("bank/credit/response/MS_2")
    rx = _client(broker, "rx")
    rx.publish("bank/credit/response/MS_1", b"for-one")
    rx.publish("bank/credit/response/MS_2", b"for-two")
    assert one.wait(1) == [("bank/credit/response/MS_1", b"for-one")]
    assert two.wait(1) == [("bank/credit/response/MS_2", b"for-two")]
    time.sleep(0.1)
    assert len(one.items) == len(two.items) == 1
    for c in (s1, s2, rx):
        c.close()


def test_five_publishers_twenty_messages_fifo(broker):
    inbox = Inbox()
    rx = _client(broker, "receiver", inbox)
    rx.subscribe("bank/credit/request")
    pubs = [_client(broker, f"MS_{i}") for i in range(5)]

    def send(i, c):
        for j in range(20):
            c.publish("bank/credit/request", f"{i}:{j}".encode() + bytes(2000))

    threads = [threading.Thread(target=send, args=(i, c)) for i, c in enumerate(pubs)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    got = inbox.wait(100)
    assert len(got) == 100
    per = defaultdict(list)
    for _, payload in got:
        i, j = payload.split(b"\x00", 1)[0].decode().split(":")
        per[int(i)].append(int(j))
    assert all(per[i] == list(range(20)) for i in range(5))
    for c in pubs + [rx]:
        c.close()


def test_slow_consumer_is_dropped_without_hurting_others():
    with BrokerThread(BrokerConfig(port=0, buffer_limit=2 * 1024 * 1024)) as bt:
        # a subscriber that never reads its socket
        slow = socket.create_connection(("127.0.0.1", bt.port))
        slow.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 4096)
        slow.sendall(mc.encode(mc.Connect("slow", 0)))
        slow.sendall(mc.encode(mc.Subscribe(1, (("t", 0),))))
        fast = Inbox()
        fc = _client(bt, "fast", fast)
        fc.subscribe("t")
        assert _wait_until(lambda: len(bt.broker.topics.get("t", ())) == 2)
        pub = _client(bt, "pub")
        for _ in range(400):
            pub.publish("t", bytes(32 * 1024))
        assert _wait_until(lambda: "slow" not in bt.broker.sessions, 10)
        assert bt.broker.stats["dropped_sessions"] == 1
        assert len(fast.wait(400, 20)) == 400
        pub.publish("t", b"still-alive")
        assert fast.wait(401)[-1] == ("t", b"still-alive")
        slow.close()
        fc.close()
        pub.close()


def test_duplicate_client_id_replaces_older_session(broker):
    old_inbox, new_inbox = Inbox(), Inbox()
    gone = threading.Event()
    old = MqttClient("dup", "127.0.0.1", broker.port, on_message=old_inbox, on_disconnect=gone.set)
    old.connect()
    old.subscribe("x")
    new = _client(broker, "dup", new_inbox)
    new.subscribe("x")
    assert gone.wait(5)
    pub = _client(broker, "p")
    pub.publish("x", b"1")
    assert new_inbox.wait(1) == [("x", b"1")]
    assert old_inbox.items == []
    for c in (new, pub):
        c.close()


def test_protocol_error_closes_only_that_connection(broker):
    inbox = Inbox()
    good = _client(broker, "good", inbox)
    good.subscribe("t")
    bad = socket.create_connection(("127.0.0.1", broker.port))
    bad.settimeout(5)
    bad.sendall(mc.encode(mc.Connect("bad")))
    assert bad.recv(4) == mc.encode(mc.ConnAck())
    bad.sendall(b"\x32\x05\x00\x01tab")  # QoS 1 publish
    assert bad.recv(100) == b""
    assert _wait_until(lambda: "bad" not in broker.broker.sessions)
    bad.close()
    pub = _client(broker, "pub")
    pub.publish("t", b"ok")
    assert inbox.wait(1) == [("t", b"ok")]
    good.close()
    pub.close()


def test_first_packet_must_be_connect(broker):
    s = socket.create_connection(("127.0.0.1", broker.port))
    s.sendall(mc.encode(mc.PingReq()))
    s.settimeout(5)
    assert s.recv(10) == b""
    s.close()


def test_keepalive_timeout_closes_silent_client(broker):
    s = socket.create_connection(("127.0.0.1", broker.port))
    s.sendall(mc.encode(mc.Connect("sleepy", 1)))
    s.settimeout(5)
    t0 = time.monotonic()
    data = b""
    while True:
        chunk = s.recv(100)
        if not chunk:
            break
        data += chunk
    elapsed = time.monotonic() - t0
    assert data == mc.encode(mc.ConnAck())
    assert 1.2 < elapsed < 3.0
    assert _wait_until(lambda: "sleepy" not in broker.broker.sessions)
    s.close()


def test_ping_keeps_session_alive(broker):
    c = _client(broker, "pinger", keepalive=1)
    time.sleep(2.5)
    assert c.connected and "pinger" in broker.broker.sessions
    c.close()


def test_disconnect_cleans_subscriptions(broker):
    c = _client(broker, "c")
    c.subscribe("t")
    assert "t" in broker.broker.topics
    c.close()
    assert _wait_until(lambda: "t" not in broker.broker.topics and not broker.broker.sessions)


def test_observer_sees_raw_bytes():
    seen = []
    with BrokerThread(BrokerConfig(port=0), observer=lambda cid, d, b: seen.append((d, b))) as bt:
        c = _client(bt, "o")
        c.subscribe("t")
        c.publish("t", b"observed")
        time.sleep(0.3)
        c.close()
    inbound = b"".join(b for d, b in seen if d == "in")
    outbound = b"".join(b for d, b in seen if d == "out")
    assert b"observed" in inbound and b"observed" in outbound


def test_connect_to_closed_port_fails():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    with pytest.raises((MqttClientError, OSError)):
        MqttClient("x", "127.0.0.1", port).connect(timeout=2)
