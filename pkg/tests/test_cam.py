import http.client
import json
import socket
from urllib.parse import urlsplit

import numpy as np
import pytest

from hecredit import cam, ckks
from hecredit import envelope as env
from hecredit.model import logit_plain
from hecredit.sdk import SdkSession


@pytest.fixture(scope="module")
def server(model):
    with cam.CamThread(model) as t:
        yield t


@pytest.fixture(scope="module")
def session(model):
    return SdkSession.new(ckks.TABLE1_PARAMS, "MS_cam", model, seed=11)


def _raw(server, method, path, body=None, headers=None):
    u = urlsplit(server.url)
    conn = http.client.HTTPConnection(u.hostname, u.port, timeout=30)
    conn.request(method, path, body=body, headers=headers or {})
    r = conn.getresponse()
    out = r.status, r.read(), dict(r.getheaders())
    conn.close()
    return out


def test_healthz(server):
    status, body, _ = _raw(server, "GET", "/healthz")
    assert status == 200 and body == b"ok"


def test_get_assess_not_allowed(server):
    status, _, headers = _raw(server, "GET", "/assess")
    assert status == 405 and headers["Allow"] == "POST"


def test_unknown_path(server):
    assert _raw(server, "POST", "/nope", b"{}")[0] == 404


def test_bad_json_is_400(server):
    status, body = cam.http_post(server.url, b"not json")
    assert status == 400
    resp = env.decode_response(body)
    assert resp.status == "error" and resp.error_detail.startswith("bad_json")


def test_oversized_body_is_413(server):
    status, body, _ = _raw(server, "POST", "/assess", b"",
                           {"Content-Length": str(cam.DEFAULT_MAX_BODY + 1)})
    assert status == 413
    assert env.decode_response(body).error_detail.startswith("too_large")


def test_missing_length_is_411(server):
    u = urlsplit(server.url)
    with socket.create_connection((u.hostname, u.port), timeout=10) as s:
        s.sendall(b"POST /assess HTTP/1.1\r\nHost: x\r\nTransfer-Encoding: chunked\r\n\r\n0\r\n\r\n")
        assert s.recv(100).startswith(b"HTTP/1.1 411")


def test_config_requires_large_bodies():
    with pytest.raises(ValueError):
        cam.CamConfig(max_body=1024)


def test_size_echo_10mb(server):
    status, body = cam.http_post(server.url.replace("/assess", "/_size"), bytes(10_000_000))
    assert status == 200 and json.loads(body) == {"size": 10_000_000}


def test_http_post_closed_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    with pytest.raises(cam.HttpError):
        cam.http_post(f"http://127.0.0.1:{port}/assess", b"{}", timeout=2)


def test_assess_ok_and_stateless(server, session, model, synthetic):
    x = synthetic[2][0]
    req, _ = session.prepare_request(x)
    payload = env.encode_request(req)
    logits = []
    for _ in range(2):
        status, body = cam.http_post(server.url, payload)
        assert status == 200
        resp = env.decode_response(body)
        assert resp.status == "ok" and resp.correlation_id == req.correlation_id
        assert resp.t_server_ms > 0
        logits.append(session.decrypt_logit(resp))
    assert abs(logits[0] - logits[1]) < 2e-2
    assert abs(logits[0] - logit_plain(x, model)) < 1e-2


def test_missing_galois_key_is_500(server, model, synthetic):
    limited = SdkSession.new(ckks.SecurityParams(rotation_steps=(1, 2)), "MS_lim", model, seed=2)
    req, _ = limited.prepare_request(synthetic[2][0])
    status, body = cam.http_post(server.url, env.encode_request(req))
    assert status == 500
    resp = env.decode_response(body)
    assert resp.error_detail.startswith("evaluation_failed") and resp.correlation_id == req.correlation_id


def test_schema_mismatch_is_400(server, session, synthetic):
    req, _ = session.prepare_request(synthetic[2][0])
    doc = json.loads(env.encode_request(req))
    doc["schema_hash"] = "0" * 16
    status, body = cam.http_post(server.url, json.dumps(doc).encode())
    assert status == 400 and env.decode_response(body).error_detail.startswith("schema_mismatch")


def test_corrupt_ciphertext_is_400(server, session, synthetic):
    req, _ = session.prepare_request(synthetic[2][0])
    doc = json.loads(env.encode_request(req))
    doc["ciphertext_b64"] = env.b64encode(b"HEV1garbage")
    status, body = cam.http_post(server.url, json.dumps(doc).encode())
    assert status == 400 and env.decode_response(body).error_detail.startswith("bad_payload")


def test_assess_function_direct(model, session, synthetic):
    x = synthetic[2][1]
    req, _ = session.prepare_request(x)
    result, t_server = cam.assess(req, model)
    assert t_server > 0
    ct = ckks.deserialize_ct(result, session.prctx)
    got = ckks.decode(ckks.decrypt(ct, session.prctx, rng=np.random.default_rng(0)))[0]
    assert abs(got - logit_plain(x, model)) < 1e-2
