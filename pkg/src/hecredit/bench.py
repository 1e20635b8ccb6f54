"""Latency harness: concurrent senders through broker, receiver and CAM.

Every service runs in-process on loopback unless an external broker address
or CAM URL is given.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field

import numpy as np

from . import ckks, data
from .broker import BrokerConfig, BrokerThread
from .cam import CamThread
from .envelope import TimingRecord
from .model import ModelBundle, TrainConfig, accuracy, decide, predict_plain, train
from .mqtt_client import parse_address
from .receiver import Receiver, ReceiverConfig
from .sdk import SdkSession

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    mode: str  # receiver mode: local_cam or remote_cam
    params: ckks.SecurityParams
    label: str


SCENARIOS = {
    "1": ScenarioSpec("1", "local_cam", ckks.TABLE1_PARAMS, "Scenario 1 - broker with client, no HTTP server"),
    "2": ScenarioSpec("2", "remote_cam", ckks.TABLE1_PARAMS, "Scenario 2 - broker with client, HTTP server"),
    "3": ScenarioSpec("3", "local_cam", ckks.TABLE1_PARAMS, "Scenario 3 - remote broker, no HTTP server"),
    "4": ScenarioSpec("4", "remote_cam", ckks.TABLE1_PARAMS, "Scenario 4 - remote broker, HTTP server"),
    "highsec": ScenarioSpec("highsec", "remote_cam", ckks.HIGH_SECURITY_PARAMS,
                            "High security - scenario 2 topology, N=8192"),
}


@dataclass(frozen=True)
class BenchConfig:
    n_senders: int = 5
    n_requests: int = 20
    seed: int = 0
    broker: str | None = None  # host:port of an external broker
    cam_url: str | None = None  # external CAM endpoint
    timeout: float = 60.0
    broker_buffer: int = 1 << 30

    def __post_init__(self):
        if self.n_senders < 1 or self.n_requests < 1:
            raise ValueError("need at least one sender and one request")


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    records: list[TimingRecord] = field(default_factory=list)
    payload_sizes: list[int] = field(default_factory=list)
    plain_decisions: list[int] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    expected: int = 0
    wall_s: float = 0.0

    @property
    def lost(self) -> int:
        return self.expected - len(self.records)

    @property
    def ok(self) -> bool:
        return self.lost == 0 and all(r.monotone for r in self.records)

    def mean(self, attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in self.records])) if self.records else float("nan")

    @property
    def accuracy(self) -> float:
        recs = [r for r in self.records if r.ground_truth is not None]
        return float(np.mean([r.predicted == r.ground_truth for r in recs])) if recs else float("nan")

    @property
    def plain_accuracy(self) -> float:
        truth = [r.ground_truth for r in self.records]
        if not truth or any(t is None for t in truth):
            return float("nan")
        return float(np.mean(np.array(self.plain_decisions) == np.array(truth)))

    @property
    def payload_mb(self) -> float:
        return float(np.mean(self.payload_sizes)) / 1e6 if self.payload_sizes else float("nan")

    def row(self) -> dict:
        return {
            "Scenario": self.spec.id,
            "Round-trip": self.mean("round_trip_ms"),
            "Start-Send": self.mean("start_send_ms"),
            "Send-Receive": self.mean("send_receive_ms"),
            "Receive-End": self.mean("receive_end_ms"),
            "Message-Receiver": self.mean("t_receiver_ms"),
            "Server Application": self.mean("t_server_ms"),
            "Prediction": 100 * self.accuracy,
            "Payload": self.payload_mb,
        }


COLUMNS = ("Scenario", "Round-trip", "Start-Send", "Send-Receive", "Receive-End",
           "Message-Receiver", "Server Application", "Prediction", "Payload")
_UNITS = {"Prediction": "%", "Payload": "MB", "Scenario": ""}


def _one(session: SdkSession, x, gt: int, timeout: float):
    req, _ = session.prepare_request(x)
    size = session.send(req)
    resp = session.await_response(req.correlation_id, timeout)
    if resp.correlation_id != req.correlation_id:
        raise RuntimeError("correlation id mismatch")
    _, _, rec = session.finalize(resp, gt)
    return rec, size


def run_scenario(spec: ScenarioSpec, model: ModelBundle, X, y, cfg: BenchConfig = BenchConfig()) -> ScenarioResult:
    """Run ``n_senders`` sessions each firing ``n_requests`` concurrent requests.

    Rows are drawn at random from (X, y) with the configured seed.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    rng = np.random.default_rng(cfg.seed)
    picks = rng.integers(len(X), size=(cfg.n_senders, cfg.n_requests))
    result = ScenarioResult(spec, expected=cfg.n_senders * cfg.n_requests)
    with ExitStack() as stack:
        if cfg.broker:
            host, port = parse_address(cfg.broker)
        else:
            bt = stack.enter_context(BrokerThread(BrokerConfig(port=0, buffer_limit=cfg.broker_buffer)))
            host, port = "127.0.0.1", bt.port
        cam_url = None
        if spec.mode == "remote_cam":
            cam_url = cfg.cam_url or stack.enter_context(CamThread(model)).url
        rx_cfg = ReceiverConfig(host, port, mode=spec.mode, cam_url=cam_url, http_timeout=cfg.timeout)
        stack.enter_context(Receiver(rx_cfg, model))
        sessions = []
        for i in range(cfg.n_senders):
            s = SdkSession.new(spec.params, f"MS_{i + 1}", model, seed=cfg.seed * 1000 + i)
            s.connect(host, port)
            stack.callback(s.close)
            sessions.append(s)
        jobs = [(sessions[i], X[picks[i, j]], int(y[picks[i, j]]))
                for j in range(cfg.n_requests) for i in range(cfg.n_senders)]
        t0 = time.perf_counter()
        with ThreadPoolExecutor(len(jobs)) as pool:
            futures = [pool.submit(_one, s, x, gt, cfg.timeout) for s, x, gt in jobs]
            for (_, x, _), fut in zip(jobs, futures):
                try:
                    rec, size = fut.result()
                except Exception as exc:
                    result.errors.append(f"{type(exc).__name__}: {exc}")
                    continue
                result.records.append(rec)
                result.payload_sizes.append(size)
                result.plain_decisions.append(decide(predict_plain(x, model)))
        result.wall_s = time.perf_counter() - t0
    log.info("event=scenario id=%s responses=%d/%d wall_s=%.1f", spec.id, len(result.records),
             result.expected, result.wall_s)
    return result


def _fmt(col: str, v) -> str:
    if col == "Scenario":
        return str(v)
    if col == "Payload":
        return f"{v:.2f}"
    return f"{v:.1f}"


def _header(col: str) -> str:
    unit = _UNITS.get(col, "ms")
    return f"{col} ({unit})" if unit else col


def report(results, fmt: str = "markdown") -> str:
    rows = [r.row() for r in results]
    if not rows:
        raise ValueError("nothing to report")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow([_header(c) for c in COLUMNS])
        for row in rows:
            w.writerow([row[c] if c == "Scenario" else repr(float(row[c])) for c in COLUMNS])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown format {fmt!r}")
    lines = ["| " + " | ".join(_header(c) for c in COLUMNS) + " |",
             "|" + "|".join("---" if c == "Scenario" else "---:" for c in COLUMNS) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(c, row[c]) for c in COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def prepare_model(data_path: str | None = None, seed: int = 0, n_synthetic: int = 20000,
                  cfg: TrainConfig = TrainConfig()):
    """Train on a CSV (or synthetic records) and return (model, X_test, y_test, info)."""
    if data_path:
        records = data.load_csv(data_path)
        truth = None
    else:
        records, truth = data.synthesize(n_synthetic, seed)
    X, y = data.expand_features(data.clean(records))
    Xtr, ytr, Xte, yte = data.split(X, y, seed=seed)
    stats = data.fit_normalization(Xtr)
    model = train(stats.apply(Xtr), ytr, cfg, stats, data.schema_hash())
    info = {"n_train": len(ytr), "n_test": len(yte), "test_accuracy": accuracy(model, Xte, yte)}
    if truth is not None:
        info["bayes_accuracy"] = float(np.mean((truth.probability(Xte) >= 0.5) == yte))
    return model, Xte, yte, info
