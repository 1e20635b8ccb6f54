"""Command line: ``hecredit {train,synth-data,run,serve-broker,serve-receiver,serve-cam}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bench, data
from .broker import BrokerConfig, DEFAULT_BUFFER
from .model import ModelBundle, TrainConfig


def _train(args) -> int:
    cfg = TrainConfig(args.learning_rate, args.epochs, args.batch_size, args.seed)
    model, _, _, info = bench.prepare_model(args.data, args.seed, args.n, cfg)
    model.save(args.out)
    if args.schema_out:
        data.write_schema(args.schema_out)
    print(json.dumps({"model": args.out, **info}, indent=2))
    return 0


def _synth(args) -> int:
    records, _ = data.synthesize(args.n, args.seed)
    data.write_csv(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _run(args) -> int:
    model, Xte, yte, info = bench.prepare_model(args.data, args.seed, args.n)
    if args.model:
        model = ModelBundle.load(args.model)
    print(f"# plaintext test accuracy {100 * info['test_accuracy']:.1f}% on {info['n_test']} rows",
          file=sys.stderr)
    cfg = bench.BenchConfig(args.senders, args.requests, args.seed, args.broker, args.cam, args.timeout)
    results, failed = [], False
    for sid in args.scenario:
        spec = bench.SCENARIOS[sid]
        print(f"# running {spec.label}", file=sys.stderr)
        res = bench.run_scenario(spec, model, Xte, yte, cfg)
        results.append(res)
        if not res.ok:
            failed = True
            print(f"# scenario {sid} FAILED: lost {res.lost}/{res.expected}; {res.errors[:3]}", file=sys.stderr)
        else:
            print(f"# scenario {sid}: {len(res.records)}/{res.expected} responses in {res.wall_s:.1f} s, "
                  f"plaintext accuracy on the same rows {100 * res.plain_accuracy:.1f}%", file=sys.stderr)
    print(bench.report(results, args.report), end="")
    return 1 if failed else 0


def _serve_broker(args) -> int:
    from .broker import serve
    serve(BrokerConfig(args.host, args.port, args.max_payload, args.buffer))
    return 0


def _serve_receiver(args) -> int:
    from .mqtt_client import parse_address
    from .receiver import ReceiverConfig, serve
    host, port = parse_address(args.broker)
    serve(ReceiverConfig(host, port, args.topic, args.mode, args.cam_url, args.model, args.workers))
    return 0


def _serve_cam(args) -> int:
    from .cam import CamConfig, serve
    serve(CamConfig(args.host, args.port, args.max_body, args.workers), ModelBundle.load(args.model))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hecredit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("train", help="train the model and write a bundle")
    t.add_argument("--data", help="credit CSV; synthetic records when omitted")
    t.add_argument("--n", type=int, default=20000, help="synthetic record count")
    t.add_argument("--out", default="model.json")
    t.add_argument("--schema-out")
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--learning-rate", type=float, default=0.1)
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(fn=_train)

    s = sub.add_parser("synth-data", help="write synthetic records as CSV")
    s.add_argument("--n", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="synthetic_credit.csv")
    s.set_defaults(fn=_synth)

    r = sub.add_parser("run", help="run experiment scenarios and print a results table")
    r.add_argument("--scenario", nargs="+", choices=list(bench.SCENARIOS), default=["1", "2", "3", "4"])
    r.add_argument("--broker", help="external broker host:port")
    r.add_argument("--cam", help="external CAM URL, e.g. http://host:8080/assess")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--data", help="credit CSV; synthetic records when omitted")
    r.add_argument("--model", help="use this bundle instead of training")
    r.add_argument("--n", type=int, default=20000, help="synthetic record count")
    r.add_argument("--report", choices=("markdown", "csv"), default="markdown")
    r.add_argument("--senders", type=int, default=5)
    r.add_argument("--requests", type=int, default=20)
    r.add_argument("--timeout", type=float, default=60.0)
    r.set_defaults(fn=_run)

    b = sub.add_parser("serve-broker", help="run the MQTT broker")
    b.add_argument("--host", default="0.0.0.0")
    b.add_argument("--port", type=int, default=1883)
    b.add_argument("--max-payload", type=int, default=(1 << 28) - 1)
    b.add_argument("--buffer", type=int, default=DEFAULT_BUFFER)
    b.set_defaults(fn=_serve_broker)

    rv = sub.add_parser("serve-receiver", help="run the message receiver")
    rv.add_argument("--broker", default="127.0.0.1:1883")
    rv.add_argument("--topic", default="bank/credit/request")
    rv.add_argument("--mode", choices=("local_cam", "remote_cam"), default="local_cam")
    rv.add_argument("--cam-url")
    rv.add_argument("--model")
    rv.add_argument("--workers", type=int, default=0)
    rv.set_defaults(fn=_serve_receiver)

    c = sub.add_parser("serve-cam", help="run the HTTP credit assessment service")
    c.add_argument("--host", default="0.0.0.0")
    c.add_argument("--port", type=int, default=8080)
    c.add_argument("--model", required=True)
    c.add_argument("--max-body", type=int, default=256 * 1024 * 1024)
    c.add_argument("--workers", type=int, default=0)
    c.set_defaults(fn=_serve_cam)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stdout)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
