"""Run the latency scenarios and write the results table.

    python3 scripts/table2.py --scenario 1 2 3 4 highsec --out results/table2.md
"""

import argparse
import logging
import sys
from pathlib import Path

from hecredit import bench


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--scenario", nargs="+", default=["1", "2", "3", "4"], choices=list(bench.SCENARIOS))
    p.add_argument("--data", help="credit CSV; synthetic records when omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--senders", type=int, default=5)
    p.add_argument("--requests", type=int, default=20)
    p.add_argument("--highsec-requests", type=int, default=4,
                   help="requests per sender for the N=8192 run, which is much slower")
    p.add_argument("--out", default="results/table2.md")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    model, Xte, yte, info = bench.prepare_model(args.data, args.seed)
    print(f"plaintext test accuracy {100 * info['test_accuracy']:.1f}%", file=sys.stderr)
    results = []
    for sid in args.scenario:
        n_req = args.highsec_requests if sid == "highsec" else args.requests
        cfg = bench.BenchConfig(args.senders, n_req, args.seed, timeout=300)
        res = bench.run_scenario(bench.SCENARIOS[sid], model, Xte, yte, cfg)
        print(f"{bench.SCENARIOS[sid].label}: {len(res.records)}/{res.expected} in {res.wall_s:.1f} s",
              file=sys.stderr)
        results.append(res)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    text = bench.report(results)
    out.write_text(text)
    out.with_suffix(".csv").write_text(bench.report(results, "csv"))
    print(text)
    return 0 if all(r.ok for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
