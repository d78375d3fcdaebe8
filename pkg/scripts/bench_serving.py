"""Scoring latency and HTTP throughput for trained serving artifacts.

    python3 scripts/bench_serving.py --workdir run/synth --seconds 5 --clients 4

Expects the artifacts of a finished pipeline run (addcart.emb, pools.tsv,
cf_table.tsv) in ``--workdir``.
"""

import argparse

import numpy as np

from simrec.bench import http_throughput, scoring_latencies
from simrec.serving import load_artifacts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="run/synth")
    ap.add_argument("--requests", type=int, default=5000)
    ap.add_argument("--seconds", type=float, default=5.0)
    ap.add_argument("--clients", type=int, default=4)
    args = ap.parse_args()

    def load():
        w = args.workdir.rstrip("/")
        return load_artifacts(f"{w}/addcart.emb", f"{w}/pools.tsv", f"{w}/cf_table.tsv")

    lat = scoring_latencies(load(), args.requests, np.random.default_rng(0))[100:]
    p50, p95, p99 = np.percentile(lat, [50, 95, 99])
    print(f"similar_items latency: p50 {p50:.3f} ms  p95 {p95:.3f} ms  p99 {p99:.3f} ms")
    out = http_throughput(load(), args.seconds, args.clients)
    print(f"HTTP: {out['requests']} requests in {out['seconds']:.1f}s = {out['req_per_s']:.0f} req/s "
          f"({out['errors']} errors, {args.clients} clients)")


if __name__ == "__main__":
    main()
