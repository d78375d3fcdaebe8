"""Latency and throughput measurements for the serving layer."""

from __future__ import annotations

import http.client
import threading
import time

import numpy as np

from .serving import ServingState, make_server


def scoring_latencies(state: ServingState, n_requests: int, rng: np.random.Generator,
                      n_users: int = 100) -> np.ndarray:
    """Wall time (ms) of ``similar_items`` for random users and pooled items."""
    items = [x for x, p in state.pools.pools.items() if p]
    if not items:
        raise ValueError("no pooled items to query")
    out = np.empty(n_requests)
    for r in range(n_requests):
        user = f"bench{int(rng.integers(n_users))}"
        item = items[int(rng.integers(len(items)))]
        t0 = time.perf_counter()
        state.similar_items(user, item)
        out[r] = (time.perf_counter() - t0) * 1000
    return out


def http_throughput(state: ServingState, seconds: float = 2.0, clients: int = 4, seed: int = 0) -> dict:
    """Requests per second against a local server with keep-alive clients."""
    server = make_server(state, "127.0.0.1", 0)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    items = [x for x, p in state.pools.pools.items() if p]
    counts = [0] * clients
    errors = [0] * clients
    stop = time.perf_counter() + seconds

    def client(c):
        rng = np.random.default_rng([seed, c])
        conn = http.client.HTTPConnection("127.0.0.1", port, timeout=10)
        while time.perf_counter() < stop:
            item = items[int(rng.integers(len(items)))]
            conn.request("GET", f"/v1/similar?user=load{c}-{int(rng.integers(50))}&item={item}")
            resp = conn.getresponse()
            resp.read()
            if resp.status == 200:
                counts[c] += 1
            else:
                errors[c] += 1
        conn.close()

    start = time.perf_counter()
    workers = [threading.Thread(target=client, args=(c,)) for c in range(clients)]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    elapsed = time.perf_counter() - start
    server.shutdown()
    server.server_close()
    return {"requests": sum(counts), "errors": sum(errors), "seconds": elapsed,
            "req_per_s": sum(counts) / elapsed}
