"""Online similar-item service over an in-memory real-time session store."""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from collections import deque
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .cf import SimilarityTable, read_similarity_table
from .data import Kind
from .errors import SimrecError
from .personalized import PersonalizedModel, load_personalized, rank_candidates
from .pool import CandidatePool, read_pools
from .ranking import RankedList, index_tiebreak, order_scored

log = logging.getLogger(__name__)


class ArtifactError(SimrecError):
    """A serving artifact is missing or unreadable."""


@dataclass
class ServeConfig:
    k: int = 30
    fallback: str = "cf"
    latency_budget_ms: float = 100.0
    host: str = "127.0.0.1"
    port: int = 8080
    ttl_s: float = 1800.0
    pool_size: int = 200

    def __post_init__(self):
        if not 1 <= self.k <= self.pool_size:
            raise ValueError("k must be in [1, pool_size]")
        if self.fallback not in ("cf", "pool"):
            raise ValueError("fallback must be 'cf' or 'pool'")


class SessionStore:
    """Per-user ring of the most recent (item, kind, timestamp) entries.

    One lock guards the map; a user's ring is only mutated or copied while it
    is held, so writes to one user serialise and readers get a consistent
    snapshot. Rings idle for longer than ``ttl_s`` are dropped on access.
    """

    def __init__(self, capacity: int, ttl_s: float = 1800.0, clock=time.monotonic):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.ttl_s = ttl_s
        self._clock = clock
        self._rings: dict[str, deque] = {}
        self._touched: dict[str, float] = {}
        self._lock = threading.Lock()

    def _expired(self, user: str, now: float) -> bool:
        return self.ttl_s > 0 and now - self._touched.get(user, now) > self.ttl_s

    def record(self, user: str, item: str, kind: Kind = Kind.CLICK, timestamp_ms: int | None = None) -> None:
        if timestamp_ms is None:
            timestamp_ms = int(time.time() * 1000)
        now = self._clock()
        with self._lock:
            ring = self._rings.get(user)
            if ring is None or self._expired(user, now):
                ring = self._rings[user] = deque(maxlen=self.capacity)
            self._touched[user] = now
            if ring and ring[-1][0] == item:
                # repeated view of the same item: keep one entry, add-cart sticks
                if kind is Kind.ADD_CART:
                    ring[-1] = (item, kind, ring[-1][2])
                return
            ring.append((item, kind, timestamp_ms))

    def snapshot(self, user: str) -> list[tuple[str, Kind, int]]:
        now = self._clock()
        with self._lock:
            if user not in self._rings:
                return []
            if self._expired(user, now):
                del self._rings[user]
                del self._touched[user]
                return []
            return list(self._rings[user])

    def history(self, user: str) -> list[str]:
        return [item for item, _, _ in self.snapshot(user)]

    def __len__(self):
        with self._lock:
            return len(self._rings)


class ServingState:
    """Immutable models and pools plus the mutable session store."""

    def __init__(self, model: PersonalizedModel, pools: CandidatePool, table: SimilarityTable | None,
                 config: ServeConfig | None = None):
        self.model = model
        self.pools = pools
        self.table = table
        self.config = config or ServeConfig()
        self.store = SessionStore(model.window_size, self.config.ttl_s)
        self._tiebreak = index_tiebreak(model.index)
        self.budget_overruns = 0

    def record_event(self, user: str, item: str, kind: Kind = Kind.CLICK) -> dict:
        self.store.record(user, item, kind)
        return {"ok": True}

    def _fallback(self, item: str, pool: list[str], k: int) -> RankedList:
        if self.config.fallback == "pool" or self.table is None:
            return [(c, 0.0) for c in pool[:k]]
        scores = np.array([self.table.score(item, c) for c in pool])
        return order_scored(pool, scores, self._tiebreak(pool), k)

    def similar_items(self, user: str, item: str, k: int | None = None) -> dict:
        start = time.perf_counter()
        k = self.config.k if k is None else k
        pool = self.pools.lookup(item)
        if not pool:
            return {"ranker": None, "items": [], "reason": "no_pool"}
        history = self.store.history(user)
        if history:
            ranked = rank_candidates(self.model, history, item, pool, k)
            used = "personalized"
        else:
            ranked = self._fallback(item, pool, k)
            used = self.config.fallback
        self.store.record(user, item, Kind.CLICK)
        elapsed_ms = (time.perf_counter() - start) * 1000
        if elapsed_ms > self.config.latency_budget_ms:
            self.budget_overruns += 1
            log.warning("similar_items took %.1f ms (budget %.0f ms)", elapsed_ms, self.config.latency_budget_ms)
        return {"ranker": used, "items": ranked}

    def health(self) -> dict:
        return {"status": "ok", "items": len(self.model.index), "dim": self.model.dim}


def load_artifacts(model_path, pools_path, table_path=None, config: ServeConfig | None = None) -> ServingState:
    """Load the personalized model, pools and (optional) CF table; fail fast on any problem."""
    config = config or ServeConfig()
    paths = [("model", model_path), ("pools", pools_path)] + ([("cf table", table_path)] if table_path else [])
    for what, p in paths:
        if not Path(p).is_file():
            raise ArtifactError(f"missing {what} file: {p}")
    model = load_personalized(model_path)
    pools = read_pools(pools_path, config.pool_size)
    table = read_similarity_table(table_path) if table_path else None
    absent = {c for cands in pools.pools.values() for c in cands if c not in model.index}
    if absent:
        log.warning("%d pooled item(s) are absent from the model and will rank last", len(absent))
        model._warned.update(absent)
    return ServingState(model, pools, table, config)


# -- HTTP --------------------------------------------------------------------------


def _json_items(ranked: RankedList) -> list[dict]:
    return [{"id": item, "score": None if math.isnan(s) else round(s, 6)} for item, s in ranked]


class Handler(BaseHTTPRequestHandler):
    state: ServingState = None  # set by make_server
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out as separate writes

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, code: int, body: dict) -> None:
        payload = json.dumps(body).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/v1/health":
            return self._send(200, self.state.health())
        if url.path == "/v1/similar":
            q = {k: v[-1] for k, v in parse_qs(url.query).items()}
            if not q.get("item"):
                return self._send(400, {"error": "missing item"})
            try:
                k = int(q.get("k", self.state.config.k))
            except ValueError:
                return self._send(400, {"error": "k must be an integer"})
            if not 1 <= k <= self.state.config.pool_size:
                return self._send(400, {"error": "k out of range"})
            out = self.state.similar_items(q.get("user", ""), q["item"], k)
            body = {"ranker": out["ranker"], "items": _json_items(out["items"])}
            if "reason" in out:
                body["reason"] = out["reason"]
            return self._send(200, body)
        self._send(404, {"error": "not found"})

    def do_POST(self):
        if urlparse(self.path).path != "/v1/events":
            return self._send(404, {"error": "not found"})
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length).decode("utf-8"))
            user, item = body["user"], body["item"]
            kind = Kind(body.get("kind", "click"))
            if not (isinstance(user, str) and isinstance(item, str) and user and item):
                raise ValueError("user and item must be non-empty strings")
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            return self._send(400, {"ok": False, "error": f"malformed event: {exc}"})
        self._send(200, self.state.record_event(user, item, kind))


def make_server(state: ServingState, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (Handler,), {"state": state})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server
