"""Planted-cluster synthetic clickstream.

Items are split into contiguous clusters, each treated as a ring. Every user
belongs to one cluster and has a "home" position in it. A click stays in the
cluster with probability ``p_in``; inside the cluster it either drifts to a
ring neighbour of the current item or jumps near the user's home (``p_taste``).
Add-cart events (rate ``addcart_rate``) follow a different rule: they jump to
the far side of the current item's ring. With ``clusters == 1`` all events
are uniform over the catalogue (null model).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DAY_MS, ClickEvent, Kind, write_attributes, write_events
from .image import write_vectors

START_MS = 1_600_000_000_000 // DAY_MS * DAY_MS


@dataclass
class SynthConfig:
    users: int = 2000
    items: int = 1000
    clusters: int = 8
    days: int = 8
    events_per_user: int = 40
    addcart_rate: float = 0.1
    p_in: float = 0.9
    p_taste: float = 0.7
    local_span: int = 3
    vector_dim: int = 32
    new_items: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.users < 1 or self.items < 2 or self.days < 1 or self.events_per_user < 1:
            raise ValueError("users, days, events_per_user must be >= 1 and items >= 2")
        if not 1 <= self.clusters <= self.items // 2:
            raise ValueError("clusters must be in [1, items/2]")
        for name in ("addcart_rate", "p_in", "p_taste"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.local_span < 1 or self.vector_dim < 1 or self.new_items < 0:
            raise ValueError("local_span and vector_dim must be >= 1, new_items >= 0")


@dataclass
class SynthData:
    events: list[ClickEvent]
    attributes: dict[str, set[str]]
    item_ids: list[str]
    vectors: np.ndarray
    new_items: list[str]
    cluster_of: np.ndarray


def item_id(k: int) -> str:
    return f"i{k:05d}"


def _bounds(cfg: SynthConfig):
    edges = np.linspace(0, cfg.items, cfg.clusters + 1).astype(int)
    cluster_of = np.searchsorted(edges, np.arange(cfg.items), side="right") - 1
    return edges, cluster_of


def generate(cfg: SynthConfig) -> SynthData:
    rng = np.random.default_rng(cfg.seed)
    edges, cluster_of = _bounds(cfg)
    structured = cfg.clusters > 1

    def ring(item, offset):
        c = cluster_of[item]
        lo, size = edges[c], edges[c + 1] - edges[c]
        return lo + (item - lo + offset) % size

    events = []
    for u in range(cfg.users):
        user = f"u{u:05d}"
        c = rng.integers(cfg.clusters)
        lo, size = edges[c], edges[c + 1] - edges[c]
        home = lo + rng.integers(size)
        cur = ring(home, int(rng.integers(-2, 3))) if structured else rng.integers(cfg.items)
        day_of = np.arange(cfg.events_per_user) * cfg.days // cfg.events_per_user
        offsets = np.sort(rng.integers(0, DAY_MS, cfg.events_per_user))
        for e in range(cfg.events_per_user):
            kind = Kind.ADD_CART if rng.random() < cfg.addcart_rate else Kind.CLICK
            if e == 0:
                nxt = cur
            else:
                while True:
                    if not structured:
                        nxt = rng.integers(cfg.items)
                    elif kind is Kind.ADD_CART:
                        half = (edges[cluster_of[cur] + 1] - edges[cluster_of[cur]]) // 2
                        nxt = ring(cur, half + int(rng.integers(-1, 2)))
                    elif rng.random() < cfg.p_in:
                        if rng.random() < cfg.p_taste:
                            nxt = ring(home, int(rng.integers(-2, 3)))
                        else:
                            step = int(rng.integers(1, cfg.local_span + 1))
                            nxt = ring(cur, step if rng.random() < 0.5 else -step)
                    else:
                        nxt = rng.integers(cfg.items)
                    if nxt != cur:
                        break
            cur = nxt
            ts = START_MS + int(day_of[e]) * DAY_MS + int(offsets[e])
            events.append(ClickEvent(user, item_id(int(cur)), ts, kind))
    events.sort(key=lambda ev: (ev.timestamp_ms, ev.user_id))

    ids = [item_id(k) for k in range(cfg.items)]
    attributes = {}
    for k in range(cfg.items):
        attributes[ids[k]] = {f"cat{cluster_of[k]}" if structured else "cat0",
                              f"color{rng.integers(8)}", f"style{rng.integers(12)}"}
    centroids = rng.normal(size=(cfg.clusters, cfg.vector_dim))
    vectors = centroids[cluster_of] + rng.normal(size=(cfg.items, cfg.vector_dim))
    new = sorted(rng.choice(cfg.items, size=min(cfg.new_items, cfg.items), replace=False).tolist())
    return SynthData(events, attributes, ids, vectors, [ids[k] for k in new], cluster_of)


def write_synth(data: SynthData, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "clicks": out / "clicks.tsv",
        "attributes": out / "attributes.tsv",
        "vectors": out / "vectors.tsv",
        "new_items": out / "new_items.txt",
    }
    write_events(paths["clicks"], data.events)
    write_attributes(paths["attributes"], data.attributes)
    write_vectors(paths["vectors"], data.item_ids, data.vectors)
    paths["new_items"].write_text("".join(x + "\n" for x in data.new_items), encoding="utf-8")
    return paths
