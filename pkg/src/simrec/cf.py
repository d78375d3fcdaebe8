"""Item-to-item CF: co-visitation Jaccard blended with attribute Jaccard.

Co-visitation counts are produced by a map/reduce over user shards: each shard
builds a binary user x item matrix ``X`` and emits ``X.T @ X`` (integer pair
counts with per-item user counts on the diagonal); the reduce step sums the
partial matrices in shard order. Integer arithmetic makes the result exactly
independent of the shard count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .data import Corpus, ItemIndex
from .errors import ParseError

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.9
DEFAULT_USER_CAP = 500


def _jaccard(a, b) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def covisit_jaccard(i, j, user_sets: Mapping) -> float:
    """|U_i & U_j| / |U_i | U_j| over the users who visited each item."""
    return _jaccard(user_sets.get(i, frozenset()), user_sets.get(j, frozenset()))


def attribute_jaccard(i, j, attrs: Mapping) -> float:
    return _jaccard(attrs.get(i, frozenset()), attrs.get(j, frozenset()))


def blend(c_sim: float, f_sim: float, alpha: float) -> float:
    return alpha * c_sim + (1 - alpha) * f_sim


def blended_sim(i, j, alpha: float, user_sets: Mapping, attrs: Mapping) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return blend(covisit_jaccard(i, j, user_sets), attribute_jaccard(i, j, attrs), alpha)


def eligible_users(corpus: Corpus, user_cap: int | None = DEFAULT_USER_CAP) -> list[str]:
    """Users kept for co-visitation counting (heavy hitters above the cap dropped)."""
    users = []
    for user, session in corpus.sessions.items():
        if user_cap is not None and len(set(session.items)) > user_cap:
            continue
        users.append(user)
    return users


def user_sets(corpus: Corpus, user_cap: int | None = DEFAULT_USER_CAP) -> dict[str, frozenset]:
    """item_id -> set of users who visited it."""
    sets: dict[str, set] = {item: set() for item in corpus.item_index}
    for user in eligible_users(corpus, user_cap):
        for item in corpus.sessions[user].items:
            sets[item].add(user)
    return {k: frozenset(v) for k, v in sets.items()}


@dataclass
class SimilarityTable:
    alpha: float
    neighbors: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def __post_init__(self):
        self._lookup: dict[str, dict[str, float]] = {}

    def get(self, item: str) -> list[tuple[str, float]]:
        return self.neighbors.get(item, [])

    def score(self, i: str, j: str, default: float = 0.0) -> float:
        row = self._lookup.get(i)
        if row is None:
            row = self._lookup[i] = dict(self.neighbors.get(i, ()))
        return row.get(j, default)

    def __len__(self):
        return len(self.neighbors)

    def __eq__(self, other):
        return isinstance(other, SimilarityTable) and self.neighbors == other.neighbors


# -- map / reduce --------------------------------------------------------------


def _shard_counts(rows: list[list[int]], n_items: int) -> sp.csr_matrix:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.fromiter((k for r in rows for k in r), dtype=np.int64, count=int(indptr[-1]))
    data = np.ones(len(indices), dtype=np.int64)
    x = sp.csr_matrix((data, indices, indptr), shape=(len(rows), n_items))
    return (x.T @ x).tocsr()


def covisit_counts(
    corpus: Corpus,
    shards: int = 1,
    user_cap: int | None = DEFAULT_USER_CAP,
    workers: int = 1,
) -> sp.csr_matrix:
    """Item x item co-visiting user counts; diagonal holds |U_i|."""
    if shards < 1:
        raise ValueError("shards must be >= 1")
    index = corpus.item_index
    rows = [sorted({index.index(it) for it in corpus.sessions[u].items})
            for u in eligible_users(corpus, user_cap)]
    parts = [rows[s::shards] for s in range(shards)]
    n = len(index)
    if workers > 1 and shards > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(_shard_counts, parts, [n] * shards))
    else:
        partial = [_shard_counts(p, n) for p in parts]
    total = sp.csr_matrix((n, n), dtype=np.int64)
    for m in partial:
        total = total + m
    total.sort_indices()
    return total


def attribute_overlap(index: ItemIndex, attrs: Mapping) -> tuple[sp.csr_matrix, np.ndarray]:
    """(item x item shared-attribute counts, per-item attribute set size)."""
    vocab: dict[str, int] = {}
    rows = []
    for item in index:
        rows.append(sorted({vocab.setdefault(t, len(vocab)) for t in attrs.get(item, ())}))
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.fromiter((k for r in rows for k in r), dtype=np.int64, count=int(indptr[-1]))
    a = sp.csr_matrix((np.ones(len(indices), dtype=np.int64), indices, indptr),
                      shape=(len(rows), max(len(vocab), 1)))
    inter = (a @ a.T).tocsr()
    inter.sort_indices()
    return inter, np.diff(indptr)


def _row(m: sp.csr_matrix, i: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = m.indptr[i], m.indptr[i + 1]
    return m.indices[lo:hi], m.data[lo:hi]


def _lookup_sorted(keys: np.ndarray, vals: np.ndarray, query: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(keys, query)
    pos_c = np.minimum(pos, max(len(keys) - 1, 0))
    hit = (pos < len(keys)) & (keys[pos_c] == query) if len(keys) else np.zeros(len(query), bool)
    out = np.zeros(len(query), dtype=np.int64)
    out[hit] = vals[pos_c[hit]]
    return out


def _jaccard_from_counts(inter: np.ndarray, size_i, size_j: np.ndarray) -> np.ndarray:
    union = size_i + size_j - inter
    out = np.zeros(len(inter), dtype=np.float64)
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out


def _top(cands: np.ndarray, scores: np.ndarray, top_n: int) -> np.ndarray:
    # score descending, dense index ascending
    order = np.lexsort((cands, -scores))
    return order[:top_n]


def attribute_neighbors(index: ItemIndex, attrs: Mapping, top_n: int) -> dict[str, list[tuple[str, float]]]:
    """Per-item top_n items by attribute Jaccard (> 0), via the inverted index."""
    inter, sizes = attribute_overlap(index, attrs)
    out = {}
    for i, item in enumerate(index):
        cols, counts = _row(inter, i)
        keep = cols != i
        cols, counts = cols[keep], counts[keep]
        f = _jaccard_from_counts(counts, sizes[i], sizes[cols])
        pos = f > 0
        cols, f = cols[pos], f[pos]
        sel = _top(cols, f, top_n)
        out[item] = [(index.id_of(int(cols[k])), float(f[k])) for k in sel]
    return out


def compute_similarity_table(
    train: Corpus,
    attrs: Mapping,
    alpha: float = DEFAULT_ALPHA,
    top_n: int = 200,
    shards: int = 1,
    user_cap: int | None = DEFAULT_USER_CAP,
    workers: int = 1,
) -> SimilarityTable:
    """Top-n blended neighbors per item.

    Candidates are items sharing at least one co-visiting user, plus each item's
    top_n attribute neighbors (cold-start fallback). Pairs scoring 0 are dropped.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    index = train.item_index
    co = covisit_counts(train, shards=shards, user_cap=user_cap, workers=workers)
    n_users = co.diagonal().astype(np.int64)
    inter_attr, attr_sizes = attribute_overlap(index, attrs)

    table = SimilarityTable(alpha)
    for i, item in enumerate(index):
        co_cols, co_vals = _row(co, i)
        at_cols, at_vals = _row(inter_attr, i)
        keep = at_cols != i
        at_cols_x, at_vals_x = at_cols[keep], at_vals[keep]
        f_all = _jaccard_from_counts(at_vals_x, attr_sizes[i], attr_sizes[at_cols_x])
        pos = f_all > 0
        attr_top = at_cols_x[pos][_top(at_cols_x[pos], f_all[pos], top_n)]

        cands = np.union1d(co_cols[co_cols != i], attr_top)
        if len(cands) == 0:
            continue
        c = _jaccard_from_counts(_lookup_sorted(co_cols, co_vals, cands), n_users[i], n_users[cands])
        f = _jaccard_from_counts(_lookup_sorted(at_cols, at_vals, cands), attr_sizes[i], attr_sizes[cands])
        s = alpha * c + (1 - alpha) * f
        pos = s > 0
        cands, s = cands[pos], s[pos]
        sel = _top(cands, s, top_n)
        if len(sel):
            table.neighbors[item] = [(index.id_of(int(cands[k])), float(s[k])) for k in sel]
    return table


# -- persistence ---------------------------------------------------------------


def write_similarity_table(path, table: SimilarityTable) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item, row in table.neighbors.items():
            fh.write(item + "\t" + ",".join(f"{j}:{s:.6f}" for j, s in row) + "\n")


def read_similarity_table(path, alpha: float = DEFAULT_ALPHA) -> SimilarityTable:
    table = SimilarityTable(alpha)
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            try:
                item, rest = line.split("\t")
                row = []
                for tok in rest.split(",") if rest else ():
                    j, s = tok.rsplit(":", 1)
                    row.append((j, float(s)))
            except ValueError:
                raise ParseError("malformed similarity row", lineno, path) from None
            table.neighbors[item] = row
    return table
