"""Cosine ranking over externally extracted image feature vectors."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import AbsentItemError, DimensionMismatchError, ParseError, ZeroNormError
from .ranking import RankedList, index_tiebreak, rank_with_missing

DEFAULT_DIM = 2048


class FeatureVectorStore:
    """Fixed-dimension item vectors, stored L2-normalised alongside the raw rows."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(ids) != len(vectors):
            raise ValueError("vectors must be a (n_items, dim) matrix matching ids")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0):
            raise ZeroNormError(f"zero-norm vector for {ids[int(np.argmin(norms))]}")
        self.ids = list(ids)
        self.index = {item: k for k, item in enumerate(self.ids)}
        self.vectors = vectors
        self.unit = vectors / norms[:, None]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, item):
        return item in self.index

    def __len__(self):
        return len(self.ids)

    def vector(self, item: str) -> np.ndarray:
        try:
            return self.vectors[self.index[item]]
        except KeyError:
            raise AbsentItemError(f"no feature vector for {item!r}") from None

    def cosine_similarity(self, i: str, j: str) -> float:
        a, b = self.vector(i), self.vector(j)
        return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))

    def rank(self, query: str, pool: Sequence[str], k: int,
             order: Mapping[str, int] | None = None) -> RankedList:
        """Top-k pool candidates by cosine to ``query``.

        Ties break on ``order`` (corpus dense index) when given, else on the
        store's row order. Candidates without vectors trail in pool order.
        """
        q = self.unit[self.index[query]] if query in self.index else None
        if q is None:
            raise AbsentItemError(f"no feature vector for query {query!r}")
        return rank_with_missing(
            pool,
            self.__contains__,
            lambda cands: self.unit[[self.index[c] for c in cands]] @ q,
            index_tiebreak(order if order is not None else self.index),
            k,
        )


def rank_by_image(store: FeatureVectorStore, query: str, pool: Sequence[str], k: int,
                  order: Mapping[str, int] | None = None) -> RankedList:
    return store.rank(query, pool, k, order)


def parse_vectors(lines, path=None) -> FeatureVectorStore:
    ids, rows = [], []
    dim = None
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise ParseError("expected item_id<TAB>f1,f2,...", lineno, path)
        try:
            vec = [float(x) for x in parts[1].split(",")]
        except ValueError:
            raise ParseError("non-numeric vector component", lineno, path) from None
        if not np.all(np.isfinite(vec)):
            raise ParseError("non-finite vector component", lineno, path)
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise DimensionMismatchError(f"expected {dim} components, got {len(vec)}", lineno, path)
        if not any(vec):
            raise ZeroNormError(f"zero-norm vector for {parts[0]!r}", lineno, path)
        ids.append(parts[0])
        rows.append(vec)
    if not rows:
        return FeatureVectorStore([], np.zeros((0, 0)))
    return FeatureVectorStore(ids, np.array(rows))


def load_vectors(path) -> FeatureVectorStore:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_vectors(fh, path)


def write_vectors(path, ids: Sequence[str], vectors: np.ndarray) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item, row in zip(ids, vectors):
            fh.write(item + "\t" + ",".join(f"{x:.9g}" for x in row) + "\n")
