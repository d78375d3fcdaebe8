"""Helpers shared by the rankers."""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

RankedList = list[tuple[str, float]]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def order_scored(
    cands: Sequence[str],
    scores: np.ndarray,
    tiebreak: np.ndarray,
    k: int,
) -> RankedList:
    """Top-k by score descending, ties by ``tiebreak`` ascending."""
    order = np.lexsort((tiebreak, -scores))[:k]
    return [(cands[i], float(scores[i])) for i in order]


def rank_with_missing(
    pool: Sequence[str],
    known: Callable[[str], bool],
    score_known: Callable[[list[str]], np.ndarray],
    tiebreak: Callable[[list[str]], np.ndarray],
    k: int,
    missing_key: Callable[[str], object] | None = None,
) -> RankedList:
    """Rank the scoreable part of ``pool``; unscoreable candidates trail.

    Trailing candidates keep pool order unless ``missing_key`` is given.
    Missing candidates carry a score of nan.
    """
    scored = [c for c in pool if known(c)]
    missing = [c for c in pool if not known(c)]
    if missing_key is not None:
        missing.sort(key=missing_key)
    out: RankedList = []
    if scored:
        out = order_scored(scored, score_known(scored), tiebreak(scored), k)
    if len(out) < k:
        out.extend((c, float("nan")) for c in missing[: k - len(out)])
    return out


def index_tiebreak(index: Mapping[str, int] | None, fallback: int = 1 << 62):
    """Tiebreak callable mapping ids to dense indices (unknown ids sort last)."""

    def _tb(items):
        if index is None:
            return np.zeros(len(items), dtype=np.int64)
        return np.array([index.get(c, fallback) for c in items], dtype=np.int64)

    return _tb
