"""Negative samplers over the dense item range."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import SimrecError


class NegativeSampler:
    """Draw negatives uniformly (default) or from unigram^power item counts.

    Excluded items are removed by rejection, which keeps draws exactly
    distributed over the remaining items and deterministic given the rng.
    """

    def __init__(self, n_items: int, distribution: str = "uniform", counts=None, power: float = 0.75):
        if n_items < 1:
            raise ValueError("sampler needs at least one item")
        self.n_items = n_items
        self.distribution = distribution
        if distribution == "uniform":
            self._cdf = None
        elif distribution == "unigram":
            if counts is None or len(counts) != n_items:
                raise ValueError("unigram sampling needs one count per item")
            w = np.asarray(counts, dtype=np.float64) ** power
            if np.any(w <= 0):
                raise ValueError("unigram counts must be positive")
            self._cdf = np.cumsum(w / w.sum())
            self._cdf[-1] = 1.0
        else:
            raise ValueError(f"unknown negative distribution {distribution!r}")

    def draw(self, size, rng: np.random.Generator) -> np.ndarray:
        if self._cdf is None:
            return rng.integers(0, self.n_items, size=size)
        return np.searchsorted(self._cdf, rng.random(size), side="right")

    def sample(self, n: int, exclude: Iterable[int], rng: np.random.Generator) -> list[int]:
        exclude = {int(x) for x in exclude}
        if self.n_items <= len(exclude):
            raise SimrecError(f"cannot sample from {self.n_items} items excluding {len(exclude)}")
        out = self.sample_batch(np.array([sorted(exclude) or [-1]]), n, rng)
        return out[0].tolist()

    def sample_batch(self, exclude: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """(rows, n) negatives; row r avoids every non-negative id in ``exclude[r]``."""
        exclude = np.asarray(exclude, dtype=np.int64)
        if exclude.ndim != 2:
            raise ValueError("exclude must be a 2-d array padded with -1")
        rows = exclude.shape[0]
        if rows and exclude.shape[1]:
            s = np.sort(exclude, axis=1)
            distinct = ((s[:, 1:] != s[:, :-1]) & (s[:, 1:] >= 0)).sum(axis=1) + (s[:, 0] >= 0)
            if distinct.max() >= self.n_items:
                raise SimrecError(f"cannot sample from {self.n_items} items excluding {distinct.max()}")
        out = self.draw((rows, n), rng)
        bad = (out[:, :, None] == exclude[:, None, :]).any(axis=2)
        while bad.any():
            r, c = np.nonzero(bad)
            redo = self.draw(len(r), rng)
            out[r, c] = redo
            bad[r, c] = (redo[:, None] == exclude[r]).any(axis=1)
        return out


def sample_negatives(n: int, exclude: Iterable[int], rng: np.random.Generator, n_items: int) -> list[int]:
    """n uniform draws (with replacement) from range(n_items) minus ``exclude``."""
    return NegativeSampler(n_items).sample(n, exclude, rng)
