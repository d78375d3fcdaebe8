"""Real-time personalized ranking by weighted pooling over the recent window.

The user vector is the position-weighted mean of the input-table rows of the
most recent items (current item last)::

    u = (1/m) * sum_t w[S - m + t] * input[window[t]]

where ``S`` is the configured window size and ``m <= S`` the number of items
actually present. Training scores the next visited item against sampled
negatives with a softmax over ``u . weights[target]``; a transition into an
add-cart item is weighted by ``omega``. Ranking scores pool candidates with
``u . input[candidate]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .data import Corpus, ItemIndex
from .errors import AbsentItemError, FormatVersionError
from .item2vec import EmbeddingModel, read_embedding, run_hogwild, write_embedding
from .ranking import RankedList, index_tiebreak, rank_with_missing
from .sampling import NegativeSampler

log = logging.getLogger(__name__)


@dataclass
class PersonalizedConfig:
    window_size: int = 8
    negatives: int = 8
    omega_addcart: float = 2.0
    dim: int = 64
    learning_rate: float = 0.025
    epochs: int = 10
    seed: int = 0
    workers: int = 1
    addcart_scope: str = "session"

    def __post_init__(self):
        if self.window_size < 1 or self.negatives < 1 or self.dim < 1:
            raise ValueError("window_size, negatives and dim must be >= 1")
        if self.omega_addcart < 1:
            raise ValueError("omega_addcart must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0 or self.workers < 1:
            raise ValueError("epochs must be >= 0 and workers >= 1")
        if self.addcart_scope not in ("session", "event"):
            raise ValueError(f"addcart_scope must be 'session' or 'event', got {self.addcart_scope!r}")


@dataclass
class PersonalizedModel:
    index: ItemIndex
    input: np.ndarray
    weights: np.ndarray
    position_weights: np.ndarray
    loss_history: list[float] = field(default_factory=list, compare=False)
    _warned: set = field(default_factory=set, compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.input.shape[1]

    @property
    def window_size(self) -> int:
        return len(self.position_weights)

    def __contains__(self, item):
        return item in self.index

    def row(self, item: str) -> int:
        k = self.index.get(item)
        if k is None:
            raise AbsentItemError(f"item {item!r} not in model")
        return k

    def copy(self) -> "PersonalizedModel":
        return PersonalizedModel(self.index, self.input.copy(), self.weights.copy(),
                                 self.position_weights.copy())

    def same_params(self, other: "PersonalizedModel") -> bool:
        return (self.index == other.index
                and np.array_equal(self.input, other.input)
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.position_weights, other.position_weights))


def init_model(index: ItemIndex, dim: int, window_size: int, rng: np.random.Generator) -> PersonalizedModel:
    n = len(index)
    inp = (rng.random((n, dim)) - 0.5) / dim
    return PersonalizedModel(index, inp, np.zeros((n, dim)), np.ones(window_size))


# -- forward pieces --------------------------------------------------------------


def _rows(model: PersonalizedModel, window: Sequence) -> np.ndarray:
    return np.array([model.row(x) if isinstance(x, str) else int(x) for x in window], dtype=np.int64)


def user_vector(model: PersonalizedModel, window: Sequence) -> np.ndarray:
    """Weighted mean over ``window`` (ids or dense rows, oldest first, current last)."""
    rows = _rows(model, window)
    m = len(rows)
    if m == 0:
        raise ValueError("window must be non-empty")
    if m > model.window_size:
        raise ValueError(f"window of {m} exceeds window_size {model.window_size}")
    w = model.position_weights[model.window_size - m:]
    return (w[:, None] * model.input[rows]).sum(axis=0) / m


def interest_score(model: PersonalizedModel, user_vec: np.ndarray, item) -> float:
    k = model.row(item) if isinstance(item, str) else int(item)
    return float(user_vec @ model.input[k])


def softmax_ce_loss(model: PersonalizedModel, user_vec: np.ndarray, next_item: int,
                    negatives: Sequence[int]) -> float:
    """Cross-entropy of the next item against the negatives (weight-table logits)."""
    if len(negatives) == 0:
        raise ValueError("negatives must be non-empty")
    targets = np.concatenate(([next_item], np.asarray(negatives, dtype=np.int64)))
    z = model.weights[targets] @ user_vec
    zmax = z.max()
    return float(zmax + np.log(np.exp(z - zmax).sum()) - z[0])


def weighted_loss(loss: float, next_is_addcart: bool, omega: float) -> float:
    if omega < 1:
        raise ValueError("omega must be >= 1")
    return omega * loss if next_is_addcart else loss


# -- training kernel ---------------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _personal_update(w_in, w_out, pos_w, window, m, next_item, negs, omega, lr):
    d = w_in.shape[1]
    S = pos_w.shape[0]
    off = S - m
    u = np.zeros(d)
    for t in range(m):
        for a in range(d):
            u[a] += pos_w[off + t] * w_in[window[t], a]
    for a in range(d):
        u[a] /= m

    n_t = negs.shape[0] + 1
    z = np.empty(n_t)
    zmax = -np.inf
    for t in range(n_t):
        tgt = next_item if t == 0 else negs[t - 1]
        s = 0.0
        for a in range(d):
            s += u[a] * w_out[tgt, a]
        z[t] = s
        if s > zmax:
            zmax = s
    acc = 0.0
    for t in range(n_t):
        acc += math.exp(z[t] - zmax)
    lse = zmax + math.log(acc)
    loss = lse - z[0]

    g = np.empty(n_t)
    for t in range(n_t):
        g[t] = omega * math.exp(z[t] - lse)
    g[0] -= omega

    du = np.zeros(d)
    for t in range(n_t):
        tgt = next_item if t == 0 else negs[t - 1]
        for a in range(d):
            du[a] += g[t] * w_out[tgt, a]
    gp = np.zeros(m)
    for t in range(m):
        s = 0.0
        for a in range(d):
            s += w_in[window[t], a] * du[a]
        gp[t] = s / m

    for t in range(n_t):
        tgt = next_item if t == 0 else negs[t - 1]
        for a in range(d):
            w_out[tgt, a] -= lr * g[t] * u[a]
    for t in range(m):
        c = lr * pos_w[off + t] / m
        for a in range(d):
            w_in[window[t], a] -= c * du[a]
    for t in range(m):
        pos_w[off + t] -= lr * gp[t]
    return omega * loss


@numba.njit(nogil=True, cache=True)
def _personal_run(w_in, w_out, pos_w, windows, lens, nexts, negs, omegas, lr, lo, hi):
    total = 0.0
    for c in range(lo, hi):
        total += _personal_update(w_in, w_out, pos_w, windows[c], lens[c], nexts[c],
                                  negs[c], omegas[c], lr)
    return total


def train_step(model: PersonalizedModel, window: Sequence, next_item: int, negatives: Sequence[int],
               next_is_addcart: bool, learning_rate: float, omega: float = 2.0) -> float:
    """One in-place SGD step on the (optionally add-cart weighted) loss.

    Returns the weighted loss before the step. Gradients are taken at the
    pre-step parameters for every touched row and position weight.
    """
    rows = _rows(model, window)
    if not 1 <= len(rows) <= model.window_size:
        raise ValueError("window length must be in [1, window_size]")
    w = float(omega) if next_is_addcart else 1.0
    return _personal_update(model.input, model.weights, model.position_weights, rows, len(rows),
                            int(next_item), np.ascontiguousarray(negatives, dtype=np.int64),
                            w, float(learning_rate))


def training_cases(corpus: Corpus, window_size: int, omega: float, scope: str = "session"):
    """Windows, lengths, next items and loss weights for every position with a successor."""
    index = corpus.item_index
    windows, lens, nexts, omegas = [], [], [], []
    for session in corpus.sessions.values():
        ids = [index.index(x) for x in session.items]
        carted = {index.index(x) for x in session.addcart_items()} if scope == "session" else set()
        for i in range(len(ids) - 1):
            win = ids[max(0, i - window_size + 1): i + 1]
            nxt = ids[i + 1]
            addcart = session.events[i + 1].is_addcart or nxt in carted
            windows.append(win + [-1] * (window_size - len(win)))
            lens.append(len(win))
            nexts.append(nxt)
            omegas.append(omega if addcart else 1.0)
    return (np.array(windows, dtype=np.int64).reshape(-1, window_size),
            np.array(lens, dtype=np.int64),
            np.array(nexts, dtype=np.int64),
            np.array(omegas, dtype=np.float64))


def train(corpus: Corpus, config: PersonalizedConfig | None = None) -> PersonalizedModel:
    config = config or PersonalizedConfig()
    if corpus.n_items == 0:
        raise ValueError("cannot train on an empty corpus")
    rng = np.random.default_rng(config.seed)
    model = init_model(corpus.item_index, config.dim, config.window_size, rng)
    windows, lens, nexts, omegas = training_cases(corpus, config.window_size,
                                                  config.omega_addcart, config.addcart_scope)
    n = len(nexts)
    sampler = NegativeSampler(corpus.n_items)
    exclude = np.concatenate([windows, nexts[:, None]], axis=1)

    for epoch in range(config.epochs):
        if n == 0:
            break
        order = rng.permutation(n)
        negs = sampler.sample_batch(exclude[order], config.negatives, rng)
        total = run_hogwild(
            _personal_run, n, config.workers,
            (model.input, model.weights, model.position_weights,
             np.ascontiguousarray(windows[order]), np.ascontiguousarray(lens[order]),
             np.ascontiguousarray(nexts[order]), negs, np.ascontiguousarray(omegas[order]),
             config.learning_rate),
        )
        model.loss_history.append(total / n)
        log.info("personalized epoch %d: mean loss %.5f over %d cases", epoch + 1, model.loss_history[-1], n)
    return model


# -- ranking -------------------------------------------------------------------------


def build_window(model: PersonalizedModel, recent_items: Sequence[str], current_item: str) -> list[str]:
    """Known items of ``recent_items + [current_item]``, truncated to the window size."""
    seq = [x for x in list(recent_items) + [current_item] if x in model.index]
    return seq[-model.window_size:]


def rank_candidates(model: PersonalizedModel, recent_items: Sequence[str], current_item: str,
                    pool: Sequence[str], k: int) -> RankedList:
    """Top-k of ``pool`` by interest score against the current user vector.

    ``recent_items`` is the visit history before ``current_item`` (oldest
    first). Items unknown to the model are left out of the window; unknown
    candidates trail, sorted by id.
    """
    window = build_window(model, recent_items, current_item)
    u = user_vector(model, window) if window else np.zeros(model.dim)

    absent = [c for c in pool if c not in model.index and c not in model._warned]
    if absent:
        model._warned.update(absent)
        log.warning("%d pool candidate(s) absent from the model rank last, e.g. %r", len(absent), absent[0])

    def scores(cands):
        return model.input[[model.index.index(c) for c in cands]] @ u

    return rank_with_missing(pool, model.__contains__, scores, index_tiebreak(model.index), k,
                             missing_key=str)


# -- persistence -------------------------------------------------------------------


def write_personalized(path, model: PersonalizedModel) -> None:
    emb = EmbeddingModel(model.index, model.input, model.weights, None)
    write_embedding(path, emb, pos_weights=model.position_weights)


def load_personalized(path) -> PersonalizedModel:
    emb, pos = read_embedding(path)
    if pos is None:
        raise FormatVersionError("model file has no #posweights section", None, path)
    return PersonalizedModel(emb.index, emb.input, emb.weights, pos)
