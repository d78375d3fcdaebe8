"""Item2vec: skip-gram with negative sampling over user visit sequences.

Two tables are trained. The center item reads its row from ``input``; the
window item and the negatives read ``weights`` and ``bias``. Only ``input``
is used for scoring.

Multi-worker training is Hogwild-style: worker threads run the compiled
update kernel (which releases the GIL) on disjoint slices of the epoch's
pairs, writing the shared tables without locks.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .data import Corpus, ItemIndex
from .errors import AbsentItemError, FormatVersionError, ParseError
from .ranking import RankedList, index_tiebreak, rank_with_missing
from .sampling import NegativeSampler

log = logging.getLogger(__name__)

SIGMOID_CLAMP = 30.0
HEADER = "simrec-emb"
VERSION = "v1"


@dataclass
class Item2VecConfig:
    window: int = 2
    negatives: int = 8
    dim: int = 64
    learning_rate: float = 0.025
    epochs: int = 5
    seed: int = 0
    workers: int = 1
    neg_distribution: str = "uniform"

    def __post_init__(self):
        if self.window < 1 or self.negatives < 1 or self.dim < 1:
            raise ValueError("window, negatives and dim must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0 or self.workers < 1:
            raise ValueError("epochs must be >= 0 and workers >= 1")
        if self.neg_distribution not in ("uniform", "unigram"):
            raise ValueError(f"unknown neg_distribution {self.neg_distribution!r}")


@dataclass
class EmbeddingModel:
    index: ItemIndex
    input: np.ndarray
    weights: np.ndarray
    bias: np.ndarray | None = None
    loss_history: list[float] = field(default_factory=list, compare=False)

    @property
    def dim(self) -> int:
        return self.input.shape[1]

    def __contains__(self, item):
        return item in self.index

    def row(self, item: str) -> int:
        k = self.index.get(item)
        if k is None:
            raise AbsentItemError(f"item {item!r} not in model")
        return k

    def vector(self, item: str) -> np.ndarray:
        return self.input[self.row(item)]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.index, self.input.copy(), self.weights.copy(),
                              None if self.bias is None else self.bias.copy())

    def same_params(self, other: "EmbeddingModel") -> bool:
        return (self.index == other.index
                and np.array_equal(self.input, other.input)
                and np.array_equal(self.weights, other.weights)
                and ((self.bias is None and other.bias is None)
                     or np.array_equal(self.bias, other.bias)))


def init_model(index: ItemIndex, dim: int, rng: np.random.Generator, bias: bool = True) -> EmbeddingModel:
    n = len(index)
    inp = (rng.random((n, dim)) - 0.5) / dim
    return EmbeddingModel(index, inp, np.zeros((n, dim)), np.zeros(n) if bias else None)


# -- pairs and loss -------------------------------------------------------------


def generate_pairs(items: Sequence, window: int) -> list[tuple]:
    """(center, context) for every pair of positions 0 < |i - j| <= window.

    Pairs of identical items (a repeat visit within the window) are skipped.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    pairs = []
    n = len(items)
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i and items[j] != items[i]:
                pairs.append((items[i], items[j]))
    return pairs


def _neg_log_sigmoid(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, -x)


def sgns_loss(model: EmbeddingModel, center: int, context: int, negatives: Sequence[int]) -> float:
    """-log s(v_c.w_ctx + b_ctx) - sum_k log(1 - s(v_c.w_k + b_k)), s = sigmoid."""
    targets = np.concatenate(([context], np.asarray(negatives, dtype=np.int64)))
    z = model.weights[targets] @ model.input[center]
    if model.bias is not None:
        z = z + model.bias[targets]
    z = np.clip(z, -SIGMOID_CLAMP, SIGMOID_CLAMP)
    return float(_neg_log_sigmoid(z[0]) + _neg_log_sigmoid(-z[1:]).sum())


@numba.njit(nogil=True, cache=True)
def _sgns_update(w_in, w_out, bias, has_bias, center, context, negs, lr):
    d = w_in.shape[1]
    m = negs.shape[0] + 1
    g = np.empty(m)
    loss = 0.0
    for t in range(m):
        tgt = context if t == 0 else negs[t - 1]
        z = 0.0
        for a in range(d):
            z += w_in[center, a] * w_out[tgt, a]
        if has_bias:
            z += bias[tgt]
        if z > 30.0:
            z = 30.0
        elif z < -30.0:
            z = -30.0
        s = 1.0 / (1.0 + math.exp(-z))
        if t == 0:
            loss += math.log1p(math.exp(-z))
            g[t] = s - 1.0
        else:
            loss += math.log1p(math.exp(z))
            g[t] = s
    grad_v = np.zeros(d)
    for t in range(m):
        tgt = context if t == 0 else negs[t - 1]
        for a in range(d):
            grad_v[a] += g[t] * w_out[tgt, a]
    for t in range(m):
        tgt = context if t == 0 else negs[t - 1]
        for a in range(d):
            w_out[tgt, a] -= lr * g[t] * w_in[center, a]
        if has_bias:
            bias[tgt] -= lr * g[t]
    for a in range(d):
        w_in[center, a] -= lr * grad_v[a]
    return loss


@numba.njit(nogil=True, cache=True)
def _sgns_run(w_in, w_out, bias, has_bias, centers, contexts, negs, lr, lo, hi):
    total = 0.0
    for p in range(lo, hi):
        total += _sgns_update(w_in, w_out, bias, has_bias, centers[p], contexts[p], negs[p], lr)
    return total


def _bias_arg(model: EmbeddingModel):
    if model.bias is None:
        return np.zeros(1), False
    return model.bias, True


def train_step(model: EmbeddingModel, center: int, context: int, negatives: Sequence[int],
               learning_rate: float) -> float:
    """One in-place SGD step on the SGNS loss; returns the loss before the step.

    All gradients are taken at the pre-step parameters, so the update is
    exactly ``theta -= learning_rate * grad`` even with repeated negatives.
    """
    bias, has_bias = _bias_arg(model)
    negs = np.ascontiguousarray(negatives, dtype=np.int64)
    return _sgns_update(model.input, model.weights, bias, has_bias,
                        int(center), int(context), negs, float(learning_rate))


# -- training --------------------------------------------------------------------


def corpus_pairs(corpus: Corpus, window: int) -> np.ndarray:
    index = corpus.item_index
    out = []
    for session in corpus.sessions.values():
        ids = [index.index(x) for x in session.items]
        out.extend(generate_pairs(ids, window))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def run_hogwild(kernel, n_cases: int, workers: int, args_before, args_after=()) -> float:
    """Run ``kernel(*args_before, lo, hi, *args_after)`` over [0, n_cases) split across threads."""
    if workers <= 1 or n_cases < workers:
        return kernel(*args_before, 0, n_cases, *args_after)
    bounds = np.linspace(0, n_cases, workers + 1).astype(np.int64)
    totals = [0.0] * workers

    def work(w):
        totals[w] = kernel(*args_before, int(bounds[w]), int(bounds[w + 1]), *args_after)

    threads = [threading.Thread(target=work, args=(w,)) for w in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return float(sum(totals))


def train(corpus: Corpus, config: Item2VecConfig | None = None) -> EmbeddingModel:
    config = config or Item2VecConfig()
    if corpus.n_items == 0:
        raise ValueError("cannot train on an empty corpus")
    rng = np.random.default_rng(config.seed)
    model = init_model(corpus.item_index, config.dim, rng)
    pairs = corpus_pairs(corpus, config.window)
    counts = [corpus.counts.get(x, 1) for x in corpus.item_index]
    sampler = NegativeSampler(corpus.n_items, config.neg_distribution, counts)
    if len(pairs) and corpus.n_items < 3:
        raise ValueError("need at least 3 items to draw negatives outside each pair")
    bias, has_bias = _bias_arg(model)

    for epoch in range(config.epochs):
        if len(pairs) == 0:
            break
        order = rng.permutation(len(pairs))
        centers = np.ascontiguousarray(pairs[order, 0])
        contexts = np.ascontiguousarray(pairs[order, 1])
        negs = sampler.sample_batch(pairs[order], config.negatives, rng)
        total = run_hogwild(
            _sgns_run, len(pairs), config.workers,
            (model.input, model.weights, bias, has_bias, centers, contexts, negs, config.learning_rate),
        )
        model.loss_history.append(total / len(pairs))
        log.info("item2vec epoch %d: mean loss %.5f over %d pairs", epoch + 1, model.loss_history[-1], len(pairs))
    return model


# -- scoring ---------------------------------------------------------------------


def score(model: EmbeddingModel, i: str, j: str) -> float:
    """Cosine between the two items' input-table rows."""
    a, b = model.vector(i), model.vector(j)
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def rank_by_item2vec(model: EmbeddingModel, query: str, pool: Sequence[str], k: int) -> RankedList:
    """Pool candidates by input-table cosine to ``query``; unknown candidates trail."""
    q = model.vector(query)
    qn = q / np.linalg.norm(q)

    def scores(cands):
        rows = model.input[[model.index.index(c) for c in cands]]
        return rows @ qn / np.linalg.norm(rows, axis=1)

    return rank_with_missing(pool, model.__contains__, scores, index_tiebreak(model.index), k)


# -- persistence -----------------------------------------------------------------


def _fmt(row) -> str:
    return ",".join(f"{x:.9g}" for x in row)


def write_embedding(path, model, pos_weights=None) -> None:
    has_bias = model.bias is not None
    n, d = model.input.shape
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{HEADER} {VERSION} {n} {d} {int(has_bias)}\n")
        for item, row in zip(model.index, model.input):
            fh.write(f"{item}\t{_fmt(row)}\n")
        fh.write("#weights\n")
        for k, (item, row) in enumerate(zip(model.index, model.weights)):
            tail = f"\t{model.bias[k]:.9g}" if has_bias else ""
            fh.write(f"{item}\t{_fmt(row)}{tail}\n")
        if pos_weights is not None:
            fh.write("#posweights\n")
            fh.write(_fmt(pos_weights) + "\n")


def read_embedding(path):
    """Returns (EmbeddingModel, position weights or None)."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    if not lines:
        raise FormatVersionError("empty model file", 1, path)
    head = lines[0].split()
    if len(head) != 5 or head[0] != HEADER:
        raise FormatVersionError(f"bad model header {lines[0]!r}", 1, path)
    if head[1] != VERSION:
        raise FormatVersionError(f"unsupported model version {head[1]!r}", 1, path)
    try:
        n, d, has_bias = int(head[2]), int(head[3]), head[4] == "1"
    except ValueError:
        raise FormatVersionError(f"bad model header {lines[0]!r}", 1, path) from None

    def parse_row(lineno, expect_bias):
        parts = lines[lineno].split("\t")
        if len(parts) != (3 if expect_bias else 2):
            raise ParseError("malformed model row", lineno + 1, path)
        try:
            vec = [float(x) for x in parts[1].split(",")]
            b = float(parts[2]) if expect_bias else None
        except ValueError:
            raise ParseError("non-numeric model value", lineno + 1, path) from None
        if len(vec) != d:
            raise ParseError(f"expected {d} components, got {len(vec)}", lineno + 1, path)
        return parts[0], vec, b

    if len(lines) < 2 * n + 2 or lines[n + 1] != "#weights":
        raise ParseError("missing #weights section", min(n + 2, len(lines)), path)
    ids, inp = [], []
    for k in range(1, n + 1):
        item, vec, _ = parse_row(k, False)
        ids.append(item)
        inp.append(vec)
    wts, bias = [], []
    for k in range(n + 2, 2 * n + 2):
        item, vec, b = parse_row(k, has_bias)
        if item != ids[k - n - 2]:
            raise ParseError(f"weight row {item!r} out of order", k + 1, path)
        wts.append(vec)
        bias.append(b)
    pos = None
    rest = [ln for ln in lines[2 * n + 2:] if ln]
    if rest:
        if rest[0] != "#posweights" or len(rest) != 2:
            raise ParseError("unexpected trailing content", 2 * n + 3, path)
        try:
            pos = np.array([float(x) for x in rest[1].split(",")])
        except ValueError:
            raise ParseError("non-numeric position weight", 2 * n + 4, path) from None
    shape = (n, d)
    model = EmbeddingModel(
        ItemIndex(ids),
        np.array(inp, dtype=np.float64).reshape(shape),
        np.array(wts, dtype=np.float64).reshape(shape),
        np.array(bias, dtype=np.float64) if has_bias else None,
    )
    return model, pos


def load_item2vec(path) -> EmbeddingModel:
    model, pos = read_embedding(path)
    if pos is not None:
        raise FormatVersionError("file holds a personalized model, not item2vec", 1, Path(path))
    return model
