"""Finite-difference gradient checks for the two training kernels.

The kernels compute every gradient at the pre-step parameters, so one step
at learning rate 1 moves each parameter by exactly minus its gradient.
The numeric side re-evaluates the loss with the pure-Python oracles.
"""

import math

import numpy as np

import oracles
from simrec import item2vec, personalized
from simrec.data import ItemIndex

EPS = 1e-4


def _rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def _index(n):
    return ItemIndex([f"i{k}" for k in range(n)])


def sgns_instance(rng):
    """Return the relative error between analytic and numeric SGNS gradients."""
    n = int(rng.integers(4, 12))
    d = int(rng.integers(1, 9))
    model = item2vec.EmbeddingModel(_index(n), rng.normal(0, 0.5, (n, d)),
                                    rng.normal(0, 0.5, (n, d)), rng.normal(0, 0.5, n))
    center, context = (int(x) for x in rng.choice(n, 2, replace=False))
    pool = [k for k in range(n) if k not in (center, context)]
    negs = [int(x) for x in rng.choice(pool, int(rng.integers(1, 6)))]
    targets = sorted({context, *negs})

    def pack(m):
        parts = [m.input[center]] + [m.weights[t] for t in targets] + [m.bias[targets]]
        return np.concatenate(parts)

    def loss_at(theta):
        v = theta[:d]
        w = {t: theta[d * (1 + k): d * (2 + k)] for k, t in enumerate(targets)}
        b = dict(zip(targets, theta[d * (1 + len(targets)):]))
        return oracles.sgns_loss(v, w[context], b[context], [w[t] for t in negs], [b[t] for t in negs])

    theta = list(pack(model))
    numeric = oracles.central_diff(loss_at, theta, EPS)
    before = pack(model)
    item2vec.train_step(model, center, context, negs, 1.0)
    analytic = before - pack(model)
    return _rel_err(analytic, numeric)


def personalized_instance(rng, addcart, omega=2.0):
    """Relative error for one personalized step; ``addcart`` picks the omega branch."""
    n = int(rng.integers(6, 14))
    d = int(rng.integers(1, 9))
    S = int(rng.integers(1, 5))
    m = int(rng.integers(1, S + 1))
    model = personalized.PersonalizedModel(_index(n), rng.normal(0, 0.5, (n, d)),
                                           rng.normal(0, 0.5, (n, d)), rng.normal(1, 0.3, S))
    window = [int(x) for x in rng.choice(n, m)]
    nxt = int(rng.integers(n))
    pool = [k for k in range(n) if k != nxt and k not in window]
    negs = [int(x) for x in rng.choice(pool, int(rng.integers(1, 6)))]
    rows = sorted(set(window))
    targets = sorted({nxt, *negs})
    w_scale = omega if addcart else 1.0

    def pack(mod):
        parts = ([mod.input[r] for r in rows] + [mod.weights[t] for t in targets]
                 + [mod.position_weights[S - m:]])
        return np.concatenate(parts)

    def loss_at(theta):
        vin = {r: theta[d * k: d * (k + 1)] for k, r in enumerate(rows)}
        off = d * len(rows)
        wout = {t: theta[off + d * k: off + d * (k + 1)] for k, t in enumerate(targets)}
        pw = theta[off + d * len(targets):]
        u = oracles.user_vector([vin[r] for r in window], pw)
        return w_scale * oracles.softmax_ce(u, wout[nxt], [wout[t] for t in negs])

    theta = list(pack(model))
    numeric = oracles.central_diff(loss_at, theta, EPS)
    before = pack(model)
    loss = personalized.train_step(model, window, nxt, negs, addcart, 1.0, omega)
    analytic = before - pack(model)
    assert math.isclose(loss, loss_at(list(before)), rel_tol=1e-9, abs_tol=1e-12)
    return _rel_err(analytic, numeric)
