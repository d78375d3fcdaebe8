"""Brute-force similarity table built from Python sets."""

import oracles
from simrec.data import Attributes


def brute_force_table(corpus, attrs, alpha, top_n, user_cap=500):
    """Score every ordered pair directly from Python sets; keep positive scores."""
    users_of = {item: set() for item in corpus.item_index}
    for user, s in corpus.sessions.items():
        if len(set(s.items)) > user_cap:
            continue
        for item in s.items:
            users_of[item].add(user)
    items = corpus.item_index.ids
    out = {}
    for a, i in enumerate(items):
        row = []
        for b, j in enumerate(items):
            if i == j:
                continue
            c = oracles.jaccard(users_of[i], users_of[j])
            f = oracles.jaccard(attrs.get(i, ()), attrs.get(j, ()))
            s = alpha * c + (1 - alpha) * f
            if s > 0:
                row.append((-s, b, j, s))
        row.sort()
        if row:
            out[i] = [(j, s) for _, _, j, s in row[:top_n]]
    return out


def random_attrs(rng, corpus, vocab=6, cold_frac=0.2):
    attrs = Attributes()
    for item in corpus.item_index:
        if rng.random() < cold_frac:
            continue
        attrs[item] = frozenset(f"a{int(x)}" for x in rng.integers(vocab, size=int(rng.integers(1, 4))))
    return attrs
