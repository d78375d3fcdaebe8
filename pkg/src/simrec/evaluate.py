"""Offline top-K hit ratio and add-cart hit ratio over next-item test cases."""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .data import Corpus
from .errors import AbsentItemError, UndefinedRatioError
from .ranking import RankedList, index_tiebreak, order_scored

DEFAULT_KS = (5, 10, 20)

Ranker = Callable[["EvalCase", Sequence[str], int], RankedList]


@dataclass(frozen=True)
class EvalCase:
    user_id: str
    position: int
    recent_items: tuple[str, ...]  # oldest first, ends with current_item
    current_item: str
    next_item: str
    next_is_addcart: bool

    @property
    def history(self) -> tuple[str, ...]:
        return self.recent_items[:-1]


def build_cases(test: Corpus, train: Corpus | None = None, history: int = 8,
                include_train_history: bool = True) -> list[EvalCase]:
    """One case per test event that has a successor in the same user's test sequence."""
    cases = []
    for user, session in test.sessions.items():
        prefix: list[str] = []
        if include_train_history and train is not None and user in train.sessions:
            prefix = train.sessions[user].items[-history:]
        items = session.items
        for i in range(len(items) - 1):
            recent = (prefix + items[: i + 1])[-history:]
            cases.append(EvalCase(user, i, tuple(recent), items[i], items[i + 1],
                                  session.events[i + 1].is_addcart))
    return cases


def hit(next_item: str, topk: RankedList) -> int:
    return int(any(item == next_item for item, _ in topk))


def _rank_safe(ranker: Ranker, case: EvalCase, pool: Sequence[str], k: int) -> RankedList:
    if not pool:
        return []
    try:
        return ranker(case, pool, k)
    except AbsentItemError:
        return []


def rank_cases(cases: Sequence[EvalCase], ranker: Ranker, pools, k: int, workers: int = 1) -> list[RankedList]:
    def one(case):
        return _rank_safe(ranker, case, pools.lookup(case.current_item), k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, cases))
    return [one(c) for c in cases]


def _ratio(hits: Iterable[int], n: int) -> float:
    if n == 0:
        raise UndefinedRatioError("no eligible cases")
    return sum(hits) / n


def hit_ratio(cases: Sequence[EvalCase], ranker: Ranker, k: int, pools,
              addcart_only: bool = False) -> float:
    """Fraction of (optionally add-cart-only) cases whose next item is in the top k."""
    if k < 1:
        raise ValueError("K must be >= 1")
    chosen = [c for c in cases if c.next_is_addcart] if addcart_only else list(cases)
    lists = rank_cases(chosen, ranker, pools, k)
    return _ratio((hit(c.next_item, r) for c, r in zip(chosen, lists)), len(chosen))


@dataclass
class EvalReport:
    rows: list[tuple[str, int, str, float, int]] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)

    def ratio(self, ranker: str, k: int, metric: str = "click") -> float:
        for name, kk, m, r, _ in self.rows:
            if (name, kk, m) == (ranker, k, metric):
                return r
        raise KeyError((ranker, k, metric))

    @property
    def rankers(self) -> list[str]:
        seen = []
        for name, *_ in self.rows:
            if name not in seen:
                seen.append(name)
        return seen + [n for n in self.skipped if n not in seen]

    def to_csv(self) -> str:
        lines = ["ranker,K,metric,ratio,cases"]
        for name, k, metric, r, n in self.rows:
            lines.append(f"{name},{k},{metric},{r:.6f},{n}")
        for name, why in self.skipped.items():
            lines.append(f"{name},,skipped,,0")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        ks = sorted({k for _, k, *_ in self.rows})
        header = f"{'ranker':<18}{'metric':<9}" + "".join(f"{'top' + str(k):>9}" for k in ks) + f"{'cases':>8}"
        out = [header, "-" * len(header)]
        for metric in ("click", "addcart"):
            for name in self.rankers:
                if name in self.skipped:
                    continue
                vals = {k: (r, n) for nm, k, m, r, n in self.rows if nm == name and m == metric}
                if not vals:
                    continue
                cells = "".join(f"{100 * vals[k][0]:>8.1f}%" if not math.isnan(vals[k][0]) else f"{'n/a':>9}"
                                for k in ks)
                out.append(f"{name:<18}{metric:<9}{cells}{vals[ks[0]][1]:>8}")
        for name, why in self.skipped.items():
            out.append(f"{name:<18}skipped: {why}")
        return "\n".join(out) + "\n"

    def write(self, csv_path, text_path=None) -> None:
        Path(csv_path).write_text(self.to_csv(), encoding="utf-8")
        if text_path is not None:
            Path(text_path).write_text(self.to_text(), encoding="utf-8")


def run_report(cases: Sequence[EvalCase], rankers: Mapping[str, Ranker | None], pools,
               ks: Sequence[int] = DEFAULT_KS, workers: int = 1) -> EvalReport:
    """Click and add-cart hit ratios per ranker per K.

    Each case is ranked once at max(ks); shorter lists are prefixes. Cases
    whose next item is missing from the pool count as misses. A ranker given
    as ``None`` is reported as skipped.
    """
    ks = sorted(ks)
    report = EvalReport()
    carts = [c.next_is_addcart for c in cases]
    n_cart = sum(carts)
    for name, ranker in rankers.items():
        if ranker is None:
            report.skipped[name] = "unavailable"
            continue
        lists = rank_cases(cases, ranker, pools, ks[-1], workers)
        for k in ks:
            hits = [hit(c.next_item, r[:k]) for c, r in zip(cases, lists)]
            click = sum(hits) / len(cases) if cases else float("nan")
            cart = sum(h for h, a in zip(hits, carts) if a) / n_cart if n_cart else float("nan")
            report.rows.append((name, k, "click", click, len(cases)))
            report.rows.append((name, k, "addcart", cart, n_cart))
    return report


# -- ranker adapters -------------------------------------------------------------


def image_ranker(store, order: Mapping[str, int] | None = None) -> Ranker:
    def rank(case, pool, k):
        return store.rank(case.current_item, pool, k, order)
    return rank


def cf_ranker(table, order: Mapping[str, int] | None = None) -> Ranker:
    """Order the pool by blended CF score (0 for pairs outside the table)."""
    tb = index_tiebreak(order)

    def rank(case, pool, k):
        scores = np.array([table.score(case.current_item, c) for c in pool])
        return order_scored(list(pool), scores, tb(pool), k)
    return rank


def item2vec_ranker(model) -> Ranker:
    from .item2vec import rank_by_item2vec

    def rank(case, pool, k):
        return rank_by_item2vec(model, case.current_item, pool, k)
    return rank


def personalized_ranker(model) -> Ranker:
    from .personalized import rank_candidates

    def rank(case, pool, k):
        return rank_candidates(model, case.history, case.current_item, pool, k)
    return rank


def random_ranker(seed: int = 0) -> Ranker:
    """Uniformly random pool order, reproducible per case."""
    def rank(case, pool, k):
        key = [seed, zlib.crc32(case.user_id.encode()), case.position]
        perm = np.random.default_rng(key).permutation(len(pool))[:k]
        return [(pool[i], 0.0) for i in perm]
    return rank


def oracle_ranker(case, pool, k):
    """Puts the true next item first whenever the pool holds it."""
    rest = [c for c in pool if c != case.next_item]
    head = [case.next_item] if case.next_item in pool else []
    return [(c, 1.0 if c == case.next_item else 0.0) for c in (head + rest)[:k]]
