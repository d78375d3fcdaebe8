"""Per-item candidate pools assembled from CF, attribute, and new-item sources."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError

SOURCES = ("cf", "attribute", "new")
DEFAULT_POOL_SIZE = 200
DEFAULT_QUOTAS = (150, 40, 10)


@dataclass
class CandidatePool:
    pool_size: int = DEFAULT_POOL_SIZE
    pools: dict[str, list[str]] = field(default_factory=dict)
    sources: dict[str, list[str]] = field(default_factory=dict)

    def lookup(self, item: str) -> list[str]:
        return self.pools.get(item, [])

    def __contains__(self, item):
        return item in self.pools

    def __len__(self):
        return len(self.pools)

    def __eq__(self, other):
        return isinstance(other, CandidatePool) and self.pools == other.pools


def pool_lookup(pools: CandidatePool, item: str) -> list[str]:
    return pools.lookup(item)


def _ids(row: Iterable) -> list[str]:
    return [x[0] if isinstance(x, tuple) else x for x in row]


def fill_pool(
    item: str,
    ranked_sources: Sequence[Sequence[str]],
    quotas: Sequence[int],
    pool_size: int,
) -> tuple[list[str], list[str]]:
    """Take up to quota from each source in order; unused quota carries forward."""
    chosen: list[str] = []
    tags: list[str] = []
    seen = {item}
    carry = 0
    for name, source, quota in zip(SOURCES, ranked_sources, quotas):
        budget = min(quota + carry, pool_size - len(chosen))
        taken = 0
        for cand in source:
            if taken >= budget:
                break
            if cand in seen:
                continue
            seen.add(cand)
            chosen.append(cand)
            tags.append(name)
            taken += 1
        carry = quota + carry - taken
    return chosen, tags


def build_pools(
    items: Iterable[str],
    sim_table,
    attr_index: Mapping[str, Sequence],
    new_items: Sequence[str],
    quotas: Sequence[int] = DEFAULT_QUOTAS,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> CandidatePool:
    """Fill each item's pool in priority order cf -> attribute -> new.

    ``sim_table`` is a SimilarityTable (or any mapping-like with ``get``),
    ``attr_index`` maps item -> ranked (neighbor, score) attribute neighbors.
    """
    if len(quotas) != 3 or any(q < 0 for q in quotas):
        raise ValueError(f"quotas must be three non-negative counts, got {quotas}")
    if sum(quotas) > pool_size:
        raise ValueError(f"quota sum {sum(quotas)} exceeds pool_size {pool_size}")
    new_items = list(new_items)
    result = CandidatePool(pool_size)
    for item in items:
        chosen, tags = fill_pool(
            item,
            (_ids(sim_table.get(item) or ()), _ids(attr_index.get(item, ())), new_items),
            quotas,
            pool_size,
        )
        result.pools[item] = chosen
        result.sources[item] = tags
    return result


def write_pools(path, pools: CandidatePool) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item, cands in pools.pools.items():
            fh.write(item + "\t" + ",".join(cands) + "\n")


def read_pools(path, pool_size: int = DEFAULT_POOL_SIZE) -> CandidatePool:
    path = Path(path)
    result = CandidatePool(pool_size)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise ParseError("expected item<TAB>cand,cand,...", lineno, path)
            cands = [c for c in parts[1].split(",") if c]
            if len(cands) > pool_size:
                raise ParseError(f"pool of {len(cands)} exceeds pool_size {pool_size}", lineno, path)
            result.pools[parts[0]] = cands
    return result


def read_new_items(path) -> list[str]:
    with Path(path).open(encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
