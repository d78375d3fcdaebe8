"""Clickstream ingestion: event parsing, per-user sessions, temporal split."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import FieldCountError, KindError, ParseError, TimestampError

DAY_MS = 86_400_000


class Kind(enum.Enum):
    CLICK = "click"
    ADD_CART = "add_cart"


@dataclass(frozen=True)
class ClickEvent:
    user_id: str
    item_id: str
    timestamp_ms: int
    kind: Kind = Kind.CLICK

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise ValueError("user_id and item_id must be non-empty")
        if self.timestamp_ms < 0:
            raise ValueError(f"negative timestamp {self.timestamp_ms}")


@dataclass(frozen=True)
class SessionEvent:
    item_id: str
    timestamp_ms: int
    kind: Kind

    @property
    def is_addcart(self) -> bool:
        return self.kind is Kind.ADD_CART


@dataclass(frozen=True)
class Session:
    """One user's time-ordered visits."""

    user_id: str
    events: tuple[SessionEvent, ...]

    @property
    def items(self) -> list[str]:
        return [e.item_id for e in self.events]

    def addcart_items(self) -> set[str]:
        return {e.item_id for e in self.events if e.is_addcart}

    def __len__(self):
        return len(self.events)


class ItemIndex:
    """Bijection between item ids and dense indices 0..n-1 (first-appearance order)."""

    def __init__(self, ids: Iterable[str] = ()):
        self._ids: list[str] = []
        self._pos: dict[str, int] = {}
        for item in ids:
            self.add(item)

    def add(self, item_id: str) -> int:
        k = self._pos.get(item_id)
        if k is None:
            k = len(self._ids)
            self._ids.append(item_id)
            self._pos[item_id] = k
        return k

    def index(self, item_id: str) -> int:
        return self._pos[item_id]

    def get(self, item_id: str, default=None):
        return self._pos.get(item_id, default)

    def id_of(self, k: int) -> str:
        return self._ids[k]

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def __contains__(self, item_id):
        return item_id in self._pos

    def __len__(self):
        return len(self._ids)

    def __iter__(self):
        return iter(self._ids)

    def __eq__(self, other):
        return isinstance(other, ItemIndex) and self._ids == other._ids


@dataclass
class Corpus:
    sessions: dict[str, Session] = field(default_factory=dict)
    item_index: ItemIndex = field(default_factory=ItemIndex)
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    @property
    def n_events(self) -> int:
        return sum(len(s) for s in self.sessions.values())

    def __len__(self):
        return len(self.sessions)


# -- parsing -----------------------------------------------------------------


def parse_event_line(line: str, lineno: int | None = None) -> ClickEvent:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 4:
        raise FieldCountError(f"expected 4 tab-separated fields, got {len(fields)}", lineno)
    user, item, ts, kind = fields
    if not user or not item:
        raise FieldCountError("empty user or item field", lineno)
    try:
        timestamp = int(ts)
    except ValueError:
        raise TimestampError(f"non-integer timestamp {ts!r}", lineno) from None
    if timestamp < 0:
        raise TimestampError(f"negative timestamp {timestamp}", lineno)
    try:
        k = Kind(kind)
    except ValueError:
        raise KindError(f"unknown event kind {kind!r}", lineno) from None
    return ClickEvent(user, item, timestamp, k)


def format_event_line(event: ClickEvent) -> str:
    return f"{event.user_id}\t{event.item_id}\t{event.timestamp_ms}\t{event.kind.value}"


def iter_events(lines: Iterable[str]) -> Iterator[ClickEvent]:
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        yield parse_event_line(line, lineno)


def read_events(path) -> list[ClickEvent]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        try:
            return list(iter_events(fh))
        except ParseError as exc:
            exc.path = path
            raise


def write_events(path, events: Iterable[ClickEvent]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in events:
            fh.write(format_event_line(e) + "\n")


# -- corpus ------------------------------------------------------------------


def build_corpus(events: Iterable[ClickEvent]) -> Corpus:
    by_user: dict[str, list[ClickEvent]] = {}
    index = ItemIndex()
    for e in events:
        by_user.setdefault(e.user_id, []).append(e)
        index.add(e.item_id)

    sessions = {}
    counts: dict[str, int] = {}
    for user, evs in by_user.items():
        evs.sort(key=lambda e: e.timestamp_ms)  # stable: ties keep input order
        collapsed: list[SessionEvent] = []
        for e in evs:
            if collapsed and collapsed[-1].item_id == e.item_id:
                # a repeated visit keeps the first timestamp; add-cart is sticky
                if e.kind is Kind.ADD_CART and not collapsed[-1].is_addcart:
                    prev = collapsed[-1]
                    collapsed[-1] = SessionEvent(prev.item_id, prev.timestamp_ms, Kind.ADD_CART)
                continue
            collapsed.append(SessionEvent(e.item_id, e.timestamp_ms, e.kind))
        for se in collapsed:
            counts[se.item_id] = counts.get(se.item_id, 0) + 1
        sessions[user] = Session(user, tuple(collapsed))
    return Corpus(sessions, index, counts)


def split_events(events: Iterable[ClickEvent], cutoff_ms: int) -> tuple[list[ClickEvent], list[ClickEvent]]:
    train, test = [], []
    for e in events:
        (train if e.timestamp_ms < cutoff_ms else test).append(e)
    return train, test


def temporal_split(events: Iterable[ClickEvent], cutoff_ms: int) -> tuple[Corpus, Corpus]:
    """Events strictly before ``cutoff_ms`` train, the rest test."""
    train, test = split_events(events, cutoff_ms)
    return build_corpus(train), build_corpus(test)


def last_day_cutoff(events: Iterable[ClickEvent]) -> int:
    """Start of the UTC day holding the latest event (hold out the final day)."""
    latest = max(e.timestamp_ms for e in events)
    return (latest // DAY_MS) * DAY_MS


# -- attributes --------------------------------------------------------------


class Attributes(dict):
    """item_id -> frozenset of attribute tokens; unlisted items map to the empty set."""

    def __missing__(self, key):
        return frozenset()


def parse_attributes(lines: Iterable[str]) -> Attributes:
    attrs = Attributes()
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        item = fields[0]
        if not item or any(not tok for tok in fields[1:]):
            raise ParseError("empty item id or attribute token", lineno)
        attrs[item] = frozenset(fields[1:])
    return attrs


def load_attributes(path) -> Attributes:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        try:
            return parse_attributes(fh)
        except ParseError as exc:
            exc.path = path
            raise


def write_attributes(path, attrs: dict[str, Iterable[str]]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item, toks in attrs.items():
            fh.write("\t".join([item, *sorted(toks)]) + "\n")
