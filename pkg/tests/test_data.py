import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_events
from simrec.data import (
    Attributes,
    ClickEvent,
    Kind,
    build_corpus,
    format_event_line,
    last_day_cutoff,
    load_attributes,
    parse_attributes,
    parse_event_line,
    read_events,
    split_events,
    temporal_split,
)
from simrec.errors import FieldCountError, KindError, ParseError, TimestampError

token = st.text(st.characters(blacklist_categories=("Cc", "Cs", "Zs", "Zl", "Zp")), min_size=1, max_size=8)


def test_parse_click():
    assert parse_event_line("u1\ti9\t1000\tclick") == ClickEvent("u1", "i9", 1000, Kind.CLICK)


def test_parse_add_cart():
    assert parse_event_line("u1\ti9\t1000\tadd_cart\n") == ClickEvent("u1", "i9", 1000, Kind.ADD_CART)


@pytest.mark.parametrize("line, exc", [
    ("u1\ti9\tabc\tclick", TimestampError),
    ("u1\ti9\t-5\tclick", TimestampError),
    ("u1\ti9\t1000", FieldCountError),
    ("u1\ti9\t1000\tclick\textra", FieldCountError),
    ("\ti9\t1000\tclick", FieldCountError),
    ("u1\ti9\t1000\tpurchase", KindError),
])
def test_parse_errors(line, exc):
    with pytest.raises(exc) as info:
        parse_event_line(line, lineno=7)
    assert info.value.lineno == 7
    assert "7" in str(info.value)


def test_parse_error_types_are_distinct():
    assert len({TimestampError, FieldCountError, KindError}) == 3
    assert all(issubclass(e, ParseError) for e in (TimestampError, FieldCountError, KindError))


@given(token, token, st.integers(0, 2**62), st.sampled_from(["click", "add_cart"]))
def test_round_trip(user, item, ts, kind):
    line = f"{user}\t{item}\t{ts}\t{kind}"
    assert format_event_line(parse_event_line(line)) == line
    assert format_event_line(parse_event_line(line + "\r\n")) == line


def test_read_events_skips_comments_and_reports_path(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("# header\nu1\ta\t1\tclick\n\nu1\tb\tx\tclick\n")
    with pytest.raises(TimestampError) as info:
        read_events(p)
    assert info.value.lineno == 4
    assert str(p) in str(info.value)
    p.write_text("# header\nu1\ta\t1\tclick\n")
    assert read_events(p) == [ClickEvent("u1", "a", 1)]


def test_build_corpus_sorts_by_time():
    c = build_corpus(make_events([("u1", "a", 3), ("u1", "b", 1)]))
    assert c.sessions["u1"].items == ["b", "a"]


def test_build_corpus_two_users_one_item():
    c = build_corpus(make_events([("u1", "a", 1), ("u2", "a", 2)]))
    assert len(c.sessions) == 2
    assert c.item_index.ids == ["a"]
    assert c.counts == {"a": 2}


def test_empty_corpus():
    c = build_corpus([])
    assert len(c) == 0 and c.n_items == 0


def test_ties_keep_input_order():
    c = build_corpus(make_events([("u", "x", 5), ("u", "y", 5), ("u", "z", 5)]))
    assert c.sessions["u"].items == ["x", "y", "z"]


def test_item_index_first_appearance():
    c = build_corpus(make_events([("u2", "q", 9), ("u1", "p", 1), ("u1", "q", 2)]))
    assert c.item_index.ids == ["q", "p"]


def test_consecutive_duplicates_collapse_and_addcart_sticks():
    c = build_corpus(make_events([("u", "a", 1), ("u", "a", 2, "add_cart"), ("u", "b", 3), ("u", "a", 4)]))
    s = c.sessions["u"]
    assert s.items == ["a", "b", "a"]
    assert s.events[0].kind is Kind.ADD_CART and s.events[0].timestamp_ms == 1
    assert s.addcart_items() == {"a"}


def test_addcart_kept_in_sequence():
    c = build_corpus(make_events([("u", "a", 1), ("u", "b", 2, "add_cart"), ("u", "c", 3)]))
    assert c.sessions["u"].items == ["a", "b", "c"]


events_strategy = st.lists(
    st.tuples(st.sampled_from(["u1", "u2", "u3"]), st.sampled_from(list("abcdef")),
              st.integers(0, 50), st.sampled_from(["click", "add_cart"])),
    max_size=40,
)


@given(events_strategy)
def test_sessions_time_ordered(rows):
    c = build_corpus(make_events(rows))
    for s in c.sessions.values():
        ts = [e.timestamp_ms for e in s.events]
        assert ts == sorted(ts)
        assert all(a != b for a, b in zip(s.items, s.items[1:]))


@given(events_strategy)
def test_item_index_bijection(rows):
    c = build_corpus(make_events(rows))
    idx = c.item_index
    assert set(idx.ids) == {r[1] for r in rows}
    for k in range(len(idx)):
        assert idx.index(idx.id_of(k)) == k


@given(events_strategy, st.integers(-1, 52))
def test_split_disjoint_and_complete(rows, cutoff):
    events = make_events(rows)
    train, test = split_events(events, cutoff)
    assert len(train) + len(test) == len(events)
    assert all(e.timestamp_ms < cutoff for e in train)
    assert all(e.timestamp_ms >= cutoff for e in test)
    assert {id(e) for e in train}.isdisjoint({id(e) for e in test})


def test_split_counts():
    events = make_events([("u", f"i{k}", k) for k in range(10)])
    train, test = split_events(events, 7)
    assert (len(train), len(test)) == (7, 3)
    tr, te = temporal_split(events, 7)
    assert tr.n_events == 7 and te.n_events == 3


def test_split_extremes():
    events = make_events([("u", f"i{k}", k + 10) for k in range(5)])
    tr, te = temporal_split(events, 0)
    assert tr.n_events == 0 and te.n_events == 5
    tr, te = temporal_split(events, 10**9)
    assert tr.n_events == 5 and te.n_events == 0


def test_last_day_cutoff():
    day = 86_400_000
    events = make_events([("u", "a", 3 * day + 5), ("u", "b", 7 * day + 17)])
    assert last_day_cutoff(events) == 7 * day


def test_attributes_parse():
    attrs = parse_attributes(["i1\tred\tdress\n", "i2\tred\tred\tskirt\n"])
    assert attrs["i1"] == {"red", "dress"}
    assert attrs["i2"] == {"red", "skirt"}
    assert attrs["unlisted"] == frozenset()
    assert "unlisted" not in attrs


def test_attributes_item_without_tokens():
    assert parse_attributes(["i1\n"])["i1"] == frozenset()


def test_attributes_malformed(tmp_path):
    p = tmp_path / "a.tsv"
    p.write_text("i1\tred\n\tblue\n")
    with pytest.raises(ParseError) as info:
        load_attributes(p)
    assert info.value.lineno == 2


def test_load_attributes(tmp_path):
    p = tmp_path / "ok.tsv"
    p.write_text("# comment\ni1\tred\n")
    attrs = load_attributes(p)
    assert isinstance(attrs, Attributes)
    assert attrs["i1"] == {"red"}


def test_click_event_invariants():
    with pytest.raises(ValueError):
        ClickEvent("", "i", 1)
    with pytest.raises(ValueError):
        ClickEvent("u", "i", -1)
