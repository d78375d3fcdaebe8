import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from simrec.data import ClickEvent, Kind, build_corpus  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_line():
    def emit(criterion, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] AC{criterion}: {detail}")
        print(ACCEPTANCE_LINES[-1])
    return emit


def make_events(rows):
    """rows: (user, item, ts[, kind]) tuples."""
    out = []
    for r in rows:
        kind = Kind.ADD_CART if len(r) > 3 and r[3] == "add_cart" else Kind.CLICK
        out.append(ClickEvent(r[0], r[1], r[2], kind))
    return out


def random_corpus(rng, n_users, n_items, max_len=12):
    events = []
    t = 0
    for u in range(n_users):
        for _ in range(int(rng.integers(1, max_len + 1))):
            t += 1
            events.append(ClickEvent(f"u{u}", f"i{int(rng.integers(n_items))}", t))
    return build_corpus(events)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
