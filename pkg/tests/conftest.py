from datetime import datetime, timedelta, timezone
from itertools import count

import pytest

from polardyn.corpus import Tweet

T0 = datetime(2013, 6, 21, tzinfo=timezone.utc)
_ids = count()


def mk(text: str = "", author: str = "u1", day: int = 0, sec: int = 0, tid: str | None = None,
       repost_of: str | None = None) -> Tweet:
    """Build a tweet ``day`` days and ``sec`` seconds after a fixed origin."""
    if tid is None:
        tid = f"x{next(_ids):06d}"
    return Tweet(tid, author, T0 + timedelta(days=day, seconds=sec), text, repost_of)


@pytest.fixture
def tweet():
    return mk


# acceptance criteria append (name, passed, seconds, budget, detail) here
ACCEPTANCE: list[tuple[str, bool, float, float | None, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, secs, budget, detail in ACCEPTANCE:
        limit = f" / {budget:.0f}s" if budget else ""
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name} ({secs:.1f}s{limit}) {detail}")
