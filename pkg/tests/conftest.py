import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

from icsarm.binarizer import Item, State, Transaction  # noqa: E402
from icsarm.historian import AttributeKind, AttributeSchema  # noqa: E402


@pytest.fixture
def small_schema():
    return [
        AttributeSchema("FIT101", AttributeKind.ANALOG, "m3/h"),
        AttributeSchema("MV101", AttributeKind.TERNARY_VALVE, "", "FIT101"),
        AttributeSchema("P101", AttributeKind.BINARY_ACTUATOR),
    ]


@pytest.fixture
def textbook_transactions():
    # the usual five-basket FP-growth example, items renamed to pumps
    baskets = [
        "ABCD", "BCE", "ABCE", "BE", "ABCE",
    ]
    names = {c: f"P{c}" for c in "ABCDE"}
    return [
        Transaction(ts, frozenset(Item(names[c], State.ON) for c in b)) for ts, b in enumerate(baskets)
    ]


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
