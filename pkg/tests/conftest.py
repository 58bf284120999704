import numpy as np
import pytest
from hypothesis import strategies as st

from facepriv.attributes import AttributeSchema, AttributeTable, Record

TOY_NAMES = ("Male", "Big_Nose", "Black_Hair")


def make_table(rows, names=None, identities=None):
    rows = [tuple(int(v) for v in r) for r in rows]
    width = len(rows[0]) if rows else len(names or ())
    names = tuple(names or (f"a{i}" for i in range(width)))
    identities = identities or [str(i) for i in range(len(rows))]
    records = tuple(Record(f"{i:06d}.jpg", identities[i], r) for i, r in enumerate(rows))
    return AttributeTable(AttributeSchema(names), records)


@pytest.fixture
def toy():
    """The two-identity example: both male, same nose, only one with black hair."""
    return make_table([(1, 0, 1), (1, 0, 0)], TOY_NAMES, ["id_black", "id_other"])


@st.composite
def binary_tables(draw, max_records=12, width=4, min_records=1):
    n = draw(st.integers(min_records, max_records))
    rows = draw(st.lists(st.tuples(*[st.integers(0, 1)] * width), min_size=n, max_size=n))
    return make_table(rows)


def random_table(rng: np.random.Generator, max_records=12, width=4, min_records=1):
    n = int(rng.integers(min_records, max_records + 1))
    return make_table(rng.integers(0, 2, size=(n, width)).tolist())


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; the lines are printed after the run."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
