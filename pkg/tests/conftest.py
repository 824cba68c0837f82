import sys

import pytest

from profset.basket import Catalog, Product, Transaction, TransactionDb
from profset.mining import mine_frequent

# Supports chosen so that, out of 100 baskets, {cola} 10, {peanuts} 5,
# {cheese} 8, {cola,peanuts} 2, {peanuts,cheese} 1 and {cola,cheese} 0.
WORKED_LAYOUT = [
    (("cola", "peanuts"), 2),
    (("peanuts", "cheese"), 1),
    (("cola",), 8),
    (("peanuts",), 2),
    (("cheese",), 7),
    (("bread",), 80),
]
WORKED_MARGINS = {"cola": 10, "peanuts": 5, "cheese": 8, "bread": 3}


def worked_db():
    baskets = {}
    for items, count in WORKED_LAYOUT:
        for _ in range(count):
            baskets[f"t{len(baskets):03d}"] = items
    return TransactionDb.from_sets(baskets)


@pytest.fixture
def worked():
    db = worked_db()
    assert len(db) == 100
    return db


@pytest.fixture
def worked_index(worked):
    return mine_frequent(worked, 1)


@pytest.fixture
def worked_catalog():
    return Catalog.from_products(
        Product(i, i, f"cat-{i}", m) for i, m in WORKED_MARGINS.items()
    )


@pytest.fixture
def worked_txn():
    return Transaction("T100", {"cola": 1, "peanuts": 1, "cheese": 1})


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
