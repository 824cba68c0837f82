"""Acceptance criteria, one test each, with their runtime limits.

Every criterion records a PASS/FAIL line which the conftest terminal-summary
hook prints after the run (also when invoked as ``python tests/test_acceptance.py``).
"""
import functools
import json
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_frequent, random_db, random_model  # noqa: E402
from profset.allocation import (EXPECTED, SAMPLED, allocate_all, allocate_transaction,  # noqa: E402
                                maximal_frequent_subsets, theta, transaction_rng)
from profset.basket import Catalog, Product, Transaction, TransactionDb, transaction_margin  # noqa: E402
from profset.cli import main  # noqa: E402
from profset.mining import frequent_subsets_of, mine_frequent  # noqa: E402
from profset.optimizer import solve_brute, solve_exact  # noqa: E402
from profset.synth import SynthConfig, generate_synthetic  # noqa: E402

RESULTS = {}

DESK_CONFIG = {
    "n_products": 500, "n_categories": 30, "n_baskets": 20000, "mean_basket_size": 10.0,
    "popularity_skew": 0.3, "rare_categories": [29], "rare_weight": 0.0,
    "planted": [
        {"items": [31, 62], "probability": 0.04},
        {"items": [93, 154], "probability": 0.03},
        {"items": [245, 306], "probability": 0.05},
        {"items": [127, 398, 219], "probability": 0.02},
        {"items": [340, 461], "probability": 0.03},
    ],
}
MACHINE_ARTIFACTS = ("itemsets.jsonl", "allocation.jsonl", "model.json", "solution.json", "report.json")


def criterion(number, title, limit):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            started = time.perf_counter()
            try:
                # a test may report its own elapsed time (e.g. work done in a fixture)
                elapsed = fn(*args, **kwargs) or time.perf_counter() - started
                assert elapsed < limit, f"took {elapsed:.1f}s, limit {limit}s"
            except BaseException as exc:
                elapsed = time.perf_counter() - started
                RESULTS[number] = f"criterion {number} FAIL  {title} ({elapsed:.2f}s): {exc}".splitlines()[0]
                raise
            bound = "" if limit == float("inf") else f" < {limit}s"
            RESULTS[number] = f"criterion {number} PASS  {title} ({elapsed:.2f}s{bound})"
        return run
    return wrap


def worked_fixture():
    layout = [(("cola", "peanuts"), 2), (("peanuts", "cheese"), 1), (("cola",), 8),
              (("peanuts",), 2), (("cheese",), 7), (("bread",), 80)]
    baskets = {}
    for items, count in layout:
        for _ in range(count):
            baskets[f"t{len(baskets):03d}"] = items
    db = TransactionDb.from_sets(baskets)
    catalog = Catalog.from_products(
        Product(i, i, f"cat-{i}", m) for i, m in {"cola": 10, "peanuts": 5, "cheese": 8, "bread": 3}.items())
    return db, catalog


T100 = Transaction("T100", {"cola": 1, "peanuts": 1, "cheese": 1})


@criterion(1, "worked-example supports, maximal sets and theta", 1)
def test_criterion_1_worked_example():
    db, _ = worked_fixture()
    index = mine_frequent(db, 1)
    assert len(db) == 100
    assert ("cheese", "cola", "peanuts") not in index
    assert frequent_subsets_of(T100.items, index) == [
        (("cheese",), 8), (("cola",), 10), (("peanuts",), 5),
        (("cheese", "peanuts"), 1), (("cola", "peanuts"), 2),
    ]
    maximal = maximal_frequent_subsets(T100.items, index)
    assert maximal == [("cheese", "peanuts"), ("cola", "peanuts")]
    dist = theta((x, index.support(x)) for x in maximal)
    assert dist.probability(("cola", "peanuts")) == Fraction(2, 3)
    assert dist.probability(("cheese", "peanuts")) == Fraction(1, 3)


@criterion(2, "expected-mode oracle and sampled means within 3 SE", 10)
def test_criterion_2_expected_allocation():
    db, catalog = worked_fixture()
    index = mine_frequent(db, 1)
    exact = allocate_transaction(T100, index, catalog, mode=EXPECTED).contributions
    assert exact == {("cola", "peanuts"): 10, ("cheese",): Fraction(16, 3),
                     ("cheese", "peanuts"): Fraction(13, 3), ("cola",): Fraction(10, 3)}
    n = 10_000
    totals = {x: 0 for x in exact}
    squares = {x: 0 for x in exact}
    for seed in range(n):
        got = allocate_transaction(T100, index, catalog, rng=transaction_rng(seed, T100.id)).contributions
        for x in exact:
            v = got.get(x, 0)
            totals[x] += v
            squares[x] += v * v
    for x, mu in exact.items():
        mean = totals[x] / n
        var = squares[x] / n - mean * mean
        se = (var / n) ** 0.5
        assert abs(mean - float(mu)) <= 3 * se, (x, mean, float(mu), se)


def _synthetic_case(rng):
    cfg = SynthConfig(
        n_products=rng.randint(10, 60), n_categories=rng.randint(1, 8),
        n_baskets=rng.randint(20, 2000), mean_basket_size=rng.choice([2.0, 3.0, 4.0, 5.0]),
        popularity_skew=rng.choice([0.0, 0.5, 1.0]), margin_range=(1, rng.choice([5, 50, 500])),
        max_quantity=rng.randint(1, 4),
    )
    catalog, db = generate_synthetic(cfg, rng.randrange(2**31))
    return catalog, db, max(1, int(len(db) * rng.choice([0.005, 0.01, 0.03, 0.1])))


@criterion(3, "margin conservation on 100 synthetic dbs, both modes", 60)
def test_criterion_3_conservation():
    rng = random.Random(20240603)
    for _ in range(100):
        catalog, db, minsup = _synthetic_case(rng)
        index = mine_frequent(db, minsup)
        expected_total = sum(transaction_margin(t, catalog) for t in db)
        seed = rng.randrange(2**31)
        for mode in (SAMPLED, EXPECTED):
            res = allocate_all(db, index, catalog, seed=seed, mode=mode)
            assert res.total_input == expected_total
            assert res.total_allocated + res.total_residual == expected_total, (mode, seed)


@criterion(4, "Apriori equals brute force on 200 small dbs", 30)
def test_criterion_4_mining_oracle():
    rng = random.Random(7)
    for _ in range(200):
        db = random_db(rng, n_items=rng.randint(1, 8))
        minsup = rng.randint(1, 6)
        assert dict(mine_frequent(db, minsup).entries) == brute_force_frequent([t.items for t in db], minsup)


@criterion(5, "exact solver equals brute force on 200 random models", 60)
def test_criterion_5_solver_oracle():
    rng = random.Random(11)
    for _ in range(200):
        model = random_model(rng, max_items=18, max_sets=30)
        exact, brute = solve_exact(model), solve_brute(model)
        assert (exact.objective, exact.selected) == (brute.objective, brute.selected)


def _pipeline(data, out, threads):
    code = main(["run", "--catalog", str(data / "catalog.csv"), "--baskets", str(data / "baskets.csv"),
                 "--minsup", "30", "--item-max", "30", "--item-min-default", "1", "--seed", "7",
                 "--threads", str(threads), "--out-dir", str(out)])
    assert code == 0


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    (root / "synth.json").write_text(json.dumps(DESK_CONFIG))
    started = time.perf_counter()
    assert main(["generate", "--config", str(root / "synth.json"), "--seed", "1", "--out-dir", str(root)]) == 0
    _pipeline(root, root / "run1", threads=1)
    return root, time.perf_counter() - started


@criterion(6, "desk-scale pipeline, dominance over naive, report shape", 120)
def test_criterion_6_desk_protocol(desk, capsys):
    root, elapsed = desk
    assert elapsed < 120, f"pipeline took {elapsed:.1f}s"
    out = root / "run1"
    report = json.loads((out / "report.json").read_text())
    obj = report["objective"]
    assert obj["naive_minor_units"] is not None
    assert obj["profset_minor_units"] >= obj["naive_minor_units"]
    assert report["categories_total"] == 30
    rows = {r["category_id"]: r for r in report["improvements"]}
    assert rows["C29"]["improvement"] is None
    assert rows["C29"]["profset_pick"] == rows["C29"]["naive_pick"]
    assert len(report["products"]) == 30
    assert all(p["total_minor_units"] == p["own_minor_units"] + p["cross_minor_units"] for p in report["products"])
    text = (out / "report.txt").read_text()
    for header in ("Category", "PROFSET pick", "Naive pick", "Improvement",
                   "Own profit", "Cross-selling profit", "Total profit", "N/A"):
        assert header in text
    capsys.readouterr()
    return elapsed


@criterion(7, "byte-identical artifacts across runs and thread counts", float("inf"))
def test_criterion_7_determinism(desk, capsys):
    root, _ = desk
    _pipeline(root, root / "run2", threads=1)
    _pipeline(root, root / "run8", threads=8)
    for name in MACHINE_ARTIFACTS:
        first = (root / "run1" / name).read_bytes()
        assert first == (root / "run2" / name).read_bytes(), f"{name} differs between runs"
        assert first == (root / "run8" / name).read_bytes(), f"{name} differs with --threads 8"
    capsys.readouterr()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
