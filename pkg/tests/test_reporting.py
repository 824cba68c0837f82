import io
import json
import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from oracles import random_db
from profset.allocation import AllocationResult, allocate_all
from profset.basket import Catalog, Product
from profset.mining import mine_frequent
from profset.optimizer import ConstraintConfig, Solution, build_model, objective_value, solve_exact
from profset.reporting import (build_report, category_breakdown, category_improvements, cross_profit,
                               dump_report_json, format_percent, naive_selection, own_profit,
                               prefer_own_profit, product_breakdown, render_text)


def alloc_of(sets, residuals=None):
    return AllocationResult(dict(sets), dict(residuals or {}), 0, 0, "sampled")


def catalog_of(spec):
    return Catalog.from_products(Product(p, p.upper(), c, 1) for p, c in spec)


def solve(catalog, alloc):
    model = build_model(alloc, catalog, ConstraintConfig.one_per_category(catalog))
    return model, prefer_own_profit(model, solve_exact(model), alloc)


SWEETS = catalog_of([("bar_a", "sweets"), ("bar_b", "sweets"), ("bar_c", "sweets"), ("bar_d", "sweets")])
SWEETS_ALLOC = alloc_of({("bar_a",): 37_808, ("bar_b",): 34_333, ("bar_c",): 28_728},
                       {"bar_d": 12_028})


def test_naive_picks_top_own_profit():
    assert naive_selection(SWEETS, SWEETS_ALLOC) == {"sweets": "bar_a"}


def test_naive_single_product():
    cat = catalog_of([("only", "solo")])
    assert naive_selection(cat, alloc_of({})) == {"solo": "only"}


def test_naive_tie_smallest_id():
    cat = catalog_of([("b", "k"), ("a", "k")])
    assert naive_selection(cat, alloc_of({("a",): 5, ("b",): 5})) == {"k": "a"}


def test_breakdown_totals():
    alloc = alloc_of({("bar_d",): 12_028, ("bar_d", "beer"): 264_228, ("beer",): 5})
    sol = Solution(frozenset({"bar_d", "beer"}), (("bar_d", "beer"),), 0)
    rows = {r.product_id: r for r in product_breakdown(sol, alloc)}
    assert (rows["bar_d"].own_profit, rows["bar_d"].cross_profit, rows["bar_d"].total) == (12_028, 264_228, 276_256)


def test_cross_zero_outside_selected_sets():
    alloc = alloc_of({("a", "b"): 40, ("a",): 3})
    assert cross_profit("a", {"a", "c"}, alloc) == 0


def test_shared_pair_fully_attributed():
    alloc = alloc_of({("a", "b"): 40})
    assert cross_profit("a", {"a", "b"}, alloc) == 40
    assert cross_profit("b", {"a", "b"}, alloc) == 40


# naive takes n (own 50000) but PROFSET prefers p: 40000 + 17200 beats 50000 + 2500
CRAFTED = catalog_of([("n", "sweets"), ("p", "sweets"), ("e", "beer")])
CRAFTED_ALLOC = alloc_of({("n",): 50_000, ("p",): 40_000, ("e",): 100_000,
                          ("e", "n"): 2_500, ("e", "p"): 17_200})


def test_crafted_588_percent():
    model, sol = solve(CRAFTED, CRAFTED_ALLOC)
    assert sol.selected == {"p", "e"}
    naive = naive_selection(CRAFTED, CRAFTED_ALLOC)
    rows = {r.category_id: r for r in category_improvements(sol, naive, CRAFTED_ALLOC, CRAFTED)}
    assert rows["sweets"].improvement == Fraction(588, 100)
    assert format_percent(rows["sweets"].improvement) == "588%"
    assert rows["beer"].improvement == 0 and not rows["beer"].changed
    assert format_percent(rows["beer"].improvement) == "0%"


def test_no_frequent_products_is_na():
    cat = catalog_of([("n", "sweets"), ("e", "beer"), ("f1", "fish"), ("f2", "fish")])
    alloc = alloc_of({("n",): 10, ("e",): 10, ("e", "n"): 7}, {"f1": 100, "f2": 500})
    _, sol = solve(cat, alloc)
    naive = naive_selection(cat, alloc)
    rows = {r.category_id: r for r in category_improvements(sol, naive, alloc, cat)}
    assert rows["fish"].improvement is None
    assert rows["fish"].profset_pick == rows["fish"].naive_pick == "f2"
    assert format_percent(None) == "N/A"


def test_category_breakdown_rows():
    rows = category_breakdown("sweets", ["e"], CRAFTED, CRAFTED_ALLOC)
    assert [(r.product_id, r.own_profit, r.cross_profit) for r in rows] == [
        ("n", 50_000, 2_500), ("p", 40_000, 17_200)]


def _random_pipeline(seed, minsup, max_size=None):
    rng = random.Random(seed)
    db = random_db(rng, n_items=8, max_txns=48)
    cats = {chr(ord("a") + k): f"c{rng.randrange(3)}" for k in range(8)}
    catalog = Catalog.from_products(Product(i, i, c, rng.randint(1, 40)) for i, c in cats.items())
    index = mine_frequent(db, minsup, max_size=max_size)
    alloc = allocate_all(db, index, catalog, seed=seed)
    return catalog, alloc


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 5))
def test_profset_dominates_naive(seed, minsup):
    catalog, alloc = _random_pipeline(seed, minsup)
    model, sol = solve(catalog, alloc)
    naive = set(naive_selection(catalog, alloc).values())
    assert sol.objective == objective_value(model, sol.selected)
    assert sol.objective >= objective_value(model, naive)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9))
def test_without_multi_item_sets_selections_coincide(seed):
    # at minsup 1 every bought item is frequent, so no margin is left as residual
    catalog, alloc = _random_pipeline(seed, 1, max_size=1)
    assert alloc.total_residual == 0
    _, sol = solve(catalog, alloc)
    assert sol.selected == set(naive_selection(catalog, alloc).values())


def test_report_shapes():
    model, sol = solve(CRAFTED, CRAFTED_ALLOC)
    report = build_report(CRAFTED, CRAFTED_ALLOC, model, sol)
    assert report["categories_total"] == 2 and report["categories_changed"] == 1
    assert report["objective"]["profset_minor_units"] == 157_200
    assert report["objective"]["naive_minor_units"] == 152_500
    imp = {r["category_id"]: r["improvement"] for r in report["improvements"]}
    assert imp == {"beer": "0/1", "sweets": "147/25"}
    buf = io.StringIO()
    dump_report_json(report, buf)
    assert json.loads(buf.getvalue()) == report
    text = render_text(report)
    assert "588%" in text and "double-counts" in text


def test_own_profit_adds_residual():
    assert own_profit("bar_d", alloc_of({("bar_d",): 10}, {"bar_d": 4})) == 14
