"""Naive baseline, per-category improvement and per-product profit breakdowns.

Cross-selling profit of a product counts the FULL margin of every selected
multi-item set it belongs to, so summing it across products double-counts
shared sets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import IO, Iterable, Mapping

from .allocation import AllocationResult
from .basket import Catalog, Money
from .optimizer import ProfsetModel, Solution, objective_value

DOUBLE_COUNT_NOTE = (
    "cross-selling profit credits each selected multi-item set in full to every "
    "member; summing it over products double-counts shared sets"
)


@dataclass(frozen=True)
class ProfitBreakdown:
    product_id: str
    own_profit: Money
    cross_profit: Money

    @property
    def total(self) -> Money:
        return self.own_profit + self.cross_profit


@dataclass(frozen=True)
class CategoryImprovement:
    category_id: str
    profset_pick: str
    naive_pick: str
    cross_profset: Money
    cross_naive: Money
    improvement: Fraction | None  # None is N/A

    @property
    def changed(self) -> bool:
        return self.profset_pick != self.naive_pick


def own_profit(product_id: str, alloc: AllocationResult) -> Money:
    return alloc.own_margin(product_id)


def cross_profit(product_id: str, selection: Iterable[str], alloc: AllocationResult) -> Money:
    sel = set(selection)
    return sum(
        m for x, m in alloc.set_margins.items()
        if len(x) >= 2 and m > 0 and product_id in x and sel.issuperset(x)
    )


def naive_selection(catalog: Catalog, alloc: AllocationResult, cfg=None) -> dict:
    """Per category, the product with the highest own profit (ties: smallest id).

    ``cfg`` is accepted for symmetry with the optimizer; the baseline only
    makes sense for the one-delegate-per-category configuration.
    """
    picks = {}
    for cid, cat in catalog.categories.items():
        picks[cid] = min(cat.member_ids, key=lambda p: (-own_profit(p, alloc), p))
    return picks


def prefer_own_profit(model: ProfsetModel, solution: Solution, alloc: AllocationResult) -> Solution:
    """Re-pick inside categories that no model set touches.

    The objective cannot tell such members apart beyond their cost, so among
    equally cheap ones take the best own profit, as the naive baseline would.
    Objective and feasibility are unchanged.
    """
    touched = {i for x, _ in model.sets for i in x}
    members: dict = {}
    costs = {}
    for p, c, cost in model.items:
        members.setdefault(c, []).append(p)
        costs[p] = cost
    selected = set(solution.selected)
    for c, ids in members.items():
        if touched.intersection(ids):
            continue
        k = len(selected.intersection(ids))
        best = sorted(ids, key=lambda p: (costs[p], -own_profit(p, alloc), p))[:k]
        selected.difference_update(ids)
        selected.update(best)
    if selected == solution.selected or objective_value(model, selected) != solution.objective:
        return solution
    # untouched members belong to no set, so the active sets stay as they are
    return replace(solution, selected=frozenset(selected))


def product_breakdown(solution: Solution, alloc: AllocationResult) -> list:
    sel = solution.selected
    return [ProfitBreakdown(p, own_profit(p, alloc), cross_profit(p, sel, alloc)) for p in sorted(sel)]


def category_breakdown(category_id: str, selection: Iterable[str], catalog: Catalog,
                       alloc: AllocationResult) -> list:
    """Own/cross/total for every product of a category, each evaluated as if it
    were the category's delegate within ``selection``."""
    members = catalog.categories[category_id].member_ids
    others = [p for p in selection if p not in members]
    rows = []
    for p in sorted(members):
        rows.append(ProfitBreakdown(p, own_profit(p, alloc), cross_profit(p, others + [p], alloc)))
    rows.sort(key=lambda r: (-r.own_profit, r.product_id))
    return rows


def frequent_products(alloc: AllocationResult) -> set:
    return {i for x in alloc.set_margins for i in x}


def category_improvements(solution: Solution, naive_picks: Mapping[str, str], alloc: AllocationResult,
                          catalog: Catalog, frequent_items: Iterable[str] | None = None) -> list:
    """Cross-selling improvement of the optimized pick over the naive pick.

    N/A when the category has no frequent product or the naive pick earns no
    cross-selling profit; 0 when both picks agree.
    """
    frequent = set(frequent_items) if frequent_items is not None else frequent_products(alloc)
    naive_sel = set(naive_picks.values())
    out = []
    for cid, cat in catalog.categories.items():
        chosen = sorted(p for p in solution.selected if p in cat.member_ids)
        if not chosen or cid not in naive_picks:
            continue
        pick, naive = chosen[0], naive_picks[cid]
        cp = cross_profit(pick, solution.selected, alloc)
        cn = cross_profit(naive, naive_sel, alloc)
        if not frequent & cat.member_ids or cn <= 0:
            imp = None
        elif pick == naive:
            imp = Fraction(0)
        else:
            imp = Fraction(cp - cn, cn)
        out.append(CategoryImprovement(cid, pick, naive, cp, cn, imp))
    return out


def format_percent(imp: Fraction | None) -> str:
    return "N/A" if imp is None else f"{round(imp * 100)}%"


def _rational(imp: Fraction | None):
    return None if imp is None else f"{imp.numerator}/{imp.denominator}"


def build_report(catalog: Catalog, alloc: AllocationResult, model: ProfsetModel,
                 solution: Solution) -> dict:
    """Machine-readable report: exact integers and rational improvements."""
    naive = naive_selection(catalog, alloc, model.constraints)
    naive_sel = sorted(set(naive.values()))
    improvements = category_improvements(solution, naive, alloc, catalog)
    one_each = all(len(cat.member_ids & solution.selected) == 1 for cat in catalog.categories.values())
    report = {
        "allocation": {
            "mode": alloc.mode,
            "seed": alloc.seed,
            "total_input_minor_units": alloc.total_input,
            "allocated_to_sets_minor_units": alloc.total_allocated,
            "residual_minor_units": alloc.total_residual,
        },
        "objective": {
            "profset_minor_units": solution.objective,
            "naive_minor_units": objective_value(model, naive_sel) if one_each else None,
        },
        "categories_total": len(improvements),
        "categories_changed": sum(r.changed for r in improvements),
        "improvements": [
            {
                "category_id": r.category_id,
                "category_name": catalog.categories[r.category_id].name,
                "profset_pick": r.profset_pick,
                "naive_pick": r.naive_pick,
                "cross_profset_minor_units": r.cross_profset,
                "cross_naive_minor_units": r.cross_naive,
                "improvement": _rational(r.improvement),
            }
            for r in improvements
        ],
        "products": [
            {
                "product_id": b.product_id,
                "name": catalog.products[b.product_id].name,
                "category_id": catalog.products[b.product_id].category_id,
                "own_minor_units": b.own_profit,
                "cross_minor_units": b.cross_profit,
                "total_minor_units": b.total,
            }
            for b in product_breakdown(solution, alloc)
        ],
        "note": DOUBLE_COUNT_NOTE,
    }
    return report


def dump_report_json(report: dict, fh: IO[str]) -> None:
    json.dump(report, fh, indent=1, sort_keys=True)
    fh.write("\n")


def _table(header: list, rows: list, align: str) -> list:
    widths = [max(len(str(v)) for v in col) for col in zip(header, *rows)]
    lines = []
    for row in [header] + rows:
        cells = []
        for v, w, a in zip(row, widths, align):
            cells.append(str(v).ljust(w) if a == "l" else str(v).rjust(w))
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return lines


def render_text(report: dict) -> str:
    obj = report["objective"]
    out = [
        f"PROFSET objective: {obj['profset_minor_units']}",
        f"naive objective:   {obj['naive_minor_units'] if obj['naive_minor_units'] is not None else 'n/a'}",
        f"categories with a different pick: {report['categories_changed']} / {report['categories_total']}",
        "",
        "Cross-selling profit improvements",
    ]
    rows = []
    for r in report["improvements"]:
        imp = None if r["improvement"] is None else Fraction(r["improvement"])
        rows.append([r["category_name"], r["profset_pick"], r["naive_pick"], format_percent(imp)])
    out += _table(["Category", "PROFSET pick", "Naive pick", "Improvement"], rows, "lllr")
    out += ["", "Own and cross-selling profit per selected product"]
    rows = [
        [p["product_id"], p["name"], p["own_minor_units"], p["cross_minor_units"], p["total_minor_units"]]
        for p in report["products"]
    ]
    out += _table(["Product", "Name", "Own profit", "Cross-selling profit", "Total profit"], rows, "llrrr")
    out += ["", "note: " + report["note"]]
    return "\n".join(out) + "\n"
