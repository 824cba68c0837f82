"""Product selection as a 0-1 program over frequent-set margins.

    maximize   sum_X M(X) * P_X  -  sum_i cost_i * Q_i
    subject to sum_i Q_i = item_max
               Q_i >= P_X               for every set X and every i in X
               sum_{i in C} Q_i >= item_min[C]   (and <= item_cap[C] if given)

Set variables are eliminated: with M(X) > 0 the optimum always has
P_X = 1 exactly when every member of X is selected, so a solution is just the
selected product set.  Sets with M(X) <= 0 never help and are dropped.

Ties between optimal selections are broken towards the lexicographically
smallest sorted list of product ids, in both solvers.
"""
from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import IO, Iterable, Mapping

from .allocation import AllocationResult
from .basket import Catalog, Money
from .errors import DataError, InfeasibleError, SolverBudgetError
from .mining import Itemset, canonical_key, itemset

BRUTE_FORCE_MAX_ITEMS = 25
DEFAULT_NODE_BUDGET = 10_000_000


@dataclass(frozen=True)
class ConstraintConfig:
    item_max: int
    item_min: Mapping[str, int] = field(default_factory=dict)
    item_cap: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def one_per_category(cls, catalog: Catalog) -> ConstraintConfig:
        """One delegate from every category."""
        cats = sorted(catalog.categories)
        return cls(len(cats), {c: 1 for c in cats})

    def violations(self, category_sizes: Mapping[str, int]) -> list:
        """Human-readable list of violated feasibility inequalities."""
        out = []
        if self.item_max < 1:
            out.append(f"item_max = {self.item_max} must be >= 1")
        for c in sorted(set(self.item_min) | set(self.item_cap)):
            if c not in category_sizes:
                out.append(f"constraint names unknown category {c!r}")
        total_min = sum(self.item_min.values())
        if total_min > self.item_max:
            out.append(f"sum of item_min = {total_min} > item_max = {self.item_max}")
        room = 0
        for c, size in sorted(category_sizes.items()):
            lo = self.item_min.get(c, 0)
            cap = self.item_cap.get(c)
            if lo < 0:
                out.append(f"item_min[{c}] = {lo} is negative")
            if lo > size:
                out.append(f"item_min[{c}] = {lo} > |{c}| = {size}")
            if cap is not None and cap < lo:
                out.append(f"item_cap[{c}] = {cap} < item_min[{c}] = {lo}")
            room += size if cap is None else min(size, cap)
        if self.item_max > room:
            out.append(f"item_max = {self.item_max} > selectable products = {room}")
        return out

    def check(self, category_sizes: Mapping[str, int]) -> None:
        problems = self.violations(category_sizes)
        if problems:
            raise InfeasibleError("infeasible constraints: " + "; ".join(problems))

    def to_dict(self) -> dict:
        return {
            "item_max": self.item_max,
            "item_min": dict(sorted(self.item_min.items())),
            "item_cap": dict(sorted(self.item_cap.items())),
        }


@dataclass(frozen=True)
class ProfsetModel:
    items: tuple
    sets: tuple
    constraints: ConstraintConfig

    def __post_init__(self):
        items = tuple(sorted((str(p), str(c), int(cost)) for p, c, cost in self.items))
        ids = [p for p, _, _ in items]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate product id in model")
        known = set(ids)
        merged: dict = {}
        for x, m in self.sets:
            x = itemset(x)
            missing = [i for i in x if i not in known]
            if missing:
                raise DataError(f"set {list(x)} references unknown items {missing}")
            merged[x] = merged.get(x, 0) + int(m)
        sets = tuple(sorted(((x, m) for x, m in merged.items() if m > 0), key=lambda s: canonical_key(s[0])))
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "sets", sets)
        self.constraints.check(self.category_sizes)

    @property
    def category_sizes(self) -> dict:
        sizes: dict = {}
        for _, c, _ in self.items:
            sizes[c] = sizes.get(c, 0) + 1
        return dict(sorted(sizes.items()))

    @property
    def item_ids(self) -> list:
        return [p for p, _, _ in self.items]

    def to_dict(self) -> dict:
        return {
            "items": [{"product_id": p, "category_id": c, "cost": cost} for p, c, cost in self.items],
            "sets": [{"itemset": list(x), "margin_minor_units": m} for x, m in self.sets],
            "constraints": self.constraints.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> ProfsetModel:
        cons = raw["constraints"]
        return cls(
            items=tuple((r["product_id"], r["category_id"], r["cost"]) for r in raw["items"]),
            sets=tuple((tuple(r["itemset"]), r["margin_minor_units"]) for r in raw["sets"]),
            constraints=ConstraintConfig(cons["item_max"], dict(cons.get("item_min", {})),
                                         dict(cons.get("item_cap", {}))),
        )


def dump_model(model: ProfsetModel, fh: IO[str]) -> None:
    json.dump(model.to_dict(), fh, indent=1, sort_keys=True)
    fh.write("\n")


def load_model(fh: IO[str]) -> ProfsetModel:
    try:
        return ProfsetModel.from_dict(json.load(fh))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed model file: {exc}") from exc


def build_model(alloc: AllocationResult, catalog: Catalog, cfg: ConstraintConfig) -> ProfsetModel:
    cfg.check({cid: len(cat.member_ids) for cid, cat in catalog.categories.items()})
    items = tuple((p.id, p.category_id, p.cost) for p in catalog.products.values())
    sets = tuple((x, m) for x, m in alloc.set_margins.items() if m > 0)
    return ProfsetModel(items, sets, cfg)


@dataclass(frozen=True)
class Solution:
    selected: frozenset
    active_sets: tuple
    objective: Money
    proof: str = "optimal"
    nodes: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        # wall time is left out so solution files stay byte-reproducible
        return {
            "selected": sorted(self.selected),
            "active_sets": [list(x) for x in self.active_sets],
            "objective_minor_units": self.objective,
            "proof": self.proof,
            "nodes": self.nodes,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> Solution:
        return cls(
            selected=frozenset(raw["selected"]),
            active_sets=tuple(tuple(x) for x in raw["active_sets"]),
            objective=int(raw["objective_minor_units"]),
            proof=raw.get("proof", "optimal"),
            nodes=int(raw.get("nodes", 0)),
        )


def objective_value(model: ProfsetModel, selected: Iterable[str]) -> Money:
    sel = set(selected)
    costs = {p: cost for p, _, cost in model.items}
    unknown = sel - costs.keys()
    if unknown:
        raise DataError(f"unknown product ids {sorted(unknown)}")
    gain = sum(m for x, m in model.sets if sel.issuperset(x))
    return gain - sum(costs[p] for p in sel)


def is_feasible(model: ProfsetModel, selected: Iterable[str]) -> bool:
    sel = set(selected)
    cfg = model.constraints
    if len(sel) != cfg.item_max:
        return False
    counts: dict = {}
    cat = {p: c for p, c, _ in model.items}
    for p in sel:
        counts[cat[p]] = counts.get(cat[p], 0) + 1
    for c in model.category_sizes:
        n = counts.get(c, 0)
        if n < cfg.item_min.get(c, 0) or n > cfg.item_cap.get(c, n):
            return False
    return True


def _solution(model: ProfsetModel, selected, nodes: int, started: float) -> Solution:
    sel = frozenset(selected)
    active = tuple(x for x, _ in model.sets if sel.issuperset(x))
    return Solution(sel, active, objective_value(model, sel), "optimal", nodes,
                    time.perf_counter() - started)


def solve_brute(model: ProfsetModel) -> Solution:
    """Exhaustive oracle over every selection of size ``item_max``."""
    n = len(model.items)
    if n > BRUTE_FORCE_MAX_ITEMS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_ITEMS} items, model has {n}")
    started = time.perf_counter()
    ids = model.item_ids
    bit = {p: 1 << k for k, p in enumerate(ids)}
    masks = [(sum(bit[i] for i in x), m) for x, m in model.sets]
    costs = [cost for _, _, cost in model.items]
    cats = [c for _, c, _ in model.items]
    cfg = model.constraints
    best, best_sel, seen = None, None, 0
    # combinations of a sorted list come out in lexicographic order
    for combo in combinations(range(n), cfg.item_max):
        seen += 1
        counts: dict = {}
        for k in combo:
            counts[cats[k]] = counts.get(cats[k], 0) + 1
        if any(counts.get(c, 0) < lo for c, lo in cfg.item_min.items()):
            continue
        if any(counts.get(c, 0) > cap for c, cap in cfg.item_cap.items()):
            continue
        sel = 0
        for k in combo:
            sel |= 1 << k
        value = sum(m for mask, m in masks if mask & sel == mask) - sum(costs[k] for k in combo)
        if best is None or value > best:
            best, best_sel = value, combo
    if best_sel is None:
        raise InfeasibleError("no feasible selection")
    return _solution(model, [ids[k] for k in best_sel], seen, started)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class _Search:
    """Depth-first branch and bound with binary branching on products.

    Products are branched on category by category (include first, most
    promising product first).  The id tie-break is folded into the score as
    a second component, ``sum(2**(n-1-rank))`` over selected products, which
    is largest exactly for the lexicographically smallest sorted id list
    among equal-size selections; scores compare as ``(objective, tie)``.

    Bounds come from relaxing the linking rows ``P_X <= Q_i`` with integer
    multipliers ``lam[X][i] >= 0``.  For fixed multipliers the relaxed
    problem separates: each set contributes ``max(0, M(X) - sum_i lam)`` and
    each product is worth ``sum_X lam - cost``, picked greedily under the
    category counts.  Any multipliers give a valid bound.  A cheap version
    with ``lam = ceil(M / undecided members)`` is maintained incrementally;
    when it fails to prune, a few subgradient steps (inherited from the
    parent node) tighten it.  The greedy picks double as primal solutions.
    """

    ROOT_ITERATIONS = 150
    NODE_ITERATIONS = 4

    def __init__(self, model: ProfsetModel, node_budget: int):
        self.node_budget = node_budget
        cfg = model.constraints
        self.ids = model.item_ids
        n = self.n = len(self.ids)
        index = {p: k for k, p in enumerate(self.ids)}
        cat_ids = list(model.category_sizes)
        cat_index = {c: j for j, c in enumerate(cat_ids)}
        self.cat = [cat_index[c] for _, c, _ in model.items]
        self.cost = [cost for _, _, cost in model.items]
        self.tie_weight = [1 << (n - 1 - k) for k in range(n)]
        sizes = [model.category_sizes[c] for c in cat_ids]
        self.ncat = len(cat_ids)
        self.lo = [cfg.item_min.get(c, 0) for c in cat_ids]
        self.cap = [min(sizes[j], cfg.item_cap.get(c, sizes[j])) for j, c in enumerate(cat_ids)]
        self.item_max = cfg.item_max

        self.members, self.margin = [], []
        for x, m in model.sets:
            ks = [index[i] for i in x]
            per_cat: dict = {}
            for k in ks:
                per_cat[self.cat[k]] = per_cat.get(self.cat[k], 0) + 1
            if len(ks) > self.item_max or any(v > self.cap[j] for j, v in per_cat.items()):
                continue  # can never be fully selected
            self.members.append(ks)
            self.margin.append(m)
        self.sets_of = [[] for _ in range(n)]
        for s, ks in enumerate(self.members):
            for k in ks:
                self.sets_of[k].append(s)

        self.status = [-1] * n
        self.undecided = [len(ks) for ks in self.members]
        self.excluded = [0] * len(self.members)
        self.share = [0] * n
        for s, ks in enumerate(self.members):
            part = _ceil_div(self.margin[s], len(ks))
            for k in ks:
                self.share[k] += part
        self.sel_c = [0] * self.ncat
        self.rem_c = sizes[:]
        self.sum_lo = sum(self.lo)
        self.sum_hi = sum(self.cap)
        self.s = 0
        self.value = 0      # completed sets minus cost of selected products
        self.tie = 0
        self.chosen = []
        self.nodes = 0
        self.best_score = None
        self.best = None

        # branching order: categories by their best root weight, then products
        w0 = [self.share[k] - self.cost[k] for k in range(n)]
        by_cat = [[] for _ in range(self.ncat)]
        for k in range(n):
            by_cat[self.cat[k]].append(k)
        for ks in by_cat:
            ks.sort(key=lambda k: (-w0[k], k))
        cats = sorted(range(self.ncat), key=lambda c: (-w0[by_cat[c][0]], c))
        self.order = [k for c in cats for k in by_cat[c]]

    # -- bookkeeping

    def _lo_hi(self, c):
        return (max(0, self.lo[c] - self.sel_c[c]),
                min(self.rem_c[c], self.cap[c] - self.sel_c[c]))

    def _try(self, k, include: bool) -> bool:
        """Whether deciding ``k`` keeps a feasible completion (current node is feasible)."""
        c = self.cat[k]
        lo0, hi0 = self._lo_hi(c)
        sel = self.sel_c[c] + include
        lo1 = max(0, self.lo[c] - sel)
        hi1 = min(self.rem_c[c] - 1, self.cap[c] - sel)
        if lo1 > hi1:
            return False
        r = self.item_max - self.s - include
        return self.sum_lo - lo0 + lo1 <= r <= self.sum_hi - hi0 + hi1

    def _count(self, k, include: bool, sign: int):
        c = self.cat[k]
        lo0, hi0 = self._lo_hi(c)
        self.sel_c[c] += sign * include
        self.rem_c[c] -= sign
        self.s += sign * include
        lo1, hi1 = self._lo_hi(c)
        self.sum_lo += lo1 - lo0
        self.sum_hi += hi1 - hi0

    def _include(self, k):
        self._count(k, True, 1)
        self.status[k] = 1
        self.value -= self.cost[k]
        self.tie += self.tie_weight[k]
        self.chosen.append(k)
        status, share, margin = self.status, self.share, self.margin
        for s in self.sets_of[k]:
            u = self.undecided[s] = self.undecided[s] - 1
            if self.excluded[s]:
                continue
            if u == 0:
                self.value += margin[s]
            else:
                delta = _ceil_div(margin[s], u) - _ceil_div(margin[s], u + 1)
                for j in self.members[s]:
                    if status[j] < 0:
                        share[j] += delta

    def _uninclude(self, k):
        status, share, margin = self.status, self.share, self.margin
        for s in self.sets_of[k]:
            u = self.undecided[s]
            self.undecided[s] = u + 1
            if self.excluded[s]:
                continue
            if u == 0:
                self.value -= margin[s]
            else:
                delta = _ceil_div(margin[s], u) - _ceil_div(margin[s], u + 1)
                for j in self.members[s]:
                    if status[j] < 0:
                        share[j] -= delta
        self.chosen.pop()
        self.tie -= self.tie_weight[k]
        self.value += self.cost[k]
        self.status[k] = -1
        self._count(k, True, -1)

    def _exclude(self, k):
        self._count(k, False, 1)
        self.status[k] = 0
        status, share, margin = self.status, self.share, self.margin
        for s in self.sets_of[k]:
            if not self.excluded[s]:
                part = _ceil_div(margin[s], self.undecided[s])
                for j in self.members[s]:
                    if status[j] < 0:
                        share[j] -= part
            self.excluded[s] += 1
            self.undecided[s] -= 1

    def _unexclude(self, k):
        status, share, margin = self.status, self.share, self.margin
        for s in self.sets_of[k]:
            self.undecided[s] += 1
            self.excluded[s] -= 1
            if not self.excluded[s]:
                part = _ceil_div(margin[s], self.undecided[s])
                for j in self.members[s]:
                    if status[j] < 0:
                        share[j] += part
        self.status[k] = -1
        self._count(k, False, -1)

    # -- bounding

    def _completion(self, p, weights: dict):
        """Best completion over ``order[p:]`` valuing products independently."""
        by_cat: dict = {}
        for k in self.order[p:]:
            by_cat.setdefault(self.cat[k], []).append((weights[k], k))
        r = self.item_max - self.s
        gain, picked, pool = 0, [], []
        for c, cands in by_cat.items():
            cands.sort(key=lambda t: (-t[0], t[1]))
            need, room = self._lo_hi(c)
            for w, k in cands[:need]:
                gain += w
                picked.append(k)
            pool.extend(cands[need:room])
        pool.sort(key=lambda t: (-t[0], t[1]))
        for w, k in pool[:r - len(picked)]:
            gain += w
            picked.append(k)
        return gain, picked

    def _share_bound(self, p) -> int:
        share, cost = self.share, self.cost
        gain, _ = self._completion(p, {k: share[k] - cost[k] for k in self.order[p:]})
        return self.value + gain

    def _lagrangian(self, p, lam):
        """Relaxed bound for multipliers ``lam``; also the greedy picks and,
        per live set, whether its relaxed set variable is on."""
        status = self.status
        w = {k: -self.cost[k] for k in self.order[p:]}
        fixed = -sum(self.cost[k] for k in self.chosen)
        live = []
        for s, ks in enumerate(self.members):
            if self.excluded[s]:
                continue
            row = lam[s]
            total = 0
            for t, j in enumerate(ks):
                if status[j] < 0:
                    w[j] += row[t]
                    total += row[t]
            slack = self.margin[s] - total
            if slack > 0:
                fixed += slack
            live.append((s, slack > 0))
        gain, picked = self._completion(p, w)
        return fixed + gain, picked, live

    def _ascent(self, p, lam, iterations):
        """Subgradient steps on the multipliers; returns the tightest bound seen."""
        status, members = self.status, self.members
        best_bound, best_lam = None, lam
        theta, stall = 1.0, 0
        for _ in range(iterations):
            bound, picked, live = self._lagrangian(p, lam)
            self._offer(picked)
            if best_bound is None or bound < best_bound:
                best_bound, best_lam, stall = bound, lam, 0
            else:
                stall += 1
                if stall >= 5:
                    theta, stall = theta / 2, 0
            if self._pruned(p, best_bound):
                break
            on = set(picked)
            moves = []
            for s, positive in live:
                for t, j in enumerate(members[s]):
                    if status[j] < 0:
                        g = (j in on) - positive
                        if g:
                            moves.append((s, t, g))
            if not moves:
                break  # relaxation solved exactly
            step = theta * (bound - self.best_score[0]) / len(moves)
            if step < 0.5:
                break
            lam = list(lam)
            touched = {}
            for s, t, g in moves:
                row = touched.get(s)
                if row is None:
                    row = touched[s] = lam[s] = list(lam[s])
                row[t] = max(0, row[t] - round(step * g))
        return best_bound, best_lam

    def _offer(self, picked):
        """Score a complete selection (chosen + picked) as a primal candidate."""
        sel = set(self.chosen)
        sel.update(picked)
        value = -sum(self.cost[k] for k in sel)
        for s, ks in enumerate(self.members):
            if sel.issuperset(ks):
                value += self.margin[s]
        score = (value, sum(self.tie_weight[k] for k in sel))
        if self.best_score is None or score > self.best_score:
            self.best_score, self.best = score, sorted(sel)

    def _tie_bound(self, p):
        r = self.item_max - self.s
        rest = sorted(self.order[p:])[:r]
        return self.tie + sum(self.tie_weight[k] for k in rest)

    def _pruned(self, p, bound) -> bool:
        best_value, best_tie = self.best_score
        return bound < best_value or (bound == best_value and self._tie_bound(p) <= best_tie)

    # -- search

    def run(self):
        lam = [[_ceil_div(m, len(ks))] * len(ks) for m, ks in zip(self.margin, self.members)]
        _, lam = self._ascent(0, lam, self.ROOT_ITERATIONS)
        self._dfs(0, lam)

    def _dfs(self, p, lam):
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise SolverBudgetError(f"branch and bound exceeded {self.node_budget} nodes")
        if self.s == self.item_max or p == self.n:
            # every step keeps a feasible completion, so the rest is all-excluded
            if (self.value, self.tie) > self.best_score:
                self.best_score = (self.value, self.tie)
                self.best = sorted(self.chosen)
            return
        k = self.order[p]
        ok_in = self._try(k, True)
        ok_out = self._try(k, False)
        if ok_in and ok_out:
            if self._pruned(p, self._share_bound(p)):
                return
            bound, lam = self._ascent(p, lam, self.NODE_ITERATIONS)
            if self._pruned(p, bound):
                return
        if ok_in:
            self._include(k)
            self._dfs(p + 1, lam)
            self._uninclude(k)
        if ok_out:
            self._exclude(k)
            self._dfs(p + 1, lam)
            self._unexclude(k)


def solve_exact(model: ProfsetModel, node_budget: int = DEFAULT_NODE_BUDGET) -> Solution:
    started = time.perf_counter()
    search = _Search(model, node_budget)
    if not (search.sum_lo <= search.item_max <= search.sum_hi):
        raise InfeasibleError("no feasible selection")
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, search.n + 200))
    try:
        search.run()
    finally:
        sys.setrecursionlimit(limit)
    return _solution(model, [search.ids[k] for k in search.best], search.nodes, started)
