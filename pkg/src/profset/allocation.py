"""Allocate transaction margins to frequent itemsets.

Each transaction is decomposed into a sequence of disjoint frequent sets: if
what remains of the basket is itself frequent it takes the remaining margin
whole; otherwise one of the largest frequent subsets of the remainder is
drawn with probability proportional to its support, its items' margin is
credited to it, and its items are removed.  Items never claimed this way
keep their margin as a per-item residual.

Two modes:

``sampled``
    the randomized procedure.  Every transaction gets its own random stream
    derived from ``(seed, transaction id)``, so results do not depend on
    processing order or thread count.
``expected``
    the exact expectation of the sampled procedure, obtained by walking the
    full draw tree with memoization on the remaining item set.  Intended as
    a deterministic oracle; worst-case exponential, hence the state budget.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Mapping

from .basket import Catalog, Money, Transaction, TransactionDb, items_margin, transaction_margin
from .errors import DataError, ExpectedModeBudgetError
from .mining import FrequentSetIndex, Itemset, canonical_key, itemset

SAMPLED = "sampled"
EXPECTED = "expected"
MODES = (SAMPLED, EXPECTED)
DEFAULT_STATE_BUDGET = 100_000


@dataclass(frozen=True)
class AllocationDistribution:
    candidates: tuple
    total_weight: int

    def probability(self, x: Itemset) -> Fraction:
        for c, w in self.candidates:
            if c == x:
                return Fraction(w, self.total_weight)
        return Fraction(0)

    @property
    def probabilities(self) -> list:
        return [(c, Fraction(w, self.total_weight)) for c, w in self.candidates]

    def draw(self, rng: random.Random) -> Itemset:
        # randrange rejection-samples getrandbits output: exact integer odds
        r = rng.randrange(self.total_weight)
        for c, w in self.candidates:
            if r < w:
                return c
            r -= w
        raise AssertionError("unreachable: r < total_weight")


def maximal_frequent_subsets(t, index: FrequentSetIndex) -> list:
    """Frequent subsets of ``t`` of the largest size present (cardinality, not inclusion)."""
    items = frozenset(t) & index.frequent_items
    for k in range(min(len(items), index.max_size), 0, -1):
        found = index.subsets_of_size(items, k)
        if found:
            return found
    return []


def theta(maximals) -> AllocationDistribution:
    """Support-proportional distribution over ``(itemset, support)`` pairs."""
    cands = tuple((x, int(w)) for x, w in maximals)
    if not cands:
        raise ValueError("theta needs at least one candidate")
    for x, w in cands:
        if w <= 0:
            raise ValueError(f"candidate {x} has non-positive support {w}")
    return AllocationDistribution(cands, sum(w for _, w in cands))


def _theta_for(remaining: frozenset, index: FrequentSetIndex):
    maximals = maximal_frequent_subsets(remaining, index)
    if not maximals:
        return None
    return theta((x, index.entries[x]) for x in maximals)


def transaction_rng(seed: int, transaction_id: str) -> random.Random:
    digest = hashlib.blake2b(f"{seed}\x1f{transaction_id}".encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass
class TransactionAllocation:
    contributions: dict
    residuals: dict
    draws: list = field(default_factory=list)


def allocate_transaction(t: Transaction, index: FrequentSetIndex, catalog: Catalog,
                         rng: random.Random | None = None, mode: str = SAMPLED,
                         state_budget: int = DEFAULT_STATE_BUDGET) -> TransactionAllocation:
    """Split ``m(t)`` over frequent sets (and leftover items).

    Sampled mode returns integer margins and the ordered list of drawn sets.
    Expected mode returns exact ``Fraction`` expectations and no draws.
    """
    if mode == SAMPLED:
        if rng is None:
            raise ValueError("sampled mode needs a random stream")
        return _allocate_sampled(t, index, catalog, rng)
    if mode == EXPECTED:
        return _allocate_expected(t, index, catalog, state_budget)
    raise ValueError(f"unknown mode {mode!r}")


def _allocate_sampled(t, index, catalog, rng) -> TransactionAllocation:
    remaining = t.items
    contributions: dict = {}
    draws = []
    while remaining:
        whole = itemset(remaining)
        if whole in index.entries:
            x = whole
        else:
            dist = _theta_for(remaining, index)
            if dist is None:
                break
            x = dist.draw(rng)
        contributions[x] = contributions.get(x, 0) + items_margin(t, x, catalog)
        draws.append(x)
        remaining = remaining.difference(x)
    residuals = {i: items_margin(t, (i,), catalog) for i in sorted(remaining)}
    return TransactionAllocation(contributions, residuals, draws)


def draw_profile(items: frozenset, index: FrequentSetIndex,
                 state_budget: int = DEFAULT_STATE_BUDGET, memo: dict | None = None):
    """Probabilities that each set gets drawn and each item ends up residual.

    Depends only on the item set, not on margins.
    """
    den, sets, leftover = _walk_profile(frozenset(items), index, state_budget, {} if memo is None else memo)
    return ({x: Fraction(n, den) for x, n in sets.items()},
            {i: Fraction(n, den) for i, n in leftover.items()})


def _walk_profile(items, index, state_budget, memo):
    # Each state maps to (den, set numerators, residual numerators): plain
    # integers over one common denominator are much cheaper than Fractions.
    expanded = 0

    def walk(rem: frozenset):
        nonlocal expanded
        hit = memo.get(rem)
        if hit is not None:
            return hit
        expanded += 1
        if expanded > state_budget:
            raise ExpectedModeBudgetError(
                f"expected-mode allocation exceeded {state_budget} states; "
                "use sampled mode or raise the state budget")
        den, sets, leftover = 1, {}, {}
        whole = itemset(rem)
        if not rem:
            pass
        elif whole in index.entries:
            sets[whole] = 1
        else:
            dist = _theta_for(rem, index)
            cands = [] if dist is None else [x for x, _ in dist.candidates]
            claimed = frozenset().union(*cands)
            if dist is None:
                leftover = dict.fromkeys(rem, 1)
            elif len(claimed) == sum(len(x) for x in cands):
                # pairwise disjoint: every candidate gets drawn whatever the order
                den, sub_sets, leftover = walk(rem.difference(claimed))
                sets = dict(sub_sets)
                for x in cands:
                    sets[x] = sets.get(x, 0) + den
            else:
                children = [(w, walk(rem.difference(x))) for x, w in dist.candidates]
                common = math.lcm(*(child[0] for _, child in children))
                den = dist.total_weight * common
                for (x, w), (_, (d, sub_sets, sub_left)) in zip(dist.candidates, children):
                    sets[x] = sets.get(x, 0) + w * common
                    f = w * (common // d)
                    for y, n in sub_sets.items():
                        sets[y] = sets.get(y, 0) + f * n
                    for i, n in sub_left.items():
                        leftover[i] = leftover.get(i, 0) + f * n
                g = math.gcd(den, *sets.values(), *leftover.values())
                if g > 1:
                    den //= g
                    sets = {y: n // g for y, n in sets.items()}
                    leftover = {i: n // g for i, n in leftover.items()}
        memo[rem] = (den, sets, leftover)
        return memo[rem]

    return walk(items)


def _allocate_expected(t, index, catalog, state_budget, profiles=None) -> TransactionAllocation:
    # ``profiles`` caches whole-basket results by item set; each basket still
    # walks with a fresh memo so the state budget never depends on what other
    # baskets (or other threads' chunks) happened to explore first
    profiles = {} if profiles is None else profiles
    hit = profiles.get(t.items)
    if hit is None:
        hit = profiles[t.items] = _walk_profile(t.items, index, state_budget, {})
    den, sets, leftover = hit
    contributions = {x: Fraction(n * items_margin(t, x, catalog), den) for x, n in sets.items()}
    residuals = {i: Fraction(n * items_margin(t, (i,), catalog), den) for i, n in sorted(leftover.items())}
    return TransactionAllocation(contributions, residuals)


def _round_to_money(t: Transaction, alloc: TransactionAllocation, catalog: Catalog):
    """Floor every expectation; the transaction's rounding residue goes to the
    residual of its smallest product id so the total stays exact."""
    sets = {x: v.numerator // v.denominator for x, v in alloc.contributions.items()}
    residuals = {i: v.numerator // v.denominator for i, v in alloc.residuals.items()}
    residue = transaction_margin(t, catalog) - sum(sets.values()) - sum(residuals.values())
    if residue:
        first = min(t.lines)
        residuals[first] = residuals.get(first, 0) + residue
    return sets, residuals


@dataclass(frozen=True)
class AllocationResult:
    set_margins: Mapping[Itemset, Money]
    item_residuals: Mapping[str, Money]
    total_input: Money
    seed: int
    mode: str
    audit: tuple = ()

    @property
    def total_allocated(self) -> Money:
        return sum(self.set_margins.values())

    @property
    def total_residual(self) -> Money:
        return sum(self.item_residuals.values())

    def own_margin(self, product_id: str) -> Money:
        return self.set_margins.get((product_id,), 0) + self.item_residuals.get(product_id, 0)


def _allocate_chunk(txns, index, catalog, seed, mode, state_budget, audit):
    sets, residuals = Counter(), Counter()
    total = 0
    log = []
    profiles: dict = {}
    for t in txns:
        total += transaction_margin(t, catalog)
        if mode == SAMPLED:
            a = _allocate_sampled(t, index, catalog, transaction_rng(seed, t.id))
            s, r = a.contributions, a.residuals
            if audit:
                log.extend((t.id, x) for x in a.draws)
        else:
            a = _allocate_expected(t, index, catalog, state_budget, profiles)
            s, r = _round_to_money(t, a, catalog)
            if audit:
                log.extend((t.id, x) for x in a.contributions)
        sets.update(s)
        residuals.update(r)
    return sets, residuals, total, log


def allocate_all(db: TransactionDb, index: FrequentSetIndex, catalog: Catalog, seed: int = 0,
                 mode: str = SAMPLED, threads: int = 1, state_budget: int = DEFAULT_STATE_BUDGET,
                 audit: bool = False) -> AllocationResult:
    """Allocate every transaction; output is independent of ``threads``.

    With ``audit`` the result carries ``(transaction_id, itemset)`` for every
    set credited (drawn sets in sampled mode, reachable sets in expected mode).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    txns = list(db)
    if threads <= 1 or len(txns) < 2 * threads:
        parts = [_allocate_chunk(txns, index, catalog, seed, mode, state_budget, audit)]
    else:
        size = -(-len(txns) // threads)
        chunks = [txns[i:i + size] for i in range(0, len(txns), size)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda ch: _allocate_chunk(ch, index, catalog, seed, mode, state_budget, audit), chunks))
    sets, residuals = Counter(), Counter()
    total = 0
    log = []
    for s, r, tot, lg in parts:
        sets.update(s)
        residuals.update(r)
        total += tot
        log.extend(lg)
    return AllocationResult(
        set_margins={x: sets[x] for x in sorted(sets, key=canonical_key)},
        item_residuals={i: residuals[i] for i in sorted(residuals)},
        total_input=total,
        seed=seed,
        mode=mode,
        audit=tuple(log),
    )


# ------------------------------------------------------------------- dumps

def dump_allocation(result: AllocationResult, fh: IO[str]) -> None:
    """JSON lines: a meta line, then itemset margins, then item residuals."""
    fh.write(json.dumps({"mode": result.mode, "seed": result.seed,
                         "total_input_minor_units": result.total_input}) + "\n")
    for x, m in result.set_margins.items():
        fh.write(json.dumps({"itemset": list(x), "margin_minor_units": m}) + "\n")
    for i, m in result.item_residuals.items():
        fh.write(json.dumps({"residual_item": i, "margin_minor_units": m}) + "\n")


def load_allocation(fh: IO[str]) -> AllocationResult:
    meta = None
    sets, residuals = {}, {}
    for n, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"allocation dump line {n}: {exc}") from exc
        if "itemset" in rec:
            sets[itemset(rec["itemset"])] = int(rec["margin_minor_units"])
        elif "residual_item" in rec:
            residuals[rec["residual_item"]] = int(rec["margin_minor_units"])
        elif "mode" in rec:
            meta = rec
        else:
            raise DataError(f"allocation dump line {n}: unrecognized record")
    if meta is None:
        raise DataError("allocation dump lacks its header line")
    return AllocationResult(
        set_margins=dict(sorted(sets.items(), key=lambda kv: canonical_key(kv[0]))),
        item_residuals=dict(sorted(residuals.items())),
        total_input=int(meta["total_input_minor_units"]),
        seed=int(meta["seed"]),
        mode=meta["mode"],
    )
