"""Level-wise (Apriori) frequent itemset mining with absolute support counts.

An itemset is a sorted tuple of product ids, so equal sets compare equal and
hash alike.  Lists of itemsets are always returned in canonical order: size
ascending, then lexicographic.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import IO, Iterable, Mapping

from .basket import TransactionDb
from .errors import DataError

Itemset = tuple


def itemset(items: Iterable[str]) -> Itemset:
    return tuple(sorted(set(items)))


def canonical_key(x: Itemset):
    return (len(x), x)


@dataclass(frozen=True)
class FrequentSetIndex:
    entries: Mapping[Itemset, int]
    minsup: int
    txn_count: int
    _by_size: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ordered = dict(sorted(self.entries.items(), key=lambda kv: canonical_key(kv[0])))
        by_size = defaultdict(list)
        for x in ordered:
            by_size[len(x)].append(x)
        object.__setattr__(self, "entries", ordered)
        object.__setattr__(self, "_by_size", dict(by_size))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, x) -> bool:
        return x in self.entries

    def support(self, x: Itemset) -> int:
        return self.entries.get(x, 0)

    @property
    def max_size(self) -> int:
        return max(self._by_size, default=0)

    @property
    def frequent_items(self) -> frozenset:
        return frozenset(x[0] for x in self._by_size.get(1, ()))

    def of_size(self, k: int) -> list:
        return self._by_size.get(k, [])

    def subsets_of_size(self, items: frozenset, k: int) -> list:
        """Entries of size ``k`` contained in ``items``, canonical order.

        Enumerates the k-combinations of ``items`` or scans the stored
        entries of size ``k``, whichever is smaller.
        """
        stored = self._by_size.get(k)
        if not stored or k > len(items):
            return []
        if comb(len(items), k) <= len(stored):
            entries = self.entries
            return [c for c in combinations(sorted(items), k) if c in entries]
        return [x for x in stored if items.issuperset(x)]


def mine_frequent(db: TransactionDb, minsup: int, max_size: int | None = None,
                  threads: int = 1) -> FrequentSetIndex:
    """All itemsets contained in at least ``minsup`` transactions, exact counts.

    ``max_size`` caps the itemset length (a speed knob only).  ``threads``
    splits support counting across workers; the result does not depend on it.
    """
    if minsup < 1:
        raise ValueError(f"minsup must be >= 1, got {minsup}")
    if len(db) == 0:
        raise DataError("cannot mine an empty transaction database")

    counts1 = Counter()
    for t in db:
        counts1.update(t.lines.keys())
    entries = {(i,): n for i, n in counts1.items() if n >= minsup}
    frequent = set(i for (i,) in entries)
    baskets = [tuple(sorted(frequent.intersection(t.lines))) for t in db]

    prev = set(entries)
    k = 2
    while prev and (max_size is None or k <= max_size):
        candidates = _apriori_gen(prev)
        if not candidates:
            break
        active = set().union(*candidates)
        baskets = [b for b in (tuple(i for i in b if i in active) for b in baskets) if len(b) >= k]
        counts = _count(candidates, baskets, k, threads)
        level = {c: n for c, n in counts.items() if n >= minsup}
        entries.update(level)
        prev = set(level)
        k += 1
    return FrequentSetIndex(entries, minsup, len(db))


def _apriori_gen(prev: set) -> set:
    """Join (k-1)-sets sharing a (k-2)-prefix, then prune by downward closure."""
    by_prefix = defaultdict(list)
    for x in prev:
        by_prefix[x[:-1]].append(x[-1])
    out = set()
    for prefix, tails in by_prefix.items():
        tails.sort()
        for a, b in combinations(tails, 2):
            cand = prefix + (a, b)
            if all(cand[:j] + cand[j + 1:] in prev for j in range(len(cand) - 2)):
                out.add(cand)
    return out


def _count_chunk(candidates: set, baskets: list, k: int) -> Counter:
    counts = Counter()
    ncand = len(candidates)
    for b in baskets:
        if comb(len(b), k) <= ncand:
            counts.update(c for c in combinations(b, k) if c in candidates)
        else:
            bs = set(b)
            counts.update(c for c in candidates if bs.issuperset(c))
    return counts


def _count(candidates: set, baskets: list, k: int, threads: int) -> Counter:
    if threads <= 1 or len(baskets) < 2 * threads:
        return _count_chunk(candidates, baskets, k)
    size = -(-len(baskets) // threads)
    chunks = [baskets[i:i + size] for i in range(0, len(baskets), size)]
    total = Counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(lambda ch: _count_chunk(candidates, ch, k), chunks):
            total.update(part)
    return total


def frequent_subsets_of(t: Iterable[str], index: FrequentSetIndex) -> list:
    """``(itemset, support)`` for every indexed set contained in ``t``."""
    items = frozenset(t) & index.frequent_items
    out = []
    for k in range(1, min(len(items), index.max_size) + 1):
        out.extend((x, index.entries[x]) for x in index.subsets_of_size(items, k))
    return out


# ------------------------------------------------------------------- dumps

def dump_index(index: FrequentSetIndex, fh: IO[str]) -> None:
    """JSON lines: one meta line, then ``{"items": [...], "support": n}`` per set."""
    fh.write(json.dumps({"minsup": index.minsup, "txn_count": index.txn_count}) + "\n")
    for x, n in index.entries.items():
        fh.write(json.dumps({"items": list(x), "support": n}) + "\n")


def load_index(fh: IO[str]) -> FrequentSetIndex:
    minsup = txn_count = None
    entries = {}
    for n, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"itemset dump line {n}: {exc}") from exc
        if "items" in rec:
            entries[itemset(rec["items"])] = int(rec["support"])
        else:
            minsup, txn_count = rec.get("minsup"), rec.get("txn_count")
    if minsup is None or txn_count is None:
        raise DataError("itemset dump lacks the minsup/txn_count header line")
    return FrequentSetIndex(entries, int(minsup), int(txn_count))
