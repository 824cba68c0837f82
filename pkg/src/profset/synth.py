"""Seeded synthetic retail data with planted purchase intentions.

Products are ``P0000 .. P{n-1}`` (zero-padded so lexicographic order matches
index order); product ``i`` belongs to category ``i % n_categories``.
Each basket independently receives every planted itemset with its configured
probability, then is topped up with background items drawn from a skewed
popularity distribution until it reaches a size near ``mean_basket_size``.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import asdict, dataclass

from .basket import Catalog, Product, Transaction, TransactionDb
from .errors import DataError


@dataclass(frozen=True)
class PlantedSet:
    items: tuple
    probability: float


@dataclass(frozen=True)
class SynthConfig:
    n_products: int = 500
    n_categories: int = 30
    n_baskets: int = 20_000
    mean_basket_size: float = 10.0
    planted: tuple = ()
    margin_range: tuple = (5, 500)
    cost_range: tuple = (0, 0)
    max_quantity: int = 3
    # Zipf exponent of background popularity; 0 means uniform.
    popularity_skew: float = 1.0
    # Categories whose products are (almost) never drawn as background items.
    rare_categories: tuple = ()
    rare_weight: float = 0.0

    def __post_init__(self):
        planted = tuple(
            p if isinstance(p, PlantedSet) else PlantedSet(tuple(p["items"]), float(p["probability"]))
            for p in self.planted
        )
        object.__setattr__(self, "planted", planted)
        object.__setattr__(self, "margin_range", tuple(self.margin_range))
        object.__setattr__(self, "cost_range", tuple(self.cost_range))
        object.__setattr__(self, "rare_categories", tuple(self.rare_categories))
        self.validate()

    def validate(self) -> None:
        if self.n_products < 1 or self.n_categories < 1 or self.n_baskets < 1:
            raise DataError("n_products, n_categories and n_baskets must be positive")
        if self.n_categories > self.n_products:
            raise DataError("more categories than products")
        if self.mean_basket_size < 1:
            raise DataError("mean_basket_size must be >= 1")
        if self.max_quantity < 1:
            raise DataError("max_quantity must be >= 1")
        lo, hi = self.margin_range
        if lo > hi:
            raise DataError(f"bad margin_range {self.margin_range}")
        lo, hi = self.cost_range
        if lo > hi or lo < 0:
            raise DataError(f"bad cost_range {self.cost_range}")
        for k, p in enumerate(self.planted):
            if not 0.0 <= p.probability <= 1.0:
                raise DataError(f"planted set {k}: probability {p.probability} outside [0, 1]")
            if not p.items:
                raise DataError(f"planted set {k} is empty")
            for i in p.items:
                if not (isinstance(i, int) and 0 <= i < self.n_products):
                    raise DataError(f"planted set {k} references nonexistent product index {i!r}")
        for c in self.rare_categories:
            if not 0 <= c < self.n_categories:
                raise DataError(f"rare category index {c} out of range")
        if self.rare_weight < 0:
            raise DataError("rare_weight must be >= 0")

    @classmethod
    def from_json(cls, text: str) -> SynthConfig:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"synth config is not valid JSON: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def product_id(i: int, n: int) -> str:
    return f"P{i:0{max(4, len(str(n - 1)))}d}"


def category_id(c: int, n: int) -> str:
    return f"C{c:0{max(2, len(str(n - 1)))}d}"


def generate_synthetic(config: SynthConfig, seed: int) -> tuple[Catalog, TransactionDb]:
    rng = random.Random(seed)
    n, nc = config.n_products, config.n_categories
    pids = [product_id(i, n) for i in range(n)]
    cids = [category_id(c, nc) for c in range(nc)]

    products = []
    for i, pid in enumerate(pids):
        products.append(Product(
            id=pid,
            name=f"product-{i}",
            category_id=cids[i % nc],
            unit_margin=rng.randint(*config.margin_range),
            cost=rng.randint(*config.cost_range),
        ))
    catalog = Catalog.from_products(products, {cid: f"category-{c}" for c, cid in enumerate(cids)})

    ranks = list(range(1, n + 1))
    rng.shuffle(ranks)
    rare = set(config.rare_categories)
    weights = []
    for i in range(n):
        w = 1.0 / ranks[i] ** config.popularity_skew
        if i % nc in rare:
            w *= config.rare_weight
        weights.append(w)
    cum = list(itertools.accumulate(weights))

    sd = math.sqrt(config.mean_basket_size)
    txns = []
    width = len(str(config.n_baskets - 1))
    for b in range(config.n_baskets):
        chosen: dict[int, None] = {}
        for p in config.planted:
            if rng.random() < p.probability:
                chosen.update(dict.fromkeys(p.items))
        target = max(1, round(rng.gauss(config.mean_basket_size, sd)))
        if cum[-1] > 0:
            # bounded so tiny popularity pools cannot stall the loop
            for _ in range(8 * target):
                if len(chosen) >= target:
                    break
                chosen.setdefault(rng.choices(range(n), cum_weights=cum)[0])
        lines = {pids[i]: rng.randint(1, config.max_quantity) for i in sorted(chosen)}
        txns.append(Transaction(f"T{b:0{width}d}", lines))
    return catalog, TransactionDb(tuple(txns))

