"""Catalog and transaction data: types, CSV ingestion, margin arithmetic.

Money is always an ``int`` counted in minor currency units.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping, Union

from .errors import DataError

Money = int
Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]

CATALOG_HEADER = ("product_id", "name", "category_id", "category_name", "unit_margin", "cost")
BASKET_HEADER = ("transaction_id", "product_id", "quantity")


@dataclass(frozen=True)
class Product:
    id: str
    name: str
    category_id: str
    unit_margin: Money
    cost: Money = 0

    def __post_init__(self):
        if self.cost < 0:
            raise DataError(f"product {self.id!r}: negative cost {self.cost}")


@dataclass(frozen=True)
class Category:
    id: str
    name: str
    member_ids: frozenset

    def __post_init__(self):
        if not self.member_ids:
            raise DataError(f"category {self.id!r} has no products")


@dataclass(frozen=True)
class Catalog:
    products: Mapping[str, Product]
    categories: Mapping[str, Category]

    def __post_init__(self):
        seen = set()
        for cat in self.categories.values():
            for pid in cat.member_ids:
                if pid not in self.products:
                    raise DataError(f"category {cat.id!r} references unknown product {pid!r}")
                if pid in seen:
                    raise DataError(f"product {pid!r} belongs to more than one category")
                seen.add(pid)
        for p in self.products.values():
            cat = self.categories.get(p.category_id)
            if cat is None:
                raise DataError(f"product {p.id!r} references unknown category {p.category_id!r}")
            if p.id not in cat.member_ids:
                raise DataError(f"product {p.id!r} missing from members of {p.category_id!r}")

    @classmethod
    def from_products(cls, products: Iterable[Product], category_names: Mapping[str, str] | None = None) -> Catalog:
        """Build a catalog, deriving categories from each product's ``category_id``."""
        by_id: dict[str, Product] = {}
        members: dict[str, set] = {}
        for p in products:
            if p.id in by_id:
                raise DataError(f"duplicate product id {p.id!r}")
            by_id[p.id] = p
            members.setdefault(p.category_id, set()).add(p.id)
        if not by_id:
            raise DataError("empty catalog")
        names = category_names or {}
        cats = {
            cid: Category(cid, names.get(cid, cid), frozenset(m))
            for cid, m in sorted(members.items())
        }
        return cls(
            MappingProxyType(dict(sorted(by_id.items()))),
            MappingProxyType(cats),
        )

    def __len__(self):
        return len(self.products)

    def category_of(self, product_id: str) -> str:
        return self.products[product_id].category_id


@dataclass(frozen=True)
class Transaction:
    id: str
    lines: Mapping[str, int]

    def __post_init__(self):
        for pid, qty in self.lines.items():
            if qty < 1:
                raise DataError(f"transaction {self.id!r}: quantity {qty} for {pid!r} must be >= 1")
        object.__setattr__(self, "lines", MappingProxyType(dict(sorted(self.lines.items()))))

    @property
    def items(self) -> frozenset:
        return frozenset(self.lines)

    def __eq__(self, other):
        if not isinstance(other, Transaction):
            return NotImplemented
        return self.id == other.id and dict(self.lines) == dict(other.lines)

    def __hash__(self):
        return hash((self.id, tuple(self.lines.items())))


@dataclass(frozen=True)
class TransactionDb:
    transactions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        txns = tuple(self.transactions)
        ids = set()
        for t in txns:
            if t.id in ids:
                raise DataError(f"duplicate transaction id {t.id!r}")
            ids.add(t.id)
        object.__setattr__(self, "transactions", txns)

    def __len__(self):
        return len(self.transactions)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.transactions)

    @classmethod
    def from_sets(cls, baskets: Mapping[str, Iterable[str]]) -> TransactionDb:
        """Quantity-1 transactions from ``{txn_id: items}``; handy for mining-only use."""
        return cls(tuple(Transaction(tid, {i: 1 for i in items}) for tid, items in baskets.items()))


def transaction_margin(t: Transaction, catalog: Catalog) -> Money:
    products = catalog.products
    return sum(products[pid].unit_margin * qty for pid, qty in t.lines.items())


def items_margin(t: Transaction, items: Iterable[str], catalog: Catalog) -> Money:
    """Margin of ``items`` within ``t``, each at its full line quantity."""
    products = catalog.products
    return sum(products[pid].unit_margin * t.lines[pid] for pid in items)


# ---------------------------------------------------------------- CSV input

def _read_text(source: Source) -> str:
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise DataError(f"{os.fspath(source)}: {exc.strerror}") from exc
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise DataError(f"input is not valid UTF-8: {exc}") from exc
    return data


def _rows(source: Source, header: tuple, what: str):
    """Yield ``(line_number, fields)`` for data rows, validating the header."""
    text = _read_text(source)
    numbered = [
        (n, line) for n, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not numbered:
        raise DataError(f"empty {what}")
    reader = csv.reader(line for _, line in numbered)
    rows = list(reader)
    first = tuple(c.strip() for c in rows[0])
    if first != header:
        raise DataError(f"line {numbered[0][0]}: expected header {','.join(header)!r}, got {','.join(first)!r}")
    if len(rows) == 1:
        raise DataError(f"empty {what}")
    for (n, _), fields in zip(numbered[1:], rows[1:]):
        if len(fields) != len(header):
            raise DataError(f"line {n}: expected {len(header)} columns, got {len(fields)}")
        yield n, [f.strip() for f in fields]


def _int(value: str, line: int, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(f"line {line}: {column} {value!r} is not an integer") from None


def load_catalog(source: Source) -> Catalog:
    products = []
    names: dict[str, str] = {}
    seen: dict[str, int] = {}
    for n, (pid, name, cid, cname, margin, cost) in _rows(source, CATALOG_HEADER, "catalog"):
        if not pid or not cid:
            raise DataError(f"line {n}: empty product_id or category_id")
        if pid in seen:
            raise DataError(f"line {n}: duplicate product id {pid!r} (first on line {seen[pid]})")
        seen[pid] = n
        unit_margin = _int(margin, n, "unit_margin")
        cost_v = _int(cost, n, "cost")
        if cost_v < 0:
            raise DataError(f"line {n}: negative cost {cost_v} for {pid!r}")
        prev = names.setdefault(cid, cname)
        if prev != cname:
            raise DataError(f"line {n}: category {cid!r} named both {prev!r} and {cname!r}")
        products.append(Product(pid, name, cid, unit_margin, cost_v))
    return Catalog.from_products(products, names)


def load_transactions(source: Source, catalog: Catalog) -> TransactionDb:
    grouped: dict[str, dict[str, int]] = {}
    for n, (tid, pid, qty) in _rows(source, BASKET_HEADER, "transaction file"):
        if not tid:
            raise DataError(f"line {n}: empty transaction_id")
        if pid not in catalog.products:
            raise DataError(f"line {n}: unknown product {pid!r}")
        q = _int(qty, n, "quantity")
        if q <= 0:
            raise DataError(f"line {n}: quantity {q} must be positive")
        lines = grouped.setdefault(tid, {})
        lines[pid] = lines.get(pid, 0) + q
    return TransactionDb(tuple(Transaction(tid, lines) for tid, lines in grouped.items()))


# --------------------------------------------------------------- CSV output

def dump_catalog(catalog: Catalog, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CATALOG_HEADER)
    for p in catalog.products.values():
        cat = catalog.categories[p.category_id]
        w.writerow([p.id, p.name, p.category_id, cat.name, p.unit_margin, p.cost])


def dump_transactions(db: TransactionDb, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BASKET_HEADER)
    for t in db:
        for pid, qty in t.lines.items():
            w.writerow([t.id, pid, qty])


def catalog_to_csv(catalog: Catalog) -> str:
    buf = io.StringIO()
    dump_catalog(catalog, buf)
    return buf.getvalue()


def transactions_to_csv(db: TransactionDb) -> str:
    buf = io.StringIO()
    dump_transactions(db, buf)
    return buf.getvalue()
