import math

import pytest

from profset.basket import catalog_to_csv, transactions_to_csv
from profset.errors import DataError
from profset.synth import SynthConfig, generate_synthetic


def small(**kw):
    base = dict(n_products=60, n_categories=6, n_baskets=300, mean_basket_size=5)
    base.update(kw)
    return SynthConfig(**base)


def test_deterministic_bytes():
    cfg = small(planted=[{"items": [1, 2], "probability": 0.2}])
    a = generate_synthetic(cfg, 11)
    b = generate_synthetic(cfg, 11)
    assert catalog_to_csv(a[0]) == catalog_to_csv(b[0])
    assert transactions_to_csv(a[1]) == transactions_to_csv(b[1])


def test_seed_matters():
    cfg = small()
    assert transactions_to_csv(generate_synthetic(cfg, 1)[1]) != transactions_to_csv(generate_synthetic(cfg, 2)[1])


def test_sizes():
    catalog, db = generate_synthetic(SynthConfig(n_products=500, n_categories=30, n_baskets=50), 3)
    assert len(catalog.products) == 500
    assert len(catalog.categories) == 30
    assert len(db) == 50


def test_planted_pair_frequency():
    p, n = 0.05, 20_000
    cfg = SynthConfig(n_products=500, n_categories=30, n_baskets=n, popularity_skew=0.0,
                      planted=[{"items": [3, 250], "probability": p}])
    catalog, db = generate_synthetic(cfg, 5)
    a, b = sorted(catalog.products)[3], sorted(catalog.products)[250]
    hits = sum(1 for t in db if a in t.lines and b in t.lines)
    sd = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) <= 3 * sd


def test_rare_category_absent():
    cfg = small(rare_categories=[2], rare_weight=0.0)
    catalog, db = generate_synthetic(cfg, 0)
    members = catalog.categories[sorted(catalog.categories)[2]].member_ids
    assert not any(members & t.items for t in db)


@pytest.mark.parametrize("kw, msg", [
    ({"planted": [{"items": [0, 60], "probability": 0.1}]}, "nonexistent product index 60"),
    ({"planted": [{"items": [0, 1], "probability": 1.5}]}, r"outside \[0, 1\]"),
    ({"planted": [{"items": [0, 1], "probability": -0.1}]}, r"outside \[0, 1\]"),
    ({"n_categories": 100}, "more categories"),
])
def test_config_errors(kw, msg):
    with pytest.raises(DataError, match=msg):
        small(**kw)


def test_json_round_trip():
    cfg = small(planted=[{"items": [1, 2], "probability": 0.25}], rare_categories=[1])
    assert SynthConfig.from_json(cfg.to_json()) == cfg


def test_json_rejects_unknown_keys():
    with pytest.raises(DataError, match="unknown synth config keys"):
        SynthConfig.from_json('{"n_products": 5, "colour": "red"}')
