import logging
import random
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from icsarm.binarizer import BinarizeConfig, Item, Transaction
from icsarm.historian import AttributeKind, AttributeSchema, Dataset
from icsarm.rulegen import LABEL_VALIDATED, RuleSet, parse_rule
from icsarm.validator import (
    InvariantIndex,
    format_table,
    invalidation_summary,
    mine_invariants,
    percentage,
    scan_dataset,
    set_difference,
    summarize_multi_dataset,
    summary_rows,
    write_summary_csv,
)

from oracles import naive_scan, random_rule, random_transactions


def _tx(*rows):
    return [Transaction(ts, frozenset(Item.parse(tok) for tok in row.split())) for ts, row in enumerate(rows)]


def test_percentage_truncates_to_two_places():
    assert percentage(3026, 117960) == Decimal("2.56")
    assert percentage(2472, 117960) == Decimal("2.09")
    assert percentage(1707, 117960) == Decimal("1.44")
    assert percentage(717060, 835020) == Decimal("85.87")
    assert percentage(0, 0) == Decimal("0.00")
    assert percentage(1, 1) == Decimal("100.00")


def test_invariant_present_and_broken():
    always = _tx("MV101=Open FIT101=FlowHigh", "MV101=Open FIT101=FlowHigh", "MV101=Close FIT101=FlowLow")
    rule = parse_rule("MV101=Open --> FIT101>0.5")
    assert rule in mine_invariants(always)
    broken = always + _tx("MV101=Open FIT101=FlowLow")
    assert rule not in mine_invariants(broken)
    with pytest.raises(ValueError):
        mine_invariants([])


def test_invariants_have_confidence_one():
    rng = random.Random(9)
    tx = random_transactions(rng, 5, 40, skew=0.7)
    for r in mine_invariants(tx):
        x = sum(1 for t in tx if set(r.antecedent) <= t.items)
        z = sum(1 for t in tx if r.items <= t.items)
        assert x == z >= 1
        assert r.confidence == 1


@pytest.mark.parametrize("seed", range(25))
def test_index_equals_materialised_invariants(seed):
    rng = random.Random(seed)
    tx = random_transactions(rng, rng.randint(1, 6), rng.randint(1, 40), skew=rng.random())
    b = mine_invariants(tx)
    index = InvariantIndex(tx)
    assert len(index) == len(b)
    assert all(r in index for r in b)
    for _ in range(50):
        r = random_rule(rng, 4)
        assert (r in index) == (r in b)


def test_set_difference_examples():
    r1, r2, r3 = (parse_rule(t) for t in ("P101=On --> MV201=Open", "P101=Off --> FIT201<0.5", "MV101=Open --> FIT101>0.5"))
    a = RuleSet(rules=[r1, r2, r3])
    c = set_difference(a, RuleSet(rules=[r2]))
    assert c.keys() == {r1.key, r3.key} and c.label == LABEL_VALIDATED
    assert set_difference(a, RuleSet()).keys() == a.keys()


@given(st.integers(0, 2**32 - 1), st.integers(0, 60), st.integers(0, 60), st.integers(0, 60))
def test_set_algebra(seed, only_a, both, only_b):
    rng = random.Random(seed)
    pool = set()
    while len(pool) < only_a + both + only_b:
        pool.add(random_rule(rng, 3))
    pool = sorted(pool, key=lambda r: r.key)
    a = RuleSet(rules=pool[: only_a + both])
    b = RuleSet(rules=pool[only_a:])
    c = set_difference(a, b)
    assert not any(r in b for r in c)
    assert len(c) + sum(1 for r in a if r in b) == len(a)
    s = invalidation_summary(a, b, c)
    assert s.invalidated == both and s.validated == only_a


def test_first_match_is_earliest_row():
    tx = _tx("P101=Off", "P101=Off", "P101=Off", "P101=Off", "P101=Off", "P101=Off", "P101=Off", "P101=On MV201=Open", "P101=On MV201=Open")
    rules = RuleSet(rules=[parse_rule("P101=On --> MV201=Open"), parse_rule("MV201=Open --> P101=Off")])
    report = scan_dataset(rules, tx, "n")
    assert report.matched_rules == 1
    assert report.matches == [("P101=On --> MV201=Open", 7)]
    assert report.percentage == Decimal("50.00")


def test_absent_attribute_is_unmatched_with_warning(caplog):
    tx = _tx("P101=On MV201=Open")
    rules = RuleSet(rules=[parse_rule("P101=On --> P602=Off")])
    with caplog.at_level(logging.WARNING):
        report = scan_dataset(rules, tx, "n")
    assert report.matched_rules == 0
    assert "P602" in report.warnings[0]
    assert "P602" in caplog.text


@pytest.mark.parametrize("seed", range(20))
def test_scan_matches_double_loop(seed):
    rng = random.Random(seed)
    tx = random_transactions(rng, 15, rng.randint(1, 200), skew=rng.random())
    rules = RuleSet(rules=[random_rule(rng, 3) for _ in range(80)])
    report = scan_dataset(rules, tx)
    expected = naive_scan(rules, tx)
    assert report.matched_rules == len(expected)
    assert dict(report.matches) == {str(r): expected[r.key] for r in rules if r.key in expected}


def test_scan_is_monotone_and_order_free():
    rng = random.Random(1)
    tx = random_transactions(rng, 6, 30)
    rules = [random_rule(rng, 3) for _ in range(60)]
    base = scan_dataset(RuleSet(rules=rules), tx[:15])
    more = scan_dataset(RuleSet(rules=rules), tx)
    assert set(dict(base.matches)) <= set(dict(more.matches))
    shuffled = rules[:]
    rng.shuffle(shuffled)
    assert scan_dataset(RuleSet(rules=shuffled), tx).percentage == more.percentage


def _multi_datasets():
    schema = [AttributeSchema("P101", AttributeKind.BINARY_ACTUATOR), AttributeSchema("P602", AttributeKind.BINARY_ACTUATOR)]
    cfg = BinarizeConfig(selected_attributes=("P101", "P602"))
    out = []
    for label, n in (("normal-2015", 410), ("normal-2019", 149), ("normal-2020", 180)):
        p602 = [2.0 if i % 7 == 0 else 1.0 for i in range(n)]
        out.append(Dataset(schema, range(n), {"P101": [2.0] * n, "P602": p602}, label))
    return out, cfg


def test_multi_dataset_summary(tmp_path):
    datasets, cfg = _multi_datasets()
    rules = RuleSet(rules=[parse_rule("P101=On --> P602=On"), parse_rule("P101=Off --> P602=On")])
    reports = summarize_multi_dataset(rules, datasets, cfg)
    assert [(r.label, r.dataset_size) for r in reports] == [("normal-2015", 410), ("normal-2019", 149), ("normal-2020", 180)]
    assert [row[2] for row in summary_rows(reports)] == [1, 1, 1]
    assert [row[3] for row in summary_rows(reports)] == ["50.00"] * 3
    assert summarize_multi_dataset(rules, datasets[:1] * 2, cfg)[0].matches == reports[0].matches
    path = tmp_path / "s.csv"
    write_summary_csv(reports, path, ["seed: 0"])
    assert path.read_text().splitlines()[1] == "Dataset,Dataset Size,No. of Attack Rules in Normal Data,False Attack (%)"
    with pytest.raises(ValueError):
        summarize_multi_dataset(rules, [], cfg)
    assert "normal-2019" in format_table(("a", "b", "c", "d"), summary_rows(reports))


def test_no_invariant_from_alternating_attribute():
    assert len(mine_invariants(_tx("P602=On", "P602=Off", "P602=Off"))) == 0
