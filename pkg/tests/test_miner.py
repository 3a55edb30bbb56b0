import itertools
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from icsarm.binarizer import Item, State, Transaction
from icsarm.errors import CapacityError, ParseError
from icsarm.miner import (
    as_fraction,
    brute_force_frequent,
    build_fptree,
    count_supports,
    mine_frequent,
    min_count_for,
    read_itemsets,
    write_itemsets,
)

from oracles import random_item_rows, random_transactions


def _as_dict(itemsets):
    return {fi.items: fi.support_count for fi in itemsets}


def test_thresholds_are_exact():
    assert as_fraction("1/410400") == Fraction(1, 410400)
    assert as_fraction("0.3") == Fraction(3, 10)
    assert as_fraction(1) == 1
    with pytest.raises(TypeError):
        as_fraction(0.3)
    with pytest.raises(ParseError):
        as_fraction("a/b")
    assert min_count_for("1/410400", 410400) == 1
    assert min_count_for("3164/410400", 410400) == 3164
    assert min_count_for("1/3", 10) == 4
    assert min_count_for("1/1000", 10) == 1
    with pytest.raises(ValueError):
        min_count_for(0, 10)
    with pytest.raises(ValueError):
        min_count_for("3/2", 10)


def test_count_supports_ratio():
    on, off = Item("P602", State.ON), Item("P602", State.OFF)
    tx = [Transaction(i, frozenset({on if i % 2 else off})) for i in range(4)]
    counts = count_supports(tx)
    assert counts[on] == 2 and Fraction(counts[on], len(tx)) == Fraction(1, 2)
    assert counts[Item("P101", State.ON)] == 0


def test_textbook_tree(textbook_transactions):
    tree = build_fptree(textbook_transactions, 2)
    expected = {i: c for i, c in count_supports(textbook_transactions).items() if c >= 2}
    assert tree.header_counts() == expected
    # PD occurs once and is pruned
    assert Item("PD", State.ON) not in tree.header
    assert tree.order[0] == Item("PB", State.ON)
    assert tree.single_path() is None


def test_tree_edge_cases(textbook_transactions):
    assert len(build_fptree(textbook_transactions, 6)) == 0
    a, b = Item("PA", State.ON), Item("PB", State.ON)
    tree = build_fptree([Transaction(0, frozenset({a, b}))], 1)
    path = tree.single_path()
    assert [n.item for n in path] == [a, b]
    assert [n.count for n in path] == [1, 1]
    with pytest.raises(ValueError):
        build_fptree(textbook_transactions, 0)


def test_tree_paths_follow_rank(textbook_transactions):
    tree = build_fptree(textbook_transactions, 1)
    rank = {item: r for r, item in enumerate(tree.order)}

    def walk(node, last):
        for child in node.children.values():
            assert rank[child.item] > last
            assert child.count >= sum(c.count for c in child.children.values())
            walk(child, rank[child.item])

    walk(tree.root, -1)


def test_textbook_frequent(textbook_transactions):
    got = _as_dict(mine_frequent(textbook_transactions, Fraction(2, 5)))
    assert got == _as_dict(brute_force_frequent(textbook_transactions, Fraction(2, 5)))
    names = {tuple(i.attribute for i in items): c for items, c in got.items()}
    assert names[("PA", "PB", "PC")] == 3
    assert names[("PB", "PC", "PE")] == 3
    assert ("PD",) not in names


def test_full_support_is_intersection():
    rng = random.Random(4)
    tx = random_transactions(rng, 5, 30, skew=0.9)
    common = frozenset.intersection(*(t.items for t in tx))
    got = mine_frequent(tx, 1)
    assert {frozenset(fi.items) for fi in got} == {
        frozenset(s) for k in range(1, len(common) + 1) for s in itertools.combinations(sorted(common), k)
    }


def test_one_occurrence_floor_returns_everything():
    rng = random.Random(8)
    tx = random_transactions(rng, 4, 12)
    got = mine_frequent(tx, Fraction(1, len(tx)))
    seen = Counter()
    for t in tx:
        items = sorted(t.items)
        for mask in range(1, 1 << len(items)):
            seen[tuple(i for k, i in enumerate(items) if mask >> k & 1)] += 1
    assert _as_dict(got) == dict(seen)


@pytest.mark.parametrize("seed", range(40))
def test_matches_oracle_item_rows(seed):
    rng = random.Random(seed)
    tx = random_item_rows(rng, rng.randint(1, 10), rng.randint(1, 64))
    s = Fraction(rng.randint(1, 20), 20)
    assert mine_frequent(tx, s) == brute_force_frequent(tx, s)


def test_canonical_order_and_closure():
    rng = random.Random(11)
    tx = random_item_rows(rng, 8, 40)
    got = mine_frequent(tx, Fraction(1, 10))
    keys = [(len(fi.items), fi.items) for fi in got]
    assert keys == sorted(keys)
    counts = _as_dict(got)
    for items, c in counts.items():
        for drop in range(len(items)):
            sub = items[:drop] + items[drop + 1 :]
            if sub:
                assert counts[sub] >= c


@given(
    st.integers(0, 2**32 - 1),
    st.integers(1, 10),
    st.integers(1, 20),
    st.integers(1, 20),
)
def test_threshold_monotone(seed, n_items, lo, hi):
    rng = random.Random(seed)
    tx = random_item_rows(rng, n_items, 30)
    a, b = sorted((Fraction(lo, 20), Fraction(hi, 20)))
    low = {fi.items for fi in mine_frequent(tx, a)}
    high = {fi.items for fi in mine_frequent(tx, b)}
    assert high <= low


def test_threads_do_not_change_output():
    rng = random.Random(3)
    tx = random_transactions(rng, 9, 300)
    one = mine_frequent(tx, Fraction(1, 50))
    assert mine_frequent(tx, Fraction(1, 50), threads=2) == one
    assert mine_frequent(tx, Fraction(1, 50), threads=3) == one


def test_max_size_cap():
    rng = random.Random(6)
    tx = random_item_rows(rng, 8, 40)
    full = mine_frequent(tx, Fraction(1, 10))
    capped = mine_frequent(tx, Fraction(1, 10), max_size=2)
    assert capped == [fi for fi in full if len(fi.items) <= 2]


def test_oracle_capacity():
    tx = [Transaction(0, frozenset(Item(f"X{k}", State.ON) for k in range(21)))]
    with pytest.raises(CapacityError):
        brute_force_frequent(tx, 1)


def test_oracle_singletons_and_empty(textbook_transactions):
    singles = {fi.items[0]: fi.support_count for fi in brute_force_frequent(textbook_transactions, Fraction(1, 5)) if len(fi.items) == 1}
    assert singles == dict(count_supports(textbook_transactions))
    assert [fi.items for fi in brute_force_frequent(textbook_transactions, 1)] == [(Item("PB", State.ON),)]
    no_universal = [t for t in textbook_transactions if Item("PD", State.ON) not in t.items][:1] + [
        Transaction(9, frozenset({Item("PD", State.ON)}))
    ]
    assert brute_force_frequent(no_universal, 1) == []
    assert mine_frequent([], Fraction(1, 2)) == []


def test_itemset_file_round_trip(tmp_path, textbook_transactions):
    got = mine_frequent(textbook_transactions, Fraction(2, 5))
    path = tmp_path / "i.txt"
    write_itemsets(got, path, len(textbook_transactions), ["seed: 0"])
    assert read_itemsets(path) == got
    assert path.read_text().splitlines()[2] == "3\tPA=On"
    (tmp_path / "bad.txt").write_text("3\tPA=On\n")
    with pytest.raises(ParseError):
        read_itemsets(tmp_path / "bad.txt")
