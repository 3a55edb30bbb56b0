"""Frequent itemset mining with FP-growth, plus an exhaustive oracle.

Thresholds are exact rationals: a minimum support ``s`` over ``n``
transactions becomes the integer floor ``ceil(s * n)`` and every comparison
afterwards is on integer counts, so a support such as ``1/410400`` is never
perturbed by floating point.

Identical transactions are collapsed into weighted rows before the tree is
built. Plant historians repeat the same actuator configuration for long
stretches, so this usually shrinks the input by orders of magnitude.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

from .binarizer import Item, Transaction
from .errors import CapacityError, ParseError

BRUTE_FORCE_MAX_ITEMS = 20


def as_fraction(value) -> Fraction:
    """Accept Fraction, int, ``"N/D"`` strings or decimal strings; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"not a rational number: {value!r}") from None
    raise TypeError(f"thresholds must be exact rationals, got {type(value).__name__}")


def min_count_for(min_support, n_transactions: int) -> int:
    s = as_fraction(min_support)
    if not 0 < s <= 1:
        raise ValueError(f"min_support must lie in (0, 1], got {s}")
    return max(1, math.ceil(s * n_transactions))


@dataclass(frozen=True)
class FrequentItemset:
    items: tuple[Item, ...]
    support_count: int
    n_transactions: int

    @property
    def support(self) -> Fraction:
        return Fraction(self.support_count, self.n_transactions)

    def __len__(self) -> int:
        return len(self.items)

    def to_line(self) -> str:
        return f"{self.support_count}\t" + " ".join(map(str, self.items))


def canonical_key(fi: FrequentItemset) -> tuple:
    return (len(fi.items), fi.items)


def count_supports(transactions: Iterable[Transaction]) -> Counter:
    """Exact per-item occurrence counts."""
    weighted = Counter(t.items for t in transactions)
    counts: Counter = Counter()
    for items, w in weighted.items():
        for item in items:
            counts[item] += w
    return counts


class FPNode:
    __slots__ = ("item", "count", "parent", "children")

    def __init__(self, item, count: int, parent: "FPNode | None"):
        self.item = item
        self.count = count
        self.parent = parent
        self.children: dict = {}

    def __repr__(self) -> str:
        return f"FPNode({self.item!r}, {self.count})"


class FPTree:
    """Prefix tree of transactions with a header table of node chains.

    ``order`` lists the tree's items most-frequent first; ``header`` maps each
    item to every node carrying it, in insertion order.
    """

    def __init__(self, order: Sequence[Hashable] = ()):
        self.root = FPNode(None, 0, None)
        self.order = list(order)
        self.header: dict = {}

    def insert(self, path: Sequence, count: int = 1) -> None:
        node = self.root
        for item in path:
            child = node.children.get(item)
            if child is None:
                child = FPNode(item, count, node)
                node.children[item] = child
                self.header.setdefault(item, []).append(child)
            else:
                child.count += count
            node = child

    def item_count(self, item) -> int:
        return sum(n.count for n in self.header.get(item, ()))

    def header_counts(self) -> dict:
        return {item: sum(n.count for n in nodes) for item, nodes in self.header.items()}

    def single_path(self) -> list[FPNode] | None:
        path = []
        node = self.root
        while node.children:
            if len(node.children) > 1:
                return None
            (node,) = node.children.values()
            path.append(node)
        return path

    def prefix_paths(self, item) -> list[tuple[tuple, int]]:
        """Conditional pattern base of ``item``: (root-to-parent path, count) pairs."""
        base = []
        for node in self.header.get(item, ()):
            path = []
            parent = node.parent
            while parent is not None and parent.item is not None:
                path.append(parent.item)
                parent = parent.parent
            if path:
                base.append((tuple(reversed(path)), node.count))
        return base

    def __len__(self) -> int:
        return sum(len(nodes) for nodes in self.header.values())


def _item_order(counts: Counter, min_count: int) -> list[Item]:
    frequent = [item for item, c in counts.items() if c >= min_count]
    frequent.sort(key=lambda item: (-counts[item], item))
    return frequent


def build_fptree(transactions: Sequence[Transaction], min_count: int) -> FPTree:
    """FP-tree over the items occurring at least ``min_count`` times.

    Inside each transaction items are ordered by descending global count,
    ties broken by ascending canonical item order.
    """
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    weighted = Counter(t.items for t in transactions)
    counts: Counter = Counter()
    for items, w in weighted.items():
        for item in items:
            counts[item] += w
    order = _item_order(counts, min_count)
    rank = {item: r for r, item in enumerate(order)}
    tree = FPTree(order)
    for items in sorted(weighted, key=lambda s: sorted(rank.get(i, len(rank)) for i in s)):
        path = sorted((i for i in items if i in rank), key=rank.__getitem__)
        if path:
            tree.insert(path, weighted[items])
    return tree


def _conditional_tree(base: list[tuple[tuple, int]], min_count: int) -> FPTree:
    counts: Counter = Counter()
    for path, c in base:
        for r in path:
            counts[r] += c
    keep = {r for r, c in counts.items() if c >= min_count}
    tree = FPTree(sorted(keep))
    for path, c in base:
        filtered = [r for r in path if r in keep]
        if filtered:
            tree.insert(filtered, c)
    return tree


def _mine(tree: FPTree, suffix: tuple, min_count: int, max_size: int | None, out: list) -> None:
    # Items are integer ranks; every path is ascending in rank.
    if max_size is not None and len(suffix) >= max_size:
        return
    path = tree.single_path()
    if path is not None:
        room = len(path) if max_size is None else min(len(path), max_size - len(suffix))
        for k in range(1, room + 1):
            for combo in itertools.combinations(path, k):
                # counts never increase down a path, so the deepest node bounds the support
                out.append((tuple(n.item for n in combo) + suffix, combo[-1].count))
        return
    for r in sorted(tree.header, reverse=True):
        support = tree.item_count(r)
        if support < min_count:
            continue
        itemset = (r,) + suffix
        out.append((itemset, support))
        base = tree.prefix_paths(r)
        if base:
            _mine(_conditional_tree(base, min_count), itemset, min_count, max_size, out)


def _mine_suffix(args) -> list:
    r, base, support, min_count, max_size = args
    out = [((r,), support)]
    if base:
        _mine(_conditional_tree(base, min_count), (r,), min_count, max_size, out)
    return out


def mine_frequent(
    transactions: Sequence[Transaction],
    min_support,
    *,
    max_size: int | None = None,
    threads: int = 1,
) -> list[FrequentItemset]:
    """All itemsets with support >= ``min_support``, in canonical order.

    Canonical order is by itemset size, then lexicographically by the sorted
    items. ``threads > 1`` farms the top-level conditional trees out to worker
    processes; the result is identical for any worker count.
    """
    n = len(transactions)
    min_count = min_count_for(min_support, n)
    if n == 0:
        return []
    tree = build_fptree(transactions, min_count)
    order = tree.order
    rank = {item: r for r, item in enumerate(order)}
    ranked = FPTree(range(len(order)))
    _reinsert(tree.root, [], ranked, rank)

    raw: list = []
    single = ranked.single_path()
    if single is not None or threads <= 1 or len(order) < 2:
        _mine(ranked, (), min_count, max_size, raw)
    else:
        jobs = [
            (r, ranked.prefix_paths(r), ranked.item_count(r), min_count, max_size)
            for r in sorted(ranked.header, reverse=True)
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_mine_suffix, jobs, chunksize=max(1, len(jobs) // (4 * threads))):
                raw.extend(part)

    result = [
        FrequentItemset(tuple(sorted(order[r] for r in ranks)), count, n) for ranks, count in raw
    ]
    result.sort(key=canonical_key)
    return result


def _reinsert(node: FPNode, path: list, target: FPTree, rank: dict) -> None:
    # copy an Item-keyed tree into a rank-keyed one without revisiting transactions
    for child in node.children.values():
        path.append(rank[child.item])
        own = child.count - sum(c.count for c in child.children.values())
        if own:
            target.insert(path, own)
        _reinsert(child, path, target, rank)
        path.pop()


def brute_force_frequent(transactions: Sequence[Transaction], min_support) -> list[FrequentItemset]:
    """Enumerate every non-empty subset of the item universe and count it by scanning."""
    n = len(transactions)
    min_count = min_count_for(min_support, n)
    universe = sorted({i for t in transactions for i in t.items})
    if len(universe) > BRUTE_FORCE_MAX_ITEMS:
        raise CapacityError(
            f"{len(universe)} distinct items exceeds the oracle limit of {BRUTE_FORCE_MAX_ITEMS}"
        )
    rows = [t.items for t in transactions]
    result = []
    for k in range(1, len(universe) + 1):
        for combo in itertools.combinations(universe, k):
            wanted = set(combo)
            count = sum(1 for row in rows if wanted <= row)
            if count >= min_count:
                result.append(FrequentItemset(combo, count, n))
    result.sort(key=canonical_key)
    return result


def write_itemsets(itemsets: Iterable[FrequentItemset], path, n_transactions: int, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(f"# transactions: {n_transactions}\n")
        for fi in itemsets:
            fh.write(fi.to_line() + "\n")


def read_itemsets(path) -> list[FrequentItemset]:
    n = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.startswith("# transactions:"):
                n = int(line.split(":", 1)[1])
                continue
            if not line or line.startswith("#"):
                continue
            count, _, body = line.partition("\t")
            try:
                rows.append((int(count), tuple(sorted(Item.parse(t) for t in body.split()))))
            except ValueError:
                raise ParseError(f"line {lineno}: bad itemset line {line!r}") from None
    if n is None:
        raise ParseError(f"{path}: missing '# transactions:' header")
    return [FrequentItemset(items, c, n) for c, items in rows]
