"""Validation of mined attack rules against normal plant behaviour.

Two checks live here. Rules that are also invariants of normal operation
(confidence-1 rules mined with a one-occurrence support floor) are removed by
set difference. The survivors are then scanned row by row over normal
datasets; a rule whose antecedent and consequent hold together in any single
row is a false attack.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Protocol, Sequence

from .binarizer import BinarizeConfig, Item, Transaction, to_transactions
from .historian import Dataset
from .miner import mine_frequent
from .rulegen import LABEL_INVARIANTS, LABEL_VALIDATED, AttackRule, RuleSet, derive_rules, serialize_rule

log = logging.getLogger(__name__)


def percentage(part: int, whole: int) -> Decimal:
    """``100 * part / whole`` truncated to two decimals (2.5653 -> 2.56)."""
    if whole == 0:
        return Decimal("0.00")
    exact = Fraction(100 * part, whole)
    return (Decimal(exact.numerator) / Decimal(exact.denominator)).quantize(
        Decimal("0.01"), rounding=ROUND_DOWN
    )


@dataclass
class ValidationReport:
    label: str
    dataset_size: int
    total_rules: int
    matched_rules: int
    matches: list[tuple[str, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def percentage(self) -> Decimal:
        return percentage(self.matched_rules, self.total_rules)


def mine_invariants(normal: Sequence[Transaction], *, threads: int = 1) -> RuleSet:
    """Confidence-1 rules over every itemset that occurs at least once."""
    if not normal:
        raise ValueError("need at least one normal transaction")
    itemsets = mine_frequent(normal, Fraction(1, len(normal)), threads=threads)
    rules = derive_rules(itemsets, Fraction(1))
    rules.label = LABEL_INVARIANTS
    return rules


class RuleCollection(Protocol):
    def __contains__(self, rule: AttackRule) -> bool: ...

    def __len__(self) -> int: ...


def set_difference(a: RuleSet, b: RuleCollection) -> RuleSet:
    """Rules of ``a`` whose canonical (antecedent, consequent) pair is not in ``b``."""
    return RuleSet(LABEL_VALIDATED, (r for r in a if r not in b))


@dataclass(frozen=True)
class InvalidationSummary:
    attack_patterns: int
    invariants: int
    invalidated: int
    validated: int

    @property
    def percentage(self) -> Decimal:
        return percentage(self.invalidated, self.attack_patterns)


def invalidation_summary(a: RuleSet, b: RuleCollection, c: RuleSet) -> InvalidationSummary:
    return InvalidationSummary(len(a), len(b), len(a) - len(c), len(c))


class _RowIndex:
    """Distinct rows of a transaction list with one bitset per item.

    Bit ``k`` stands for the k-th distinct row in order of first appearance,
    so the lowest set bit of a match mask is the earliest matching row.
    """

    def __init__(self, transactions: Sequence[Transaction]):
        first_ts: dict[frozenset, int] = {}
        for t in transactions:
            if t.items not in first_ts:
                first_ts[t.items] = t.timestamp
        self.first_timestamp = list(first_ts.values())
        self.bits: dict[Item, int] = {}
        for k, items in enumerate(first_ts):
            for item in items:
                self.bits[item] = self.bits.get(item, 0) | (1 << k)
        self.attributes = {i.attribute for i in self.bits}
        self.all_rows = (1 << len(first_ts)) - 1

    def first_match(self, items) -> int | None:
        mask = self.all_rows
        for item in items:
            mask &= self.bits.get(item, 0)
            if not mask:
                return None
        low = (mask & -mask).bit_length() - 1
        return self.first_timestamp[low]


class InvariantIndex:
    """The invariant set of ``normal`` without materialising it.

    ``X --> y`` is an invariant exactly when X occurs in some row and every
    row holding X also holds y, which is what :func:`mine_invariants`
    enumerates. Membership is two bitset operations; the size is counted by
    a depth-first walk over row masks, memoised on (next item, mask) because
    many itemsets share the same supporting rows.
    """

    label = LABEL_INVARIANTS

    def __init__(self, normal: Sequence[Transaction]):
        if not normal:
            raise ValueError("need at least one normal transaction")
        self._index = _RowIndex(normal)
        self._size: int | None = None

    def _mask(self, items) -> int:
        mask = self._index.all_rows
        for item in items:
            mask &= self._index.bits.get(item, 0)
            if not mask:
                break
        return mask

    def __contains__(self, rule: AttackRule) -> bool:
        mask = self._mask(rule.antecedent)
        return bool(mask) and mask & ~self._index.bits.get(rule.consequent, 0) == 0

    def __len__(self) -> int:
        if self._size is None:
            self._size = self._count()
        return self._size

    def _count(self) -> int:
        masks = [self._index.bits[i] for i in sorted(self._index.bits)]
        m = len(masks)

        @lru_cache(maxsize=None)
        def closure(rows: int) -> int:
            return sum(1 for b in masks if rows & ~b == 0)

        @lru_cache(maxsize=None)
        def walk(start: int, rows: int) -> tuple[int, int, int]:
            # (itemsets below, sum of their closure sizes, sum of their extra depth)
            n = clo = depth = 0
            for j in range(start, m):
                sub = rows & masks[j]
                if not sub:
                    continue
                n2, c2, d2 = walk(j + 1, sub)
                n += 1 + n2
                clo += closure(sub) + c2
                depth += 1 + d2 + n2
            return n, clo, depth

        _, clo, depth = walk(0, self._index.all_rows)
        return clo - depth


def scan_dataset(rules: RuleSet, normal: Sequence[Transaction], label: str = "") -> ValidationReport:
    """Count rules whose full pattern holds in at least one transaction.

    ``matches`` lists (rule text, first matching timestamp) in canonical rule
    order. Rules naming attributes that never appear in ``normal`` are
    reported unmatched with a warning.
    """
    index = _RowIndex(normal)
    report = ValidationReport(label, len(normal), len(rules), 0)
    for rule in rules.sorted():
        absent = sorted({i.attribute for i in rule.items} - index.attributes)
        if absent:
            msg = f"{serialize_rule(rule)}: attributes {absent} absent from {label or 'transactions'}"
            log.warning(msg)
            report.warnings.append(msg)
            continue
        ts = index.first_match(rule.items)
        if ts is not None:
            report.matched_rules += 1
            report.matches.append((serialize_rule(rule), ts))
    return report


def summarize_multi_dataset(
    rules: RuleSet, datasets: Sequence[Dataset], cfg: BinarizeConfig
) -> list[ValidationReport]:
    """One report per dataset, in input order."""
    if not datasets:
        raise ValueError("need at least one dataset")
    return [scan_dataset(rules, to_transactions(d, cfg), d.label) for d in datasets]


SUMMARY_HEADER = ("Dataset", "Dataset Size", "No. of Attack Rules in Normal Data", "False Attack (%)")


def summary_rows(reports: Sequence[ValidationReport]) -> list[tuple[str, int, int, str]]:
    return [(r.label, r.dataset_size, r.matched_rules, f"{r.percentage}") for r in reports]


def write_summary_csv(reports: Sequence[ValidationReport], path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(summary_rows(reports))


def write_matches_csv(report: ValidationReport, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rule", "first_match_timestamp"))
        w.writerows(report.matches)


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Plain-text table with right-aligned numbers."""
    cells = [list(map(str, header))] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if n == 0 or i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
