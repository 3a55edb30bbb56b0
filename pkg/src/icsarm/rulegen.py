"""Attack rules (association rules with a single consequent) and their text format.

Rule text is the interchange format between mining, validation and replay::

    FIT101>0.5, MV201=Close, MV302=Open, MV303=Close, P302=Off --> MV101=Open

Antecedent items are comma-separated in canonical order. Flow items render as
``>0.5`` (FlowHigh) or ``<0.5`` (FlowLow); everything else as ``=State``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .binarizer import Item, State
from .errors import ConsistencyError, ParseError, RuleParseError
from .miner import FrequentItemset, as_fraction

ARROW = "-->"
FLOW_TOKEN = "0.5"

LABEL_ATTACK = "attack-patterns"
LABEL_INVARIANTS = "invariants"
LABEL_VALIDATED = "validated"


@dataclass(frozen=True)
class AttackRule:
    """``antecedent --> consequent`` with optional exact support and confidence.

    Equality and hashing use only the canonical (antecedent, consequent) pair.
    """

    antecedent: tuple[Item, ...]
    consequent: Item
    support: Fraction | None = field(default=None, compare=False)
    confidence: Fraction | None = field(default=None, compare=False)

    def __post_init__(self):
        ante = tuple(sorted(self.antecedent))
        if not ante:
            raise ValueError("antecedent must be non-empty")
        if self.consequent in ante:
            raise ValueError(f"consequent {self.consequent} repeated in antecedent")
        attrs = [i.attribute for i in ante]
        if len(set(attrs)) != len(attrs):
            raise ValueError("antecedent names the same attribute twice")
        if self.consequent.attribute in attrs:
            raise ValueError(f"consequent attribute {self.consequent.attribute} also in antecedent")
        object.__setattr__(self, "antecedent", ante)
        if self.support is not None and self.confidence is not None:
            if not 0 < self.support <= self.confidence <= 1:
                raise ValueError(f"need 0 < support <= confidence <= 1, got {self.support}, {self.confidence}")

    @property
    def key(self) -> tuple[tuple[Item, ...], Item]:
        return (self.antecedent, self.consequent)

    @property
    def items(self) -> frozenset[Item]:
        return frozenset(self.antecedent) | {self.consequent}

    def __str__(self) -> str:
        return serialize_rule(self)


def _render_item(item: Item) -> str:
    if item.state is State.FLOW_HIGH:
        return f"{item.attribute}>{FLOW_TOKEN}"
    if item.state is State.FLOW_LOW:
        return f"{item.attribute}<{FLOW_TOKEN}"
    return str(item)


def serialize_rule(r: AttackRule) -> str:
    return ", ".join(map(_render_item, r.antecedent)) + f" {ARROW} " + _render_item(r.consequent)


_ITEM_RE = re.compile(
    r"\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*"
    r"(?:=\s*(?P<state>[A-Za-z]+)|(?P<cmp>[<>])\s*(?P<num>[0-9]*\.?[0-9]+))\s*$"
)


@lru_cache(maxsize=4096)
def _item_from_token(text: str) -> Item | int:
    """The item a token denotes, or the token offset of the fault (negative if malformed)."""
    m = _ITEM_RE.match(text)
    if not m:
        return -1
    name = m.group("name")
    if m.group("cmp"):
        return Item(name, State.FLOW_HIGH if m.group("cmp") == ">" else State.FLOW_LOW)
    try:
        return Item(name, m.group("state"))
    except ParseError:
        return m.start("state")


def _parse_item(text: str, offset: int) -> Item:
    # ``offset`` locates the first non-blank character of ``text``
    token = text.strip()
    found = _item_from_token(token)
    if isinstance(found, Item):
        return found
    if found < 0:
        raise RuleParseError(f"malformed item {token!r}", offset)
    state = _ITEM_RE.match(token).group("state")
    raise RuleParseError(f"unknown state {state!r}", offset + found)


def parse_items(text: str, offset: int = 0) -> list[Item]:
    """Parse a comma-separated item list such as a state prefix."""
    return [_parse_item(chunk, offset + start) for chunk, start in _chunks(text)]


def _chunks(text: str) -> list[tuple[str, int]]:
    """Comma-separated pieces with the offset of each one's first non-blank character."""
    out = []
    pos = 0
    for chunk in text.split(","):
        out.append((chunk, pos + len(chunk) - len(chunk.lstrip())))
        pos += len(chunk) + 1
    return out


def parse_rule(text: str) -> AttackRule:
    """Inverse of :func:`serialize_rule`; support and confidence come back unset."""
    head, arrow, tail = text.partition(ARROW)
    if not arrow:
        raise RuleParseError(f"missing {ARROW!r}", len(text))
    if ARROW in tail:
        raise RuleParseError(f"more than one {ARROW!r}", len(head) + len(ARROW) + tail.index(ARROW))
    if not head.strip():
        raise RuleParseError("empty antecedent", 0)
    antecedent = parse_items(head)
    consequent = _parse_item(tail, len(head) + len(ARROW) + len(tail) - len(tail.lstrip()))
    seen: dict[str, int] = {}
    for (_, start), item in zip(_chunks(head), antecedent):
        if item.attribute in seen:
            raise RuleParseError(f"duplicate attribute {item.attribute} in antecedent", start)
        seen[item.attribute] = start
    if consequent.attribute in seen:
        raise RuleParseError(
            f"consequent {consequent.attribute} repeated in antecedent", seen[consequent.attribute]
        )
    return AttackRule(tuple(antecedent), consequent)


class RuleSet:
    """A labelled set of rules keyed by canonical form; re-adding a rule is a no-op."""

    def __init__(self, label: str = LABEL_ATTACK, rules: Iterable[AttackRule] = ()):
        self.label = label
        self._rules: dict[tuple, AttackRule] = {}
        for r in rules:
            self.add(r)

    def add(self, rule: AttackRule) -> bool:
        if rule.key in self._rules:
            return False
        self._rules[rule.key] = rule
        return True

    def __contains__(self, rule: AttackRule) -> bool:
        return rule.key in self._rules

    def get(self, rule: AttackRule) -> AttackRule | None:
        return self._rules.get(rule.key)

    def __len__(self) -> int:
        return len(self._rules)

    def __iter__(self) -> Iterator[AttackRule]:
        return iter(self._rules.values())

    def keys(self) -> set:
        return set(self._rules)

    def sorted(self) -> list[AttackRule]:
        return sorted(self._rules.values(), key=rule_sort_key)

    def __repr__(self) -> str:
        return f"RuleSet({self.label!r}, {len(self)} rules)"


def rule_sort_key(r: AttackRule) -> tuple:
    return (len(r.antecedent), r.antecedent, r.consequent)


def derive_rules(itemsets: Sequence[FrequentItemset], min_confidence) -> RuleSet:
    """Every single-consequent rule ``Z - {y} --> y`` meeting ``min_confidence``.

    Confidence is ``count(Z) / count(Z - {y})`` evaluated with integers.
    """
    min_conf = as_fraction(min_confidence)
    if not 0 < min_conf <= 1:
        raise ValueError(f"min_confidence must lie in (0, 1], got {min_conf}")
    num, den = min_conf.numerator, min_conf.denominator
    counts = {frozenset(fi.items): fi.support_count for fi in itemsets}
    rules = RuleSet(LABEL_ATTACK)
    for fi in itemsets:
        if len(fi.items) < 2:
            continue
        z = fi.support_count
        whole = frozenset(fi.items)
        for y in fi.items:
            x_items = whole - {y}
            x = counts.get(x_items)
            if x is None:
                raise ConsistencyError(
                    f"support of {sorted(map(str, x_items))} missing; itemsets are not subset-closed"
                )
            if z * den >= num * x:
                antecedent = tuple(i for i in fi.items if i != y)
                rules.add(
                    AttackRule(antecedent, y, Fraction(z, fi.n_transactions), Fraction(z, x))
                )
    return rules


def antecedent_histogram(rs: Iterable[AttackRule]) -> dict[int, int]:
    hist = Counter(len(r.antecedent) for r in rs)
    return dict(sorted(hist.items()))


def format_rule_line(r: AttackRule) -> str:
    text = serialize_rule(r)
    if r.support is not None and r.confidence is not None:
        text += f"\t{float(r.support):.4f}\t{float(r.confidence):.4f}"
    return text


def write_rules(rs: RuleSet, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        for r in rs.sorted():
            fh.write(format_rule_line(r) + "\n")


def read_rules(path, label: str = LABEL_ATTACK) -> RuleSet:
    """Read a rule file; trailing support/confidence columns are ignored."""
    rs = RuleSet(label)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            text = line.split("\t", 1)[0]
            try:
                rs.add(parse_rule(text))
            except RuleParseError as exc:
                raise RuleParseError(f"line {lineno}: {exc}", exc.position) from None
    return rs
