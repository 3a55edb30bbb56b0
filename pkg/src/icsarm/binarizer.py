"""Turn raw historian telemetry into binary attribute-state items for mining.

Pumps map to On/Off, motorized valves to Open/Close and flow meters to
FlowHigh/FlowLow. A valve caught in its (short) transition state is resolved
from its paired flow meter: flow at or above the threshold means the valve is
passing water and is treated as Open, anything lower as Close.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, EncodingError, NumericError, ParseError
from .historian import AttributeKind, AttributeSchema, Dataset

TRANSITION = "Transition"


class State(str, enum.Enum):
    CLOSE = "Close"
    FLOW_HIGH = "FlowHigh"
    FLOW_LOW = "FlowLow"
    OFF = "Off"
    ON = "On"
    OPEN = "Open"

    def __str__(self) -> str:
        return self.value


VALVE_STATES = frozenset({State.OPEN, State.CLOSE})
PUMP_STATES = frozenset({State.ON, State.OFF})
FLOW_STATES = frozenset({State.FLOW_HIGH, State.FLOW_LOW})

_KIND_STATES = {
    AttributeKind.TERNARY_VALVE: VALVE_STATES,
    AttributeKind.BINARY_ACTUATOR: PUMP_STATES,
    AttributeKind.ANALOG: FLOW_STATES,
}

_OPPOSITE = {
    State.OPEN: State.CLOSE,
    State.CLOSE: State.OPEN,
    State.ON: State.OFF,
    State.OFF: State.ON,
    State.FLOW_HIGH: State.FLOW_LOW,
    State.FLOW_LOW: State.FLOW_HIGH,
}


@dataclass(frozen=True, order=True)
class Item:
    """One attribute in one binary state, e.g. ``MV101=Open``."""

    attribute: str
    state: State

    def __post_init__(self):
        try:
            object.__setattr__(self, "state", State(self.state))
        except ValueError:
            raise ParseError(f"unknown state {self.state!r} for {self.attribute}") from None

    def __str__(self) -> str:
        return f"{self.attribute}={self.state.value}"

    @classmethod
    def parse(cls, text: str) -> "Item":
        name, sep, state = text.strip().partition("=")
        if not sep or not name:
            raise ParseError(f"malformed item {text!r}")
        return cls(name, state)

    def negated(self) -> "Item":
        return Item(self.attribute, _OPPOSITE[self.state])

    def fits(self, kind: AttributeKind) -> bool:
        return self.state in _KIND_STATES[kind]


@dataclass(frozen=True)
class Transaction:
    timestamp: int
    items: frozenset[Item]

    def sorted_items(self) -> list[Item]:
        return sorted(self.items)

    def to_line(self) -> str:
        return " ".join(str(i) for i in self.sorted_items())

    def attributes(self) -> set[str]:
        return {i.attribute for i in self.items}


DEFAULT_ATTRIBUTES = (
    "FIT101", "MV101", "P101",
    "FIT201", "MV201", "P203", "P205",
    "FIT301", "MV301", "MV302", "MV303", "MV304", "P302",
    "FIT601", "P602",
)

DEFAULT_VALVE_PAIRS = {
    "MV101": "FIT101",
    "MV201": "FIT201",
    "MV301": "FIT301",
    "MV302": "FIT301",
    "MV303": "FIT301",
    "MV304": "FIT301",
}


@dataclass(frozen=True)
class BinarizeConfig:
    flow_threshold: float = 0.5
    selected_attributes: tuple[str, ...] = DEFAULT_ATTRIBUTES
    pump_raw_encoding: Mapping[float, State] = field(
        default_factory=lambda: {1.0: State.OFF, 2.0: State.ON}
    )
    valve_raw_encoding: Mapping[float, str] = field(
        default_factory=lambda: {0.0: TRANSITION, 1.0: State.CLOSE, 2.0: State.OPEN}
    )
    valve_flow_pairs: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_VALVE_PAIRS))

    def __post_init__(self):
        if not (self.flow_threshold > 0 and math.isfinite(self.flow_threshold)):
            raise ConfigurationError(f"flow_threshold must be positive, got {self.flow_threshold}")
        if not self.selected_attributes:
            raise ConfigurationError("selected_attributes is empty")
        object.__setattr__(self, "selected_attributes", tuple(self.selected_attributes))
        pumps = {float(k): State(v) for k, v in self.pump_raw_encoding.items()}
        if not set(pumps.values()) <= PUMP_STATES:
            raise ConfigurationError("pump encoding may only produce On/Off")
        valves = {}
        for k, v in self.valve_raw_encoding.items():
            v = TRANSITION if v == TRANSITION else State(v)
            if v != TRANSITION and v not in VALVE_STATES:
                raise ConfigurationError("valve encoding may only produce Open/Close/Transition")
            valves[float(k)] = v
        object.__setattr__(self, "pump_raw_encoding", pumps)
        object.__setattr__(self, "valve_raw_encoding", valves)
        object.__setattr__(self, "valve_flow_pairs", dict(self.valve_flow_pairs))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "BinarizeConfig":
        """Build from a config-file section. Unknown keys are rejected."""
        known = {
            "flow_threshold", "selected_attributes", "pump_raw_encoding",
            "valve_raw_encoding", "valve_flow_pairs",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown binarize keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "selected_attributes" in kwargs:
            kwargs["selected_attributes"] = tuple(kwargs["selected_attributes"])
        return cls(**kwargs)

    def validate_for(self, schema: Sequence[AttributeSchema]) -> None:
        names = {a.name for a in schema}
        for name in self.selected_attributes:
            if name not in names:
                raise ConfigurationError(f"selected attribute {name!r} is not in the dataset schema")
        for attr in schema:
            if attr.name in self.selected_attributes and attr.kind is AttributeKind.TERNARY_VALVE:
                pair = self.flow_pair(attr)
                if pair not in names:
                    raise ConfigurationError(
                        f"valve {attr.name!r} needs paired flow meter {pair!r}, absent from the dataset"
                    )

    def flow_pair(self, attr: AttributeSchema) -> str:
        pair = self.valve_flow_pairs.get(attr.name, attr.paired_flow_meter)
        if pair is None:
            raise ConfigurationError(f"valve {attr.name!r} has no paired flow meter")
        return pair


def _decode_valve(valve_raw: float, cfg: BinarizeConfig) -> str:
    try:
        return cfg.valve_raw_encoding[float(valve_raw)]
    except (KeyError, TypeError, ValueError):
        raise EncodingError(f"undecodable valve value {valve_raw!r}") from None


def binarize_flow(flow: float, cfg: BinarizeConfig) -> State:
    if not math.isfinite(flow):
        raise NumericError(f"non-finite flow value {flow!r}")
    return State.FLOW_HIGH if flow >= cfg.flow_threshold else State.FLOW_LOW


def resolve_valve_transition(valve_raw: float, paired_flow: float, cfg: BinarizeConfig) -> State:
    """Open/Close pass through; a transition takes its state from the paired flow."""
    decoded = _decode_valve(valve_raw, cfg)
    if decoded != TRANSITION:
        return decoded
    return State.OPEN if binarize_flow(paired_flow, cfg) is State.FLOW_HIGH else State.CLOSE


def _state_codes(d: Dataset, attr: AttributeSchema, cfg: BinarizeConfig) -> tuple[np.ndarray, tuple[Item, Item]]:
    """Per-row 0/1 codes indexing into the attribute's two items."""
    raw = d.column(attr.name)
    if attr.kind is AttributeKind.ANALOG:
        if not np.all(np.isfinite(raw)):
            raise NumericError(f"non-finite value in {attr.name}")
        items = (Item(attr.name, State.FLOW_LOW), Item(attr.name, State.FLOW_HIGH))
        return (raw >= cfg.flow_threshold).astype(np.int8), items
    if attr.kind is AttributeKind.BINARY_ACTUATOR:
        items = (Item(attr.name, State.OFF), Item(attr.name, State.ON))
        codes = np.full(raw.shape, -1, dtype=np.int8)
        for value, state in cfg.pump_raw_encoding.items():
            codes[raw == value] = 1 if state is State.ON else 0
        if np.any(codes < 0):
            bad = raw[np.flatnonzero(codes < 0)[0]]
            raise EncodingError(f"undecodable pump value {bad!r} in {attr.name}")
        return codes, items
    items = (Item(attr.name, State.CLOSE), Item(attr.name, State.OPEN))
    flow_high = d.column(cfg.flow_pair(attr)) >= cfg.flow_threshold
    codes = np.full(raw.shape, -1, dtype=np.int8)
    for value, state in cfg.valve_raw_encoding.items():
        mask = raw == value
        if state == TRANSITION:
            codes[mask] = flow_high[mask]
        else:
            codes[mask] = 1 if state is State.OPEN else 0
    if np.any(codes < 0):
        bad = raw[np.flatnonzero(codes < 0)[0]]
        raise EncodingError(f"undecodable valve value {bad!r} in {attr.name}")
    return codes, items


def to_transactions(d: Dataset, cfg: BinarizeConfig) -> list[Transaction]:
    """One transaction per record, holding one item per selected attribute.

    Rows with identical states share a single frozenset, which keeps
    week-long 1 Hz datasets cheap in memory.
    """
    cfg.validate_for(d.schema)
    attrs = [d.attribute(name) for name in cfg.selected_attributes]
    if len(d) == 0:
        return []
    code_cols = []
    item_pairs = []
    for attr in attrs:
        codes, items = _state_codes(d, attr, cfg)
        code_cols.append(codes)
        item_pairs.append(items)
    matrix = np.stack(code_cols, axis=1)
    unique_rows, inverse = np.unique(matrix, axis=0, return_inverse=True)
    itemsets = [
        frozenset(pair[c] for pair, c in zip(item_pairs, row.tolist())) for row in unique_rows
    ]
    inverse = np.asarray(inverse).reshape(-1)
    return [
        Transaction(ts, itemsets[k]) for ts, k in zip(d.timestamps.tolist(), inverse.tolist())
    ]


def drop_constant_attributes(transactions: Sequence[Transaction]) -> tuple[list[Transaction], list[str]]:
    """Remove attributes whose state never changes; returns (transactions, dropped names)."""
    if not transactions:
        raise ValueError("need at least one transaction")
    seen: dict[str, set[State]] = {}
    for items in {t.items for t in transactions}:
        for item in items:
            seen.setdefault(item.attribute, set()).add(item.state)
    dropped = sorted(name for name, states in seen.items() if len(states) == 1)
    if not dropped:
        return list(transactions), []
    gone = set(dropped)
    cache: dict[frozenset[Item], frozenset[Item]] = {}
    out = []
    for t in transactions:
        kept = cache.get(t.items)
        if kept is None:
            kept = cache[t.items] = frozenset(i for i in t.items if i.attribute not in gone)
        out.append(Transaction(t.timestamp, kept))
    return out, dropped


def to_dataset(
    transactions: Sequence[Transaction],
    schema: Sequence[AttributeSchema],
    cfg: BinarizeConfig,
    label: str = "",
) -> Dataset:
    """Encode binary transactions back into raw historian codes.

    FlowHigh is written as the threshold itself and FlowLow as 0, so the
    result binarizes back to the same transactions.
    """
    pump_codes = {state: raw for raw, state in sorted(cfg.pump_raw_encoding.items())}
    valve_codes = {
        state: raw for raw, state in sorted(cfg.valve_raw_encoding.items()) if state != TRANSITION
    }
    kinds = {a.name: a.kind for a in schema}
    columns: dict[str, list[float]] = {a.name: [] for a in schema}
    for t in transactions:
        states = {i.attribute: i.state for i in t.items}
        if set(states) != set(kinds):
            raise ConfigurationError(f"transaction at {t.timestamp} does not cover the schema exactly")
        for name, state in states.items():
            kind = kinds[name]
            if kind is AttributeKind.ANALOG:
                value = cfg.flow_threshold if state is State.FLOW_HIGH else 0.0
            elif kind is AttributeKind.BINARY_ACTUATOR:
                value = pump_codes[state]
            else:
                value = valve_codes[state]
            columns[name].append(value)
    return Dataset(schema, [t.timestamp for t in transactions], columns, label)


def write_transactions(transactions: Iterable[Transaction], path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        for t in transactions:
            fh.write(f"{t.timestamp}\t{t.to_line()}\n")


def read_transactions(path) -> list[Transaction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            ts, _, body = line.partition("\t")
            try:
                timestamp = int(ts)
            except ValueError:
                raise ParseError(f"line {lineno}: bad timestamp {ts!r}") from None
            out.append(Transaction(timestamp, frozenset(Item.parse(tok) for tok in body.split())))
    return out
