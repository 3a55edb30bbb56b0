"""Replay attack rules against the simulated plant and classify their impact."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..binarizer import Item, State, Transaction
from ..errors import LaunchError, ParseError, ScheduleError, SchemaError
from ..historian import Dataset, slice_window
from ..rulegen import AttackRule, parse_items, parse_rule, serialize_rule
from .model import (
    FLOW_METERS,
    LEVEL_SENSORS,
    ORP_SENSOR,
    PH_SENSOR,
    PUMP_CODES,
    VALVE_CODES,
    Plant,
    PlantParams,
    PlantState,
    state_items,
)


class Classification(str, enum.Enum):
    OVERFLOW = "overflow"
    UNDERFLOW = "underflow"
    OVERDOSE = "overdose"
    STARVATION = "process-starvation"
    NO_IMPACT = "no-impact"
    ALREADY_SATISFIED = "already-satisfied"
    FALSE_ATTACK = "false-attack"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Evidence:
    timestamp: int
    signal: str
    value: float
    threshold: float | None = None


@dataclass
class AnomalyReport:
    classification: Classification
    evidence: list[Evidence] = field(default_factory=list)
    narrative: str = ""

    def __post_init__(self):
        if self.classification is not Classification.NO_IMPACT and not self.evidence:
            raise ValueError(f"{self.classification} report needs evidence")


@dataclass(frozen=True)
class AttackScript:
    """A rule to force over ``[start, end]`` (simulator seconds), after forcing
    ``state_prefix`` to get past interlocks."""

    rule: AttackRule
    state_prefix: tuple[Item, ...] = ()
    start: int = 0
    end: int = 1

    def __post_init__(self):
        if not self.start < self.end:
            raise ScheduleError(f"script window [{self.start}, {self.end}] is empty")
        if self.start < 0:
            raise ScheduleError("script start must not be negative")
        object.__setattr__(self, "state_prefix", tuple(self.state_prefix))

    def forced_items(self) -> list[Item]:
        """Prefix plus rule items; the rule wins where both name an attribute."""
        rule_items = [*self.rule.antecedent, self.rule.consequent]
        named = {i.attribute for i in rule_items}
        return [i for i in self.state_prefix if i.attribute not in named] + rule_items


@dataclass(frozen=True)
class Interlock:
    """Forcing ``item`` is refused unless one of ``requires`` holds."""

    item: Item
    requires: tuple[Item, ...]
    reason: str

    def satisfied(self, view: frozenset[Item]) -> bool:
        return any(r in view for r in self.requires)

    def describe(self) -> str:
        need = " or ".join(map(str, self.requires))
        return f"{self.item} needs {need} ({self.reason})"


_on = lambda name: Item(name, State.ON)  # noqa: E731
_open = lambda name: Item(name, State.OPEN)  # noqa: E731

LAUNCH_INTERLOCKS = (
    Interlock(_on("P101"), (_open("MV201"),), "P101 must not dead-head against a closed outlet"),
    Interlock(_on("P203"), (_on("P101"),), "dosing only with the raw-water pump running"),
    Interlock(_on("P205"), (_on("P101"),), "dosing only with the raw-water pump running"),
    Interlock(_on("P302"), (_open("MV302"), _open("MV304")), "UF feed pump needs an open outlet"),
    Interlock(_on("P602"), (_open("MV301"),), "backwash pump needs the backwash inlet open"),
)


def blocking_interlocks(state: PlantState, forced: Sequence[Item], flow_threshold: float) -> list[Interlock]:
    forced_attrs = {i.attribute for i in forced}
    view = frozenset(
        [i for i in state_items(state, flow_threshold) if i.attribute not in forced_attrs] + list(forced)
    )
    return [lk for lk in LAUNCH_INTERLOCKS if lk.item in forced and not lk.satisfied(view)]


def _required(trace: Dataset, name: str) -> np.ndarray:
    try:
        return trace.column(name)
    except SchemaError:
        raise SchemaError(f"trace lacks column {name!r}") from None


def _runs(mask: np.ndarray, min_length: int) -> list[int]:
    """Start indices of True runs at least ``min_length`` long."""
    starts = []
    run = 0
    for i, flag in enumerate(mask.tolist()):
        run = run + 1 if flag else 0
        if run == min_length:
            starts.append(i - min_length + 1)
    return starts


_SEVERITY = (
    Classification.OVERFLOW,
    Classification.UNDERFLOW,
    Classification.OVERDOSE,
    Classification.STARVATION,
)


def detect_anomalies(trace: Dataset, params: PlantParams) -> AnomalyReport:
    """Classify a simulator trace by the most severe condition it shows.

    Overflow: a tank above HighHigh. Underflow: a tank below LowLow.
    Overdose: ORP or pH outside its safe band while a dosing pump runs.
    Process starvation: for ``starvation_window`` consecutive seconds a pump
    runs without delivering flow, or a tank below Low receives nothing.
    """
    ts = trace.timestamps
    thr = params.flow_threshold
    found: dict[Classification, list[Evidence]] = {c: [] for c in _SEVERITY}
    if len(trace) == 0:
        return AnomalyReport(Classification.NO_IMPACT, [], "empty trace")

    for tank, sensor in LEVEL_SENSORS.items():
        level = _required(trace, sensor)
        th = params.thresholds[tank]
        over = np.flatnonzero(level > th.high_high)
        if over.size:
            peak = int(np.argmax(level))
            found[Classification.OVERFLOW].append(Evidence(int(ts[over[0]]), sensor, float(level[over[0]]), th.high_high))
            found[Classification.OVERFLOW].append(Evidence(int(ts[peak]), sensor, float(level[peak]), th.high_high))
        under = np.flatnonzero(level < th.low_low)
        if under.size:
            low = int(np.argmin(level))
            found[Classification.UNDERFLOW].append(Evidence(int(ts[under[0]]), sensor, float(level[under[0]]), th.low_low))
            found[Classification.UNDERFLOW].append(Evidence(int(ts[low]), sensor, float(level[low]), th.low_low))

    on = PUMP_CODES[State.ON]
    dosing = (_required(trace, "P203") == on) | (_required(trace, "P205") == on)
    orp = _required(trace, ORP_SENSOR)
    ph = _required(trace, PH_SENSOR)
    for sensor, values, (lo, hi) in ((ORP_SENSOR, orp, params.orp_band), (PH_SENSOR, ph, params.ph_band)):
        for mask, bound in ((values > hi, hi), (values < lo, lo)):
            hits = np.flatnonzero(mask & dosing)
            if hits.size:
                i = int(hits[0])
                found[Classification.OVERDOSE].append(Evidence(int(ts[i]), sensor, float(values[i]), bound))

    flow = {m: _required(trace, m) for m in FLOW_METERS}
    level = {t: _required(trace, s) for t, s in LEVEL_SENSORS.items()}
    mv302_open = _required(trace, "MV302") == VALVE_CODES[State.OPEN]
    starving = {
        "P101": (_required(trace, "P101") == on) & (flow["FIT201"] < thr),
        "P302": (_required(trace, "P302") == on) & (flow["FIT301"] < thr),
        "LIT301": (level["T301"] < params.thresholds["T301"].low) & (flow["FIT201"] < thr),
        "LIT401": (level["T401"] < params.thresholds["T401"].low) & ~(mv302_open & (flow["FIT301"] >= thr)),
    }
    for signal, mask in starving.items():
        for i in _runs(mask, params.starvation_window)[:1]:
            found[Classification.STARVATION].append(
                Evidence(int(ts[i]), signal, float(params.starvation_window), None)
            )

    for cls in _SEVERITY:
        if found[cls]:
            evidence = [e for c in _SEVERITY for e in found[c]]
            return AnomalyReport(cls, evidence, _narrate(cls, found))
    return AnomalyReport(Classification.NO_IMPACT, [], "all signals stayed within their bands")


def _narrate(cls: Classification, found: dict[Classification, list[Evidence]]) -> str:
    parts = []
    for c in _SEVERITY:
        evs = found[c]
        if not evs:
            continue
        if c in (Classification.OVERFLOW, Classification.UNDERFLOW):
            worst = {}
            for e in evs:
                prev = worst.get(e.signal)
                if prev is None or (e.value > prev.value if c is Classification.OVERFLOW else e.value < prev.value):
                    worst[e.signal] = e
            word = "peaked at" if c is Classification.OVERFLOW else "fell to"
            bound = "HighHigh" if c is Classification.OVERFLOW else "LowLow"
            parts += [f"{s} {word} {e.value:.2f} mm ({bound} {e.threshold:g} mm)" for s, e in sorted(worst.items())]
        elif c is Classification.OVERDOSE:
            parts += [f"{e.signal} reached {e.value:g} (band limit {e.threshold:g}) while dosing" for e in evs]
        else:
            parts += [f"{e.signal} starved from t={e.timestamp}" for e in evs]
    return f"{cls}: " + "; ".join(parts)


@dataclass
class ScenarioRow:
    index: int
    rule: str
    prefix: str
    start: int
    end: int
    classification: Classification
    narrative: str


def _run_script(
    plant: Plant,
    script: AttackScript,
    reference: Sequence[Transaction] | None,
) -> tuple[bool, int, int]:
    """Drive ``plant`` through one script; returns (already_satisfied, window start, window end).

    The plant must sit at or before ``script.start``; it is left at
    ``script.end``.
    """
    params = plant.params
    while plant.state.clock < script.start:
        plant.advance()
    pattern = script.rule.items
    if pattern <= state_items(plant.state, params.flow_threshold):
        while plant.state.clock < script.end:
            plant.advance()
        return True, script.start, script.end

    forced = script.forced_items()
    prefix = list(script.state_prefix)
    waited = 0
    while True:
        blocked = blocking_interlocks(plant.state, forced, params.flow_threshold)
        if not blocked:
            break
        if waited >= params.settle_time or plant.state.clock >= script.end:
            raise LaunchError(f"cannot launch {serialize_rule(script.rule)}: {blocked[0].describe()}")
        plant.advance(prefix)
        waited += params.dt
    onset = plant.state.clock
    while plant.state.clock < script.end:
        plant.advance(forced)
    return False, onset, script.end


def _classify(
    window: Dataset, script: AttackScript, params: PlantParams, reference: Sequence[Transaction] | None
) -> AnomalyReport:
    report = detect_anomalies(window, params)
    if report.classification is Classification.NO_IMPACT and reference is not None:
        pattern = script.rule.items
        for t in reference:
            if pattern <= t.items:
                return AnomalyReport(
                    Classification.FALSE_ATTACK,
                    [Evidence(t.timestamp, "pattern", 1.0, None)],
                    f"false-attack: no impact and the full pattern occurs in normal data at t={t.timestamp}",
                )
    return report


def _satisfied_report(script: AttackScript, trace: Dataset, at: int) -> AnomalyReport:
    row = trace.timestamps.searchsorted(at)
    evidence = [
        Evidence(at, item.attribute, float(trace.column(item.attribute)[row]), None)
        for item in sorted(script.rule.items)
    ]
    return AnomalyReport(
        Classification.ALREADY_SATISFIED,
        evidence,
        "already-satisfied: the plant was operating as the rule describes; nothing was forced",
    )


def launch_attack(
    script: AttackScript,
    params: PlantParams,
    seed: int,
    *,
    reference: Sequence[Transaction] | None = None,
) -> tuple[Dataset, AnomalyReport]:
    """Run the plant normally until ``script.start``, force the script, and classify.

    The run continues unforced for ``params.cooldown`` seconds after the
    window. When ``reference`` (normal-operation transactions) is given, a
    no-impact rule whose pattern occurs in it is reported as a false attack.
    """
    plant = Plant(params, seed)
    satisfied, _, _ = _run_script(plant, script, reference)
    while plant.state.clock < script.end + params.cooldown:
        plant.advance()
    trace = plant.trace.dataset(f"sim-attack-seed{seed}")
    if satisfied:
        return trace, _satisfied_report(script, trace, params.epoch + script.start)
    return trace, _classify(trace, script, params, reference)


def check_schedule(scripts: Sequence[AttackScript]) -> None:
    ordered = sorted(enumerate(scripts), key=lambda p: p[1].start)
    for (i, a), (j, b) in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise ScheduleError(f"script {j + 1} [{b.start}, {b.end}] overlaps script {i + 1} [{a.start}, {a.end}]")


def run_scenario_table(
    scripts: Sequence[AttackScript],
    params: PlantParams,
    seed: int = 0,
    *,
    reference: Sequence[Transaction] | None = None,
    until: int = 0,
) -> tuple[list[ScenarioRow], Dataset]:
    """Replay scripts one after another in a single plant session.

    Each script is classified over ``[start, end + cooldown]``, cut short at
    the next script's start. Rows keep the input order. The session runs to
    at least ``until`` seconds.
    """
    check_schedule(scripts)
    plant = Plant(params, seed)
    order = sorted(range(len(scripts)), key=lambda k: scripts[k].start)
    outcomes: dict[int, tuple[bool, int]] = {}
    for k in order:
        try:
            satisfied, onset, _ = _run_script(plant, scripts[k], reference)
        except LaunchError as exc:
            raise LaunchError(f"script {k + 1}: {exc}") from None
        outcomes[k] = (satisfied, onset)
    last_end = max((s.end for s in scripts), default=0)
    stop_at = max(last_end + params.cooldown if scripts else 0, until)
    while plant.state.clock < stop_at:
        plant.advance()
    trace = plant.trace.dataset(f"sim-scenarios-seed{seed}")

    starts = sorted(s.start for s in scripts)
    rows = []
    for k, script in enumerate(scripts):
        satisfied, _ = outcomes[k]
        later = [s for s in starts if s > script.start]
        stop = script.end + params.cooldown
        if later:
            stop = min(stop, later[0] - 1)
        begin = params.epoch + script.start
        window = slice_window(trace, begin, params.epoch + stop)
        if satisfied:
            report = _satisfied_report(script, trace, begin)
        else:
            report = _classify(window, script, params, reference)
        rows.append(
            ScenarioRow(
                k + 1,
                serialize_rule(script.rule),
                format_prefix(script.state_prefix),
                script.start,
                script.end,
                report.classification,
                report.narrative,
            )
        )
    return rows, trace


def format_prefix(prefix: Sequence[Item]) -> str:
    return ", ".join(str(i) for i in prefix) if prefix else "N/A"


def parse_clock(text: str) -> int:
    """Seconds from ``HH:MM``, ``HH:MM:SS`` or a plain integer."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(0)
            h, m, s = parts
            return h * 3600 + m * 60 + s
        return int(text)
    except ValueError:
        raise ParseError(f"bad time {text!r}") from None


def format_clock(seconds: int) -> str:
    h, rem = divmod(seconds, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}" if s == 0 else f"{h:02d}:{m:02d}:{s:02d}"


SCRIPT_HEADER = ("rule", "prefix", "start", "end")


def read_scripts(path) -> list[AttackScript]:
    """Tab-separated ``rule, prefix, start, end`` with a header row; ``N/A`` means no prefix."""
    scripts = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        return scripts
    header = tuple(c.strip().lower() for c in lines[0].split("\t"))
    if header != SCRIPT_HEADER:
        raise ParseError(f"script file header must be {SCRIPT_HEADER}, got {header}")
    for n, line in enumerate(lines[1:], 1):
        cols = line.split("\t")
        if len(cols) != 4:
            raise ParseError(f"script {n}: expected 4 tab-separated columns, got {len(cols)}")
        rule_text, prefix_text, start, end = cols
        try:
            prefix = () if prefix_text.strip() in ("", "N/A") else tuple(parse_items(prefix_text))
            scripts.append(AttackScript(parse_rule(rule_text), prefix, parse_clock(start), parse_clock(end)))
        except (ParseError, ScheduleError) as exc:
            raise type(exc)(f"script {n}: {exc}") from None
    return scripts


def write_scripts(scripts: Sequence[AttackScript], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(SCRIPT_HEADER) + "\n")
        for s in scripts:
            fh.write(
                f"{serialize_rule(s.rule)}\t{format_prefix(s.state_prefix)}\t"
                f"{format_clock(s.start)}\t{format_clock(s.end)}\n"
            )


TABLE_HEADER = ("S.No.", "Attack Rule", "State Prefix", "Start Time", "End Time", "Impact", "Details")


def write_scenario_csv(rows: Sequence[ScenarioRow], path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for r in rows:
            w.writerow((r.index, r.rule, r.prefix, format_clock(r.start), format_clock(r.end), str(r.classification), r.narrative))
