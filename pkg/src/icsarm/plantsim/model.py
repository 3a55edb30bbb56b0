"""Discrete-time model of a simplified six-stage water-treatment plant.

Four tanks are modelled: raw water (T101), UF feed (T301), RO feed (T401)
and the backwash/permeate tank (T601). Levels are integrated with explicit
Euler on a fixed 0.01 mm grid, so a run is reproducible bit for bit.

Water path::

    inlet --MV101--> T101 --P101/MV201--> T301 --P302--+--MV302--> T401 --RO--> T601 --product-->
                                                      +--MV304--> drain (UF flush)
    T601 --P602/MV301--> UF backwash --MV303--> drain

Control (one PLC scan per step) reads the tank levels, works through the
actuators in a fixed order and lets every forced item override the automatic
output the moment it is computed, so later interlocks see the forced value.
Actuators released from forcing stay in manual at their last forced state for
``manual_hold`` seconds before automatic control resumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from ..binarizer import Item, State
from ..errors import ConfigurationError
from ..historian import AttributeKind, AttributeSchema, Dataset

TANKS = ("T101", "T301", "T401", "T601")
VALVES = ("MV101", "MV201", "MV301", "MV302", "MV303", "MV304")
PUMPS = ("P101", "P203", "P205", "P302", "P602")
FLOW_METERS = ("FIT101", "FIT201", "FIT301", "FIT601")
LEVEL_SENSORS = {"T101": "LIT101", "T301": "LIT301", "T401": "LIT401", "T601": "LIT601"}
PH_SENSOR = "AIT202"
ORP_SENSOR = "AIT203"

VALVE_CODES = {State.CLOSE: 1.0, State.OPEN: 2.0}
PUMP_CODES = {State.OFF: 1.0, State.ON: 2.0}

# Implications the control logic guarantees in every unforced scan.
CONTROL_IMPLICATIONS = (
    "P101=On --> MV201=Open",
    "MV201=Close --> P101=Off",
    "FIT101>0.5 --> MV101=Open",
    "MV101=Close --> FIT101<0.5",
    "FIT201>0.5 --> P101=On",
    "FIT201>0.5 --> MV201=Open",
    "P203=On --> FIT201>0.5",
    "P205=On --> FIT201>0.5",
    "FIT201<0.5 --> P203=Off",
    "FIT201<0.5 --> P205=Off",
    "FIT301>0.5 --> P302=On",
    "MV302=Open --> P302=On",
    "MV302=Open --> MV304=Close",
    "P302=On, MV304=Close --> MV302=Open",
    "MV301=Open --> MV303=Open",
    "P602=On --> MV301=Open",
    "FIT601>0.5 --> P602=On",
)


@dataclass(frozen=True)
class TankThresholds:
    low_low: float = 250.0
    low: float = 500.0
    high: float = 800.0
    high_high: float = 1000.0

    def __post_init__(self):
        if not self.low_low < self.low < self.high < self.high_high:
            raise ConfigurationError(
                f"tank thresholds must satisfy LowLow < Low < High < HighHigh, got {self}"
            )


def _frozen(mapping: Mapping) -> Mapping:
    return MappingProxyType(dict(mapping))


@dataclass(frozen=True)
class PlantParams:
    """Physical and control parameters. Flows are m³/h, levels mm, times s."""

    tank_areas: Mapping[str, float] = field(
        default_factory=lambda: _frozen({t: 0.65 for t in TANKS})
    )
    thresholds: Mapping[str, TankThresholds] = field(
        default_factory=lambda: _frozen({t: TankThresholds() for t in TANKS})
    )
    initial_levels: Mapping[str, float] = field(
        default_factory=lambda: _frozen({t: 600.0 for t in TANKS})
    )
    inlet_rate: float = 2.6
    pump_rates: Mapping[str, float] = field(
        default_factory=lambda: _frozen({"P101": 2.4, "P302": 2.2, "P602": 2.0})
    )
    ro_rate: float = 2.0
    product_rate: float = 2.5
    flow_threshold: float = 0.5
    dry_level: float = 10.0
    noise_amplitude: float = 0.02
    backwash_period: int = 1800
    backwash_duration: int = 60
    flush_duration: int = 30
    orp_initial: float = 250.0
    orp_control: tuple[float, float] = (240.0, 260.0)
    orp_band: tuple[float, float] = (150.0, 400.0)
    orp_rise: float = 1.5
    orp_decay: float = 0.5
    ph_initial: float = 7.2
    ph_control: tuple[float, float] = (7.1, 7.3)
    ph_band: tuple[float, float] = (6.5, 8.5)
    ph_fall: float = 0.01
    ph_recover: float = 0.005
    raw_ph: float = 7.8
    manual_hold: int = 90
    cooldown: int = 120
    settle_time: int = 30
    starvation_window: int = 120
    dt: int = 1
    epoch: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        for name in ("tank_areas", "thresholds", "initial_levels"):
            missing = set(TANKS) - set(getattr(self, name))
            if missing:
                raise ConfigurationError(f"{name} lacks {sorted(missing)}")
        if any(a <= 0 for a in self.tank_areas.values()):
            raise ConfigurationError("tank areas must be positive")
        if self.flow_threshold <= 0:
            raise ConfigurationError("flow_threshold must be positive")
        if not self.backwash_duration + self.flush_duration < self.backwash_period:
            raise ConfigurationError("backwash and flush must fit inside the backwash period")
        object.__setattr__(self, "tank_areas", _frozen(self.tank_areas))
        object.__setattr__(self, "thresholds", _frozen(self.thresholds))
        object.__setattr__(self, "initial_levels", _frozen(self.initial_levels))
        object.__setattr__(self, "pump_rates", _frozen(self.pump_rates))
        for name in ("orp_control", "orp_band", "ph_control", "ph_band"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigurationError(f"{name} must be an increasing pair")
            object.__setattr__(self, name, (lo, hi))

    # mapping proxies do not pickle; worker processes get plain dicts and re-freeze
    def __getstate__(self) -> dict:
        return {
            f.name: dict(v) if isinstance(v, MappingProxyType) else v
            for f in fields(self)
            for v in (getattr(self, f.name),)
        }

    def __setstate__(self, state: dict) -> None:
        for name, value in state.items():
            object.__setattr__(self, name, _frozen(value) if isinstance(value, dict) else value)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "PlantParams":
        """Build from a config-file section; nested maps merge over the defaults."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown plant keys: {sorted(unknown)}")
        base = cls()
        kwargs = {}
        for key, value in data.items():
            if key == "thresholds":
                merged = dict(base.thresholds)
                for tank, th in value.items():
                    merged[tank] = TankThresholds(**th)
                value = merged
            elif key in ("tank_areas", "initial_levels", "pump_rates"):
                value = {**getattr(base, key), **value}
            kwargs[key] = value
        return replace(base, **kwargs)

    def nominal_flow(self, meter: str) -> float:
        return {
            "FIT101": self.inlet_rate,
            "FIT201": self.pump_rates["P101"],
            "FIT301": self.pump_rates["P302"],
            "FIT601": self.pump_rates["P602"],
        }[meter]

    def level_step(self, tank: str) -> float:
        """Largest level change (mm) one step can produce in ``tank``.

        RO demand noise is Gaussian, so it is bounded at six standard deviations.
        """
        ro = self.ro_rate * (1 + 6 * self.noise_amplitude)
        p = self.pump_rates
        worst = {
            "T101": max(self.inlet_rate, p["P101"]),
            "T301": max(p["P101"], p["P302"]),
            "T401": max(p["P302"], ro),
            "T601": max(ro, p["P602"] + self.product_rate),
        }[tank]
        return worst * self.dt / 3.6 / self.tank_areas[tank] + 0.01


@dataclass(frozen=True)
class PlantState:
    """Plant snapshot after ``clock`` seconds.

    ``flows`` are the physical flows; ``readings`` are what the flow meters
    report, which differ only while a flow item is being spoofed.
    ``latches`` hold PLC memory bits and ``manual`` maps actuators in manual
    hold to (state, release clock).
    """

    clock: int
    tank_levels: Mapping[str, float]
    valve_positions: Mapping[str, State]
    pump_states: Mapping[str, State]
    flows: Mapping[str, float]
    readings: Mapping[str, float]
    chem: Mapping[str, float]
    aux_flows: Mapping[str, float] = field(default_factory=dict)
    latches: Mapping[str, bool] = field(default_factory=dict)
    manual: Mapping[str, tuple[State, int]] = field(default_factory=dict)

    def actuator(self, name: str) -> State:
        if name in self.valve_positions:
            return self.valve_positions[name]
        return self.pump_states[name]


def initial_state(params: PlantParams) -> PlantState:
    """Idle plant: every valve closed, every pump stopped, no flow."""
    zero = {m: 0.0 for m in FLOW_METERS}
    return PlantState(
        clock=0,
        tank_levels={t: round(params.initial_levels[t], 2) for t in TANKS},
        valve_positions={v: State.CLOSE for v in VALVES},
        pump_states={p: State.OFF for p in PUMPS},
        flows=dict(zero),
        readings=dict(zero),
        chem={"ORP": params.orp_initial, "pH": params.ph_initial},
        aux_flows={"RO": 0.0, "PRODUCT": 0.0, "UF_DRAIN": 0.0},
        latches={
            "MV101": False, "MV201": False, "RO_FEED": False, "PRODUCT": False,
            "P203": False, "P205": False,
        },
    )


def level_delta_cmm(inflow: float, outflow: float, area: float, dt: float) -> int:
    """Level change in hundredths of a millimetre, rounded to the grid."""
    return round((inflow - outflow) * dt * 1e5 / 3600.0 / area)


def _hysteresis(latched: bool, level: float, th: TankThresholds) -> bool:
    if level < th.low:
        return True
    if level > th.high:
        return False
    return latched


def _check_forced(forced: Iterable[Item]) -> dict[str, State]:
    out: dict[str, State] = {}
    for item in forced:
        name = item.attribute
        if name in VALVES:
            ok = item.state in (State.OPEN, State.CLOSE)
        elif name in PUMPS:
            ok = item.state in (State.ON, State.OFF)
        elif name in FLOW_METERS:
            ok = item.state in (State.FLOW_HIGH, State.FLOW_LOW)
        else:
            raise ConfigurationError(f"cannot force unknown attribute {name!r}")
        if not ok:
            raise ConfigurationError(f"state {item.state} does not fit {name}")
        if out.get(name, item.state) != item.state:
            raise ConfigurationError(f"{name} forced to two different states")
        out[name] = item.state
    return out


def step(
    state: PlantState,
    params: PlantParams,
    forced: Iterable[Item] = (),
    *,
    noise: float = 0.0,
) -> PlantState:
    """Advance the plant by ``params.dt`` seconds.

    ``noise`` is the relative deviation of the RO demand for this step.
    """
    force = _check_forced(forced)
    dt = params.dt
    th = params.thresholds
    lv = state.tank_levels
    clock = state.clock
    held = {a: s for a, (s, until) in state.manual.items() if until > clock}
    latches = dict(state.latches)
    act: dict[str, State] = {}

    def drive(name: str, auto: State) -> State:
        value = force.get(name) or held.get(name) or auto
        act[name] = value
        return value

    open_if = lambda cond: State.OPEN if cond else State.CLOSE  # noqa: E731
    on_if = lambda cond: State.ON if cond else State.OFF  # noqa: E731

    # stage 1: inlet valve on raw-water tank hysteresis
    latches["MV101"] = _hysteresis(latches["MV101"], lv["T101"], th["T101"])
    drive("MV101", open_if(latches["MV101"]))

    # stage 2: UF feed tank demand pulls from the raw-water tank
    latches["MV201"] = _hysteresis(latches["MV201"], lv["T301"], th["T301"])
    mv201 = drive("MV201", open_if(latches["MV201"]))
    drive(
        "P101",
        on_if(mv201 is State.OPEN and lv["T101"] > th["T101"].low_low and lv["T301"] < th["T301"].high),
    )

    # stage 3: filtration, UF backwash and post-backwash flush on a fixed schedule
    phase = clock % params.backwash_period
    backwash = phase >= params.backwash_period - params.backwash_duration
    flush = clock >= params.backwash_period and phase < params.flush_duration
    latches["RO_FEED"] = _hysteresis(latches["RO_FEED"], lv["T401"], th["T401"])
    feed = latches["RO_FEED"] and not backwash and not flush and lv["T301"] > th["T301"].low_low
    mv301 = drive("MV301", open_if(backwash))
    mv303 = drive("MV303", open_if(backwash))
    mv304 = drive("MV304", open_if(flush))
    mv302 = drive("MV302", open_if(feed))
    uf_path = mv302 is State.OPEN or mv304 is State.OPEN
    p302_auto = (feed or (flush and lv["T301"] > th["T301"].low_low)) and uf_path
    drive("P302", on_if(p302_auto))
    drive(
        "P602",
        on_if(backwash and mv301 is State.OPEN and mv303 is State.OPEN and lv["T601"] > th["T601"].low_low),
    )

    # physical flows
    dry = params.dry_level
    rates = params.pump_rates
    flows = {
        "FIT101": params.inlet_rate if act["MV101"] is State.OPEN else 0.0,
        "FIT201": rates["P101"]
        if act["P101"] is State.ON and act["MV201"] is State.OPEN and lv["T101"] > dry
        else 0.0,
        "FIT301": rates["P302"]
        if act["P302"] is State.ON and uf_path and lv["T301"] > dry
        else 0.0,
        "FIT601": rates["P602"]
        if act["P602"] is State.ON and mv301 is State.OPEN and mv303 is State.OPEN and lv["T601"] > dry
        else 0.0,
    }
    to_t401 = flows["FIT301"] if mv302 is State.OPEN else 0.0
    ro = params.ro_rate * max(0.0, 1.0 + noise) if lv["T401"] > th["T401"].low_low else 0.0
    latches["PRODUCT"] = not _hysteresis(not latches["PRODUCT"], lv["T601"], th["T601"])
    product = params.product_rate if latches["PRODUCT"] and lv["T601"] > dry else 0.0

    readings = dict(flows)
    for meter in FLOW_METERS:
        if meter in force:
            readings[meter] = params.nominal_flow(meter) if force[meter] is State.FLOW_HIGH else 0.0

    # stage 2 dosing: analyzer hysteresis, gated by the FIT201 flow switch
    orp = state.chem["ORP"]
    ph = state.chem["pH"]
    if orp < params.orp_control[0]:
        latches["P205"] = True
    elif orp > params.orp_control[1]:
        latches["P205"] = False
    if ph > params.ph_control[1]:
        latches["P203"] = True
    elif ph < params.ph_control[0]:
        latches["P203"] = False
    flow_switch = readings["FIT201"] >= params.flow_threshold
    drive("P203", on_if(flow_switch and latches["P203"]))
    drive("P205", on_if(flow_switch and latches["P205"]))

    balance = {
        "T101": (flows["FIT101"], flows["FIT201"]),
        "T301": (flows["FIT201"], flows["FIT301"]),
        "T401": (to_t401, ro),
        "T601": (ro, flows["FIT601"] + product),
    }
    levels = {}
    for tank, (qin, qout) in balance.items():
        cmm = round(lv[tank] * 100) + level_delta_cmm(qin, qout, params.tank_areas[tank], dt)
        levels[tank] = max(cmm, 0) / 100

    # chlorine raises ORP and is consumed by flowing water; acid lowers pH and
    # fresh raw water pulls it back up; stagnant water keeps its chemistry
    fed = flows["FIT201"] >= params.flow_threshold
    if act["P205"] is State.ON:
        orp += params.orp_rise * dt
    elif fed:
        orp = max(orp - params.orp_decay * dt, 0.0)
    if act["P203"] is State.ON:
        ph -= params.ph_fall * dt
    elif fed:
        ph = min(ph + params.ph_recover * dt, max(ph, params.raw_ph))

    new_clock = clock + dt
    manual = {a: v for a, v in state.manual.items() if v[1] > new_clock}
    for name, value in force.items():
        if name in VALVES or name in PUMPS:
            manual[name] = (value, new_clock + params.manual_hold)

    return PlantState(
        clock=new_clock,
        tank_levels=levels,
        valve_positions={v: act[v] for v in VALVES},
        pump_states={p: act[p] for p in PUMPS},
        flows=flows,
        readings=readings,
        chem={"ORP": round(orp, 2), "pH": round(ph, 3)},
        aux_flows={"RO": ro, "PRODUCT": product, "UF_DRAIN": flows["FIT301"] - to_t401},
        latches=latches,
        manual=manual,
    )


def state_items(state: PlantState, flow_threshold: float) -> frozenset[Item]:
    """Binary items an operator (or the binarizer) would read off this state."""
    items = [Item(v, s) for v, s in state.valve_positions.items()]
    items += [Item(p, s) for p, s in state.pump_states.items()]
    items += [
        Item(m, State.FLOW_HIGH if state.readings[m] >= flow_threshold else State.FLOW_LOW)
        for m in FLOW_METERS
    ]
    return frozenset(items)


def sim_schema() -> list[AttributeSchema]:
    """Historian schema of the simulator's trace columns."""
    analog, pump, valve = AttributeKind.ANALOG, AttributeKind.BINARY_ACTUATOR, AttributeKind.TERNARY_VALVE
    return [
        AttributeSchema("FIT101", analog, "m3/h"),
        AttributeSchema("LIT101", analog, "mm"),
        AttributeSchema("MV101", valve, "", "FIT101"),
        AttributeSchema("P101", pump),
        AttributeSchema("FIT201", analog, "m3/h"),
        AttributeSchema(PH_SENSOR, analog, "pH"),
        AttributeSchema(ORP_SENSOR, analog, "mV"),
        AttributeSchema("MV201", valve, "", "FIT201"),
        AttributeSchema("P203", pump),
        AttributeSchema("P205", pump),
        AttributeSchema("FIT301", analog, "m3/h"),
        AttributeSchema("LIT301", analog, "mm"),
        AttributeSchema("MV301", valve, "", "FIT301"),
        AttributeSchema("MV302", valve, "", "FIT301"),
        AttributeSchema("MV303", valve, "", "FIT301"),
        AttributeSchema("MV304", valve, "", "FIT301"),
        AttributeSchema("P302", pump),
        AttributeSchema("LIT401", analog, "mm"),
        AttributeSchema("FIT601", analog, "m3/h"),
        AttributeSchema("LIT601", analog, "mm"),
        AttributeSchema("P602", pump),
    ]


def record_values(state: PlantState) -> dict[str, float]:
    values: dict[str, float] = {}
    for meter in FLOW_METERS:
        values[meter] = state.readings[meter]
    for tank, sensor in LEVEL_SENSORS.items():
        values[sensor] = state.tank_levels[tank]
    for v, s in state.valve_positions.items():
        values[v] = VALVE_CODES[s]
    for p, s in state.pump_states.items():
        values[p] = PUMP_CODES[s]
    values[PH_SENSOR] = state.chem["pH"]
    values[ORP_SENSOR] = state.chem["ORP"]
    return values


class TraceRecorder:
    """Accumulates states into historian columns."""

    def __init__(self, params: PlantParams):
        self.params = params
        self.schema = sim_schema()
        self.timestamps: list[int] = []
        self.columns: dict[str, list[float]] = {a.name: [] for a in self.schema}

    def append(self, state: PlantState) -> None:
        self.timestamps.append(self.params.epoch + state.clock)
        for name, value in record_values(state).items():
            self.columns[name].append(value)

    def __len__(self) -> int:
        return len(self.timestamps)

    def dataset(self, label: str) -> Dataset:
        return Dataset(self.schema, self.timestamps, self.columns, label)


class Plant:
    """A running simulation: state, seeded demand noise and the recorded trace."""

    def __init__(self, params: PlantParams, seed: int):
        self.params = params
        self.state = initial_state(params)
        self.rng = np.random.default_rng(seed)
        self.trace = TraceRecorder(params)
        self.trace.append(self.state)

    def advance(self, forced: Iterable[Item] = ()) -> PlantState:
        noise = float(self.rng.normal(0.0, 1.0)) * self.params.noise_amplitude
        self.state = step(self.state, self.params, forced, noise=noise)
        self.trace.append(self.state)
        return self.state


def run_normal(params: PlantParams, duration: int, seed: int) -> Dataset:
    """Closed-loop operation without forcing; ``duration`` 1 Hz records."""
    if duration < 1:
        raise ValueError("duration must be at least 1")
    plant = Plant(params, seed)
    while len(plant.trace) < duration:
        plant.advance()
    return plant.trace.dataset(f"sim-normal-seed{seed}")
