"""Historian datasets: loading, validating, windowing and writing plant telemetry CSVs.

A historian CSV has a header row with one column per attribute plus a
``Timestamp`` column. Timestamps are either integer epoch seconds or
wall-clock strings (the SWaT convention, e.g. ``28/12/2015 10:00:00 AM``);
both are held internally as integer seconds. Lines starting with ``#``
before the header are treated as comments, which lets tools record
provenance such as the generating seed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import OrderingError, ParseError, SchemaError

TIMESTAMP_COLUMN = "Timestamp"


class AttributeKind(str, enum.Enum):
    ANALOG = "analog"
    BINARY_ACTUATOR = "binary-actuator"
    TERNARY_VALVE = "ternary-valve"


@dataclass(frozen=True)
class AttributeSchema:
    """Declaration of one historian attribute.

    ``paired_flow_meter`` is required for ternary valves: it names the analog
    flow meter used to resolve the valve's transition state.
    """

    name: str
    kind: AttributeKind
    unit: str = ""
    paired_flow_meter: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttributeKind(self.kind))


def validate_schema(schema: Sequence[AttributeSchema]) -> None:
    by_name: dict[str, AttributeSchema] = {}
    for attr in schema:
        if attr.name in by_name:
            raise SchemaError(f"duplicate attribute {attr.name!r} in schema")
        by_name[attr.name] = attr
    for attr in schema:
        if attr.kind is AttributeKind.TERNARY_VALVE:
            pair = attr.paired_flow_meter
            if pair is None:
                raise SchemaError(f"ternary valve {attr.name!r} has no paired flow meter")
            if pair not in by_name:
                raise SchemaError(
                    f"ternary valve {attr.name!r} pairs with {pair!r}, which is not in the schema"
                )
            if by_name[pair].kind is not AttributeKind.ANALOG:
                raise SchemaError(f"flow meter {pair!r} paired with {attr.name!r} is not analog")
        elif attr.paired_flow_meter is not None:
            raise SchemaError(f"only ternary valves may declare a paired flow meter ({attr.name!r})")


@dataclass(frozen=True)
class PlantRecord:
    timestamp: int
    values: Mapping[str, float]


class Dataset:
    """An immutable, column-oriented collection of historian records.

    Columns are stored as read-only numpy arrays; ``records`` materialises
    the row view on first access. Equality ignores ``label``.
    """

    def __init__(
        self,
        schema: Sequence[AttributeSchema],
        timestamps: Sequence[int] | np.ndarray,
        columns: Mapping[str, Sequence[float] | np.ndarray],
        label: str = "",
    ):
        schema = tuple(schema)
        validate_schema(schema)
        ts = np.asarray(timestamps, dtype=np.int64).copy()
        if ts.ndim != 1:
            raise SchemaError("timestamps must be one-dimensional")
        names = [a.name for a in schema]
        missing = [n for n in names if n not in columns]
        if missing:
            raise SchemaError(f"missing column {missing[0]!r}")
        cols = {}
        for name in names:
            arr = np.asarray(columns[name], dtype=np.float64).copy()
            if arr.shape != ts.shape:
                raise SchemaError(f"column {name!r} has {arr.size} values for {ts.size} timestamps")
            arr.flags.writeable = False
            cols[name] = arr
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            bad = int(np.argmax(np.diff(ts) <= 0)) + 1
            raise OrderingError(f"timestamp at row {bad} is not strictly increasing")
        ts.flags.writeable = False
        self.schema = schema
        self.timestamps = ts
        self.columns: Mapping[str, np.ndarray] = cols
        self.label = label

    @classmethod
    def from_records(
        cls, schema: Sequence[AttributeSchema], records: Iterable[PlantRecord], label: str = ""
    ) -> "Dataset":
        records = list(records)
        names = [a.name for a in schema]
        for i, rec in enumerate(records):
            if set(rec.values) != set(names):
                raise SchemaError(f"record {i} does not carry exactly the schema attributes")
        return cls(
            schema,
            [r.timestamp for r in records],
            {n: [r.values[n] for r in records] for n in names},
            label,
        )

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.schema]

    def attribute(self, name: str) -> AttributeSchema:
        for attr in self.schema:
            if attr.name == name:
                return attr
        raise SchemaError(f"attribute {name!r} not in dataset {self.label!r}")

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"attribute {name!r} not in dataset {self.label!r}") from None

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @cached_property
    def records(self) -> tuple[PlantRecord, ...]:
        names = self.names
        data = [self.columns[n].tolist() for n in names]
        return tuple(
            PlantRecord(int(t), dict(zip(names, row)))
            for t, row in zip(self.timestamps.tolist(), zip(*data))
        )

    def __iter__(self) -> Iterator[PlantRecord]:
        return iter(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.timestamps, other.timestamps)
            and all(np.array_equal(self.columns[n], other.columns[n]) for n in self.names)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Dataset(label={self.label!r}, records={len(self)}, attributes={len(self.schema)})"

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({n: self.columns[n] for n in self.names})
        frame.insert(0, TIMESTAMP_COLUMN, self.timestamps)
        return frame


def _count_comment_lines(path: Path) -> int:
    n = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            n += 1
    return n


def _parse_timestamps(raw: pd.Series, timestamp_format: str | None) -> np.ndarray:
    stripped = raw.str.strip()
    if stripped.str.fullmatch(r"[+-]?\d+").all():
        return stripped.astype(np.int64).to_numpy()
    try:
        parsed = pd.to_datetime(stripped, format=timestamp_format, dayfirst=timestamp_format is None)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"unparseable {TIMESTAMP_COLUMN} value: {exc}") from None
    bad = parsed.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"unparseable {TIMESTAMP_COLUMN} at row {row}: {raw.iloc[row]!r}")
    return (parsed.astype("datetime64[s]").astype(np.int64)).to_numpy()


def load_csv(
    path: str | Path,
    schema: Sequence[AttributeSchema],
    *,
    label: str | None = None,
    timestamp_format: str | None = None,
    check_cadence: bool = True,
) -> Dataset:
    """Load a historian CSV restricted to ``schema``'s attributes.

    Header names are matched after stripping whitespace, in any order; extra
    columns are ignored. Row indices in error messages count data rows from 0.

    Raises
    ------
    SchemaError
        A schema attribute (or the timestamp column) is absent.
    ParseError
        A cell is empty or not numeric.
    OrderingError
        Timestamps are not strictly increasing, or not 1 s apart while
        ``check_cadence`` is set.
    """
    path = Path(path)
    validate_schema(schema)
    frame = pd.read_csv(
        path,
        dtype=str,
        keep_default_na=False,
        skiprows=_count_comment_lines(path),
        encoding="utf-8",
    )
    frame.columns = [str(c).strip() for c in frame.columns]
    if TIMESTAMP_COLUMN not in frame.columns:
        raise SchemaError(f"missing column {TIMESTAMP_COLUMN!r}")
    for attr in schema:
        if attr.name not in frame.columns:
            raise SchemaError(f"missing column {attr.name!r}")
    if len(frame) == 0:
        raise SchemaError(f"{path} has no data rows")

    timestamps = _parse_timestamps(frame[TIMESTAMP_COLUMN], timestamp_format)
    columns = {}
    for attr in schema:
        raw = frame[attr.name].str.strip()
        # to_numeric finds bad cells but can be off by an ulp; astype parses exactly
        bad = ~np.isfinite(pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ParseError(f"non-numeric value {raw.iloc[row]!r} in column {attr.name!r} at row {row}")
        columns[attr.name] = raw.astype(np.float64).to_numpy()

    steps = np.diff(timestamps)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise OrderingError(f"timestamp at row {row} is not strictly increasing")
    if check_cadence and np.any(steps != 1):
        row = int(np.flatnonzero(steps != 1)[0]) + 1
        raise OrderingError(f"timestamp at row {row} breaks the 1 Hz cadence")

    return Dataset(schema, timestamps, columns, label if label is not None else path.stem)


def format_value(value: float) -> str:
    """Shortest text that parses back to exactly ``value``."""
    if not math.isfinite(value):
        raise ValueError(f"cannot serialise non-finite value {value!r}")
    if value.is_integer() and abs(value) < 2**53 and not (value == 0 and math.copysign(1.0, value) < 0):
        return str(int(value))
    return repr(value)


def write_csv(dataset: Dataset, path: str | Path, comments: Sequence[str] = ()) -> None:
    names = dataset.names
    cols = [dataset.columns[n].tolist() for n in names]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join([TIMESTAMP_COLUMN, *names]) + "\n")
        for ts, row in zip(dataset.timestamps.tolist(), zip(*cols)):
            fh.write(",".join([str(ts), *map(format_value, row)]) + "\n")


def slice_window(d: Dataset, start: int, end: int) -> Dataset:
    """Records with ``start <= timestamp <= end``; may be empty."""
    if start > end:
        raise ValueError(f"window start {start} is after end {end}")
    lo = int(np.searchsorted(d.timestamps, start, side="left"))
    hi = int(np.searchsorted(d.timestamps, end, side="right"))
    return Dataset(
        d.schema,
        d.timestamps[lo:hi],
        {n: d.columns[n][lo:hi] for n in d.names},
        f"{d.label}[{start}:{end}]",
    )


def schema_from_mapping(entries: Iterable[Mapping]) -> list[AttributeSchema]:
    """Build a schema from plain mappings (as read from a config file)."""
    return [
        AttributeSchema(
            name=e["name"],
            kind=AttributeKind(e["kind"]),
            unit=e.get("unit", ""),
            paired_flow_meter=e.get("paired_flow_meter"),
        )
        for e in entries
    ]
