"""Pipeline configuration: one YAML document, a section per stage.

Example::

    historian:
      timestamp_format: "%d/%m/%Y %I:%M:%S %p"
      check_cadence: true
      schema:                       # omit to use the simulator's columns
        - {name: FIT101, kind: analog, unit: m3/h}
        - {name: MV101, kind: ternary-valve, paired_flow_meter: FIT101}
    binarize:
      flow_threshold: 0.5
    mining:
      support: 3/10
      confidence: 9/10
    plant:
      manual_hold: 90
    pipeline:
      seed: 0
      threads: 4
      out: results

Thresholds are read as exact rationals; ``0.3`` in the file means 3/10.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import yaml

from .binarizer import BinarizeConfig
from .errors import ConfigurationError, ParseError
from .historian import AttributeSchema, schema_from_mapping
from .miner import as_fraction
from .plantsim.model import PlantParams, sim_schema

SECTIONS = ("historian", "binarize", "mining", "plant", "pipeline")

DEFAULT_SUPPORT = Fraction(3, 10)
DEFAULT_CONFIDENCE = Fraction(9, 10)


def rational(value: Any, name: str) -> Fraction:
    """Exact threshold in (0, 1] from an int, ``"N/D"`` string or YAML decimal."""
    if isinstance(value, float):
        value = repr(value)
    try:
        frac = as_fraction(value)
    except (ParseError, TypeError) as exc:
        raise ConfigurationError(f"{name}: {exc}") from None
    if not 0 < frac <= 1:
        raise ConfigurationError(f"{name} must lie in (0, 1], got {frac}")
    return frac


@dataclass(frozen=True)
class PipelineConfig:
    schema: tuple[AttributeSchema, ...] = field(default_factory=lambda: tuple(sim_schema()))
    timestamp_format: str | None = None
    check_cadence: bool = True
    binarize: BinarizeConfig = field(default_factory=BinarizeConfig)
    support: Fraction = DEFAULT_SUPPORT
    confidence: Fraction = DEFAULT_CONFIDENCE
    max_size: int | None = None
    plant: PlantParams = field(default_factory=PlantParams)
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    out: Path = Path(".")

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        if self.max_size is not None and self.max_size < 1:
            raise ConfigurationError("max_size must be at least 1")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "PipelineConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}

        hist = dict(data.get("historian") or {})
        if "schema" in hist:
            try:
                kwargs["schema"] = tuple(schema_from_mapping(hist.pop("schema")))
            except (KeyError, ValueError) as exc:
                raise ConfigurationError(f"historian.schema: {exc}") from None
        for key in ("timestamp_format", "check_cadence"):
            if key in hist:
                kwargs[key] = hist.pop(key)
        if hist:
            raise ConfigurationError(f"unknown historian keys: {sorted(hist)}")

        if "binarize" in data:
            kwargs["binarize"] = BinarizeConfig.from_mapping(data["binarize"] or {})

        mining = dict(data.get("mining") or {})
        if "support" in mining:
            kwargs["support"] = rational(mining.pop("support"), "mining.support")
        if "confidence" in mining:
            kwargs["confidence"] = rational(mining.pop("confidence"), "mining.confidence")
        if "max_size" in mining:
            kwargs["max_size"] = mining.pop("max_size")
        if mining:
            raise ConfigurationError(f"unknown mining keys: {sorted(mining)}")

        if "plant" in data:
            try:
                kwargs["plant"] = PlantParams.from_mapping(data["plant"] or {})
            except TypeError as exc:
                raise ConfigurationError(f"plant: {exc}") from None

        pipe = dict(data.get("pipeline") or {})
        for key in ("seed", "threads"):
            if key in pipe:
                kwargs[key] = int(pipe.pop(key))
        if "out" in pipe:
            kwargs["out"] = Path(pipe.pop("out"))
        if pipe:
            raise ConfigurationError(f"unknown pipeline keys: {sorted(pipe)}")
        return cls(**kwargs)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply command-line values; ``None`` means the flag was not given."""
        given = {k: v for k, v in overrides.items() if v is not None}
        for key in ("support", "confidence"):
            if key in given:
                given[key] = rational(given[key], key)
        if "out" in given:
            given["out"] = Path(given["out"])
        return replace(self, **given)


def load_config(path: str | os.PathLike | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"config {path} must be a mapping of sections")
    return PipelineConfig.from_mapping(data)
