from fractions import Fraction
from pathlib import Path

import pytest

from icsarm.config import PipelineConfig, load_config, rational
from icsarm.errors import ConfigurationError

from conftest import write_text


def test_defaults():
    cfg = load_config(None)
    assert cfg.support == Fraction(3, 10) and cfg.confidence == Fraction(9, 10)
    assert cfg.seed == 0 and cfg.threads >= 1
    assert [a.name for a in cfg.schema][:2] == ["FIT101", "LIT101"]


def test_yaml_decimals_are_exact():
    assert rational(0.3, "s") == Fraction(3, 10)
    assert rational("1/410400", "s") == Fraction(1, 410400)
    assert rational(1, "s") == 1
    with pytest.raises(ConfigurationError):
        rational(0, "s")
    with pytest.raises(ConfigurationError):
        rational("3/2", "s")
    with pytest.raises(ConfigurationError, match="mining.support"):
        rational("x", "mining.support")


def test_full_file(tmp_path):
    path = write_text(
        tmp_path / "c.yaml",
        """
historian:
  check_cadence: false
  schema:
    - {name: FIT101, kind: analog, unit: m3/h}
    - {name: MV101, kind: ternary-valve, paired_flow_meter: FIT101}
binarize:
  flow_threshold: 0.6
  selected_attributes: [FIT101, MV101]
mining:
  support: 0.05
  confidence: 1/1
  max_size: 3
plant:
  manual_hold: 30
pipeline:
  seed: 7
  threads: 2
  out: results
""",
    )
    cfg = load_config(path)
    assert not cfg.check_cadence and len(cfg.schema) == 2
    assert cfg.binarize.flow_threshold == 0.6
    assert cfg.support == Fraction(1, 20) and cfg.confidence == 1 and cfg.max_size == 3
    assert cfg.plant.manual_hold == 30
    assert (cfg.seed, cfg.threads, cfg.out) == (7, 2, Path("results"))


def test_overrides_win():
    cfg = PipelineConfig().with_overrides(support="1/4", confidence=None, seed=3, threads=None, out="x")
    assert cfg.support == Fraction(1, 4) and cfg.confidence == Fraction(9, 10)
    assert cfg.seed == 3 and cfg.out == Path("x")


@pytest.mark.parametrize(
    "body",
    [
        "mystery: {}\n",
        "mining: {minsup: 1}\n",
        "pipeline: {threads: 0}\n",
        "plant: {pumps: 1}\n",
        "historian: {schema: [{name: X}]}\n",
        "- a\n- b\n",
        "mining: [\n",
    ],
)
def test_bad_files(tmp_path, body):
    with pytest.raises(ConfigurationError):
        load_config(write_text(tmp_path / "c.yaml", body))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")
    assert load_config(write_text(tmp_path / "e.yaml", "")) == PipelineConfig(threads=load_config(None).threads)
