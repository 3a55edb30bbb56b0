from .attack import (
    AnomalyReport,
    AttackScript,
    Classification,
    Evidence,
    LAUNCH_INTERLOCKS,
    ScenarioRow,
    detect_anomalies,
    launch_attack,
    read_scripts,
    run_scenario_table,
    write_scenario_csv,
    write_scripts,
)
from .library import REFERENCE_RULES, reference_scripts
from .model import (
    CONTROL_IMPLICATIONS,
    Plant,
    PlantParams,
    PlantState,
    TankThresholds,
    initial_state,
    run_normal,
    step,
)

__all__ = [
    "AnomalyReport", "AttackScript", "Classification", "Evidence", "LAUNCH_INTERLOCKS",
    "ScenarioRow", "detect_anomalies", "launch_attack", "read_scripts", "run_scenario_table",
    "write_scenario_csv", "write_scripts", "REFERENCE_RULES", "reference_scripts",
    "CONTROL_IMPLICATIONS", "Plant", "PlantParams", "PlantState", "TankThresholds",
    "initial_state", "run_normal", "step",
]
