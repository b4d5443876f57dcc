"""Experiment harness: synthetic scenes, protocol replays, metrics, reports."""

from .experiments import (
    gait_decision,
    run_correction_experiment,
    run_door_scenario,
    run_gait_scenario,
    run_simulation,
)
from .metrics import MetricsRecord, compute_metrics
from .report import ExperimentReport, emit_report, load_report
from .scene import ConfusionMatrix, ScenarioConfig, generate_scene

__all__ = [
    "gait_decision",
    "run_correction_experiment",
    "run_door_scenario",
    "run_gait_scenario",
    "run_simulation",
    "MetricsRecord",
    "compute_metrics",
    "ExperimentReport",
    "emit_report",
    "load_report",
    "ConfusionMatrix",
    "ScenarioConfig",
    "generate_scene",
]
