"""Scenario files, experiment pipelines and artifact writing."""

from .pipelines import PIPELINE_FUNCS, PipelineResult, Table, mix_map
from .runner import run_experiment, run_scenario
from .scenario import (PIPELINES, SCENARIO_SCHEMA, Scenario, ScenarioError, load_scenario,
                       scenario_from_blob, validate_blob)

__all__ = [
    "PIPELINES", "PIPELINE_FUNCS", "PipelineResult", "SCENARIO_SCHEMA", "Scenario",
    "ScenarioError", "Table", "load_scenario", "mix_map", "run_experiment", "run_scenario",
    "scenario_from_blob", "validate_blob",
]
