"""Simulation harness: configs, scenarios, runner, bound checks, reports."""

from .bounds import Verdict, evaluate_bounds
from .config import config_hash, load_config, resolve_config
from .report import read_records, read_summary, write_csv, write_json, write_summary
from .runner import RunResult, run_experiment
from .scenarios import list_scenarios, scenario_config

__all__ = [
    "RunResult",
    "Verdict",
    "config_hash",
    "evaluate_bounds",
    "list_scenarios",
    "load_config",
    "read_records",
    "read_summary",
    "resolve_config",
    "run_experiment",
    "scenario_config",
    "write_csv",
    "write_json",
    "write_summary",
]
