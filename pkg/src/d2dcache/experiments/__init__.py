"""Scenario files, sweep runner, verification suite and command-line front end."""
from .config import ConfigError, Scenario, baseline_params, load_scenario, parse_scenario
from .runner import RunResult, run_scenario
from .verify import SuiteReport, verify_suite

__all__ = ["ConfigError", "Scenario", "baseline_params", "load_scenario", "parse_scenario",
           "RunResult", "run_scenario", "SuiteReport", "verify_suite"]
