"""Experiment harness and CLI."""

from .output import read_rows_csv, write_rows_csv, write_svg_scatter
from .scenario import (
    METHODS,
    PRESETS,
    ResultRow,
    ScenarioConfig,
    level_medians,
    loglog_slope,
    preset,
    run_scenario,
    run_scenarios,
    timing_study,
)
