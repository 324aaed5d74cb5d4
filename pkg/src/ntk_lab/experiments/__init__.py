"""Data generators, configuration, scenario runner and persistence."""

from .config import DEFAULTS, SCENARIOS, ExperimentConfig, default_config, dump_config, load_config, parse_config
from .data import f_star, gen_equispaced, gen_parity3, gen_regression, parity3_labels
from .records import CSV_HEADER, RunRecord, read_csv, write_csv, write_summary
from .scenarios import ScenarioResult, run

__all__ = [
    "CSV_HEADER",
    "DEFAULTS",
    "SCENARIOS",
    "ExperimentConfig",
    "RunRecord",
    "ScenarioResult",
    "default_config",
    "dump_config",
    "f_star",
    "gen_equispaced",
    "gen_parity3",
    "gen_regression",
    "load_config",
    "parity3_labels",
    "parse_config",
    "read_csv",
    "run",
    "write_csv",
    "write_summary",
]
