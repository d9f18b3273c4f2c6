"""Command-line harness: analysis reports, runs and sweeps with CSV output."""

from .cli import build_parser, main
from .config import ConfigError, ExperimentConfig, parse_sweep
from .records import HEADER, RunRecord, read_csv, write_csv
from .runner import run_cells, run_seed

__all__ = ["ConfigError", "ExperimentConfig", "HEADER", "RunRecord", "build_parser", "main",
           "parse_sweep", "read_csv", "run_cells", "run_seed", "write_csv"]
