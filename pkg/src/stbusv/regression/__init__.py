"""Regression tool: config files, the twelve-test suite, batch runs and the CLI."""
from .config_io import LoadedConfig, ParseError, dump_config, load_config, load_config_full, parse_config_text
from .runner import (MODELS, RegressionError, RunReport, RunSpec, config_files, run_cell,
                     run_matrix, run_test, seeds_for, summarize)
from .suite import TestCase, get_test, suite

__all__ = [
    "LoadedConfig", "ParseError", "dump_config", "load_config", "load_config_full",
    "parse_config_text", "MODELS", "RegressionError", "RunReport", "RunSpec", "config_files",
    "run_cell", "run_matrix", "run_test", "seeds_for", "summarize", "TestCase", "get_test",
    "suite",
]
