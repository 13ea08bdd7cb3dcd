"""Common verification environment: traffic, monitors, checkers, scoreboard, coverage."""
from .checker import RULES, Violation, check_all, check_protocol
from .coverage import (ArbEvent, CoverageModel, UnknownBin, arbitration_events, coverage_report,
                       coverage_sample, feature_events, sample_run)
from .monitor import MonitorTxn, extract_all, monitor_extract
from .scoreboard import ScoreboardResult, scoreboard_check
from .traffic import InfeasibleConstraints, TrafficConstraints, gen_traffic

__all__ = [
    "RULES", "Violation", "check_all", "check_protocol", "ArbEvent", "CoverageModel",
    "UnknownBin", "arbitration_events", "coverage_report", "coverage_sample", "feature_events",
    "sample_run", "MonitorTxn", "extract_all", "monitor_extract", "ScoreboardResult",
    "scoreboard_check", "InfeasibleConstraints", "TrafficConstraints", "gen_traffic",
]
