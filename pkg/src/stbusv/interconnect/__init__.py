"""The Node: configuration, arbitration and the two simulation engines."""
from .arbiter import Arbiter, ArbiterState, ArbitrationError, EmptyRequesterSet, arbitrate
from .bca import BCAEngine, bca_run
from .ca import CANode, LengthMismatch, WrongPolicy, ca_step, run_ca
from .config import (Arch, ArbPolicy, InvalidConfig, NodeConfig, Region, TargetProfile,
                     UNMAPPED, route)
from .signals import SIGNAL_NAMES, IDLE, Memory, PortSignals, PortTrace, Stimulus, signal_widths

__all__ = [
    "Arbiter", "ArbiterState", "ArbitrationError", "EmptyRequesterSet", "arbitrate",
    "BCAEngine", "bca_run", "CANode", "LengthMismatch", "WrongPolicy", "ca_step", "run_ca",
    "Arch", "ArbPolicy", "InvalidConfig", "NodeConfig", "Region", "TargetProfile", "UNMAPPED",
    "route", "SIGNAL_NAMES", "IDLE", "Memory", "PortSignals", "PortTrace", "Stimulus",
    "signal_widths", "ENGINES", "program_priority",
]

ENGINES = {"ca": run_ca, "bca": bca_run}


def program_priority(node: CANode, vector) -> CANode:
    node.program_priority(vector)
    return node
