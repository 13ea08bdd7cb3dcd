"""Bus analyzer: per-port cycle alignment of two waveform databases.

A port is aligned at cycle k when every one of its signals has the same
sampled value at time k*period in both databases.  Cycles beyond the span of
one database count as misaligned, and 'x' only matches 'x'.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from . import _kernels
from .interconnect.signals import SIGNAL_NAMES
from .protocol import Endianness
from .vcdio import WaveDb, parse_vcd, wavedb_to_traces
from .verif.monitor import monitor_extract

DEFAULT_THRESHOLD = 0.99
SCHEMA = "stbusv.alignment/1"


class AnalyzerError(Exception):
    pass


class EmptyTraces(AnalyzerError):
    pass


class SignalSetMismatch(AnalyzerError):
    pass


@dataclass(frozen=True)
class PortAlignment:
    port: str
    aligned_cycles: int
    total_cycles: int
    first_divergence: int | None = None
    # signals that differ at the first divergent cycle
    diverging_signals: tuple = ()

    @property
    def rate(self) -> float:
        return self.aligned_cycles / self.total_cycles

    def to_dict(self) -> dict:
        return {"aligned_cycles": self.aligned_cycles, "total_cycles": self.total_cycles,
                "rate": self.rate, "first_divergence": self.first_divergence,
                "diverging_signals": list(self.diverging_signals)}


@dataclass
class AlignmentReport:
    ports: dict = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    period_ns: int = 10

    @property
    def min_rate(self) -> float:
        return min((p.rate for p in self.ports.values()), default=0.0)

    @property
    def verdict(self) -> str:
        return signoff(self, self.threshold)

    def misaligned(self) -> list[PortAlignment]:
        return [p for p in self.ports.values() if p.aligned_cycles < p.total_cycles]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "verdict": self.verdict,
            "threshold": self.threshold,
            "period_ns": self.period_ns,
            "min_rate": self.min_rate,
            "ports": {k: p.to_dict() for k, p in self.ports.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render_text(self) -> str:
        lines = [f"alignment verdict {self.verdict}  min rate {self.min_rate:.6f}  "
                 f"threshold {self.threshold}"]
        for p in self.ports.values():
            line = f"  {p.port:<10} {p.aligned_cycles:>8}/{p.total_cycles:<8} {p.rate:.6f}"
            if p.first_divergence is not None:
                line += (f"  first divergence at cycle {p.first_divergence}"
                         f" ({', '.join(p.diverging_signals)})")
            lines.append(line)
        return "\n".join(lines) + "\n"


def signoff(report: AlignmentReport, threshold: float = DEFAULT_THRESHOLD) -> str:
    """PASS iff every port's rate reaches ``threshold``."""
    return "PASS" if all(p.rate >= threshold for p in report.ports.values()) else "FAIL"


def _codes(values_a: list, values_b: list) -> tuple[np.ndarray, np.ndarray]:
    table = {"x": 0}
    ca = np.fromiter((table.setdefault(v, len(table)) for v in values_a), np.int64, len(values_a))
    cb = np.fromiter((table.setdefault(v, len(table)) for v in values_b), np.int64, len(values_b))
    return ca, cb


def _port_vars(db: WaveDb, port: str) -> dict:
    return {v.name: v for v in db.port_signals(port)}


def compare(db_a: WaveDb, db_b: WaveDb, clock_period_ns: int = 10, port_map: dict | None = None,
            threshold: float = DEFAULT_THRESHOLD) -> AlignmentReport:
    if clock_period_ns <= 0:
        raise ValueError("clock period must be positive")
    if port_map is None:
        pa, pb = db_a.ports(), db_b.ports()
        if set(pa) != set(pb):
            raise SignalSetMismatch(f"port sets differ: {sorted(set(pa) ^ set(pb))}")
        port_map = {p: p for p in pa}
    span_a = db_a.span_cycles(clock_period_ns)
    span_b = db_b.span_cycles(clock_period_ns)
    total = max(span_a, span_b)
    if total == 0:
        raise EmptyTraces("both traces span zero cycles")
    common = min(span_a, span_b)
    report = AlignmentReport(threshold=threshold, period_ns=clock_period_ns)
    for port_a, port_b in port_map.items():
        va, vb = _port_vars(db_a, port_a), _port_vars(db_b, port_b)
        if not va or set(va) != set(vb):
            raise SignalSetMismatch(f"signals of {port_a} and {port_b} differ: "
                                    f"{sorted(set(va) ^ set(vb)) or 'port missing'}")
        mask = np.zeros(total, dtype=np.uint8)
        mask[:common] = 1
        per_signal = {}
        for name, var_a in va.items():
            ta, vals_a = db_a.history(var_a.id_code)
            tb, vals_b = db_b.history(vb[name].id_code)
            ca, cb = _codes(vals_a, vals_b)
            m = np.ones(total, dtype=np.uint8)
            _kernels.align_mask(ta, ca, tb, cb, clock_period_ns, m)
            per_signal[name] = m
            mask &= m
        aligned = int(mask.sum())
        first, culprits = None, ()
        if aligned < total:
            first = int(np.argmin(mask))
            culprits = tuple(s for s in va if not per_signal[s][first])
            if not culprits:
                culprits = ("<span>",)
        report.ports[port_a] = PortAlignment(port_a, aligned, total, first, culprits)
    return report


def compare_files(path_a, path_b, clock_period_ns: int = 10,
                  threshold: float = DEFAULT_THRESHOLD) -> AlignmentReport:
    return compare(parse_vcd(path_a), parse_vcd(path_b), clock_period_ns, threshold=threshold)


def infer_period(db: WaveDb) -> int:
    g = 0
    for t, _, _ in db.changes:
        g = gcd(g, t)
    g = gcd(g, db.end_time)
    return g or 1


def extract_bus_txns(db: WaveDb, port: str, clock_period_ns: int | None = None,
                     endianness: Endianness = Endianness.LITTLE) -> list:
    """Transactions at ``port``, recovered from the sampled waveform."""
    have = {v.name for v in db.port_signals(port)}
    missing = [s for s in SIGNAL_NAMES if s not in have]
    if missing:
        raise SignalSetMismatch(f"{port} lacks {missing}")
    period = clock_period_ns or infer_period(db)
    sub = WaveDb(db.timescale, db.port_signals(port), [], db.end_time)
    ids = {v.id_code for v in sub.signals}
    sub.changes = [c for c in db.changes if c[1] in ids]
    return monitor_extract(wavedb_to_traces(sub, period)[port], endianness)


__all__ = ["AlignmentReport", "PortAlignment", "AnalyzerError", "EmptyTraces",
           "SignalSetMismatch", "compare", "compare_files", "signoff", "extract_bus_txns",
           "infer_period", "DEFAULT_THRESHOLD"]
