"""Port signal set and dense per-cycle port traces."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ..protocol import OpKind, Request

SIGNAL_NAMES = (
    "req", "gnt", "opc", "addr", "data", "be", "eop", "lck", "src", "tid",
    "r_req", "r_gnt", "r_opc", "r_data", "r_eop", "r_src", "r_tid",
)
(REQ, GNT, OPC, ADDR, DATA, BE, EOP, LCK, SRC, TID,
 R_REQ, R_GNT, R_OPC, R_DATA, R_EOP, R_SRC, R_TID) = range(len(SIGNAL_NAMES))
N_SIGNALS = len(SIGNAL_NAMES)
WIDE_SIGNALS = ("data", "r_data")


def signal_widths(width_bits: int) -> dict[str, int]:
    return {
        "req": 1, "gnt": 1, "opc": 8, "addr": 32, "data": width_bits,
        "be": width_bits // 8, "eop": 1, "lck": 1, "src": 5, "tid": 8,
        "r_req": 1, "r_gnt": 1, "r_opc": 2, "r_data": width_bits, "r_eop": 1,
        "r_src": 5, "r_tid": 8,
    }


class PortSignals(NamedTuple):
    req: int = 0
    gnt: int = 0
    opc: int = 0
    addr: int = 0
    data: int = 0
    be: int = 0
    eop: int = 0
    lck: int = 0
    src: int = 0
    tid: int = 0
    r_req: int = 0
    r_gnt: int = 0
    r_opc: int = 0
    r_data: int = 0
    r_eop: int = 0
    r_src: int = 0
    r_tid: int = 0


IDLE = PortSignals()


def _dtype(name: str, width_bits: int):
    # int64 holds every signal except data wider than 62 bits
    if name in WIDE_SIGNALS and width_bits > 62:
        return object
    return np.int64


def empty_signal(name: str, width_bits: int, n_cycles: int) -> np.ndarray:
    dt = _dtype(name, width_bits)
    if dt is object:
        a = np.empty(n_cycles, dtype=object)
        a.fill(0)
        return a
    return np.zeros(n_cycles, dtype=dt)


@dataclass
class PortTrace:
    """Dense cycle-indexed signal values at one port."""
    name: str
    width_bits: int
    n_cycles: int
    signals: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in SIGNAL_NAMES:
            if s not in self.signals:
                self.signals[s] = empty_signal(s, self.width_bits, self.n_cycles)
            elif len(self.signals[s]) != self.n_cycles:
                raise ValueError(f"{self.name}.{s} has {len(self.signals[s])} cycles, "
                                 f"expected {self.n_cycles}")

    @classmethod
    def from_records(cls, name: str, width_bits: int, n_cycles: int,
                     records: Sequence[tuple[int, Sequence[int]]]) -> "PortTrace":
        """Densify sparse (cycle, 17-value row) records; unlisted cycles are idle."""
        tr = cls(name, width_bits, n_cycles)
        if not records:
            return tr
        cycles = np.fromiter((c for c, _ in records), dtype=np.int64, count=len(records))
        keep = cycles < n_cycles
        rows = [r for (c, r), k in zip(records, keep) if k]
        cycles = cycles[keep]
        for k, s in enumerate(SIGNAL_NAMES):
            col = [r[k] for r in rows]
            if tr.signals[s].dtype == object:
                vals = np.empty(len(col), dtype=object)
                vals[:] = col
            else:
                vals = np.asarray(col, dtype=np.int64)
            tr.signals[s][cycles] = vals
        return tr

    def at(self, cycle: int) -> PortSignals:
        return PortSignals(*(int(self.signals[s][cycle]) for s in SIGNAL_NAMES))

    def __eq__(self, other):
        if not isinstance(other, PortTrace):
            return NotImplemented
        return (self.name == other.name and self.width_bits == other.width_bits
                and self.n_cycles == other.n_cycles
                and all(np.array_equal(self.signals[s], other.signals[s]) for s in SIGNAL_NAMES))

    def first_difference(self, other: "PortTrace") -> tuple[int, str] | None:
        n = min(self.n_cycles, other.n_cycles)
        best = None
        for s in SIGNAL_NAMES:
            diff = np.nonzero(self.signals[s][:n] != other.signals[s][:n])[0]
            if len(diff) and (best is None or diff[0] < best[0]):
                best = (int(diff[0]), s)
        if best is None and self.n_cycles != other.n_cycles:
            best = (n, "<length>")
        return best

    def copy(self) -> "PortTrace":
        return PortTrace(self.name, self.width_bits, self.n_cycles,
                         {s: a.copy() for s, a in self.signals.items()})


@dataclass
class Stimulus:
    """Timed requests plus programmable-port writes ``(cycle, vector)``."""
    requests: list = field(default_factory=list)
    prio_events: list = field(default_factory=list)

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    def per_initiator(self, n_init: int) -> list[list[Request]]:
        out = [[] for _ in range(n_init)]
        for r in self.requests:
            out[r.src].append(r)
        for q in out:
            q.sort(key=lambda r: r.issue_cycle)
        return out


class Memory:
    """Sparse byte-addressable target memory, zero-filled at reset."""

    def __init__(self):
        self._bytes: dict[int, int] = {}

    def read(self, addr: int, size: int) -> bytes:
        get = self._bytes.get
        return bytes(get(a, 0) for a in range(addr, addr + size))

    def write(self, addr: int, data: bytes) -> None:
        for k, b in enumerate(data):
            self._bytes[addr + k] = b

    def apply(self, kind, addr: int, size: int, data: bytes) -> bytes:
        """Execute one opcode; returns the response data."""
        if kind is OpKind.LOAD:
            return self.read(addr, size)
        if kind is OpKind.STORE:
            self.write(addr, data)
            return b""
        old = self.read(addr, size)
        self.write(addr, data)
        return old
