"""Functional coverage.

Bin families, fixed when a model is built from a NodeConfig:

* ``op:<KIND><size>``          opcode x size issued by an initiator
* ``optarget:<KIND>:t<n>``     opcode kind delivered at target n
* ``feat:chunk``               a locked chunk was issued (T2/T3)
* ``feat:ooo``                 a response overtook an older one (T3)
* ``feat:err``                 an ERR response was returned
* ``feat:b2b``                 packets of two initiators granted back to back at a target
* ``feat:pipefull``            an initiator reached its outstanding limit
* ``arb:win:i<n>``             initiator n won an arbitration against a contender
* ``sizeconv:t<n>``            a packet was re-cut for target n's narrower or wider bus

Bins that the configuration can never hit are kept but excluded from the
percentage.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..interconnect.config import Arch, NodeConfig, UNMAPPED
from ..protocol import (Direction, OPCODE_SIZES, OpKind, ProtocolType, Status, cells_per_packet)
from .monitor import MonitorTxn


class UnknownBin(KeyError):
    pass


@dataclass(frozen=True)
class ArbEvent:
    cycle: int
    winner: int
    contenders: tuple


class CoverageModel:
    def __init__(self, cfg: NodeConfig):
        self.cfg = cfg
        self.bins: dict[str, int] = {}
        self.feasible: dict[str, bool] = {}
        W = cfg.width_bits
        t1 = cfg.ptype is ProtocolType.T1
        kinds = [OpKind.LOAD, OpKind.STORE] + ([] if t1 else [OpKind.SWAP])
        for kind in OpKind:
            for size in OPCODE_SIZES:
                ok = kind in kinds and (size * 8 <= W if t1 or kind is OpKind.SWAP else True)
                self._add(f"op:{kind.name}{size}", ok)
        reach = [any(cfg.connected(i, t) for i in range(cfg.n_init)) and
                 any(r.target == t for r in cfg.address_map) for t in range(cfg.n_targ)]
        for kind in OpKind:
            for t in range(cfg.n_targ):
                self._add(f"optarget:{kind.name}:t{t}", kind in kinds and reach[t])
        shared_target = any(sum(cfg.connected(i, t) for i in range(cfg.n_init)) >= 2 and reach[t]
                            for t in range(cfg.n_targ))
        self._add("feat:chunk", not t1)
        # the node's own ERR responder is always a second response source
        self._add("feat:ooo", cfg.ptype is ProtocolType.T3 and cfg.pipe_size >= 2)
        self._add("feat:err", True)
        self._add("feat:b2b", shared_target)
        self._add("feat:pipefull", True)
        for i in range(cfg.n_init):
            # every initiator shares at least the node's error responder
            self._add(f"arb:win:i{i}", cfg.n_init >= 2)
        for t in range(cfg.n_targ):
            if cfg.target_widths[t] != W:
                self._add(f"sizeconv:t{t}", reach[t])

    def _add(self, name: str, feasible: bool) -> None:
        self.bins[name] = 0
        self.feasible[name] = feasible

    def hit(self, name: str, count: int = 1) -> None:
        if name not in self.bins:
            raise UnknownBin(name)
        if not self.feasible[name]:
            raise UnknownBin(f"{name} is excluded for this configuration")
        self.bins[name] += count

    def merge(self, other: "CoverageModel") -> "CoverageModel":
        for k, v in other.bins.items():
            if v:
                self.hit(k, v)
        return self

    def report(self) -> dict:
        return coverage_report(self)


def coverage_sample(model: CoverageModel, item) -> None:
    """Record one observation: a bin id, a MonitorTxn or an ArbEvent."""
    if isinstance(item, str):
        model.hit(item)
    elif isinstance(item, ArbEvent):
        if item.contenders:
            model.hit(f"arb:win:i{item.winner}")
    elif isinstance(item, MonitorTxn):
        _sample_txn(model, item)
    else:
        raise TypeError(f"cannot sample {type(item).__name__}")


def _sample_txn(model: CoverageModel, t: MonitorTxn) -> None:
    cfg = model.cfg
    if not t.complete or t.opcode is None:
        return
    if t.port.startswith("init"):
        if t.direction is Direction.REQ:
            model.hit(f"op:{t.opcode.kind.name}{t.opcode.size_bytes}")
            if t.lck:
                model.hit("feat:chunk")
        elif t.status is Status.ERR:
            model.hit("feat:err")
    else:
        k = int(t.port[4:])
        if t.direction is Direction.REQ:
            model.hit(f"optarget:{t.opcode.kind.name}:t{k}")
        if cfg.target_widths[k] != cfg.width_bits and t.status is Status.OK:
            at_node = cells_per_packet(t.opcode, cfg.width_bits, cfg.ptype, t.direction)
            if at_node != t.n_cells:
                model.hit(f"sizeconv:t{k}")


def coverage_report(model: CoverageModel) -> dict:
    live = [k for k in model.bins if model.feasible[k]]
    hit = [k for k in live if model.bins[k]]
    return {
        "percent": 100.0 * len(hit) / len(live) if live else 100.0,
        "hit": len(hit),
        "total": len(live),
        "holes": sorted(k for k in live if not model.bins[k]),
        "excluded": sorted(k for k in model.bins if not model.feasible[k]),
        "bins": dict(sorted(model.bins.items())),
    }


# -- events derived from whole traces ------------------------------------------

def arbitration_events(cfg: NodeConfig, traces: dict) -> list[ArbEvent]:
    """Request-channel arbitrations visible at the initiator ports.

    A packet whose first cell is granted at g was decided at g-1; every other
    initiator presenting an ungranted cell for the same resource at g-1 lost.
    """
    n = cfg.n_init
    sig = [traces[f"init{i}"].signals for i in range(n)]
    shared = cfg.arch is Arch.SHARED_BUS

    def resource(i, c):
        if shared:
            return 0
        r = cfg.route_for(i, int(sig[i]["addr"][c]))
        return cfg.n_targ if r == UNMAPPED else r

    out = []
    for i in range(n):
        s = sig[i]
        xfer = (s["req"] != 0) & (s["gnt"] != 0)
        # first cells: granted cycles not preceded by a granted non-eop cell
        prev_open = np.zeros_like(xfer)
        prev_open[1:] = xfer[:-1] & (s["eop"][:-1] == 0)
        for g in np.flatnonzero(xfer & ~prev_open).tolist():
            d = g - 1
            if d < 0:
                continue
            res = resource(i, g)
            rivals = tuple(j for j in range(n) if j != i and sig[j]["req"][d]
                           and not sig[j]["gnt"][d] and resource(j, d) == res)
            out.append(ArbEvent(d, i, rivals))
    return sorted(out, key=lambda e: (e.cycle, e.winner))


def feature_events(cfg: NodeConfig, traces: dict, txns: dict) -> list[str]:
    """Bins hit by whole-run behaviour rather than single transactions."""
    hits = []
    max_out = cfg.max_outstanding
    for i in range(cfg.n_init):
        name = f"init{i}"
        live, peak, ooo = [], 0, False
        for t in txns.get(name, []):
            if not t.complete:
                continue
            if t.direction is Direction.REQ:
                live.append(t.tid)
                peak = max(peak, len(live))
            elif t.tid in live:
                if live[0] != t.tid:
                    ooo = True
                live.remove(t.tid)
        if peak >= max_out:
            hits.append("feat:pipefull")
        if ooo and cfg.ptype is ProtocolType.T3:
            hits.append("feat:ooo")
    for t in range(cfg.n_targ):
        s = traces[f"targ{t}"].signals
        xfer = (s["req"] != 0) & (s["gnt"] != 0)
        ends = np.flatnonzero(xfer[:-1] & (s["eop"][:-1] != 0) & xfer[1:])
        if any(s["src"][c] != s["src"][c + 1] for c in ends.tolist()):
            hits.append("feat:b2b")
    return sorted(set(hits))


def sample_run(model: CoverageModel, traces: dict, txns: dict) -> CoverageModel:
    cfg = model.cfg
    for lst in txns.values():
        for t in lst:
            coverage_sample(model, t)
    for e in arbitration_events(cfg, traces):
        coverage_sample(model, e)
    for name in feature_events(cfg, traces, txns):
        coverage_sample(model, name)
    return model


__all__ = ["CoverageModel", "ArbEvent", "UnknownBin", "coverage_sample", "coverage_report",
           "arbitration_events", "feature_events", "sample_run"]
