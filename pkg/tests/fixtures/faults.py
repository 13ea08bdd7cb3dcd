"""Mutation faults: a known-good run with one deliberate bug each.

Every fault names the detector expected to catch it, a checker rule id or
``scoreboard``.  Trace faults edit the port signals of a correct run; the
pipe fault instead runs a node that ignores its outstanding limit.
"""
import dataclasses
from dataclasses import dataclass
from typing import Callable

from stbusv.interconnect import run_ca
from stbusv.protocol import Direction, ProtocolType, make_chunk
from stbusv.verif.monitor import monitor_extract

from .nodes import Region, load, node, stim, store


def scenario():
    """A sparse T2 run with a multi-cell store, three pipelined loads, an
    unmapped load, a locked chunk and a lone load, each well separated."""
    cfg = node(2, 2, ptype=ProtocolType.T2, pipe=2,
               address_map=[Region(0, 0x1000, 0), Region(0x1000, 0x1000, 1)])
    chunk = make_chunk(0, [store(1, 0, 0x1000, bytes(range(8)), at=80),
                           store(1, 1, 0x1008, bytes(range(8, 16)), at=80)]).requests
    s = stim(store(0, 0, 0x40, bytes(range(100, 132)), at=0),
             load(0, 1, 0x40, at=20), load(0, 2, 0x44, at=20), load(0, 3, 0x48, at=20),
             load(0, 4, 0x8000_0000, at=60), *chunk, load(1, 2, 0x1000, at=120))
    return cfg, s


def _pkt(tr, direction, src, tid):
    for t in monitor_extract(tr):
        if t.direction is direction and t.src == src and t.tid == tid:
            return t
    raise LookupError(f"no {direction.name} src {src} tid {tid} at {tr.name}")


def _span(tr, p):
    """Cycles of packet ``p`` including its presentation before the grant."""
    pre = "" if p.direction is Direction.REQ else "r_"
    s = tr.signals
    c = p.start_cycle
    while c > 0 and s[pre + "req"][c - 1] and not s[pre + "gnt"][c - 1] \
            and s[pre + "tid"][c - 1] == p.tid:
        c -= 1
    return slice(c, p.end_cycle + 1)


def _idle_after(tr, c, channel="req"):
    s = tr.signals[channel]
    while c < tr.n_cycles and s[c]:
        c += 1
    if c >= tr.n_cycles:
        raise LookupError(f"{tr.name} has no idle {channel} cycle")
    return c


# -- trace mutations, one per rule ------------------------------------------------

def _r1(tr):
    s = tr["init0"].signals
    c = _idle_after(tr["init0"], _pkt(tr["init0"], Direction.RSP, 0, 0).end_cycle + 1)
    s["gnt"][c] = 1


def _r2(tr):
    p = _pkt(tr["init0"], Direction.REQ, 0, 0)
    tr["init0"].signals["eop"][p.end_cycle] = 0


def _r3(tr):
    s = tr["init0"].signals
    p = _pkt(tr["init0"], Direction.RSP, 0, 1)
    c = p.end_cycle
    assert not s["r_req"][c + 1]
    for k in ("r_req", "r_gnt", "r_opc", "r_data", "r_src", "r_tid"):
        s[k][c + 1] = s[k][c]
    s["r_eop"][c], s["r_eop"][c + 1] = 0, 1


def _r4(tr):
    s = tr["init0"].signals
    a = _pkt(tr["init0"], Direction.RSP, 0, 1).start_cycle
    b = _pkt(tr["init0"], Direction.RSP, 0, 2).start_cycle
    for k in ("r_tid", "r_data"):
        s[k][a], s[k][b] = s[k][b], s[k][a]


def _r5(tr):
    s = tr["init0"].signals
    for c in range(tr["init0"].n_cycles):
        if s["req"][c] and s["tid"][c] == 2:
            s["tid"][c] = 1
        if s["r_req"][c] and s["r_tid"][c] == 2:
            s["r_tid"][c] = 1


def _r7(tr):
    # the second packet of src 1's locked chunk shows up as src 0
    t = tr["targ1"]
    s = t.signals
    s["src"][_span(t, _pkt(t, Direction.REQ, 1, 1))] = 0
    s["r_src"][_span(t, _pkt(t, Direction.RSP, 1, 1))] = 0


def _r8(tr):
    p = _pkt(tr["init0"], Direction.RSP, 0, 3)
    tr["init0"].signals["r_tid"][p.start_cycle] = 200


def _r9(tr):
    p = _pkt(tr["init0"], Direction.RSP, 0, 4)
    tr["init0"].signals["r_data"][p.start_cycle] = 0xDEAD


def _r10(tr):
    p = _pkt(tr["init0"], Direction.REQ, 0, 0)
    tr["init0"].signals["addr"][p.start_cycle + 2] += 8


# -- data-path mutations ----------------------------------------------------------

def _corrupt(tr):
    p = _pkt(tr["targ0"], Direction.REQ, 0, 0)
    s = tr["targ0"].signals
    s["data"][p.start_cycle + 1] = int(s["data"][p.start_cycle + 1]) ^ 0x10


def _drop(tr):
    # the lone load of initiator 1 vanishes inside the node
    t = tr["targ1"]
    req, rsp = _pkt(t, Direction.REQ, 1, 2), _pkt(t, Direction.RSP, 1, 2)
    for k in ("req", "gnt", "opc", "addr", "data", "be", "eop", "lck", "src", "tid"):
        t.signals[k][_span(t, req)] = 0
    for tr_, p in ((t, rsp), (tr["init1"], _pkt(tr["init1"], Direction.RSP, 1, 2))):
        span = _span(tr_, p)
        for k in ("r_req", "r_gnt", "r_opc", "r_data", "r_eop", "r_src", "r_tid"):
            tr_.signals[k][span] = 0


def _duplicate(tr):
    t = tr["targ1"]
    p = _pkt(t, Direction.RSP, 1, 2)
    src = _pkt(t, Direction.REQ, 1, 2).start_cycle
    c = _idle_after(t, p.end_cycle + 1)
    for k in ("req", "gnt", "opc", "addr", "data", "be", "eop", "lck", "src", "tid"):
        t.signals[k][c] = t.signals[k][src]


def _unlimited_pipe(cfg, s, seed):
    return run_ca(dataclasses.replace(cfg, pipe_size=cfg.pipe_size + 1), s, seed)


@dataclass(frozen=True)
class Fault:
    name: str
    detector: str
    mutate: Callable | None = None
    engine: Callable | None = None

    def run(self, seed=0):
        cfg, s = scenario()
        if self.engine is not None:
            return cfg, self.engine(cfg, s, seed)
        tr = run_ca(cfg, s, seed)
        self.mutate(tr)
        return cfg, tr


FAULTS = (
    Fault("grant-without-request", "R1", _r1),
    Fault("missing-eop", "R2", _r2),
    Fault("extra-response-cell", "R3", _r3),
    Fault("response-reorder", "R4", _r4),
    Fault("tid-reuse", "R5", _r5),
    Fault("pipe-overflow", "R6", engine=_unlimited_pipe),
    Fault("chunk-interleave", "R7", _r7),
    Fault("orphan-response", "R8", _r8),
    Fault("err-with-data", "R9", _r9),
    Fault("meta-change-in-packet", "R10", _r10),
    Fault("payload-corrupt", "scoreboard", _corrupt),
    Fault("drop", "scoreboard", _drop),
    Fault("duplicate", "scoreboard", _duplicate),
)
