"""Protocol checker run on every port trace.

Rule table:

====  ==========================================================
R1    gnt (r_gnt) asserted while req (r_req) is low
R2    eop without a cell, or a packet abandoned before its eop
R3    packet cell count differs from cells_per_packet
R4    T1/T2 response returned out of request order
R5    tid reused while the previous transaction is outstanding
R6    more outstanding transactions than the pipe allows
R7    another initiator's packet inside a locked chunk
R8    response with no matching outstanding request
R9    ERR response carrying data
R10   cell signals change while presented or between the cells of a packet
====  ==========================================================
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..interconnect.signals import PortTrace
from ..protocol import Direction, Opcode, ProtocolError, ProtocolType, Status, cells_per_packet

RULES = {
    "R1": "grant without request",
    "R2": "missing or stray eop",
    "R3": "cell count differs from cells_per_packet",
    "R4": "response order violation",
    "R5": "tid reused while outstanding",
    "R6": "pipe size exceeded",
    "R7": "chunk interleaving",
    "R8": "response without matching request",
    "R9": "ERR response with data",
    "R10": "signal change inside a packet",
}

_REQ_FIELDS = ("opc", "addr", "data", "be", "eop", "lck", "src", "tid")
_REQ_META = ("opc", "addr", "lck", "src", "tid")
_RSP_FIELDS = ("r_opc", "r_data", "r_eop", "r_src", "r_tid")
_RSP_META = ("r_opc", "r_src", "r_tid")


@dataclass(frozen=True, order=True)
class Violation:
    cycle: int
    rule_id: str
    port: str
    message: str

    def to_dict(self) -> dict:
        return {"rule": self.rule_id, "port": self.port, "cycle": self.cycle,
                "message": self.message}


def _expected_cells(opc: int, width: int, ptype: ProtocolType, direction: Direction):
    try:
        return cells_per_packet(Opcode.decode(opc), width, ptype, direction)
    except (ProtocolError, ValueError, KeyError):
        return None


def check_protocol(trace: PortTrace, ptype: ProtocolType, pipe_size: int) -> list[Violation]:
    port, n, width = trace.name, trace.n_cycles, trace.width_bits
    s = {k: v.tolist() for k, v in trace.signals.items()}
    out: list[Violation] = []

    def flag(cycle, rule, msg):
        out.append(Violation(int(cycle), rule, port, msg))

    sig = trace.signals
    for c in np.flatnonzero((sig["gnt"] != 0) & (sig["req"] == 0)).tolist():
        flag(c, "R1", "gnt while req is low")
    for c in np.flatnonzero((sig["r_gnt"] != 0) & (sig["r_req"] == 0)).tolist():
        flag(c, "R1", "r_gnt while r_req is low")
    for c in np.flatnonzero((sig["eop"] != 0) & (sig["req"] == 0)).tolist():
        flag(c, "R2", "eop without a request cell")
    for c in np.flatnonzero((sig["r_eop"] != 0) & (sig["r_req"] == 0)).tolist():
        flag(c, "R2", "r_eop without a response cell")

    max_out = 1 if ptype is ProtocolType.T1 else pipe_size
    in_order = ptype is not ProtocolType.T3
    # outstanding transactions per src, oldest first: [tid, opcode]
    live: dict[int, list] = defaultdict(list)
    lock_owner = None

    active = np.flatnonzero((sig["req"] != 0) | (sig["r_req"] != 0)).tolist()
    req_pkt: list[int] = []
    rsp_pkt: list[int] = []

    def stable(c, fields):
        return all(s[f][c] == s[f][c + 1] for f in fields)

    for c in active:
        # -- request channel --------------------------------------------------
        if s["req"][c]:
            if not s["gnt"][c]:
                if c + 1 < n and not (s["req"][c + 1] and stable(c, _REQ_FIELDS)):
                    flag(c + 1, "R10", "presented request cell changed before its grant")
            else:
                if req_pkt:
                    c0 = req_pkt[0]
                    if not all(s[f][c] == s[f][c0] for f in _REQ_META):
                        flag(c, "R10", "request meta changed between cells of a packet")
                else:
                    src, tid = s["src"][c], s["tid"][c]
                    if lock_owner is not None and src != lock_owner:
                        flag(c, "R7", f"src {src} granted inside the chunk of src {lock_owner}")
                    if any(t == tid for t, _ in live[src]):
                        flag(c, "R5", f"tid {tid} of src {src} reused while outstanding")
                    live[src].append((tid, s["opc"][c]))
                    if len(live[src]) > max_out:
                        flag(c, "R6", f"src {src} has {len(live[src])} outstanding, "
                                      f"limit {max_out}")
                req_pkt.append(c)
                if s["eop"][c]:
                    c0 = req_pkt[0]
                    exp = _expected_cells(s["opc"][c0], width, ptype, Direction.REQ)
                    if exp != len(req_pkt):
                        flag(c, "R3", f"request packet has {len(req_pkt)} cells, expected {exp}")
                    src = s["src"][c0]
                    if s["lck"][c]:
                        lock_owner = src
                    elif lock_owner == src:
                        lock_owner = None
                    req_pkt = []
                elif c + 1 < n and not s["req"][c + 1]:
                    flag(c + 1, "R2", "request packet abandoned before eop")
                    req_pkt = []
        # -- response channel -------------------------------------------------
        if s["r_req"][c]:
            if not s["r_gnt"][c]:
                if c + 1 < n and not (s["r_req"][c + 1] and stable(c, _RSP_FIELDS)):
                    flag(c + 1, "R10", "presented response cell changed before its grant")
                continue
            if rsp_pkt:
                c0 = rsp_pkt[0]
                if not all(s[f][c] == s[f][c0] for f in _RSP_META):
                    flag(c, "R10", "response meta changed between cells of a packet")
            rsp_pkt.append(c)
            if s["r_eop"][c]:
                _close_response(s, rsp_pkt, live, in_order, width, ptype, flag)
                rsp_pkt = []
            elif c + 1 < n and not s["r_req"][c + 1]:
                flag(c + 1, "R2", "response packet abandoned before eop")
                rsp_pkt = []
    return sorted(out)


def _close_response(s, cells, live, in_order, width, ptype, flag):
    c0, c = cells[0], cells[-1]
    src, tid, status = s["r_src"][c0], s["r_tid"][c0], s["r_opc"][c0]
    q = live[src]
    idx = next((k for k, (t, _) in enumerate(q) if t == tid), None)
    if idx is None:
        flag(c, "R8", f"response src {src} tid {tid} matches no outstanding request")
        return
    if in_order and idx != 0:
        flag(c, "R4", f"response tid {tid} overtook tid {q[0][0]} of src {src}")
    _, opc = q.pop(idx)
    if status == Status.ERR:
        exp = 1
        if any(s["r_data"][k] for k in cells):
            flag(c, "R9", f"ERR response to src {src} tid {tid} carries data")
    else:
        exp = _expected_cells(opc, width, ptype, Direction.RSP)
    if exp != len(cells):
        flag(c, "R3", f"response packet has {len(cells)} cells, expected {exp}")


def check_all(traces: dict, ptype: ProtocolType, pipe_size: int) -> list[Violation]:
    out = []
    for tr in traces.values():
        out.extend(check_protocol(tr, ptype, pipe_size))
    return sorted(out)
