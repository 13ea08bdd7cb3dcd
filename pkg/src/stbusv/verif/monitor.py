"""Passive port monitors: port signals back into transactions."""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..interconnect.signals import PortTrace
from ..protocol import (Direction, Endianness, Opcode, ProtocolError, Request, Response,
                        Status, cell_lanes)


@dataclass(frozen=True)
class MonitorTxn:
    port: str
    direction: Direction
    src: int
    tid: int
    opcode: Opcode | None
    addr: int
    data: bytes
    start_cycle: int
    end_cycle: int
    n_cells: int
    status: Status | None = Status.OK
    lck: bool = False
    complete: bool = True

    @property
    def request(self) -> Request:
        return Request(self.src, self.tid, self.opcode, self.addr, self.data,
                       issue_cycle=self.start_cycle, lck=self.lck)

    @property
    def response(self) -> Response:
        return Response(self.src, self.tid, self.status, self.data, self.opcode, self.addr)

    def to_dict(self) -> dict:
        return {
            "port": self.port, "direction": self.direction.name, "src": self.src,
            "tid": self.tid, "opcode": str(self.opcode) if self.opcode else None,
            "addr": self.addr, "data": self.data.hex(), "start": self.start_cycle,
            "end": self.end_cycle, "cells": self.n_cells,
            "status": self.status.name if self.status else None, "lck": self.lck,
            "complete": self.complete,
        }


def _enabled_bytes(payload: int, be: int, width_bytes: int, endianness: Endianness) -> bytes:
    lanes = [k for k in range(width_bytes) if be >> k & 1]
    if endianness is Endianness.BIG:
        lanes.reverse()
    return bytes(payload >> (8 * k) & 0xFF for k in lanes)


def _decode(opc: int) -> Opcode | None:
    try:
        return Opcode.decode(opc)
    except (ProtocolError, ValueError, KeyError):
        return None


def _packets(valid: np.ndarray, eop: np.ndarray):
    """Group transfer cycles into packets: yields (cycles, complete)."""
    cycles, starts = _kernels.packet_spans(valid, eop)
    cycles, starts = cycles.tolist(), starts.tolist()
    for a, b in zip(starts, starts[1:]):
        cur = cycles[a:b]
        yield cur, bool(eop[cur[-1]])


def request_txns(trace: PortTrace, endianness: Endianness = Endianness.LITTLE) -> list[MonitorTxn]:
    s = trace.signals
    wb = trace.width_bits // 8
    out = []
    for cycles, complete in _packets((s["req"] & s["gnt"]) != 0, s["eop"]):
        c0 = cycles[0]
        op = _decode(int(s["opc"][c0]))
        data = b""
        if op is not None and op.carries_request_data:
            data = b"".join(_enabled_bytes(int(s["data"][c]), int(s["be"][c]), wb, endianness)
                            for c in cycles)
        out.append(MonitorTxn(trace.name, Direction.REQ, int(s["src"][c0]), int(s["tid"][c0]),
                              op, int(s["addr"][c0]), data, c0, cycles[-1], len(cycles),
                              Status.OK, bool(s["lck"][cycles[-1]]), complete))
    return out


def response_txns(trace: PortTrace, requests: list[MonitorTxn],
                  endianness: Endianness = Endianness.LITTLE) -> list[MonitorTxn]:
    """Response packets, each paired with the oldest earlier request of the
    same (src, tid) at this port to recover its opcode, address and data."""
    s = trace.signals
    width = trace.width_bits
    pending = deque(sorted(requests, key=lambda t: t.end_cycle))
    live: dict[tuple[int, int], deque] = defaultdict(deque)
    out = []
    for cycles, complete in _packets((s["r_req"] & s["r_gnt"]) != 0, s["r_eop"]):
        c0 = cycles[0]
        while pending and pending[0].end_cycle < c0:
            r = pending.popleft()
            if r.complete:
                live[(r.src, r.tid)].append(r)
        key = (int(s["r_src"][c0]), int(s["r_tid"][c0]))
        req = live[key].popleft() if live[key] else None
        try:
            status = Status(int(s["r_opc"][c0]))
        except ValueError:
            status = None
        op = req.opcode if req is not None else None
        addr = req.addr if req is not None else 0
        data = b""
        if op is not None and status is Status.OK and op.carries_response_data:
            img = bytearray(op.size_bytes)
            wbytes = width // 8
            for j, c in enumerate(cycles):
                base = j * wbytes if op.size_bytes > wbytes else 0
                if base >= op.size_bytes:
                    break
                payload = int(s["r_data"][c])
                for k, lane in enumerate(cell_lanes(addr, op.size_bytes, width, j, endianness)):
                    img[base + k] = payload >> (8 * lane) & 0xFF
            data = bytes(img)
        out.append(MonitorTxn(trace.name, Direction.RSP, key[0], key[1], op, addr, data,
                              c0, cycles[-1], len(cycles), status, False, complete))
    return out


def monitor_extract(trace: PortTrace,
                    endianness: Endianness = Endianness.LITTLE) -> list[MonitorTxn]:
    """All packets seen at one port, ordered by completion cycle (requests
    before responses on a tie)."""
    reqs = request_txns(trace, endianness)
    rsps = response_txns(trace, reqs, endianness)
    return sorted(reqs + rsps, key=lambda t: (t.end_cycle, t.direction, t.start_cycle))


def extract_all(traces: dict, endianness: Endianness = Endianness.LITTLE) -> dict[str, list]:
    return {name: monitor_extract(tr, endianness) for name, tr in traces.items()}


__all__ = ["MonitorTxn", "monitor_extract", "request_txns", "response_txns", "extract_all"]
