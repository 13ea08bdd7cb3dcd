"""Event-driven bus-cycle-accurate engine.

Instead of clocking every port, the engine keeps a time-ordered event queue
(presentation checks, request arbitrations, response arbitrations) and
computes grant, accept and delivery cycles directly.  Dense port traces are
synthesized from that schedule at the end.
"""
from __future__ import annotations

import heapq
from bisect import bisect_right
from collections import deque

from ..protocol import (Direction, ProtocolType, Response, Status, build_request_cells,
                        build_response_cells, cells_per_packet, rebuild_payload, size_convert)
from .arbiter import Arbiter
from .config import Arch, ArbPolicy, NodeConfig, UNMAPPED
from .signals import Memory, PortTrace, Stimulus

# event phases inside one cycle: presentation is decided before arbitration
_PRESENT, _ARB = 0, 1


class _Pkt:
    __slots__ = ("req", "cells", "n", "route", "res", "m", "present", "dec", "done",
                 "tcells", "rsp")

    def __init__(self, req, cells, n, route, res, m):
        self.req, self.cells, self.n, self.route, self.res, self.m = req, cells, n, route, res, m
        self.present = self.dec = self.done = None
        self.tcells = self.rsp = None


class _Rsp:
    __slots__ = ("pkt", "ready", "tcells", "icells", "kt", "ki", "present", "dec", "src")

    def __init__(self, pkt, ready, tcells, icells):
        self.pkt, self.ready, self.tcells, self.icells = pkt, ready, tcells, icells
        self.kt, self.ki = len(tcells), len(icells)
        self.src = pkt.req.src
        self.present = self.dec = None


class BCAEngine:
    def __init__(self, cfg: NodeConfig, stimulus: Stimulus, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.P = cfg.pipe_size
        self.shared = cfg.arch is Arch.SHARED_BUS
        n_init, n_targ = cfg.n_init, cfg.n_targ
        W, ptype, endian = cfg.width_bits, cfg.ptype, cfg.endianness

        self.pkts = []
        for i, reqs in enumerate(stimulus.per_initiator(n_init)):
            lst = []
            for r in reqs:
                cells = build_request_cells(r, W, ptype, endian)
                route = cfg.route_for(i, r.addr)
                if route == UNMAPPED:
                    res, m = (0 if self.shared else n_targ), 0
                else:
                    res = 0 if self.shared else route
                    m = cells_per_packet(r.opcode, cfg.target_widths[route], ptype, Direction.REQ)
                lst.append(_Pkt(r, cells, len(cells), route, res, m))
            self.pkts.append(lst)
        self.next_pkt = [0] * n_init
        self.presenting = [None] * n_init
        self.earliest = [0] * n_init
        self.granted = [[] for _ in range(n_init)]
        self.grant_log = [deque() for _ in range(n_init)]

        n_res = 1 if self.shared else n_targ + 1
        max_window = max(w for _, w in cfg.bw_quota)
        self.req_arb = [Arbiter(cfg.arb_policy, n_init, max_window) for _ in range(n_res)]
        self.req_next = [0] * n_res
        self.lock = [None] * n_res
        self.req_waiting = [set() for _ in range(n_res)]

        n_rres = 1 if self.shared else n_init
        self.rsp_arb = [Arbiter(cfg.arb_policy, n_targ + 1) for _ in range(n_rres)]
        self.rsp_next = [0] * n_rres
        self.rsp_waiting = [set() for _ in range(n_rres)]
        # per responder (targets, then the node's error responder)
        self.rfifo = [deque() for _ in range(n_targ + 1)]
        self.rhead_free = [0] * (n_targ + 1)
        self.mem = [Memory() for _ in range(n_targ)]
        self.accepted = [0] * n_targ

        prio = sorted(stimulus.prio_events, key=lambda e: e[0])
        self.prio_cycles = [c for c, _ in prio]
        self.prio_vecs = [list(v) for _, v in prio]
        if prio and cfg.arb_policy is not ArbPolicy.PROGRAMMABLE_PRIORITY:
            from .ca import WrongPolicy
            raise WrongPolicy("priority port only exists under PROGRAMMABLE_PRIORITY")

        self.events: list = []
        self.scheduled: set = set()
        self.seq = 0

    # -- event queue ---------------------------------------------------------

    def _at(self, cycle, phase, kind, arg):
        key = (cycle, kind, arg)
        if key in self.scheduled:
            return
        self.scheduled.add(key)
        self.seq += 1
        heapq.heappush(self.events, (cycle, phase, self.seq, kind, arg))

    def run(self):
        for i in range(self.cfg.n_init):
            if self.pkts[i]:
                self._at(self.pkts[i][0].req.issue_cycle, _PRESENT, "present", i)
        handlers = {"present": self._present, "arb": self._req_arb, "rarb": self._rsp_arb}
        while self.events:
            c, _, _, kind, arg = heapq.heappop(self.events)
            self.scheduled.discard((c, kind, arg))
            handlers[kind](c, arg)

    # -- initiators ----------------------------------------------------------

    def _outstanding(self, i, c):
        g = self.granted[i]
        g[:] = [p for p in g if p.done is None or p.done >= c]
        return g

    def _present(self, c, i):
        if self.presenting[i] is not None or self.next_pkt[i] >= len(self.pkts[i]):
            return
        p = self.pkts[i][self.next_pkt[i]]
        if c < max(p.req.issue_cycle, self.earliest[i]):
            return
        out = self._outstanding(i, c)
        if len(out) >= self.cfg.max_outstanding or any(q.req.tid == p.req.tid for q in out):
            return
        p.present = c
        self.presenting[i] = p
        self.req_waiting[p.res].add(i)
        self._at(c, _ARB, "arb", p.res)

    def _priority_at(self, c):
        k = bisect_right(self.prio_cycles, c)
        return self.prio_vecs[k - 1] if k else self.cfg.priority_vector

    def _eligible(self, i, p, c):
        cfg = self.cfg
        if cfg.ptype is not ProtocolType.T3:
            out = self._outstanding(i, c)
            if any(q.route != p.route for q in out):
                return False
        if cfg.arb_policy is ArbPolicy.BANDWIDTH_LIMITED:
            quota, window = cfg.bw_quota[i]
            log = self.grant_log[i]
            while log and log[0] <= c - window:
                log.popleft()
            if len(log) >= quota:
                self._at(log[0] + window, _ARB, "arb", p.res)
                return False
        return True

    def _req_arb(self, c, res):
        if self.req_next[res] > c or not self.req_waiting[res]:
            return
        cfg = self.cfg
        cands = sorted(i for i in self.req_waiting[res]
                       if self._eligible(i, self.presenting[i], c))
        owner = self.lock[res]
        if owner is not None:
            if owner not in cands:
                return
            winner = owner
        elif not cands:
            return
        else:
            waited = [0] * cfg.n_init
            for i in cands:
                waited[i] = c - self.presenting[i].present
            meta = {}
            if cfg.arb_policy is ArbPolicy.BANDWIDTH_LIMITED:
                meta = dict(window_grants=[len(l) for l in self.grant_log],
                            quota=[q for q, _ in cfg.bw_quota])
            winner = self.req_arb[res].grant(cands, c, priority=self._priority_at(c),
                                             waited=waited, latency_budget=cfg.latency_budget,
                                             **meta)
        self._grant(c, res, winner)

    def _grant(self, c, res, i):
        cfg = self.cfg
        p = self.presenting[i]
        self.presenting[i] = None
        self.req_waiting[res].discard(i)
        p.dec = c
        self.next_pkt[i] += 1
        self.granted[i].append(p)
        self.grant_log[i].append(c)
        if p.req.lck:
            self.lock[res] = i
        elif self.lock[res] == i:
            self.lock[res] = None
        self.req_next[res] = c + max(p.n, p.m)
        self._at(self.req_next[res], _ARB, "arb", res)
        # next packet may be presented the cycle after this one's last cell
        self.earliest[i] = c + p.n + 1
        if self.next_pkt[i] < len(self.pkts[i]):
            nxt = self.pkts[i][self.next_pkt[i]]
            self._at(max(self.earliest[i], nxt.req.issue_cycle), _PRESENT, "present", i)
        if p.route == UNMAPPED:
            ready = c + p.n + self.P
            rsp = Response(p.req.src, p.req.tid, Status.ERR)
            icells = build_response_cells(rsp, p.req.opcode, p.req.addr, cfg.width_bits,
                                          cfg.ptype, cfg.endianness)
            self._enqueue_response(cfg.n_targ, _Rsp(p, ready, icells, icells))
        else:
            self._accept(c, p)

    def _accept(self, c, p):
        """Target-side delivery and the memory operation, in acceptance order."""
        cfg = self.cfg
        t = p.route
        wt = cfg.target_widths[t]
        local = cfg.local_addr(p.req.addr)
        p.tcells = size_convert(p.cells, cfg.width_bits, wt, cfg.endianness, cfg.ptype)
        accept = c + self.P + max(p.n, p.m)
        op = p.req.opcode
        data = rebuild_payload(p.tcells, cfg.endianness, wt)
        rdata = self.mem[t].apply(op.kind, local, op.size_bytes, data)
        lat = cfg.target_profiles[t].latency(self.seed, t, self.accepted[t])
        self.accepted[t] += 1
        rsp = Response(p.req.src, p.req.tid, Status.OK, rdata)
        tcells = build_response_cells(rsp, op, local, wt, cfg.ptype, cfg.endianness)
        icells = size_convert(tcells, wt, cfg.width_bits, cfg.endianness, cfg.ptype)
        self._enqueue_response(t, _Rsp(p, accept + lat, tcells, icells))

    # -- responders ----------------------------------------------------------

    def _rres(self, src):
        return 0 if self.shared else src

    def _enqueue_response(self, t, r):
        q = self.rfifo[t]
        q.append(r)
        if len(q) == 1:
            self._head(t)

    def _head(self, t):
        r = self.rfifo[t][0]
        r.present = max(r.ready, self.rhead_free[t])
        q = self._rres(r.src)
        self.rsp_waiting[q].add(t)
        self._at(r.present, _ARB, "rarb", q)

    def _rsp_arb(self, c, q):
        if self.rsp_next[q] > c:
            return
        cands = sorted(t for t in self.rsp_waiting[q] if self.rfifo[t][0].present <= c)
        if not cands:
            return
        waited = [0] * (self.cfg.n_targ + 1)
        for t in cands:
            waited[t] = c - self.rfifo[t][0].present
        t = self.rsp_arb[q].grant(cands, c, waited=waited)
        r = self.rfifo[t].popleft()
        self.rsp_waiting[q].discard(t)
        r.dec = c
        r.pkt.rsp = r
        span = max(r.kt, r.ki)
        self.rsp_next[q] = c + span
        self._at(self.rsp_next[q], _ARB, "rarb", q)
        r.pkt.done = c + self.P + span
        i = r.src
        self._at(r.pkt.done + 1, _PRESENT, "present", i)
        if self.presenting[i] is not None:
            self._at(r.pkt.done + 1, _ARB, "arb", self.presenting[i].res)
        elif self.next_pkt[i] < len(self.pkts[i]):
            self._at(r.pkt.done + 1, _ARB, "arb", self.pkts[i][self.next_pkt[i]].res)
        self.rhead_free[t] = c + r.kt + 1
        if self.rfifo[t]:
            self._head(t)

    # -- trace synthesis -----------------------------------------------------

    def traces(self, total_cycles: int | None = None, max_cycles: int = 100_000):
        cfg = self.cfg
        P = self.P
        last = -1
        for lst in self.pkts:
            for p in lst:
                if p.present is None:
                    continue
                end = p.dec + p.n if p.dec is not None else p.present
                if p.tcells is not None:
                    end = max(end, p.dec + P + max(p.n, p.m))
                if p.rsp is not None:
                    end = max(end, p.done)
                last = max(last, end)
        for q in self.rfifo:
            for r in q:
                last = max(last, r.present if r.present is not None else r.ready)
        if total_cycles is None:
            total = max(min(last + 2, max_cycles), 1)
        else:
            total = total_cycles
        # rows of (cycle, signal index, value) are collected per port, then written
        init = [PortTrace(f"init{i}", cfg.width_bits, total) for i in range(cfg.n_init)]
        targ = [PortTrace(f"targ{t}", cfg.target_widths[t], total) for t in range(cfg.n_targ)]
        for i, lst in enumerate(self.pkts):
            tr = init[i]
            for p in lst:
                if p.present is None:
                    continue
                stop = p.dec if p.dec is not None else total - 1
                _write_req(tr, p.present, stop + 1, p.cells[0], p.req.addr, gnt=0)
                if p.dec is None:
                    continue
                for j, cell in enumerate(p.cells):
                    _write_req(tr, p.dec + 1 + j, p.dec + 2 + j, cell, p.req.addr, gnt=1)
                if p.tcells is not None:
                    t0 = p.dec + 1 + P + max(0, p.n - p.m)
                    local = cfg.local_addr(p.req.addr)
                    for j, cell in enumerate(p.tcells):
                        _write_req(targ[p.route], t0 + j, t0 + j + 1, cell, local, gnt=1)
                r = p.rsp
                if r is not None:
                    t0 = r.dec + 1 + P + max(0, r.kt - r.ki)
                    for j, cell in enumerate(r.icells):
                        _write_rsp(tr, t0 + j, t0 + j + 1, cell, gnt=1)
                    if p.route != UNMAPPED:
                        ttr = targ[p.route]
                        _write_rsp(ttr, r.present, r.dec + 1, r.tcells[0], gnt=0)
                        for j, cell in enumerate(r.tcells):
                            _write_rsp(ttr, r.dec + 1 + j, r.dec + 2 + j, cell, gnt=1)
        for t in range(cfg.n_targ):
            for r in self.rfifo[t]:
                if r.present is not None:
                    _write_rsp(targ[t], r.present, total, r.tcells[0], gnt=0)
        out = {tr.name: tr for tr in init}
        out.update({tr.name: tr for tr in targ})
        return out


def _write_req(tr: PortTrace, lo: int, hi: int, cell, addr: int, gnt: int) -> None:
    hi = min(hi, tr.n_cycles)
    if lo >= hi:
        return
    s = tr.signals
    m = cell.meta
    s["req"][lo:hi] = 1
    s["gnt"][lo:hi] = gnt
    s["opc"][lo:hi] = m.opcode.encode()
    s["addr"][lo:hi] = addr
    s["data"][lo:hi] = cell.payload
    s["be"][lo:hi] = cell.byte_enables
    s["eop"][lo:hi] = int(cell.eop)
    s["lck"][lo:hi] = int(cell.lck)
    s["src"][lo:hi] = m.src
    s["tid"][lo:hi] = m.tid


def _write_rsp(tr: PortTrace, lo: int, hi: int, cell, gnt: int) -> None:
    hi = min(hi, tr.n_cycles)
    if lo >= hi:
        return
    s = tr.signals
    m = cell.meta
    s["r_req"][lo:hi] = 1
    s["r_gnt"][lo:hi] = gnt
    s["r_opc"][lo:hi] = int(m.status)
    s["r_data"][lo:hi] = cell.payload
    s["r_eop"][lo:hi] = int(cell.eop)
    s["r_src"][lo:hi] = m.src
    s["r_tid"][lo:hi] = m.tid


def bca_run(cfg: NodeConfig, stimulus: Stimulus, seed: int = 0,
            total_cycles: int | None = None, max_cycles: int = 100_000) -> dict[str, PortTrace]:
    eng = BCAEngine(cfg, stimulus, seed)
    eng.run()
    return eng.traces(total_cycles, max_cycles)
