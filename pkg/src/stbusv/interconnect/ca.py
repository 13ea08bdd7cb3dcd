"""Cycle-accurate engine.

The node, the initiator BFMs and the target models are separate clocked
components.  Each cycle every component first drives its registered outputs,
then all of them sample the assembled port signals at the rising edge.  The
node sees nothing but port signals.
"""
from __future__ import annotations

from collections import deque

from ..protocol import (Direction, Opcode, OpKind, ProtocolType, Response, Status,
                        build_request_cells,
                        build_response_cells, cells_per_packet, pack_cell, rebuild_payload,
                        unpack_cell, Cell, CellMeta)
from .arbiter import Arbiter
from .config import Arch, ArbPolicy, NodeConfig, UNMAPPED
from .signals import Memory, PortSignals, PortTrace, Stimulus

# Internal rows: request (opc, addr, data, be, eop, lck, src, tid) and
# response (r_opc, r_data, r_eop, r_src, r_tid); None when req/r_req is low.
_IDLE_REQ = (0,) * 10
_IDLE_RSP = (0,) * 7


class WrongPolicy(Exception):
    pass


class LengthMismatch(Exception):
    pass


def _cell_row(cell: Cell) -> tuple:
    m = cell.meta
    return (m.opcode.encode(), m.addr, cell.payload, cell.byte_enables,
            int(cell.eop), int(cell.lck), m.src, m.tid)


class InitiatorBFM:
    """Presents one packet at a time, never more than ``max_out`` outstanding."""

    def __init__(self, requests, cfg: NodeConfig):
        self.queue = deque(
            (r.issue_cycle, r.tid, [_cell_row(c) for c in
                                    build_request_cells(r, cfg.width_bits, cfg.ptype,
                                                        cfg.endianness)])
            for r in requests)
        # a tid is never reused while its response is outstanding
        self.live: dict[int, int] = {}
        self.max_out = cfg.max_outstanding
        self.cur = None
        self.idx = 0
        self.outstanding = 0

    @property
    def finished(self) -> bool:
        return not self.queue and self.cur is None and self.outstanding == 0

    def drive(self, c: int):
        if self.cur is None:
            q = self.queue
            if (q and q[0][0] <= c and self.outstanding < self.max_out
                    and q[0][1] not in self.live):
                self.cur = q.popleft()[2]
                self.idx = 0
            else:
                return None
        return self.cur[self.idx]

    def clock(self, gnt: int, rsp_row) -> None:
        if gnt:
            if self.idx == 0:
                self.outstanding += 1
                tid = self.cur[0][7]
                self.live[tid] = self.live.get(tid, 0) + 1
            self.idx += 1
            if self.idx == len(self.cur):
                self.cur = None
        if rsp_row is not None and rsp_row[2]:
            self.outstanding -= 1
            tid = rsp_row[4]
            self.live[tid] -= 1
            if not self.live[tid]:
                del self.live[tid]


class TargetModel:
    """Always-ready memory target answering in acceptance order."""

    def __init__(self, index: int, cfg: NodeConfig, seed: int):
        self.index = index
        self.cfg = cfg
        self.width = cfg.target_widths[index]
        self.profile = cfg.target_profiles[index]
        self.seed = seed
        self.mem = Memory()
        self.rx: list[Cell] = []
        self.accepted = 0
        self.fifo: deque = deque()
        self.cur = None
        self.idx = 0

    def drive(self, c: int):
        if self.cur is None:
            if self.fifo and self.fifo[0][0] <= c:
                self.cur = self.fifo.popleft()[1]
                self.idx = 0
            else:
                return None
        return self.cur[self.idx]

    def clock(self, c: int, req_row, r_gnt: int) -> None:
        if req_row is not None:
            opc, addr, data, be, eop, lck, src, tid = req_row
            op = Opcode.decode(opc)
            meta = CellMeta(src, tid, op, addr)
            self.rx.append(Cell(data, be, bool(eop), bool(lck), meta))
            if eop:
                self._accept(c, meta)
        if self.cur is not None and r_gnt:
            self.idx += 1
            if self.idx == len(self.cur):
                self.cur = None

    def _accept(self, c: int, meta: CellMeta) -> None:
        cfg = self.cfg
        data = rebuild_payload(self.rx, cfg.endianness, self.width)
        self.rx = []
        op = meta.opcode
        rdata = self.mem.apply(op.kind, meta.addr, op.size_bytes, data)
        lat = self.profile.latency(self.seed, self.index, self.accepted)
        self.accepted += 1
        rsp = Response(meta.src, meta.tid, Status.OK, rdata)
        cells = build_response_cells(rsp, op, meta.addr, self.width, cfg.ptype, cfg.endianness)
        rows = [(int(Status.OK), c_.payload, int(c_.eop), meta.src, meta.tid) for c_ in cells]
        self.fifo.append((c + lat, rows))


class _Flight:
    """A request packet crossing the node."""
    __slots__ = ("src", "tid", "op", "addr", "lck", "route", "local", "n", "m",
                 "image", "rx", "t0")


class _RspFlight:
    __slots__ = ("src", "tid", "op", "addr", "status", "kt", "ki", "image", "rx", "t0", "route")


class CANode:
    """The node as a clocked state machine driven by port signals only."""

    def __init__(self, cfg: NodeConfig):
        self.cfg = cfg
        self.P = cfg.pipe_size
        n_init, n_targ = cfg.n_init, cfg.n_targ
        self.shared = cfg.arch is Arch.SHARED_BUS
        n_res = 1 if self.shared else n_targ + 1
        max_window = max(w for _, w in cfg.bw_quota)
        self.req_arb = [Arbiter(cfg.arb_policy, n_init, max_window) for _ in range(n_res)]
        self.req_next = [0] * n_res
        self.lock = [None] * n_res
        n_rres = 1 if self.shared else n_init
        self.rsp_arb = [Arbiter(cfg.arb_policy, n_targ + 1) for _ in range(n_rres)]
        self.rsp_next = [0] * n_rres
        self.priority = list(cfg.priority_vector)
        self._pending_priority = None

        self.in_service = [None] * n_init
        self.waiting_since = [None] * n_init
        self.grant_log = [deque() for _ in range(n_init)]
        self.routes_out = [dict() for _ in range(n_init)]
        self.txns: dict[tuple[int, int], _Flight] = {}
        self.emit_req = [deque() for _ in range(n_targ)]

        self.rsp_service = [None] * (n_targ + 1)
        self.rsp_waiting_since = [None] * (n_targ + 1)
        self.err_fifo: deque = deque()
        self.err_free_at = 0
        self.emit_rsp = [deque() for _ in range(n_init)]

    # -- programmable port -------------------------------------------------

    def program_priority(self, vector) -> None:
        if self.cfg.arb_policy is not ArbPolicy.PROGRAMMABLE_PRIORITY:
            raise WrongPolicy("priority port only exists under PROGRAMMABLE_PRIORITY")
        if len(vector) != self.cfg.n_init:
            raise LengthMismatch(f"vector has {len(vector)} entries, node has "
                                 f"{self.cfg.n_init} initiators")
        self._pending_priority = list(vector)

    # -- outputs -------------------------------------------------------------

    def drive(self, c: int):
        """Registered outputs for cycle ``c``.

        Returns (gnt per initiator, response row per initiator, request row per
        target, r_gnt per target); rows are None when idle.
        """
        cfg = self.cfg
        gnt = [1 if f is not None else 0 for f in self.in_service]
        rsp_rows = [None] * cfg.n_init
        for i, q in enumerate(self.emit_rsp):
            while q and q[0].t0 + q[0].ki <= c:
                q.popleft()
            if q and q[0].t0 <= c:
                rf = q[0]
                j = c - rf.t0
                payload = 0
                if rf.image is not None:
                    payload, _ = pack_cell(rf.image, rf.addr, rf.op.size_bytes,
                                           cfg.width_bits, j, cfg.endianness)
                rsp_rows[i] = (int(rf.status), payload, int(j == rf.ki - 1), rf.src, rf.tid)
        req_rows = [None] * cfg.n_targ
        for t, q in enumerate(self.emit_req):
            while q and q[0].t0 + q[0].m <= c:
                q.popleft()
            if q and q[0].t0 <= c:
                f = q[0]
                j = c - f.t0
                width = cfg.target_widths[t]
                data = f.image if f.op.kind is not OpKind.LOAD else None
                payload, be = pack_cell(data, f.local, f.op.size_bytes, width, j, cfg.endianness)
                req_rows[t] = (f.op.encode(), f.local, payload, be, int(j == f.m - 1),
                               int(f.lck), f.src, f.tid)
        r_gnt = [1 if self.rsp_service[t] is not None else 0 for t in range(cfg.n_targ)]
        return gnt, rsp_rows, req_rows, r_gnt

    # -- rising edge ---------------------------------------------------------

    def clock(self, c: int, init_rows, targ_rsp_rows) -> None:
        """Sample the port signals of cycle ``c`` and advance one clock."""
        if self._pending_priority is not None:
            self.priority = self._pending_priority
            self._pending_priority = None
        requesting = [i for i, row in enumerate(init_rows)
                      if row is not None and self.in_service[i] is None]
        rsp_requesting = [t for t, row in enumerate(targ_rsp_rows)
                          if row is not None and self.rsp_service[t] is None]

        self._sample_request_cells(c, init_rows)
        self._sample_response_cells(targ_rsp_rows)
        self._arbitrate_requests(c, requesting, init_rows)
        self._arbitrate_responses(c, rsp_requesting, targ_rsp_rows)
        self._retire(c)

    def _sample_request_cells(self, c, init_rows):
        cfg = self.cfg
        for i, f in enumerate(self.in_service):
            if f is None or init_rows[i] is None:
                continue
            row = init_rows[i]
            if f.image is not None:
                unpack_cell(row[2], f.addr, f.op.size_bytes, cfg.width_bits, f.rx,
                            cfg.endianness, f.image)
            f.rx += 1
            if row[4]:
                self.in_service[i] = None
                if f.route == UNMAPPED:
                    self.err_fifo.append((c + self.P, f.src, f.tid))

    def _sample_response_cells(self, targ_rsp_rows):
        cfg = self.cfg
        for t in range(cfg.n_targ):
            rf = self.rsp_service[t]
            if rf is None or targ_rsp_rows[t] is None:
                continue
            row = targ_rsp_rows[t]
            if rf.image is not None:
                unpack_cell(row[1], rf.addr, rf.op.size_bytes, cfg.target_widths[t], rf.rx,
                            cfg.endianness, rf.image)
            rf.rx += 1
            if row[2]:
                self.rsp_service[t] = None
        if self.rsp_service[cfg.n_targ] is not None:
            self.rsp_service[cfg.n_targ] = None

    def _eligible(self, i: int, route: int, c: int) -> bool:
        cfg = self.cfg
        if cfg.ptype is not ProtocolType.T3:
            routes = self.routes_out[i]
            if routes and (len(routes) > 1 or route not in routes):
                return False
        if cfg.arb_policy is ArbPolicy.BANDWIDTH_LIMITED:
            quota, window = cfg.bw_quota[i]
            log = self.grant_log[i]
            while log and log[0] <= c - window:
                log.popleft()
            if len(log) >= quota:
                return False
        return True

    def _arbitrate_requests(self, c, requesting, init_rows):
        cfg = self.cfg
        by_res: dict[int, list[int]] = {}
        routes = {}
        for i in requesting:
            if self.waiting_since[i] is None:
                self.waiting_since[i] = c
            row = init_rows[i]
            route = cfg.route_for(i, row[1])
            routes[i] = route
            res = 0 if self.shared else (route if route != UNMAPPED else cfg.n_targ)
            if self.req_next[res] > c:
                continue
            if self._eligible(i, route, c):
                by_res.setdefault(res, []).append(i)
        for res, cands in by_res.items():
            owner = self.lock[res]
            if owner is not None:
                if owner not in cands:
                    continue
                winner = owner
            else:
                meta = {}
                if cfg.arb_policy is ArbPolicy.BANDWIDTH_LIMITED:
                    meta = dict(window_grants=self._window_counts(c),
                                quota=[q for q, _ in cfg.bw_quota])
                winner = self.req_arb[res].grant(
                    cands, c, priority=self.priority, waited=self._waited(cands, c),
                    latency_budget=cfg.latency_budget, **meta)
            self._grant_request(c, res, winner, routes[winner], init_rows[winner])

    def _waited(self, cands, c):
        w = [0] * self.cfg.n_init
        for i in cands:
            w[i] = c - self.waiting_since[i]
        return w

    def _window_counts(self, c):
        out = []
        for i, log in enumerate(self.grant_log):
            window = self.cfg.bw_quota[i][1]
            out.append(sum(1 for d in log if d > c - window))
        return out

    def _grant_request(self, c, res, i, route, row):
        cfg = self.cfg
        opc, addr, _, _, _, lck, src, tid = row
        op = Opcode.decode(opc)
        f = _Flight()
        f.src, f.tid, f.op, f.addr, f.lck, f.route = src, tid, op, addr, bool(lck), route
        f.n = cells_per_packet(op, cfg.width_bits, cfg.ptype, Direction.REQ)
        f.image = bytearray(op.size_bytes) if op.kind is not OpKind.LOAD else None
        f.rx = 0
        if route == UNMAPPED:
            f.m, f.local = 0, addr
        else:
            f.m = cells_per_packet(op, cfg.target_widths[route], cfg.ptype, Direction.REQ)
            f.local = cfg.local_addr(addr)
            f.t0 = c + 1 + self.P + max(0, f.n - f.m)
            self.emit_req[route].append(f)
        self.req_next[res] = c + max(f.n, f.m)
        if f.lck:
            self.lock[res] = i
        elif self.lock[res] == i:
            self.lock[res] = None
        self.in_service[i] = f
        self.waiting_since[i] = None
        self.grant_log[i].append(c)
        rc = self.routes_out[i]
        rc[route] = rc.get(route, 0) + 1
        self.txns[(src, tid)] = f

    def _arbitrate_responses(self, c, rsp_requesting, targ_rsp_rows):
        cfg = self.cfg
        n_targ = cfg.n_targ
        cands_by_res: dict[int, list[int]] = {}
        dest = {}
        for t in rsp_requesting:
            if self.rsp_waiting_since[t] is None:
                self.rsp_waiting_since[t] = c
            src = targ_rsp_rows[t][3]
            dest[t] = src
            res = 0 if self.shared else src
            if self.rsp_next[res] <= c:
                cands_by_res.setdefault(res, []).append(t)
        if (self.err_fifo and self.rsp_service[n_targ] is None
                and max(self.err_fifo[0][0], self.err_free_at) <= c):
            if self.rsp_waiting_since[n_targ] is None:
                self.rsp_waiting_since[n_targ] = c
            src = self.err_fifo[0][1]
            dest[n_targ] = src
            res = 0 if self.shared else src
            if self.rsp_next[res] <= c:
                cands_by_res.setdefault(res, []).append(n_targ)
        for res, cands in cands_by_res.items():
            waited = [0] * (n_targ + 1)
            for t in cands:
                waited[t] = c - self.rsp_waiting_since[t]
            winner = self.rsp_arb[res].grant(cands, c, waited=waited)
            self._grant_response(c, res, winner, dest[winner], targ_rsp_rows)

    def _grant_response(self, c, res, t, src, targ_rsp_rows):
        cfg = self.cfg
        rf = _RspFlight()
        rf.route = t
        self.rsp_waiting_since[t] = None
        if t == cfg.n_targ:
            _, rf.src, rf.tid = self.err_fifo.popleft()
            f = self.txns[(rf.src, rf.tid)]
            rf.op, rf.addr, rf.status = f.op, f.addr, Status.ERR
            rf.kt = rf.ki = 1
            rf.image = None
            self.err_free_at = c + 2
        else:
            row = targ_rsp_rows[t]
            rf.src, rf.tid = row[3], row[4]
            f = self.txns[(rf.src, rf.tid)]
            rf.op, rf.addr, rf.status = f.op, f.local, Status(row[0])
            rf.kt = cells_per_packet(f.op, cfg.target_widths[t], cfg.ptype, Direction.RSP)
            rf.ki = cells_per_packet(f.op, cfg.width_bits, cfg.ptype, Direction.RSP)
            has_data = rf.status is Status.OK and f.op.kind is not OpKind.STORE
            rf.image = bytearray(f.op.size_bytes) if has_data else None
        rf.rx = 0
        rf.t0 = c + 1 + self.P + max(0, rf.kt - rf.ki)
        self.rsp_service[t] = rf
        self.rsp_next[res] = c + max(rf.kt, rf.ki)
        self.emit_rsp[src].append(rf)

    def _retire(self, c):
        """Transactions whose last response cell leaves the node this cycle."""
        for q in self.emit_rsp:
            if q and q[0].t0 + q[0].ki - 1 == c:
                rf = q[0]
                f = self.txns.pop((rf.src, rf.tid))
                rc = self.routes_out[rf.src]
                rc[f.route] -= 1
                if not rc[f.route]:
                    del rc[f.route]

    # -- single-step API -----------------------------------------------------

    def step(self, c: int, inputs: dict) -> dict:
        """Sample ``inputs`` (port name -> PortSignals) for cycle ``c`` and
        return the node-driven PortSignals for cycle ``c + 1``."""
        cfg = self.cfg
        init_rows = []
        for i in range(cfg.n_init):
            s = inputs.get(f"init{i}", PortSignals())
            init_rows.append((s.opc, s.addr, s.data, s.be, s.eop, s.lck, s.src, s.tid)
                             if s.req else None)
        targ_rows = []
        for t in range(cfg.n_targ):
            s = inputs.get(f"targ{t}", PortSignals())
            targ_rows.append((s.r_opc, s.r_data, s.r_eop, s.r_src, s.r_tid) if s.r_req else None)
        self.clock(c, init_rows, targ_rows)
        return self.outputs(c + 1)

    def outputs(self, c: int) -> dict:
        gnt, rsp_rows, req_rows, r_gnt = self.drive(c)
        out = {}
        for i in range(self.cfg.n_init):
            r = rsp_rows[i]
            out[f"init{i}"] = PortSignals(gnt=gnt[i], **(
                dict(r_req=1, r_opc=r[0], r_data=r[1], r_eop=r[2], r_src=r[3], r_tid=r[4])
                if r else {}))
        for t in range(self.cfg.n_targ):
            r = req_rows[t]
            out[f"targ{t}"] = PortSignals(r_gnt=r_gnt[t], **(
                dict(req=1, opc=r[0], addr=r[1], data=r[2], be=r[3], eop=r[4], lck=r[5],
                     src=r[6], tid=r[7]) if r else {}))
        return out


def ca_step(node: CANode, c: int, inputs: dict) -> dict:
    return node.step(c, inputs)


def run_ca(cfg: NodeConfig, stimulus: Stimulus, seed: int = 0, total_cycles: int | None = None,
           max_cycles: int = 100_000) -> dict[str, PortTrace]:
    """Clock the node, BFMs and targets until quiescent (or ``total_cycles``)."""
    node = CANode(cfg)
    bfms = [InitiatorBFM(q, cfg) for q in stimulus.per_initiator(cfg.n_init)]
    targets = [TargetModel(t, cfg, seed) for t in range(cfg.n_targ)]
    prio = sorted(stimulus.prio_events, key=lambda e: e[0])
    pk = 0
    n_init, n_targ = cfg.n_init, cfg.n_targ
    init_rec = [[] for _ in range(n_init)]
    targ_rec = [[] for _ in range(n_targ)]
    last_active = -1
    limit = total_cycles if total_cycles is not None else max_cycles
    c = 0
    while c < limit:
        while pk < len(prio) and prio[pk][0] <= c:
            # written during cycle c-1, visible to arbitration from cycle c
            node.program_priority(prio[pk][1])
            pk += 1
        gnt, rsp_rows, req_rows, r_gnt = node.drive(c)
        init_rows = [b.drive(c) for b in bfms]
        trsp_rows = [t.drive(c) for t in targets]
        active = False
        for i in range(n_init):
            row, rr = init_rows[i], rsp_rows[i]
            if row is None and rr is None:
                continue
            active = True
            head = (1, gnt[i]) + row if row is not None else (0, gnt[i]) + _IDLE_REQ[2:]
            tail = (1, 1) + rr if rr is not None else _IDLE_RSP
            init_rec[i].append((c, head + tail))
        for t in range(n_targ):
            row, rr = req_rows[t], trsp_rows[t]
            if row is None and rr is None:
                continue
            active = True
            head = (1, 1) + row if row is not None else _IDLE_REQ
            tail = (1, r_gnt[t]) + rr if rr is not None else _IDLE_RSP
            targ_rec[t].append((c, head + tail))
        if active:
            last_active = c
        node.clock(c, init_rows, trsp_rows)
        for i, b in enumerate(bfms):
            rr = rsp_rows[i]
            b.clock(gnt[i] if init_rows[i] is not None else 0, rr)
        for t, tg in enumerate(targets):
            tg.clock(c, req_rows[t], r_gnt[t])
        c += 1
        if total_cycles is None and pk >= len(prio) and all(b.finished for b in bfms):
            break
    n = total_cycles if total_cycles is not None else min(last_active + 2, max_cycles)
    n = max(n, 1)
    traces = {}
    for i in range(n_init):
        traces[f"init{i}"] = PortTrace.from_records(f"init{i}", cfg.width_bits, n, init_rec[i])
    for t in range(n_targ):
        traces[f"targ{t}"] = PortTrace.from_records(f"targ{t}", cfg.target_widths[t], n,
                                                    targ_rec[t])
    return traces
