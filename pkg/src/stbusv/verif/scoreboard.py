"""End-to-end data-integrity scoreboard.

Target-side requests are replayed against a reference memory per target, in
the order the target port saw them, to predict every response.  Initiator
requests must then arrive exactly once at the routed target with the
translated address and identical payload, and every response must carry the
predicted data.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from ..interconnect.config import UNMAPPED, NodeConfig
from ..protocol import Direction, OpKind, Status
from .monitor import MonitorTxn


@dataclass
class ScoreboardResult:
    verdict: str = "PASS"
    details: list = field(default_factory=list)
    matched: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def fail(self, msg: str) -> None:
        self.verdict = "FAIL"
        self.details.append(msg)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "matched": self.matched, "details": list(self.details)}


class _RefMemory:
    def __init__(self):
        self.b: dict[int, int] = {}

    def run(self, kind: OpKind, addr: int, size: int, data: bytes) -> bytes:
        old = bytes(self.b.get(a, 0) for a in range(addr, addr + size))
        if kind is not OpKind.LOAD:
            for k, v in enumerate(data):
                self.b[addr + k] = v
        return b"" if kind is OpKind.STORE else old


def _fmt(t: MonitorTxn) -> str:
    return f"{t.port} src {t.src} tid {t.tid} {t.opcode} @0x{t.addr:x} (cycle {t.start_cycle})"


def _split(txns):
    reqs = [t for t in txns if t.direction is Direction.REQ]
    rsps = [t for t in txns if t.direction is Direction.RSP]
    reqs.sort(key=lambda t: t.start_cycle)
    rsps.sort(key=lambda t: t.start_cycle)
    return reqs, rsps


def scoreboard_check(init_txns: dict, targ_txns: dict, config: NodeConfig,
                     drained: bool = True) -> ScoreboardResult:
    """``drained=False`` is for runs cut off by a cycle budget: transactions
    still in flight at the end are then not reported as lost."""
    res = ScoreboardResult()
    # (target, src, tid) -> FIFO of (request, predicted response data)
    at_target: dict[tuple, deque] = defaultdict(deque)

    for t in range(config.n_targ):
        reqs, rsps = _split(targ_txns.get(f"targ{t}", []))
        mem = _RefMemory()
        pending: dict[tuple, deque] = defaultdict(deque)
        for r in reqs:
            if not r.complete or r.opcode is None:
                res.fail(f"malformed target-side packet {_fmt(r)}")
                continue
            rdata = mem.run(r.opcode.kind, r.addr, r.opcode.size_bytes, r.data)
            at_target[(t, r.src, r.tid)].append((r, rdata))
            pending[(r.src, r.tid)].append((r, rdata))
        for p in rsps:
            q = pending[(p.src, p.tid)]
            if not q:
                res.fail(f"target response without request {_fmt(p)}")
                continue
            r, rdata = q.popleft()
            if p.status is not Status.OK or p.data != rdata:
                res.fail(f"target response mismatch for {_fmt(r)}: got {p.data.hex()} "
                         f"expected {rdata.hex()}")
        for q in pending.values():
            for r, _ in q if drained else ():
                res.fail(f"no target response for {_fmt(r)}")

    for i in range(config.n_init):
        reqs, rsps = _split(init_txns.get(f"init{i}", []))
        expect: dict[tuple, deque] = defaultdict(deque)
        for r in reqs:
            if not r.complete or r.opcode is None:
                res.fail(f"malformed initiator packet {_fmt(r)}")
                continue
            route = config.route_for(i, r.addr)
            if route == UNMAPPED:
                expect[(r.src, r.tid)].append((r, Status.ERR, b""))
                continue
            q = at_target[(route, r.src, r.tid)]
            if not q:
                if drained:
                    res.fail(f"request dropped: {_fmt(r)} never reached targ{route}")
                continue
            tr, rdata = q.popleft()
            local = config.local_addr(r.addr)
            if (tr.opcode, tr.addr, tr.data) != (r.opcode, local, r.data):
                res.fail(f"request corrupted on the way to targ{route}: {_fmt(r)} "
                         f"data {r.data.hex()} arrived as {tr.opcode} @0x{tr.addr:x} "
                         f"data {tr.data.hex()}")
                continue
            res.matched += 1
            expect[(r.src, r.tid)].append((r, Status.OK, rdata))
        for p in rsps:
            q = expect[(p.src, p.tid)]
            if not q:
                res.fail(f"initiator response without request {_fmt(p)}")
                continue
            r, status, rdata = q.popleft()
            if p.status is not status or p.data != rdata:
                res.fail(f"response mismatch for {_fmt(r)}: got {p.status} {p.data.hex()} "
                         f"expected {status} {rdata.hex()}")
        for q in expect.values():
            for r, _, _ in q if drained else ():
                res.fail(f"no response for {_fmt(r)}")

    for (t, src, tid), q in sorted(at_target.items()):
        for r, _ in q:
            res.fail(f"unexpected or duplicated packet at targ{t}: {_fmt(r)}")
    return res
