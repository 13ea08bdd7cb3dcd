"""Seeded constrained-random traffic generation.

Every initiator draws from its own PCG64 stream seeded with ``seed ^ index`` so
that enabling or disabling one port never perturbs the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..interconnect.config import ArbPolicy, NodeConfig
from ..interconnect.signals import Stimulus
from ..protocol import OPCODE_SIZES, Opcode, OpKind, ProtocolType, Request, make_chunk

# seed offset of the stream driving programmable-port writes (not a port index)
PRIO_STREAM = 0x5052494F


class InfeasibleConstraints(ValueError):
    pass


@dataclass
class TrafficConstraints:
    """What the generator may emit.

    ``addr_ranges`` and ``unmapped_ranges`` are per initiator lists of
    half-open ``(lo, hi)`` windows, optionally ``(lo, hi, swap_limit)`` where
    the limit caps SWAP sizes for the target behind the window; addresses are
    drawn size-aligned inside them.
    """
    n_init: int = 1
    width_bits: int = 64
    ptype: ProtocolType = ProtocolType.T3
    op_weights: dict = field(default_factory=lambda: {"LOAD": 1.0, "STORE": 1.0, "SWAP": 0.25})
    sizes: tuple = OPCODE_SIZES
    addr_ranges: list = field(default_factory=list)
    unmapped_ranges: list = field(default_factory=list)
    unmapped_fraction: float = 0.0
    chunk_prob: float = 0.0
    chunk_len: tuple = (2, 4)
    inter_arrival: tuple = (0, 4)
    tid_policy: str = "sequential"
    init_enable: list | None = None
    # programmable-port writes spread over the first ``prio_horizon`` cycles
    prio_changes: int = 0
    prio_horizon: int = 2000
    prio_range: tuple = (0, 15)

    def __post_init__(self):
        # a flat list of windows applies to every initiator
        for name in ("addr_ranges", "unmapped_ranges"):
            rs = getattr(self, name)
            if rs and isinstance(rs[0], tuple):
                setattr(self, name, [list(rs) for _ in range(self.n_init)])

    def validate(self) -> None:
        w = self.op_weights
        if any(v < 0 for v in w.values()) or not any(v > 0 for v in w.values()):
            raise InfeasibleConstraints("opcode weights need one positive entry, none negative")
        if set(w) - {k.name for k in OpKind}:
            raise InfeasibleConstraints(f"unknown opcode kinds {set(w) - {k.name for k in OpKind}}")
        lo, hi = self.inter_arrival
        if not 0 <= lo <= hi:
            raise InfeasibleConstraints("inter-arrival needs 0 <= min <= max")
        if not 0 <= self.unmapped_fraction <= 1 or not 0 <= self.chunk_prob <= 1:
            raise InfeasibleConstraints("fractions must lie in [0, 1]")
        if self.chunk_len[0] < 1 or self.chunk_len[0] > self.chunk_len[1]:
            raise InfeasibleConstraints("chunk length range is empty")
        if self.tid_policy not in ("sequential", "random"):
            raise InfeasibleConstraints(f"unknown tid policy {self.tid_policy}")
        for rs in list(self.addr_ranges) + list(self.unmapped_ranges):
            for a, b, *_ in rs:
                if not 0 <= a < b <= 1 << 32:
                    raise InfeasibleConstraints(f"range ({a:#x}, {b:#x}) outside 32-bit space")
        if not self.opcode_table():
            raise InfeasibleConstraints("no opcode satisfies the weights and size limits")

    def opcode_table(self) -> list[tuple[Opcode, float]]:
        """Feasible opcodes with their draw weight (kind weight split over sizes)."""
        out = []
        for name, weight in self.op_weights.items():
            kind = OpKind[name]
            if weight <= 0:
                continue
            if self.ptype is ProtocolType.T1 and kind is OpKind.SWAP:
                continue
            limit = 64
            if self.ptype is ProtocolType.T1 or kind is OpKind.SWAP:
                limit = self.width_bits // 8
            sizes = [s for s in self.sizes if s <= limit]
            for s in sizes:
                out.append((Opcode(kind, s), weight / len(sizes)))
        return out

    @classmethod
    def for_config(cls, cfg: NodeConfig, window: int = 256, **overrides) -> "TrafficConstraints":
        """Constraints covering each initiator's reachable address space.

        Only the first ``window`` bytes of every region are used, so loads
        tend to hit locations earlier stores wrote.
        """
        ranges, holes = [], []
        gaps = _gaps(cfg)
        for i in range(cfg.n_init):
            mine, unreachable = [], []
            for r in cfg.address_map:
                swap = min(cfg.width_bits, cfg.target_widths[r.target]) // 8
                span = (r.base, r.base + min(window, r.size), swap)
                (mine if cfg.connected(i, r.target) else unreachable).append(span)
            ranges.append(mine)
            holes.append(unreachable + gaps)
        kw = dict(n_init=cfg.n_init, width_bits=cfg.width_bits, ptype=cfg.ptype, addr_ranges=ranges, unmapped_ranges=holes)
        if cfg.ptype is ProtocolType.T1:
            kw["op_weights"] = {"LOAD": 1.0, "STORE": 1.0}
        kw.update(overrides)
        return cls(**kw)


def _gaps(cfg: NodeConfig, span: int = 256) -> list[tuple[int, int]]:
    """A few unmapped windows of the 32-bit space (region bases are 64-aligned)."""
    out, prev = [], 0
    for r in cfg.address_map:
        if r.base > prev:
            out.append((prev, min(r.base, prev + span)))
        prev = r.end
    if prev < 1 << 32:
        out.append((prev, min(1 << 32, prev + span)))
    return out


def _pick_addr(rng, window, size: int) -> int:
    lo, hi = window[0], window[1]
    lo = -(-lo // size) * size
    slots = (hi - lo) // size
    return lo + int(rng.integers(slots)) * size


def _per_initiator_counts(count: int, enabled: list[int]) -> dict[int, int]:
    base, extra = divmod(count, len(enabled))
    return {i: base + (k < extra) for k, i in enumerate(enabled)}


def gen_traffic(seed: int, constraints: TrafficConstraints, count: int) -> Stimulus:
    """``count`` requests spread over the enabled initiators, plus any
    programmable-port writes.  Deterministic in its three arguments."""
    if count < 0:
        raise ValueError("count must be >= 0")
    c = constraints
    c.validate()
    enabled = [i for i in range(c.n_init) if c.init_enable is None or c.init_enable[i]]
    if not enabled and count:
        raise InfeasibleConstraints("no initiator enabled")
    table = c.opcode_table()
    ops = [op for op, _ in table]
    probs = np.array([w for _, w in table], dtype=float)
    probs /= probs.sum()
    chunk_ok = c.ptype is not ProtocolType.T1 and c.chunk_prob > 0

    requests: list[Request] = []
    counts = _per_initiator_counts(count, enabled) if count else {}
    chunk_id = 0
    for i, n in counts.items():
        rng = np.random.Generator(np.random.PCG64((seed ^ i) & (2 ** 64 - 1)))
        mapped = c.addr_ranges[i] if c.addr_ranges else []
        holes = c.unmapped_ranges[i] if c.unmapped_ranges else []
        t, tid, k = 0, 0, 0
        while k < n:
            length = 1
            if chunk_ok and n - k >= 2 and rng.random() < c.chunk_prob:
                length = int(rng.integers(c.chunk_len[0], c.chunk_len[1] + 1))
                length = max(2, min(length, n - k))
            err = bool(holes) and length == 1 and rng.random() < c.unmapped_fraction
            pool = holes if err or not mapped else mapped
            if not pool:
                raise InfeasibleConstraints(f"initiator {i} has no address window")
            # a chunk stays inside one window, hence one target
            window = pool[int(rng.integers(len(pool)))]
            swap_limit = window[2] if len(window) > 2 else c.width_bits // 8
            group = []
            for _ in range(length):
                t += int(rng.integers(c.inter_arrival[0], c.inter_arrival[1] + 1))
                op = ops[int(rng.choice(len(ops), p=probs))]
                if op.kind is OpKind.SWAP and op.size_bytes > swap_limit:
                    op = Opcode(OpKind.SWAP, swap_limit)
                addr = _pick_addr(rng, window, op.size_bytes)
                data = b""
                if op.carries_request_data:
                    data = rng.integers(0, 256, op.size_bytes, dtype=np.uint8).tobytes()
                if c.tid_policy == "random":
                    tid = int(rng.integers(256))
                group.append(Request(i, tid, op, addr, data, None, t))
                if c.tid_policy == "sequential":
                    tid = (tid + 1) % 256
            if length > 1:
                group = make_chunk(chunk_id, group).requests
                chunk_id += 1
            requests.extend(group)
            k += length

    prio = []
    if c.prio_changes:
        rng = np.random.Generator(np.random.PCG64((seed ^ PRIO_STREAM) & (2 ** 64 - 1)))
        lo, hi = c.prio_range
        cycles = sorted(int(x) for x in rng.integers(1, c.prio_horizon, c.prio_changes))
        for cyc in cycles:
            prio.append((cyc, [int(v) for v in rng.integers(lo, hi + 1, c.n_init)]))
    return Stimulus(requests, prio)


def prio_allowed(cfg: NodeConfig) -> bool:
    return cfg.arb_policy is ArbPolicy.PROGRAMMABLE_PRIORITY
