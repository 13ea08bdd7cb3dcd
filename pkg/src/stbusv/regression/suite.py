"""The twelve generic test cases.

Each test is a constraint template over a NodeConfig, so one definition runs
on every configuration.  Target response models belong to the testbench; a
test may replace their latency profiles (t04 does) without touching the node
parameters.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

from ..interconnect.config import ArbPolicy, NodeConfig, TargetProfile
from ..protocol import ProtocolType
from ..verif.traffic import TrafficConstraints

DEFAULT_STOP_TXNS = 1000
DEFAULT_STOP_CYCLES = 100_000


@dataclass(frozen=True)
class TestCase:
    id: str
    description: str
    template: Callable[[NodeConfig], TrafficConstraints]
    stop_txns: int = DEFAULT_STOP_TXNS
    stop_cycles: int = DEFAULT_STOP_CYCLES
    # the arbitration policy this test is written for; it still runs elsewhere
    policy: ArbPolicy | None = None
    # testbench-side target latency override
    targets: Callable[[NodeConfig], list] | None = None

    __test__ = False  # not a pytest class

    def applies(self, cfg: NodeConfig) -> bool:
        """Whether the test exercises what it is named for on ``cfg``."""
        return self.policy is None or cfg.arb_policy is self.policy

    def bench_config(self, cfg: NodeConfig) -> NodeConfig:
        if self.targets is None:
            return cfg
        return dataclasses.replace(cfg, target_profiles=self.targets(cfg))

    def constraints(self, cfg: NodeConfig) -> TrafficConstraints:
        tc = self.template(cfg)
        tc.validate()
        return tc


def _target_of(cfg: NodeConfig, window) -> int:
    return cfg.region_of(window[0]).target


def _restrict(cfg: NodeConfig, tc: TrafficConstraints, keep) -> TrafficConstraints:
    """Keep only the windows whose target satisfies ``keep(init, target)``;
    an initiator left without windows keeps all of its own."""
    out = []
    for i, ws in enumerate(tc.addr_ranges):
        sel = [w for w in ws if keep(i, _target_of(cfg, w))]
        out.append(sel or ws)
    tc.addr_ranges = out
    return tc


def hot_target(cfg: NodeConfig) -> int:
    """The mapped target shared by the most initiators (lowest index on a tie)."""
    mapped = {r.target for r in cfg.address_map}
    return max(sorted(mapped),
               key=lambda t: (sum(cfg.connected(i, t) for i in range(cfg.n_init)), -t))


def _sizes(cfg: NodeConfig, wanted) -> tuple:
    """``wanted`` minus sizes a T1 node cannot carry in one cell."""
    if cfg.ptype is not ProtocolType.T1:
        return tuple(wanted)
    limit = cfg.width_bits // 8
    return tuple(s for s in wanted if s <= limit) or (limit,)


def _hot(cfg: NodeConfig, **kw) -> TrafficConstraints:
    t = hot_target(cfg)
    tc = TrafficConstraints.for_config(cfg, window=128, inter_arrival=(0, 1), **kw)
    return _restrict(cfg, tc, lambda i, k: k == t)


def _t01(cfg):
    tc = TrafficConstraints.for_config(cfg, op_weights={"LOAD": 1.0, "STORE": 1.0},
                                       sizes=(min(4, cfg.width_bits // 8),),
                                       inter_arrival=(2, 8))
    return tc


def _t02(cfg):
    w = {"LOAD": 1.0, "STORE": 1.0}
    if cfg.ptype is not ProtocolType.T1:
        w["SWAP"] = 1.0
    return TrafficConstraints.for_config(cfg, op_weights=w, inter_arrival=(0, 3))


def _t03(cfg):
    return TrafficConstraints.for_config(cfg, chunk_prob=0.6, chunk_len=(2, 6),
                                         inter_arrival=(0, 2))


def _t04_targets(cfg):
    # alternate fast and slow targets so short requests overtake long ones
    return [TargetProfile(1 if t % 2 == 0 else 12, 0 if t % 2 == 0 else 4)
            for t in range(cfg.n_targ)]


def _t04(cfg):
    return TrafficConstraints.for_config(cfg, op_weights={"LOAD": 3.0, "STORE": 1.0},
                                         sizes=_sizes(cfg, (1, 2, 4, 8)), inter_arrival=(0, 1))


def _t05(cfg):
    return _hot(cfg)


def _t06(cfg):
    return _hot(cfg, sizes=_sizes(cfg, (4, 8, 16, 32)))


def _t07(cfg):
    return _hot(cfg, op_weights={"LOAD": 1.0, "STORE": 1.0}, sizes=_sizes(cfg, (4, 8)))


def _t08(cfg):
    prio = 8 if cfg.arb_policy is ArbPolicy.PROGRAMMABLE_PRIORITY else 0
    return _hot(cfg, prio_changes=prio, prio_horizon=1500)


def _t09(cfg):
    return TrafficConstraints.for_config(cfg, inter_arrival=(0, 0), sizes=_sizes(cfg, (4, 8, 16, 32, 64)))


def _t10(cfg):
    return TrafficConstraints.for_config(cfg, unmapped_fraction=0.3, inter_arrival=(0, 3))


def _t11(cfg):
    tc = TrafficConstraints.for_config(cfg, sizes=_sizes(cfg, (8, 16, 32, 64)), inter_arrival=(0, 2))
    return _restrict(cfg, tc, lambda i, t: cfg.target_widths[t] != cfg.width_bits)


def _t12(cfg):
    return TrafficConstraints.for_config(cfg, chunk_prob=0.1, unmapped_fraction=0.05,
                                         inter_arrival=(0, 6), tid_policy="random")


_SUITE = (
    TestCase("t01", "single read/write sanity", _t01, stop_txns=200),
    TestCase("t02", "all opcodes x sizes", _t02),
    TestCase("t03", "chunked bursts", _t03),
    TestCase("t04", "out-of-order via mixed-latency targets", _t04, targets=_t04_targets),
    TestCase("t05", "latency-based arbitration stress", _t05, policy=ArbPolicy.LATENCY_BASED),
    TestCase("t06", "bandwidth-limited arbitration stress", _t06,
             policy=ArbPolicy.BANDWIDTH_LIMITED),
    TestCase("t07", "LRU fairness", _t07),
    TestCase("t08", "programmable-priority reprogramming mid-run", _t08,
             policy=ArbPolicy.PROGRAMMABLE_PRIORITY),
    TestCase("t09", "all-initiator saturation", _t09),
    TestCase("t10", "unmapped-address errors", _t10),
    TestCase("t11", "size-conversion traffic", _t11),
    TestCase("t12", "long random soak", _t12, stop_txns=2000),
)


def suite() -> list[TestCase]:
    return list(_SUITE)


def get_test(test_id: str) -> TestCase:
    for t in _SUITE:
        if t.id == test_id:
            return t
    raise KeyError(f"unknown test {test_id!r}; known: {[t.id for t in _SUITE]}")
