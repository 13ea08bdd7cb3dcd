import pytest
from hypothesis import given, strategies as st

from fixtures.nodes import Region, node
from stbusv.protocol import OpKind, ProtocolType
from stbusv.verif.traffic import InfeasibleConstraints, TrafficConstraints, gen_traffic

CFG = node(3, 2, width=32, ptype=ProtocolType.T3,
           address_map=[Region(0, 0x1000, 0), Region(0x1000, 0x1000, 1)])


def test_deterministic_in_seed():
    tc = TrafficConstraints.for_config(CFG, chunk_prob=0.3, unmapped_fraction=0.1)
    a, b = gen_traffic(7, tc, 300), gen_traffic(7, tc, 300)
    assert a.requests == b.requests
    assert gen_traffic(8, tc, 300).requests != a.requests


def test_disabling_one_initiator_keeps_the_others():
    tc = TrafficConstraints.for_config(CFG)
    full = gen_traffic(3, tc, 90)
    tc2 = TrafficConstraints.for_config(CFG, init_enable=[True, False, True])
    part = gen_traffic(3, tc2, 60)
    assert [r for r in full.requests if r.src == 0] == [r for r in part.requests if r.src == 0]
    assert not [r for r in part.requests if r.src == 1]


@given(st.integers(0, 2 ** 32), st.integers(0, 200), st.sampled_from(list(ProtocolType)))
def test_requests_respect_constraints(seed, count, ptype):
    cfg = node(2, 2, width=32, ptype=ptype,
               address_map=[Region(0, 0x1000, 0), Region(0x1000, 0x1000, 1)])
    tc = TrafficConstraints.for_config(cfg, chunk_prob=0.2, unmapped_fraction=0.2)
    reqs = gen_traffic(seed, tc, count).requests
    assert len(reqs) == count
    for r in reqs:
        assert r.addr % r.opcode.size_bytes == 0
        if ptype is ProtocolType.T1:
            assert r.opcode.kind is not OpKind.SWAP and r.opcode.size_bytes <= 4
            assert not r.lck
        if r.opcode.kind is OpKind.SWAP:
            assert r.opcode.size_bytes <= 4
        assert len(r.data) == (r.opcode.size_bytes if r.opcode.carries_request_data else 0)
    for i in range(2):
        mine = [r for r in reqs if r.src == i]
        assert [r.issue_cycle for r in mine] == sorted(r.issue_cycle for r in mine)


def test_unmapped_fraction_one_only_errors():
    tc = TrafficConstraints.for_config(CFG, unmapped_fraction=1.0)
    for r in gen_traffic(1, tc, 50).requests:
        assert CFG.route_for(r.src, r.addr) == -1 or CFG.region_of(r.addr) is None


@pytest.mark.parametrize("bad", [
    dict(op_weights={"LOAD": 0.0, "STORE": 0.0}),
    dict(op_weights={"FETCH": 1.0}),
    dict(inter_arrival=(3, 1)),
    dict(unmapped_fraction=1.5),
    dict(chunk_len=(0, 2)),
    dict(tid_policy="lifo"),
    dict(addr_ranges=[(0, 1 << 33)]),
])
def test_infeasible_constraints(bad):
    with pytest.raises(InfeasibleConstraints):
        gen_traffic(0, TrafficConstraints.for_config(CFG, **bad), 10)


def test_prio_writes_only_when_requested():
    tc = TrafficConstraints.for_config(CFG, prio_changes=4, prio_horizon=100)
    s = gen_traffic(5, tc, 10)
    assert len(s.prio_events) == 4
    assert all(1 <= c < 100 and len(v) == 3 for c, v in s.prio_events)
    assert not gen_traffic(5, TrafficConstraints.for_config(CFG), 10).prio_events
