"""Small node configurations and stimuli shared by the tests."""
from stbusv.interconnect.config import Arch, ArbPolicy, NodeConfig, Region, TargetProfile
from stbusv.interconnect.signals import Stimulus
from stbusv.protocol import Opcode, OpKind, ProtocolType, Request


def node(n_init=1, n_targ=1, width=64, ptype=ProtocolType.T3, pipe=2, **kw):
    kw.setdefault("address_map", [Region(t * 0x1000, 0x1000, t) for t in range(n_targ)])
    return NodeConfig(n_init=n_init, n_targ=n_targ, width_bits=width, ptype=ptype,
                      pipe_size=pipe, **kw)


def load(src, tid, addr, size=4, at=0):
    return Request(src, tid, Opcode(OpKind.LOAD, size), addr, b"", None, at)


def store(src, tid, addr, data, at=0):
    return Request(src, tid, Opcode(OpKind.STORE, len(data)), addr, bytes(data), None, at)


def stim(*reqs, prio=()):
    return Stimulus(list(reqs), list(prio))


__all__ = ["node", "load", "store", "stim", "Arch", "ArbPolicy", "Region", "TargetProfile"]
