"""Regenerate configs/*.cfg: 36 nodes spanning types, architectures and policies.

    python3 tools/gen_configs.py [outdir]
"""
import os
import sys

from stbusv.interconnect.config import Arch, ArbPolicy, NodeConfig, Region, TargetProfile
from stbusv.protocol import Endianness, ProtocolType
from stbusv.regression.config_io import dump_config

ARCHS = [Arch.FULL_XBAR, Arch.SHARED_BUS, Arch.PARTIAL_XBAR]
POLICIES = list(ArbPolicy)
WIDTHS = [8, 16, 32, 64, 128, 256]
# (n_init, n_targ) per slot; one 32x32 node and a few 16-port ones
PORTS = [(1, 1), (2, 2), (3, 2), (4, 4), (2, 3), (8, 4), (4, 8), (16, 8), (5, 3), (8, 8),
         (16, 16), (3, 5)]


def make(ptype: ProtocolType, k: int) -> NodeConfig:
    arch = ARCHS[(k // 6 + k) % 3]
    policy = POLICIES[k % 6]
    ni, nt = PORTS[k]
    if ptype is ProtocolType.T3 and k == 10:
        ni, nt = 32, 32
    if ni == 1 and arch is not Arch.FULL_XBAR:
        ni = 2
    w = WIDTHS[(k + list(ProtocolType).index(ptype) * 2) % len(WIDTHS)]
    if ptype is ProtocolType.T1:
        tw = [w] * nt
    else:
        tw = [WIDTHS[(WIDTHS.index(w) + d) % len(WIDTHS)] for d in
              [(t % 3) - 1 for t in range(nt)]]
        tw = [x if x <= 256 else w for x in tw]
    amap = []
    for t in range(nt):
        amap.append(Region(t * 0x10000, 0x1000, t))
        if t % 3 == 2:  # second window of the same target
            amap.append(Region(t * 0x10000 + 0x8000, 0x800, t))
    conn = None
    if arch is Arch.PARTIAL_XBAR:
        conn = [[(i + t) % 3 != 1 or t == i % nt for t in range(nt)] for i in range(ni)]
    pipe = 1 if ptype is ProtocolType.T1 else [2, 4, 1, 8, 3, 16][k % 6]
    return NodeConfig(
        name=f"{ptype.name.lower()}_{k:02d}_{arch.name.lower()}_{policy.name.lower()}",
        n_init=ni, n_targ=nt, width_bits=w, ptype=ptype, pipe_size=pipe,
        endianness=Endianness.BIG if k % 4 == 3 else Endianness.LITTLE,
        arch=arch, arb_policy=policy, address_map=amap, connectivity=conn,
        priority_vector=[(3 * i + k) % 8 for i in range(ni)],
        latency_budget=[(5 * i) % 13 for i in range(ni)],
        bw_quota=[(1 + i % 3, 8 + 4 * (i % 4)) for i in range(ni)],
        target_profiles=[TargetProfile(1 + (t * 3 + k) % 6, (t + k) % 3) for t in range(nt)],
        target_widths=tw,
    )


def main(out="configs"):
    os.makedirs(out, exist_ok=True)
    n = 0
    for ptype in ProtocolType:
        for k in range(12):
            cfg = make(ptype, k)
            with open(os.path.join(out, cfg.name + ".cfg"), "w") as f:
                f.write(dump_config(cfg))
            n += 1
    print(f"wrote {n} configs to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
