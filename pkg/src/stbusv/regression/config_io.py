"""Node configuration text files.

One ``KEY = VALUE`` per line, ``#`` starts a comment, keys are case-insensitive::

    NAME       = xbar_4x4_t3          # optional, defaults to the file stem
    N_INIT     = 4                    # required
    N_TARG     = 4                    # required
    WIDTH      = 64                   # required, 8..256, power of two
    TYPE       = T3                   # required: T1 | T2 | T3
    PIPE       = 4                    # default 1
    ENDIAN     = LITTLE               # default LITTLE
    ARCH       = FULL_XBAR            # SHARED_BUS | FULL_XBAR (default) | PARTIAL_XBAR
    ARB        = ROUND_ROBIN          # default FIXED_PRIORITY
    CLOCK_NS   = 10                   # default 10
    MAP        = 0x0000:0x1000:0      # base:size:target, repeated, at least one
    CONN       = 0:1                  # init:target, repeated, PARTIAL_XBAR only
    PRIO       = 3,1,0,2              # per-initiator priority (default all 0)
    LAT        = 4,8,8,16             # per-initiator latency budget (default all 0)
    BW         = 2/16,1/8,1/8,1/8     # per-initiator grants/window (default unlimited)
    TARGET_LAT = 1,3,5,2              # per-target base latency (default all 1)
    TARGET_JITTER = 0,0,2,0           # per-target latency jitter (default all 0)
    TARGET_WIDTH  = 32,64,128,64      # per-target bus width (default WIDTH)
    STOP_TXNS  = 1000                 # stop condition overrides for every test
    STOP_CYCLES = 100000
"""
from __future__ import annotations

import os
from dataclasses import dataclass

from ..interconnect.config import (Arch, ArbPolicy, InvalidConfig, NodeConfig, Region,
                                   TargetProfile)
from ..protocol import Endianness, ProtocolType


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line, self.reason = line, reason


REQUIRED = ("N_INIT", "N_TARG", "WIDTH", "TYPE")
SCALARS = ("NAME", "N_INIT", "N_TARG", "WIDTH", "TYPE", "PIPE", "ENDIAN", "ARCH", "ARB",
           "CLOCK_NS", "PRIO", "LAT", "BW", "TARGET_LAT", "TARGET_JITTER", "TARGET_WIDTH",
           "STOP_TXNS", "STOP_CYCLES")
REPEATED = ("MAP", "CONN")


@dataclass
class LoadedConfig:
    """A NodeConfig plus the run-level settings of its file."""
    node: NodeConfig
    stop_txns: int | None = None
    stop_cycles: int | None = None
    path: str | None = None


def _int(text: str, ln: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise ParseError(ln, f"not an integer: {text!r}") from None


def _ints(text: str, ln: int) -> list[int]:
    return [_int(x.strip(), ln) for x in text.split(",") if x.strip()]


def _enum(cls, text: str, ln: int):
    try:
        return cls[text.upper()]
    except KeyError:
        raise ParseError(ln, f"{text!r} is not one of {[m.name for m in cls]}") from None


def parse_config_text(text: str, name: str = "node") -> LoadedConfig:
    vals: dict[str, tuple[str, int]] = {}
    maps, conns = [], []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(ln, "expected KEY = VALUE")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.upper()
        if not value:
            raise ParseError(ln, f"{key} has no value")
        if key in REPEATED:
            parts = [p.strip() for p in value.split(":")]
            if key == "MAP":
                if len(parts) != 3:
                    raise ParseError(ln, "MAP needs base:size:target")
                maps.append(Region(*(_int(p, ln) for p in parts)))
            else:
                if len(parts) != 2:
                    raise ParseError(ln, "CONN needs init:target")
                conns.append(tuple(_int(p, ln) for p in parts))
        elif key in SCALARS:
            if key in vals:
                raise ParseError(ln, f"{key} given twice (first on line {vals[key][1]})")
            vals[key] = (value, ln)
        else:
            raise ParseError(ln, f"unknown key {key}")
    end = len(text.splitlines()) + 1
    for k in REQUIRED:
        if k not in vals:
            raise ParseError(end, f"missing required key {k}")

    def get(key, conv, default=None):
        if key not in vals:
            return default
        v, ln = vals[key]
        return conv(v, ln)

    n_init = get("N_INIT", _int)
    n_targ = get("N_TARG", _int)
    kw = dict(
        name=get("NAME", lambda v, ln: v, name),
        n_init=n_init, n_targ=n_targ,
        width_bits=get("WIDTH", _int),
        ptype=get("TYPE", lambda v, ln: _enum(ProtocolType, v, ln)),
        pipe_size=get("PIPE", _int, 1),
        endianness=get("ENDIAN", lambda v, ln: _enum(Endianness, v, ln), Endianness.LITTLE),
        arch=get("ARCH", lambda v, ln: _enum(Arch, v, ln), Arch.FULL_XBAR),
        arb_policy=get("ARB", lambda v, ln: _enum(ArbPolicy, v, ln), ArbPolicy.FIXED_PRIORITY),
        clock_ns=get("CLOCK_NS", _int, 10),
        address_map=maps,
        priority_vector=get("PRIO", _ints),
        latency_budget=get("LAT", _ints),
        target_widths=get("TARGET_WIDTH", _ints),
    )
    if "BW" in vals:
        v, ln = vals["BW"]
        quota = []
        for item in v.split(","):
            g, sep, w = item.partition("/")
            if not sep:
                raise ParseError(ln, f"BW entry {item.strip()!r} needs grants/window")
            quota.append((_int(g.strip(), ln), _int(w.strip(), ln)))
        kw["bw_quota"] = quota
    lat = get("TARGET_LAT", _ints)
    jit = get("TARGET_JITTER", _ints)
    if lat is not None or jit is not None:
        nt = n_targ if n_targ > 0 else 0
        lat = lat if lat is not None else [1] * nt
        jit = jit if jit is not None else [0] * len(lat)
        if len(lat) != len(jit):
            raise InvalidConfig("TARGET_LAT and TARGET_JITTER lengths differ")
        kw["target_profiles"] = [TargetProfile(b, j) for b, j in zip(lat, jit)]
    if conns:
        if kw["arch"] is not Arch.PARTIAL_XBAR:
            raise InvalidConfig("CONN lines only apply to ARCH = PARTIAL_XBAR")
        if not (1 <= n_init <= 32 and 1 <= n_targ <= 32):
            raise InvalidConfig("port counts must lie in 1..32")
        m = [[False] * n_targ for _ in range(n_init)]
        for i, t in conns:
            if not (0 <= i < n_init and 0 <= t < n_targ):
                raise InvalidConfig(f"CONN {i}:{t} outside the port ranges")
            m[i][t] = True
        kw["connectivity"] = m
    elif kw["arch"] is Arch.PARTIAL_XBAR:
        raise InvalidConfig("PARTIAL_XBAR needs CONN lines")
    try:
        node = NodeConfig(**kw)
    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidConfig):
            raise
        raise InvalidConfig(str(e)) from e
    return LoadedConfig(node, get("STOP_TXNS", _int), get("STOP_CYCLES", _int))


def load_config(path) -> NodeConfig:
    """Parse and validate a configuration file."""
    return load_config_full(path).node


def load_config_full(path) -> LoadedConfig:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    stem = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    loaded = parse_config_text(text, stem)
    loaded.path = os.fspath(path)
    return loaded


def dump_config(cfg: NodeConfig, stop_txns: int | None = None,
                stop_cycles: int | None = None) -> str:
    """Text form that parse_config_text reads back into an equal NodeConfig."""
    lines = [f"NAME = {cfg.name}", f"N_INIT = {cfg.n_init}", f"N_TARG = {cfg.n_targ}",
             f"WIDTH = {cfg.width_bits}", f"TYPE = {cfg.ptype.name}", f"PIPE = {cfg.pipe_size}",
             f"ENDIAN = {cfg.endianness.name}", f"ARCH = {cfg.arch.name}",
             f"ARB = {cfg.arb_policy.name}", f"CLOCK_NS = {cfg.clock_ns}"]
    for r in cfg.address_map:
        lines.append(f"MAP = 0x{r.base:08x}:0x{r.size:x}:{r.target}")
    if cfg.connectivity is not None:
        for i, row in enumerate(cfg.connectivity):
            lines += [f"CONN = {i}:{t}" for t, ok in enumerate(row) if ok]
    lines.append("PRIO = " + ",".join(map(str, cfg.priority_vector)))
    lines.append("LAT = " + ",".join(map(str, cfg.latency_budget)))
    lines.append("BW = " + ",".join(f"{g}/{w}" for g, w in cfg.bw_quota))
    lines.append("TARGET_LAT = " + ",".join(str(p.base_latency) for p in cfg.target_profiles))
    lines.append("TARGET_JITTER = " + ",".join(str(p.jitter) for p in cfg.target_profiles))
    lines.append("TARGET_WIDTH = " + ",".join(map(str, cfg.target_widths)))
    if stop_txns is not None:
        lines.append(f"STOP_TXNS = {stop_txns}")
    if stop_cycles is not None:
        lines.append(f"STOP_CYCLES = {stop_cycles}")
    return "\n".join(lines) + "\n"
