"""Node parameterization and address routing."""
from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass, field

from ..protocol import SUPPORTED_WIDTHS, Endianness, ProtocolType

MAX_PORTS = 32
MAX_PIPE = 16
UNMAPPED = -1

# Every region boundary must be a multiple of the largest packet.
REGION_ALIGN = 64


class InvalidConfig(ValueError):
    pass


class Arch(enum.Enum):
    SHARED_BUS = "SHARED_BUS"
    FULL_XBAR = "FULL_XBAR"
    PARTIAL_XBAR = "PARTIAL_XBAR"


class ArbPolicy(enum.Enum):
    FIXED_PRIORITY = "FIXED_PRIORITY"
    PROGRAMMABLE_PRIORITY = "PROGRAMMABLE_PRIORITY"
    ROUND_ROBIN = "ROUND_ROBIN"
    LRU = "LRU"
    LATENCY_BASED = "LATENCY_BASED"
    BANDWIDTH_LIMITED = "BANDWIDTH_LIMITED"


@dataclass(frozen=True, order=True)
class Region:
    base: int
    size: int
    target: int

    @property
    def end(self) -> int:
        return self.base + self.size


@dataclass(frozen=True)
class TargetProfile:
    base_latency: int = 1
    jitter: int = 0

    def latency(self, seed: int, target: int, k: int) -> int:
        """Latency of the k-th request accepted by ``target``."""
        if not self.jitter:
            return self.base_latency
        return self.base_latency + splitmix64(seed ^ (target << 40) ^ k) % (self.jitter + 1)


MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass
class NodeConfig:
    n_init: int = 1
    n_targ: int = 1
    width_bits: int = 64
    ptype: ProtocolType = ProtocolType.T3
    pipe_size: int = 1
    endianness: Endianness = Endianness.LITTLE
    arch: Arch = Arch.FULL_XBAR
    arb_policy: ArbPolicy = ArbPolicy.FIXED_PRIORITY
    address_map: list = field(default_factory=list)
    # PARTIAL_XBAR only: connectivity[i][t]
    connectivity: list | None = None
    priority_vector: list | None = None
    latency_budget: list | None = None
    # per initiator (grants, window_cycles)
    bw_quota: list | None = None
    target_profiles: list | None = None
    # per target data width; defaults to width_bits (size converters on the port)
    target_widths: list | None = None
    clock_ns: int = 10
    name: str = "node"

    def __post_init__(self):
        self.address_map = sorted(self.address_map)
        if self.priority_vector is None:
            self.priority_vector = [0] * self.n_init
        if self.latency_budget is None:
            self.latency_budget = [0] * self.n_init
        if self.bw_quota is None:
            self.bw_quota = [(1 << 30, 1)] * self.n_init
        if self.target_profiles is None:
            self.target_profiles = [TargetProfile() for _ in range(self.n_targ)]
        if self.target_widths is None:
            self.target_widths = [self.width_bits] * self.n_targ
        self.validate()
        self._bases = [r.base for r in self.address_map]
        # regions of one target are concatenated into its local address space
        self._offsets = []
        used = [0] * self.n_targ
        for r in self.address_map:
            self._offsets.append(used[r.target])
            used[r.target] += r.size

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if not 1 <= self.n_init <= MAX_PORTS:
            raise InvalidConfig(f"n_init={self.n_init} outside 1..{MAX_PORTS}")
        if not 1 <= self.n_targ <= MAX_PORTS:
            raise InvalidConfig(f"n_targ={self.n_targ} outside 1..{MAX_PORTS}")
        if self.width_bits not in SUPPORTED_WIDTHS:
            raise InvalidConfig(f"width {self.width_bits} not a power of two in 8..256")
        for w in self.target_widths:
            if w not in SUPPORTED_WIDTHS:
                raise InvalidConfig(f"target width {w} not a power of two in 8..256")
        if len(self.target_widths) != self.n_targ:
            raise InvalidConfig("target_widths length != n_targ")
        if self.ptype is ProtocolType.T1 and any(w != self.width_bits for w in self.target_widths):
            # single-cell T1 packets cannot be re-cut by a size converter
            raise InvalidConfig("T1 nodes need every target at the node width")
        if not 1 <= self.pipe_size <= MAX_PIPE:
            raise InvalidConfig(f"pipe_size={self.pipe_size} outside 1..{MAX_PIPE}")
        if self.clock_ns < 1:
            raise InvalidConfig("clock period must be positive")
        for name in ("priority_vector", "latency_budget", "bw_quota"):
            if len(getattr(self, name)) != self.n_init:
                raise InvalidConfig(f"{name} length != n_init")
        for grants, window in self.bw_quota:
            if grants < 1 or window < 1:
                raise InvalidConfig("bandwidth quota needs grants >= 1 and window >= 1")
        if len(self.target_profiles) != self.n_targ:
            raise InvalidConfig("target_profiles length != n_targ")
        for p in self.target_profiles:
            if p.base_latency < 1 or p.jitter < 0:
                raise InvalidConfig("target latency must be >= 1 with jitter >= 0")
        if not self.address_map:
            raise InvalidConfig("address map is empty")
        prev_end = 0
        for r in self.address_map:
            if not 0 <= r.target < self.n_targ:
                raise InvalidConfig(f"region {r} targets index >= n_targ")
            if r.size <= 0 or r.base % REGION_ALIGN or r.size % REGION_ALIGN:
                raise InvalidConfig(f"region {r} must be non-empty and {REGION_ALIGN}-byte aligned")
            if r.end > 1 << 32:
                raise InvalidConfig(f"region {r} exceeds the 32-bit space")
            if r.base < prev_end:
                raise InvalidConfig(f"region {r} overlaps its predecessor")
            prev_end = r.end
        if self.arch is Arch.PARTIAL_XBAR:
            m = self.connectivity
            if m is None or len(m) != self.n_init or any(len(row) != self.n_targ for row in m):
                raise InvalidConfig("PARTIAL_XBAR needs an n_init x n_targ connectivity matrix")
            for i, row in enumerate(m):
                if not any(row):
                    raise InvalidConfig(f"initiator {i} reaches no target")
        elif self.connectivity is not None:
            raise InvalidConfig("connectivity matrix only applies to PARTIAL_XBAR")

    # -- derived ------------------------------------------------------------

    @property
    def max_outstanding(self) -> int:
        return 1 if self.ptype is ProtocolType.T1 else self.pipe_size

    def connected(self, init: int, target: int) -> bool:
        if self.arch is not Arch.PARTIAL_XBAR:
            return True
        return bool(self.connectivity[init][target])

    def reachable_targets(self, init: int) -> list[int]:
        return [t for t in range(self.n_targ) if self.connected(init, t)]

    def _region_index(self, addr: int) -> int:
        k = bisect_right(self._bases, addr) - 1
        if k >= 0 and addr < self.address_map[k].end:
            return k
        return -1

    def region_of(self, addr: int) -> Region | None:
        k = self._region_index(addr)
        return self.address_map[k] if k >= 0 else None

    def route_for(self, init: int, addr: int) -> int:
        """Target reached by ``init`` at ``addr``, or UNMAPPED."""
        r = self.region_of(addr)
        if r is None or not self.connected(init, r.target):
            return UNMAPPED
        return r.target

    def local_addr(self, addr: int) -> int:
        """Address as seen on the target port."""
        k = self._region_index(addr)
        return addr - self.address_map[k].base + self._offsets[k]

    def global_addr(self, target: int, local: int) -> int:
        for r, off in zip(self.address_map, self._offsets):
            if r.target == target and off <= local < off + r.size:
                return r.base + local - off
        raise ValueError(f"no region of target {target} holds offset 0x{local:x}")

    def port_names(self) -> list[str]:
        return [f"init{i}" for i in range(self.n_init)] + [f"targ{t}" for t in range(self.n_targ)]


def route(addr: int, address_map) -> int:
    """Target index of the region holding ``addr``, else UNMAPPED."""
    for r in address_map:
        if r.base <= addr < r.base + r.size:
            return r.target
    return UNMAPPED
