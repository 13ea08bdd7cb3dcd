"""The six arbitration policies.

``arbitrate`` is the policy function proper; ``Arbiter`` binds a policy to its
state and is what the engines hold, one per shared resource.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .config import ArbPolicy


class ArbitrationError(Exception):
    pass


class EmptyRequesterSet(ArbitrationError):
    pass


@dataclass
class ArbiterState:
    n: int
    last_grant: int = -1
    lru_stamp: list = field(default_factory=list)
    stamp_counter: int = 0
    wait_counters: list = field(default_factory=list)
    # (cycle, winner) of recent grants, oldest first
    grant_history: deque = field(default_factory=deque)
    rr_pointer: int = -1

    def __post_init__(self):
        if not self.lru_stamp:
            self.lru_stamp = [0] * self.n
        if not self.wait_counters:
            self.wait_counters = [0] * self.n
        if self.rr_pointer < 0:
            # first round-robin pass starts at index 0
            self.rr_pointer = self.n - 1

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "last_grant": self.last_grant,
            "lru_stamp": list(self.lru_stamp),
            "stamp_counter": self.stamp_counter,
            "wait_counters": list(self.wait_counters),
            "grant_history": [list(g) for g in self.grant_history],
            "rr_pointer": self.rr_pointer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArbiterState":
        return cls(d["n"], d["last_grant"], list(d["lru_stamp"]), d["stamp_counter"],
                   list(d["wait_counters"]), deque(tuple(g) for g in d["grant_history"]),
                   d["rr_pointer"])

    def window_grants(self, who: int, cycle: int, window: int) -> int:
        """Grants to ``who`` decided in cycles [cycle-window+1, cycle-1]."""
        lo = cycle - window + 1
        return sum(1 for c, w in self.grant_history if w == who and lo <= c < cycle)


def arbitrate(policy: ArbPolicy, state: ArbiterState, requesters: Iterable[int], *,
              priority: Sequence[int] | None = None,
              waited: Sequence[int] | None = None,
              latency_budget: Sequence[int] | None = None,
              window_grants: Sequence[int] | None = None,
              quota: Sequence[int] | None = None,
              cycle: int = 0) -> int:
    """Pick one winner among ``requesters`` and update ``state``.

    Ties always break toward the lowest index.
    """
    reqs = sorted(set(requesters))
    if not reqs:
        raise EmptyRequesterSet("arbitrate called with no requesters")

    if policy is ArbPolicy.FIXED_PRIORITY:
        winner = reqs[0]
    elif policy is ArbPolicy.PROGRAMMABLE_PRIORITY:
        prio = priority or [0] * state.n
        winner = max(reqs, key=lambda i: (prio[i], -i))
    elif policy is ArbPolicy.ROUND_ROBIN:
        p = state.rr_pointer
        winner = min(reqs, key=lambda i: (i - p - 1) % state.n)
    elif policy is ArbPolicy.LRU:
        winner = min(reqs, key=lambda i: (state.lru_stamp[i], i))
    elif policy is ArbPolicy.LATENCY_BASED:
        w = waited or [0] * state.n
        b = latency_budget or [0] * state.n
        winner = max(reqs, key=lambda i: (w[i] - b[i], -i))
    elif policy is ArbPolicy.BANDWIDTH_LIMITED:
        if window_grants is not None and quota is not None:
            open_ = [i for i in reqs if window_grants[i] < quota[i]]
        else:
            open_ = reqs
        winner = (open_ or reqs)[0]
    else:  # pragma: no cover
        raise ArbitrationError(f"unknown policy {policy}")

    state.stamp_counter += 1
    state.lru_stamp[winner] = state.stamp_counter
    state.rr_pointer = winner
    state.last_grant = winner
    if waited is not None:
        for i in reqs:
            state.wait_counters[i] = waited[i]
    state.wait_counters[winner] = 0
    state.grant_history.append((cycle, winner))
    return winner


class Arbiter:
    """One arbitration point (a target, an initiator response channel or a bus)."""

    def __init__(self, policy: ArbPolicy, n: int, history_window: int = 0):
        self.policy = policy
        self.state = ArbiterState(n)
        self.history_window = history_window

    def grant(self, requesters, cycle: int, **meta) -> int:
        winner = arbitrate(self.policy, self.state, requesters, cycle=cycle, **meta)
        hist = self.state.grant_history
        keep = max(self.history_window, 1)
        while hist and hist[0][0] <= cycle - keep:
            hist.popleft()
        return winner
