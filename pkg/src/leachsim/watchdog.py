"""Spontaneous monitor self-selection and promiscuous traffic capture.

Each non-head member of a cluster rolls an m-sided die once per round and
activates its monitoring module on a 1 (m defaults to the cluster size).
Selection is precomputed and embedded, so it costs no radio traffic and no
energy, and the per-cluster monitor schedule is knowable to the cluster's
other monitors.  The count of simultaneously active monitors among n rolling
nodes follows

    f(alpha; n, m) = C(n, alpha) * (m - 1)^(n - alpha) / m^n.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Deque, List, Optional, Tuple

from .core import (Adv, Aggregate, AlarmLocal, Data, JoinReq, Sched,
                   SizeClass, Transmission)
from .leach import ClusterView
from .rng import Rng

BUFFER_CAPACITY = 64          # entries
BUFFER_MAX_AGE_TICKS = None   # resolved per run to one steady cycle


@dataclass(frozen=True)
class DicePmfQuery:
    alpha: int
    n: int
    m: int

    def validate(self) -> None:
        if self.m < 1:
            raise ValueError("die must have at least one side")
        if not (0 <= self.alpha <= self.n):
            raise ValueError(f"alpha must lie in [0, n]; got alpha={self.alpha}, n={self.n}")


def roll_watchdog(rng: Rng, m: int) -> bool:
    """One die roll: activate with probability exactly 1/m."""
    if m < 1:
        raise ValueError("die must have at least one side")
    return rng.randrange(m) == 0


def watchdog_count_pmf(q: DicePmfQuery) -> float:
    """Probability that exactly alpha of n rolling nodes activate."""
    q.validate()
    num = comb(q.n, q.alpha) * (q.m - 1) ** (q.n - q.alpha)
    return float(Fraction(num, q.m ** q.n))


@dataclass(frozen=True)
class CaptureEntry:
    tx: Transmission
    rx_power: float   # received power estimate at the monitor
    tick: int


@dataclass
class WatchdogState:
    """One active monitor: its cluster view and a bounded capture buffer.

    Monitors never hold a head role, never occupy their data slot, and keep
    at most ``capacity`` entries no older than ``max_age`` ticks.
    """

    node_id: int
    cluster: Optional[ClusterView] = None
    active: bool = False
    capacity: int = BUFFER_CAPACITY
    max_age: Optional[int] = None
    buffer: Deque[CaptureEntry] = field(default_factory=deque)

    def capture(self, tx: Transmission, rx_power: float,
                power_threshold: float = 1.5, force: bool = False) -> bool:
        """Keep in-cluster traffic (and this cluster's station-bound
        aggregate); drop foreign traffic unless its implied transmit power
        breaks the range rule, in which case the anomaly itself is kept.
        ``force`` records traffic the monitor deliberately shadows while
        clusters are still re-forming (setup phase)."""
        if not self.active:
            return False
        if force or self._belongs_to_cluster(tx) or rx_power > power_threshold:
            self._append(CaptureEntry(tx=tx, rx_power=rx_power, tick=tx.tick))
            return True
        return False

    def _belongs_to_cluster(self, tx: Transmission) -> bool:
        if self.cluster is None:
            return False
        msg = tx.message
        ch = self.cluster.ch
        in_cluster = set(self.cluster.members) | {ch}
        if isinstance(msg, (Data, JoinReq)):
            return msg.ch == ch or msg.src in in_cluster
        if isinstance(msg, (Aggregate, Sched)):
            return msg.ch == ch
        if isinstance(msg, Adv):
            return msg.ch == ch
        if isinstance(msg, AlarmLocal):
            return msg.src in in_cluster
        return tx.sender in in_cluster

    def _append(self, entry: CaptureEntry) -> None:
        self.evict(entry.tick)
        if len(self.buffer) >= self.capacity:
            self.buffer.popleft()
        self.buffer.append(entry)

    def evict(self, now_tick: int) -> None:
        """Drop entries older than the retention window."""
        if self.max_age is None:
            return
        while self.buffer and now_tick - self.buffer[0].tick > self.max_age:
            self.buffer.popleft()

    def drain(self) -> List[CaptureEntry]:
        out = list(self.buffer)
        self.buffer.clear()
        return out
