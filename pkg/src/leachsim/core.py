"""World model: topology, time, messages, radio propagation, collisions.

The radio is a binary disk: a transmission at power multiplier ``p`` over the
nominal short-range power covers every alive node within ``range * sqrt(p)``
meters (received power falls off as 1/d^2, so a p-times stronger transmitter
is decodable at sqrt(p) times the distance).  Long-range transmissions always
reach the base station.  Traffic inside a formed cluster is additionally
cluster-coherent: the cluster head and the cluster's monitors share one
channel view of member transmissions regardless of pairwise distance, since
members transmit with enough power to span the cell.

Two transmissions in the same tick whose coverage sets intersect collide at
every common receiver; collided payloads are not delivered there.  Benign
protocol traffic is serialized into distinct ticks, so collisions only arise
from attacker behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .rng import Rng

# Sensor nodes carry dense ids 0..N-1; the base station uses a sentinel
# outside that range.
BS_ID = -1


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


class Phase(Enum):
    SETUP = "setup"
    WATCHDOG_SELECT = "watchdog-select"
    STEADY = "steady"
    BLACKLIST_BROADCAST = "blacklist-broadcast"


PHASE_ORDER = (
    Phase.SETUP,
    Phase.WATCHDOG_SELECT,
    Phase.STEADY,
    Phase.BLACKLIST_BROADCAST,
)


@dataclass
class Clock:
    """Round counter, phase within the round, and tick within the round.

    Ticks increase strictly within a round and reset to 0 when the round
    advances; phases follow PHASE_ORDER exactly once per round.
    """

    round: int = 0
    phase: Phase = Phase.SETUP
    tick: int = 0

    def advance_tick(self) -> int:
        t = self.tick
        self.tick += 1
        return t

    def enter(self, phase: Phase) -> None:
        if PHASE_ORDER.index(phase) < PHASE_ORDER.index(self.phase):
            raise InvariantError(
                f"phase {phase.value} after {self.phase.value} in round {self.round}"
            )
        self.phase = phase

    def next_round(self) -> None:
        self.round += 1
        self.tick = 0
        self.phase = Phase.SETUP


class InvariantError(RuntimeError):
    """A simulator internal invariant was violated (distinct CLI exit code)."""


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------


class SizeClass(Enum):
    SIGNAL = "signal"   # 64-bit control packets
    DATA = "data"       # 2000-bit payload packets


class PowerClass(Enum):
    LOCAL = "local"          # in-cluster, d <= radio range at multiplier 1
    LONG_RANGE = "long"      # reaches the base station


@dataclass(frozen=True)
class Adv:
    ch: int


@dataclass(frozen=True)
class JoinReq:
    src: int
    ch: int


@dataclass(frozen=True)
class Sched:
    ch: int
    slots: tuple  # ((member_id, slot_offset), ...)


@dataclass(frozen=True)
class Data:
    src: int
    ch: int
    value: float
    seq: int


@dataclass(frozen=True)
class Aggregate:
    ch: int
    value: float
    cycle: int


@dataclass(frozen=True)
class Alert:
    watchdog: int
    suspect: int
    attack_id: str   # RuleId value
    time: int
    sum: int


@dataclass(frozen=True)
class Blacklist:
    ids: tuple


@dataclass(frozen=True)
class AlarmLocal:
    src: int


Message = Union[Adv, JoinReq, Sched, Data, Aggregate, Alert, Blacklist, AlarmLocal]

# The schedule carries the full slot table and is billed as a data packet,
# like sensor payloads; bare control packets are signal-sized.
_SIGNAL_KINDS = (Adv, JoinReq, AlarmLocal)
_DATA_KINDS = (Sched, Data, Aggregate, Alert, Blacklist)


def size_class_of(message: Message) -> SizeClass:
    if isinstance(message, _SIGNAL_KINDS):
        return SizeClass.SIGNAL
    if isinstance(message, _DATA_KINDS):
        return SizeClass.DATA
    raise TypeError(f"unknown message kind: {type(message).__name__}")


def message_kind(message: Message) -> str:
    return type(message).__name__.lower()


@dataclass(frozen=True)
class Transmission:
    """One radio emission: sender, payload, power, timing and size class."""

    sender: int
    message: Message
    power_class: PowerClass
    tick: int
    size_class: SizeClass
    tx_power: float = 1.0     # multiplier over nominal short-range power
    scheduled: bool = True    # False for TDMA-violating emissions

    @staticmethod
    def make(sender: int, message: Message, power_class: PowerClass, tick: int,
             tx_power: float = 1.0, scheduled: bool = True) -> "Transmission":
        return Transmission(
            sender=sender,
            message=message,
            power_class=power_class,
            tick=tick,
            size_class=size_class_of(message),
            tx_power=tx_power,
            scheduled=scheduled,
        )


# ---------------------------------------------------------------------------
# Nodes and deployment
# ---------------------------------------------------------------------------


@dataclass
class NodeState:
    """Identity, position, liveness, energy ledger and behavior of one sensor."""

    id: int
    pos: Position
    alive: bool = True
    base_value: float = 0.0          # baseline of the synthetic sensed signal
    g_reentry_round: int = 0         # eligible for election when round >= this
    blacklisted: bool = False        # per the announced (broadcast) blacklist
    profile: Optional[object] = None  # attacks.AttackProfile when compromised

    def in_g(self, rnd: int) -> bool:
        return rnd >= self.g_reentry_round


@dataclass
class Topology:
    nodes: list
    bs_pos: Position
    area: tuple  # (width, height)

    def __post_init__(self):
        self._xs = np.array([n.pos.x for n in self.nodes])
        self._ys = np.array([n.pos.y for n in self.nodes])

    def alive_ids(self) -> list:
        return [n.id for n in self.nodes if n.alive]

    def node(self, node_id: int) -> NodeState:
        return self.nodes[node_id]

    def ids_within(self, origin: Position, radius: float,
                   exclude: int = BS_ID) -> list:
        """Alive node ids within radius of origin, ascending id order."""
        d2 = (self._xs - origin.x) ** 2 + (self._ys - origin.y) ** 2
        hit = d2 <= radius * radius + 1e-12
        out = []
        for i in np.nonzero(hit)[0]:
            n = self.nodes[int(i)]
            if n.alive and n.id != exclude:
                out.append(n.id)
        return out


def deploy(config, rng: Rng) -> Topology:
    """Place nodes uniformly over the area with full energy, all eligible.

    Draw order per node id: x, y, sensed-signal baseline.  Rejects empty
    deployments and degenerate areas.
    """
    width, height = config.area
    if config.nodes < 1:
        raise ValueError("deployment requires at least one node")
    if width <= 0 or height <= 0:
        raise ValueError("deployment area must have positive dimensions")
    nodes = []
    for i in range(config.nodes):
        x = rng.uniform(0.0, width)
        y = rng.uniform(0.0, height)
        base = rng.uniform(20.0, 30.0)
        nodes.append(NodeState(id=i, pos=Position(x, y), base_value=base))
    bs = resolve_bs_position(config)
    return Topology(nodes=nodes, bs_pos=bs, area=(width, height))


def resolve_bs_position(config) -> Position:
    """Fixed base-station position, or a placement whose mean node distance
    over the uniform deployment distribution is 100 m."""
    if config.bs_position == "auto-100m-mean":
        return _bs_for_mean_distance(config.area[0], config.area[1], 100.0)
    x, y = config.bs_position
    return Position(float(x), float(y))


def _mean_distance_to(width: float, height: float, p: Position, grid: int = 48) -> float:
    # Midpoint quadrature of E[dist] over the uniform rectangle.
    xs = (np.arange(grid) + 0.5) * (width / grid)
    ys = (np.arange(grid) + 0.5) * (height / grid)
    gx, gy = np.meshgrid(xs, ys)
    return float(np.mean(np.hypot(gx - p.x, gy - p.y)))


def _bs_for_mean_distance(width: float, height: float, target: float) -> Position:
    """Slide the station along the vertical centerline until the mean distance
    from a uniform point matches the target (bisection; mean is monotone in
    the offset from the centroid)."""
    cx = width / 2.0
    lo, hi = height / 2.0, height / 2.0 + 2.0 * (height + target)
    if _mean_distance_to(width, height, Position(cx, lo)) >= target:
        return Position(cx, lo)
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if _mean_distance_to(width, height, Position(cx, mid)) < target:
            lo = mid
        else:
            hi = mid
    return Position(cx, (lo + hi) / 2.0)


# ---------------------------------------------------------------------------
# Propagation and collisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollisionEvent:
    receiver: int
    tick: int
    senders: tuple  # all senders covering the receiver in that tick


@dataclass
class TickOutcome:
    """Uncollided coverage per transmission, plus collision events."""

    delivered: dict          # Transmission -> set of receiver ids (BS_ID incl.)
    collisions: list         # [CollisionEvent]


def coverage(tx: Transmission, topo: Topology, radio_range: float,
             extra: Iterable[int] = ()) -> set:
    """Physical receiver set of one transmission.

    Local power covers the disk of radius range*sqrt(tx_power); long-range
    power always covers the base station and is otherwise overheard in the
    same disk.  ``extra`` injects cluster-coherent receivers (cluster head
    and monitors of the sender's cluster).
    """
    sender_node = topo.node(tx.sender)
    if not sender_node.alive:
        raise InvariantError(f"dead node {tx.sender} attempted to transmit")
    radius = radio_range * math.sqrt(max(tx.tx_power, 0.0))
    covered = set(topo.ids_within(sender_node.pos, radius, exclude=tx.sender))
    covered.update(i for i in extra if i != tx.sender and
                   (i == BS_ID or topo.node(i).alive))
    if tx.power_class is PowerClass.LONG_RANGE:
        covered.add(BS_ID)
    return covered


def resolve_tick(txs: Sequence[Transmission], coverages: Sequence[set]) -> TickOutcome:
    """Deliveries and collisions for the transmissions sharing one tick.

    A receiver covered by k>=2 transmissions records k-1 collision events and
    receives none of them.
    """
    if len(txs) != len(coverages):
        raise ValueError("one coverage set per transmission required")
    hits: dict = {}
    for tx, cov in zip(txs, coverages):
        for r in cov:
            hits.setdefault(r, []).append(tx)
    delivered = {tx: set() for tx in txs}
    collisions = []
    for receiver in sorted(hits, key=lambda r: (r == BS_ID, r)):
        senders = hits[receiver]
        if len(senders) == 1:
            delivered[senders[0]].add(receiver)
        else:
            ids = tuple(sorted(t.sender for t in senders))
            tick = senders[0].tick
            for _ in range(len(senders) - 1):
                collisions.append(CollisionEvent(receiver=receiver, tick=tick,
                                                 senders=ids))
    return TickOutcome(delivered=delivered, collisions=collisions)


def broadcast(tx: Transmission, topo: Topology, radio_range: float,
              extra: Iterable[int] = (),
              concurrent: Sequence[Transmission] = (),
              concurrent_extra: Sequence[Iterable[int]] = ()) -> TickOutcome:
    """Resolve one transmission, optionally against concurrent same-tick ones."""
    txs = [tx, *concurrent]
    covs = [coverage(tx, topo, radio_range, extra)]
    for other, oextra in zip(concurrent, list(concurrent_extra) or
                             [()] * len(concurrent)):
        covs.append(coverage(other, topo, radio_range, oextra))
    return resolve_tick(txs, covs)
