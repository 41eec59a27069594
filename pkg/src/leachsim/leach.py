"""Cluster-head election, cluster formation, TDMA scheduling, aggregation.

Election follows the rotating-threshold rule: a node draws uniformly in
[0, 1) and becomes head when the draw falls below

    t = P / (1 - P * (r mod floor(1/P)))     while eligible, else 0.

A node elected head leaves the eligibility pool and re-enters floor(1/P)
rounds later, which makes every alive node head exactly once per aligned
floor(1/P)-round window (the threshold reaches 1 at the window's end and
sweeps up the stragglers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set

from .core import NodeState, Position, Topology, distance
from .rng import Rng


def ch_threshold(p_ch: float, rnd: int, in_g: bool) -> float:
    """Probability threshold for self-electing as cluster head this round."""
    if not (0.0 < p_ch <= 1.0):
        raise ValueError(f"election probability must lie in (0, 1]; got {p_ch}")
    if rnd < 0:
        raise ValueError("round must be non-negative")
    if not in_g:
        return 0.0
    period = math.floor(1.0 / p_ch)
    t = p_ch / (1.0 - p_ch * (rnd % period))
    # Guard float drift at the forced end of the window.
    return min(max(t, 0.0), 1.0)


@dataclass
class ElectionState:
    """Eligibility bookkeeping for the rotating election."""

    p_ch: float

    @property
    def period(self) -> int:
        return math.floor(1.0 / self.p_ch)

    def eligible(self, node: NodeState, rnd: int) -> bool:
        return node.alive and not node.blacklisted and node.in_g(rnd)


def elect_cluster_heads(nodes: List[NodeState], state: ElectionState,
                        rnd: int, rng: Rng,
                        force_ch: Iterable[int] = (),
                        force_member: Iterable[int] = ()) -> Set[int]:
    """One election sweep; draws consumed in node-id order.

    Every alive, non-blacklisted node consumes exactly one draw so the stream
    stays aligned whatever the eligibility pool looks like.  ``force_ch`` and
    ``force_member`` override outcomes for compromised or pinned nodes after
    their draw is consumed.
    """
    force_ch = set(force_ch)
    force_member = set(force_member)
    heads: Set[int] = set()
    for node in sorted(nodes, key=lambda n: n.id):
        if not node.alive or node.blacklisted:
            continue
        draw = rng.random()
        if node.id in force_ch:
            elected = True
        elif node.id in force_member:
            elected = False
        else:
            t = ch_threshold(state.p_ch, rnd, state.eligible(node, rnd))
            elected = draw < t
        if elected:
            heads.add(node.id)
            node.g_reentry_round = rnd + state.period
    return heads


@dataclass
class ClusterView:
    """One formed cluster: head, ordered members, and their TDMA offsets."""

    ch: int
    members: List[int] = field(default_factory=list)
    slots: Dict[int, int] = field(default_factory=dict)

    def assign_slots(self) -> None:
        self.slots = {m: i for i, m in enumerate(self.members)}

    @property
    def size(self) -> int:
        return len(self.members) + 1


@dataclass
class FormationResult:
    clusters: List[ClusterView]
    orphans: List[int]
    by_member: Dict[int, ClusterView]
    by_ch: Dict[int, ClusterView]


def form_clusters(topo: Topology, heads: Set[int],
                  adv_power: Optional[Dict[int, float]] = None,
                  radio_range: float = 60.0) -> FormationResult:
    """Attach every non-head node to the strongest audible advertisement.

    Signal strength follows the free-space model: tx_power / d^2.  Ties break
    toward the lower head id.  Blacklisted heads never advertise here (the
    caller filters), and nodes with no audible head sit the round out.
    """
    adv_power = adv_power or {}
    clusters = {h: ClusterView(ch=h) for h in sorted(heads)}
    orphans: List[int] = []
    by_member: Dict[int, ClusterView] = {}
    for node in sorted(topo.nodes, key=lambda n: n.id):
        if not node.alive or node.id in heads:
            continue
        if node.blacklisted:
            # Condemned nodes' join requests are ignored network-wide.
            orphans.append(node.id)
            continue
        best = None  # (neg strength, ch id)
        for h in sorted(heads):
            hn = topo.node(h)
            power = adv_power.get(h, 1.0)
            d = distance(node.pos, hn.pos)
            if d > radio_range * math.sqrt(power) + 1e-12:
                continue
            strength = power / (d * d) if d > 0 else math.inf
            key = (-strength, h)
            if best is None or key < best[0]:
                best = (key, h)
        if best is None:
            orphans.append(node.id)
            continue
        cluster = clusters[best[1]]
        cluster.members.append(node.id)
        by_member[node.id] = cluster
    out = [clusters[h] for h in sorted(clusters)]
    for c in out:
        c.members.sort()
        c.assign_slots()
    return FormationResult(clusters=out, orphans=orphans, by_member=by_member,
                           by_ch={c.ch: c for c in out})


def aggregate(values: List[float]) -> Optional[float]:
    """Arithmetic mean of the cycle's payloads; None when nothing arrived
    (no aggregate is transmitted then)."""
    if not values:
        return None
    return sum(values) / len(values)
