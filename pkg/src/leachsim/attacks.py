"""Attack scenario injection and machine-readable ground truth.

A scenario installs a behavior profile on the attacker nodes; from its start
round on, the profile overrides the honest protocol behavior (dropping,
delaying, repeating, over-powering, flooding extra traffic, tampering with
aggregates, raising tamper alarms, or fabricating reports).  Head-role
attacks rig the attacker's election so the misbehavior can express
immediately; scenarios can also pin a few honest monitors near the attacker
so the attacked cluster is never blind.  Ground truth maps every scenario to
the rule expected to catch it, which the metrics layer uses to classify each
alert as a true or false positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .core import BS_ID, Topology, distance
from .detection import RuleId


class AttackKind(Enum):
    HELLO_FLOOD = "hello-flood"
    MESSAGE_DELAY = "message-delay"
    MESSAGE_REPETITION = "message-repetition"
    JAMMING = "jamming"
    BLACK_HOLE = "black-hole"
    SELECTIVE_FORWARDING = "selective-forwarding"
    NEGLIGENCE = "negligence"
    EXHAUSTION = "exhaustion"
    INTEGRITY_TAMPER = "integrity-tamper"
    PHYSICAL_TAMPER = "physical-tamper"
    LYING_WATCHDOG = "lying-watchdog"


# Kinds whose misbehavior only expresses while holding the head role.
CH_ROLE_KINDS = frozenset({
    AttackKind.HELLO_FLOOD,
    AttackKind.BLACK_HOLE,
    AttackKind.SELECTIVE_FORWARDING,
    AttackKind.MESSAGE_DELAY,
    AttackKind.INTEGRITY_TAMPER,
})

# Kinds that must stay ordinary members (the role the attack abuses).
MEMBER_ROLE_KINDS = frozenset(AttackKind) - CH_ROLE_KINDS

_RULE_MAP: Dict[AttackKind, Tuple[RuleId, ...]] = {
    AttackKind.HELLO_FLOOD: (RuleId.RADIO_RANGE,),
    AttackKind.MESSAGE_DELAY: (RuleId.INTERVAL, RuleId.DELAY),
    AttackKind.MESSAGE_REPETITION: (RuleId.REPETITION,),
    AttackKind.JAMMING: (RuleId.JAMMING,),
    AttackKind.BLACK_HOLE: (RuleId.DELAY, RuleId.RETRANSMISSION),
    AttackKind.SELECTIVE_FORWARDING: (RuleId.DELAY, RuleId.RETRANSMISSION),
    AttackKind.NEGLIGENCE: (RuleId.INTERVAL,),
    AttackKind.EXHAUSTION: (RuleId.INTERVAL,),
    AttackKind.INTEGRITY_TAMPER: (RuleId.INTEGRITY,),
    AttackKind.PHYSICAL_TAMPER: (RuleId.ALARM,),
    AttackKind.LYING_WATCHDOG: (RuleId.INTRUDER_WATCHDOG,),
}

# Defaults chosen to leave a decisive margin over every detection threshold.
DEFAULT_PARAMS: Dict[AttackKind, Dict[str, float]] = {
    AttackKind.HELLO_FLOOD: {"power_multiplier": 4.0},
    AttackKind.MESSAGE_DELAY: {"delay_ticks": 6},
    AttackKind.MESSAGE_REPETITION: {"repeat_count": 4},
    AttackKind.JAMMING: {"jam_probability": 0.3},
    AttackKind.BLACK_HOLE: {"drop_probability": 1.0},
    AttackKind.SELECTIVE_FORWARDING: {"drop_probability": 0.5},
    AttackKind.NEGLIGENCE: {},
    AttackKind.EXHAUSTION: {"rate_multiplier": 3},
    AttackKind.INTEGRITY_TAMPER: {"payload_offset": 10.0},
    AttackKind.PHYSICAL_TAMPER: {},
    AttackKind.LYING_WATCHDOG: {},
}

_PARAM_RANGES: Dict[str, Tuple[float, float]] = {
    "power_multiplier": (1.0, 64.0),
    "delay_ticks": (1, 1000),
    "repeat_count": (2, 1000),
    "jam_probability": (0.0, 1.0),
    "drop_probability": (0.0, 1.0),
    "rate_multiplier": (2, 8),
    "payload_offset": (-1e9, 1e9),
}


@dataclass
class AttackScenario:
    """One injected misbehavior campaign."""

    kind: AttackKind
    attackers: Tuple[int, ...] = ()
    count: int = 1                       # drawn from topology when attackers empty
    start_round: int = 1
    params: Dict[str, float] = field(default_factory=dict)
    ensure_watchdogs: int = 1            # honest monitors pinned near the attacker
    pinned_watchdogs: Tuple[int, ...] = ()  # resolved at injection

    def __post_init__(self):
        merged = dict(DEFAULT_PARAMS[self.kind])
        merged.update(self.params)
        self.params = merged
        if self.kind is AttackKind.LYING_WATCHDOG and self.ensure_watchdogs < 2:
            self.ensure_watchdogs = 2

    def validate(self, n_nodes: Optional[int] = None) -> None:
        if self.start_round < 1:
            raise ValueError("start_round must be >= 1 (setup checks skip the first round)")
        if self.count < 1 and not self.attackers:
            raise ValueError("scenario needs at least one attacker")
        if self.ensure_watchdogs < 0:
            raise ValueError("ensure_watchdogs must be non-negative")
        for key, value in self.params.items():
            if key not in _PARAM_RANGES:
                raise ValueError(f"unknown attack parameter {key!r} for {self.kind.value}")
            lo, hi = _PARAM_RANGES[key]
            if not (lo <= value <= hi):
                raise ValueError(f"attack parameter {key}={value} outside [{lo}, {hi}]")
        for a in self.attackers:
            if a == BS_ID:
                raise ValueError("the base station cannot be an attacker")
            if a < 0 or (n_nodes is not None and a >= n_nodes):
                raise ValueError(f"attacker id {a} not in topology")


@dataclass
class AttackProfile:
    """Behavior override attached to one compromised node."""

    kind: AttackKind
    start_round: int
    params: Dict[str, float]
    scenario: AttackScenario

    def active(self, rnd: int) -> bool:
        return rnd >= self.start_round


def inject(scenario: AttackScenario, topo: Topology, rng) -> List[int]:
    """Install the scenario's profiles on its attacker nodes.

    Attackers not named explicitly are drawn uniformly from the alive
    population.  Returns the attacker ids.  Also resolves the scenario's
    pinned monitors: the nearest honest neighbors of the first attacker,
    fixed for the whole run so their evidence accumulates round over round.
    """
    scenario.validate(n_nodes=len(topo.nodes))
    attackers = list(scenario.attackers)
    if not attackers:
        pool = [n.id for n in topo.nodes if n.alive and n.profile is None]
        if len(pool) < scenario.count:
            raise ValueError("not enough uncompromised nodes for the scenario")
        for _ in range(scenario.count):
            pick = pool.pop(rng.randrange(len(pool)))
            attackers.append(pick)
        attackers.sort()
    for a in attackers:
        node = topo.node(a)
        if not node.alive:
            raise ValueError(f"attacker {a} is not alive at injection time")
        node.profile = AttackProfile(kind=scenario.kind,
                                     start_round=scenario.start_round,
                                     params=dict(scenario.params),
                                     scenario=scenario)
    scenario.attackers = tuple(attackers)
    scenario.pinned_watchdogs = pinned_monitors(scenario, topo)
    return attackers


def pinned_monitors(scenario: AttackScenario, topo: Topology) -> Tuple[int, ...]:
    """The ensure_watchdogs honest nodes nearest the first attacker."""
    if scenario.ensure_watchdogs <= 0 or not scenario.attackers:
        return ()
    anchor = topo.node(scenario.attackers[0])
    honest = [n for n in topo.nodes
              if n.alive and n.profile is None and n.id != anchor.id]
    honest.sort(key=lambda n: (distance(n.pos, anchor.pos), n.id))
    return tuple(n.id for n in honest[:scenario.ensure_watchdogs])


def ground_truth(scenario: AttackScenario) -> Set[Tuple[int, RuleId]]:
    """Expected (suspect, rule) pairs for classifying alerts."""
    scenario.validate()
    pairs: Set[Tuple[int, RuleId]] = set()
    for attacker in scenario.attackers:
        for rule in _RULE_MAP[scenario.kind]:
            pairs.add((attacker, rule))
    return pairs


def rules_for(kind: AttackKind) -> Tuple[RuleId, ...]:
    return _RULE_MAP[kind]
