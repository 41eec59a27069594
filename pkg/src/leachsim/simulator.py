"""Round orchestration: setup, monitor selection, steady cycles, broadcast.

One round runs the four phases in order.  All benign traffic is serialized
into distinct ticks (advertisements, joins and schedules by node id; steady
slots in per-cluster blocks with a guard band), so collisions only arise
from attacker emissions that violate the schedule.  In-cluster steady
traffic is cluster-coherent: the head and the cluster's monitors share one
channel view, since members transmit at cell power.  Scheduled listeners
(the head during member slots, monitors during every slot of their cluster)
keep the radio in receive state for the whole slot and pay the data-reception
cost whether or not a decodable packet arrives; every charge is written to
the event log, which therefore replays the ledgers exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from .attacks import (AttackKind, AttackProfile, AttackScenario,
                      CH_ROLE_KINDS, ground_truth, inject)
from .config import SimConfig
from .core import (Adv, Aggregate, AlarmLocal, Alert, BS_ID, Clock, Data,
                   InvariantError, JoinReq, Phase, PowerClass, Sched,
                   SizeClass, Topology, Transmission, coverage, deploy,
                   distance, resolve_tick)
from .detection import (BlacklistState, CycleContext, MonitorStore, RuleConfig,
                        RuleId, bs_update_blacklist, cross_check,
                        evaluate_cycle, evaluate_setup, repetition_failures)
from .energy import EnergyLedger, RadioCostModel, charge
from .leach import (ClusterView, ElectionState, FormationResult, aggregate,
                    elect_cluster_heads, form_clusters)
from .rng import Rng
from .watchdog import WatchdogState, roll_watchdog

GUARD_TICKS = 8  # idle ticks after each cluster's block; room for delayed traffic


METRICS_COLUMNS = [
    "round", "alive_nodes", "cluster_heads", "orphaned_nodes", "watchdogs",
    "zero_watchdog_clusters", "collisions", "alerts", "true_positives",
    "false_positives", "blacklist_size", "energy_ch_mean_j",
    "energy_watchdog_mean_j", "energy_sensor_mean_j", "energy_total_j",
]


@dataclass
class RoundMetrics:
    round: int
    alive_nodes: int
    cluster_heads: int
    orphaned_nodes: int
    watchdogs: int
    zero_watchdog_clusters: int
    collisions: int
    alerts: int
    true_positives: int
    false_positives: int
    blacklist_size: int
    energy_ch_mean_j: float
    energy_watchdog_mean_j: float
    energy_sensor_mean_j: float
    energy_total_j: float

    def row(self) -> List[str]:
        return [
            str(self.round), str(self.alive_nodes), str(self.cluster_heads),
            str(self.orphaned_nodes), str(self.watchdogs),
            str(self.zero_watchdog_clusters), str(self.collisions),
            str(self.alerts), str(self.true_positives),
            str(self.false_positives), str(self.blacklist_size),
            f"{self.energy_ch_mean_j:.9f}", f"{self.energy_watchdog_mean_j:.9f}",
            f"{self.energy_sensor_mean_j:.9f}", f"{self.energy_total_j:.9f}",
        ]


@dataclass
class ScenarioOutcome:
    scenario: AttackScenario
    detected: bool = False
    first_tp_round: Optional[int] = None
    blacklisted: bool = False

    @property
    def latency_rounds(self) -> Optional[int]:
        if self.first_tp_round is None:
            return None
        return self.first_tp_round - self.scenario.start_round


@dataclass
class RunResult:
    config: SimConfig
    metrics: List[RoundMetrics]
    events: List[str]
    summary: dict
    topology: Topology
    ledgers: Dict[int, EnergyLedger]
    blacklist: Set[int]
    outcomes: List[ScenarioOutcome]
    indication_counts: Dict[Tuple[int, RuleId], int]


class Simulator:
    """One self-contained, single-threaded, seed-deterministic run."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.cfg = config
        self.rules: RuleConfig = config.rules
        self.model = RadioCostModel(mode=config.energy_mode)
        self.rng = Rng(config.seed)
        self.topo = deploy(config, self.rng)
        self.ledgers: Dict[int, EnergyLedger] = {
            n.id: EnergyLedger() for n in self.topo.nodes}
        self.clock = Clock()
        self.events: List[str] = []
        self.election = ElectionState(p_ch=config.p_ch)
        self.blacklist_state = BlacklistState(quorum=1)
        self.announced: Set[int] = set()
        self.stores: Dict[int, MonitorStore] = {}
        self.watchdogs: Dict[int, WatchdogState] = {}   # this round's monitors
        self.carryover: Dict[int, WatchdogState] = {}   # previous round's
        self.metrics: List[RoundMetrics] = []
        self.indication_counts: Dict[Tuple[int, RuleId], int] = {}
        self.outcomes: List[ScenarioOutcome] = []
        self._last_tick = -1
        for scenario in config.attacks:
            inject(scenario, self.topo, self.rng)
            self.outcomes.append(ScenarioOutcome(scenario=scenario))
        self.gt_pairs: Set[Tuple[int, RuleId]] = set()
        for scenario in config.attacks:
            self.gt_pairs |= ground_truth(scenario)

    # -- plumbing -----------------------------------------------------------

    def _log(self, text: str) -> None:
        self.events.append(f"r={self.clock.round} t={self.clock.tick} {text}")

    def _next_tick(self) -> int:
        t = self.clock.tick
        self._set_tick(t)
        self.clock.tick = t + 1
        return t

    def _set_tick(self, t: int) -> None:
        if t < self._last_tick:
            raise InvariantError(
                f"tick regression {self._last_tick} -> {t} in round "
                f"{self.clock.round}")
        self._last_tick = t
        self.clock.tick = t

    def _charge_tx(self, node_id: int, size_class: SizeClass, d: float,
                   power_class: PowerClass, kind: str) -> None:
        j = charge(self.ledgers[node_id], "tx", size_class, d, self.model,
                   power_class)
        self._log(f"ev=tx node={node_id} kind={kind} size={size_class.value} "
                  f"power={power_class.value} j={j:.9f}")
        self._maybe_die(node_id)

    def _charge_rx(self, node_id: int, size_class: SizeClass, kind: str,
                   listen: bool = False) -> None:
        if node_id == BS_ID:
            return  # the station is mains-powered for accounting purposes
        j = charge(self.ledgers[node_id], "rx", size_class, 0.0, self.model)
        ev = "listen" if listen else "rx"
        self._log(f"ev={ev} node={node_id} kind={kind} "
                  f"size={size_class.value} j={j:.9f}")
        self._maybe_die(node_id)

    def _maybe_die(self, node_id: int) -> None:
        node = self.topo.node(node_id)
        if node.alive and self.ledgers[node_id].total > self.cfg.initial_energy:
            node.alive = False
            self._log(f"ev=death node={node_id}")

    def _profile(self, node_id: int) -> Optional[AttackProfile]:
        """The node's behavior override, when active and not yet condemned."""
        p = self.topo.node(node_id).profile
        if p is not None and p.active(self.clock.round) \
                and node_id not in self.announced:
            return p
        return None

    def _compromised(self, node_id: int) -> bool:
        return self.topo.node(node_id).profile is not None

    def _watchdog_leach(self) -> bool:
        return self.cfg.protocol == "watchdog-leach"

    def _sensed_value(self, node_id: int) -> float:
        return self.topo.node(node_id).base_value + self.rng.uniform(-0.5, 0.5)

    # -- run ------------------------------------------------------------------

    def run(self) -> RunResult:
        for rnd in range(self.cfg.rounds):
            if rnd > 0:
                self.clock.next_round()
                self._last_tick = -1
            self._run_round()
        return RunResult(config=self.cfg, metrics=self.metrics,
                         events=self.events, summary=self._summary(),
                         topology=self.topo, ledgers=self.ledgers,
                         blacklist=set(self.blacklist_state.ids),
                         outcomes=self.outcomes,
                         indication_counts=dict(self.indication_counts))

    # -- one round --------------------------------------------------------------

    def _run_round(self) -> None:
        rnd = self.clock.round
        start_energy = {n.id: self.ledgers[n.id].total for n in self.topo.nodes}
        for store in self.stores.values():
            store.observed_suspects.clear()
        round_alerts: List[Tuple[Alert, Optional[int]]] = []
        collisions = 0

        # ---- setup ----
        self.clock.enter(Phase.SETUP)
        force_ch, force_member = self._role_forcing(rnd)
        heads = elect_cluster_heads(self.topo.nodes, self.election, rnd,
                                    self.rng, force_ch=force_ch,
                                    force_member=force_member)
        for h in sorted(heads):
            self._log(f"ev=ch node={h}")
        adv_power = self._adv_power(heads)

        formation = FormationResult(clusters=[], orphans=[], by_member={},
                                    by_ch={})
        if heads:
            self._setup_advertisements(heads, adv_power)
            formation = form_clusters(self.topo, heads, adv_power,
                                      self.cfg.radio_range)
            self._setup_joins_and_scheds(formation)
        else:
            self._log("ev=degenerate-round reason=no-cluster-heads")

        if self._watchdog_leach() and rnd >= 1:
            round_alerts.extend(self._setup_detection())
        self.carryover = {}

        # ---- monitor selection ----
        self.clock.enter(Phase.WATCHDOG_SELECT)
        zero_wd_clusters = 0
        self.watchdogs = {}
        if self._watchdog_leach() and formation.clusters:
            zero_wd_clusters = self._select_watchdogs(formation, rnd)

        # ---- steady cycles ----
        self.clock.enter(Phase.STEADY)
        round_failures: Dict[int, Dict[Tuple[int, RuleId], int]] = {
            w: {} for w in self.watchdogs}
        seq_history: Dict[int, Dict[Tuple[int, int], int]] = {
            w: {} for w in self.watchdogs}
        if formation.clusters and self.cfg.steady_cycles > 0:
            collisions += self._steady_phase(formation, round_failures,
                                             seq_history)

        if self._watchdog_leach():
            round_alerts.extend(
                self._round_detection(formation, round_failures, seq_history))

        # ---- blacklist broadcast ----
        self.clock.enter(Phase.BLACKLIST_BROADCAST)
        newly = bs_update_blacklist([a for a, _ in round_alerts],
                                    self.blacklist_state)
        self._broadcast_blacklist(newly)

        tp, fp = self._classify_alerts([a for a, _ in round_alerts], rnd)
        self._collect_metrics(rnd, heads, formation, zero_wd_clusters,
                              collisions, len(round_alerts), tp, fp,
                              start_energy)
        self.carryover = dict(self.watchdogs)

    # -- setup helpers ------------------------------------------------------------

    def _role_forcing(self, rnd: int) -> Tuple[Set[int], Set[int]]:
        """Election overrides: head-role attackers seize the role once their
        campaign starts; member-role attackers and pinned monitors decline it."""
        force_ch: Set[int] = set()
        force_member: Set[int] = set()
        for scenario in self.cfg.attacks:
            for a in scenario.attackers:
                node = self.topo.node(a)
                if not node.alive or a in self.announced:
                    continue
                if rnd >= scenario.start_round \
                        and scenario.kind in CH_ROLE_KINDS:
                    force_ch.add(a)
                else:
                    force_member.add(a)
            for pid in scenario.pinned_watchdogs:
                if self.topo.node(pid).alive:
                    force_member.add(pid)
        return force_ch, force_member - force_ch

    def _adv_power(self, heads: Set[int]) -> Dict[int, float]:
        powers = {}
        for h in heads:
            profile = self._profile(h)
            if profile is not None and profile.kind is AttackKind.HELLO_FLOOD:
                powers[h] = float(profile.params["power_multiplier"])
        return powers

    def _setup_advertisements(self, heads: Set[int],
                              adv_power: Dict[int, float]) -> None:
        """Serialized head advertisements; every node in physical range hears
        them, and carried-over monitors keep the overpowered ones."""
        for h in sorted(heads):
            tick = self._next_tick()
            power = adv_power.get(h, 1.0)
            tx = Transmission.make(h, Adv(ch=h), PowerClass.LOCAL, tick,
                                   tx_power=power)
            cov = coverage(tx, self.topo, self.cfg.radio_range)
            self._charge_tx(h, SizeClass.SIGNAL, 0.0, PowerClass.LOCAL, "adv")
            for r in sorted(cov):
                self._charge_rx(r, SizeClass.SIGNAL, "adv")
            for wid in sorted(self.carryover):
                w = self.carryover[wid]
                if wid in cov and w.active and self.topo.node(wid).alive \
                        and not self._compromised(wid):
                    w.capture(tx, rx_power=power,
                              power_threshold=self.rules.power_threshold)
                    self._store(wid).observed_suspects.add(h)

    def _setup_joins_and_scheds(self, formation: FormationResult) -> None:
        # Joins, serialized by member id within cluster order.  The addressee
        # head pays reception; carried-over monitors shadow the formation of
        # the cluster they are joining themselves.
        shadow: Dict[int, int] = {}
        for wid in sorted(self.carryover):
            w = self.carryover[wid]
            cluster = formation.by_member.get(wid)
            if cluster is not None and w.active \
                    and self.topo.node(wid).alive \
                    and not self._compromised(wid):
                shadow[wid] = cluster.ch
        for cluster in formation.clusters:
            for m in cluster.members:
                tick = self._next_tick()
                tx = Transmission.make(m, JoinReq(src=m, ch=cluster.ch),
                                       PowerClass.LOCAL, tick)
                self._charge_tx(m, SizeClass.SIGNAL, 0.0, PowerClass.LOCAL,
                                "joinreq")
                self._charge_rx(cluster.ch, SizeClass.SIGNAL, "joinreq")
                for wid, ch in sorted(shadow.items()):
                    if ch == cluster.ch and wid != m:
                        self._charge_rx(wid, SizeClass.SIGNAL, "joinreq")
                        self.carryover[wid].capture(tx, rx_power=1.0,
                                                    force=True)
                        self._store(wid).observed_suspects.add(m)
        # Schedules, serialized by head id; data-sized (full slot table).
        for cluster in formation.clusters:
            tick = self._next_tick()
            slots = tuple((m, cluster.slots[m]) for m in cluster.members)
            tx = Transmission.make(cluster.ch,
                                   Sched(ch=cluster.ch, slots=slots),
                                   PowerClass.LOCAL, tick)
            self._charge_tx(cluster.ch, SizeClass.DATA, 0.0, PowerClass.LOCAL,
                            "sched")
            for m in cluster.members:
                self._charge_rx(m, SizeClass.DATA, "sched")
                if m in shadow and shadow[m] == cluster.ch:
                    self.carryover[m].capture(tx, rx_power=1.0, force=True)
                    self._store(m).observed_suspects.add(cluster.ch)
        for o in formation.orphans:
            self._log(f"ev=orphan node={o}")

    def _store(self, node_id: int) -> MonitorStore:
        store = self.stores.get(node_id)
        if store is None:
            store = MonitorStore(node_id=node_id)
            self.stores[node_id] = store
        return store

    def _setup_detection(self) -> List[Tuple[Alert, Optional[int]]]:
        """Carried-over monitors judge the setup traffic they shadowed."""
        emitted: List[Tuple[Alert, Optional[int]]] = []
        by_old_cluster: Dict[int, List[Alert]] = {}
        for wid in sorted(self.carryover):
            w = self.carryover[wid]
            if not w.active or not self.topo.node(wid).alive \
                    or self._compromised(wid):
                continue
            entries = w.drain()
            if not entries:
                continue
            failures = evaluate_setup(entries, self.rules, self.announced)
            alerts, indications = self._store(wid).run_detection(
                failures, self.rules, now=self.clock.tick,
                blacklist=self.announced)
            self._note_indications(wid, indications)
            for alert in alerts:
                self._emit_alert(wid, alert)
                old_ch = w.cluster.ch if w.cluster else None
                emitted.append((alert, old_ch))
                if old_ch is not None:
                    by_old_cluster.setdefault(old_ch, []).append(alert)
        for ch in sorted(by_old_cluster):
            emitted.extend(self._cross_checks(by_old_cluster[ch], ch,
                                              self.carryover))
        return emitted

    def _note_indications(self, wid: int,
                          indications: List[Tuple[int, RuleId]]) -> None:
        for key in indications:
            self.indication_counts[key] = self.indication_counts.get(key, 0) + 1
            self._log(f"ev=indication node={wid} suspect={key[0]} "
                      f"rule={key[1].value}")

    # -- monitor selection -----------------------------------------------------

    def _select_watchdogs(self, formation: FormationResult, rnd: int) -> int:
        """Dice self-selection in member-id order, plus scenario pins."""
        cycle_span = self._cycle_span(formation)
        if self.cfg.nwnc_target is not None:
            for cluster in formation.clusters:
                for m in cluster.members[:self.cfg.nwnc_target]:
                    if not self._compromised(m):
                        self._activate_watchdog(m, cluster, cycle_span)
        else:
            for cluster in formation.clusters:
                sides = (cluster.size if self.cfg.dice_m == "cluster-size"
                         else int(self.cfg.dice_m))
                for m in cluster.members:
                    rolled = roll_watchdog(self.rng, max(sides, 1))
                    # Compromised nodes rig their die and stay plain members
                    # (the lying monitor instead rigs itself in, below).
                    if rolled and not self._compromised(m):
                        self._activate_watchdog(m, cluster, cycle_span)
        for scenario in self.cfg.attacks:
            if rnd < scenario.start_round - 1:
                continue
            for pid in scenario.pinned_watchdogs:
                cluster = formation.by_member.get(pid)
                if (cluster is not None and self.topo.node(pid).alive
                        and pid not in self.announced
                        and not self._compromised(pid)):
                    self._activate_watchdog(pid, cluster, cycle_span)
            if scenario.kind is AttackKind.LYING_WATCHDOG \
                    and rnd >= scenario.start_round:
                for a in scenario.attackers:
                    cluster = formation.by_member.get(a)
                    if cluster is not None and a not in self.announced \
                            and self.topo.node(a).alive:
                        self._activate_watchdog(a, cluster, cycle_span)
        zero = 0
        with_wd = {w.cluster.ch for w in self.watchdogs.values()}
        for cluster in formation.clusters:
            if cluster.ch not in with_wd:
                zero += 1
                self._log(f"ev=zero-watchdog-cluster ch={cluster.ch}")
        return zero

    def _activate_watchdog(self, node_id: int, cluster: ClusterView,
                           cycle_span: int) -> None:
        if node_id in self.watchdogs:
            return
        self.watchdogs[node_id] = WatchdogState(
            node_id=node_id, cluster=cluster, active=True, max_age=cycle_span)
        self._store(node_id)
        self._log(f"ev=watchdog node={node_id} cluster={cluster.ch}")

    # -- steady phase --------------------------------------------------------------

    def _cycle_span(self, formation: FormationResult) -> int:
        return sum(len(c.members) + 1 + GUARD_TICKS for c in formation.clusters)

    def _steady_phase(self, formation: FormationResult,
                      round_failures: Dict[int, Dict[Tuple[int, RuleId], int]],
                      seq_history: Dict[int, Dict[Tuple[int, int], int]]) -> int:
        collisions_total = 0
        cycle_span = self._cycle_span(formation)
        steady_base = self.clock.tick
        wd_by_cluster: Dict[int, List[int]] = {}
        for wid, w in self.watchdogs.items():
            wd_by_cluster.setdefault(w.cluster.ch, []).append(wid)
        for lst in wd_by_cluster.values():
            lst.sort()
        for cycle in range(self.cfg.steady_cycles):
            offset = 0
            for cluster in formation.clusters:
                block_base = steady_base + cycle * cycle_span + offset
                offset += len(cluster.members) + 1 + GUARD_TICKS
                collisions_total += self._run_cluster_cycle(
                    cluster, cycle, block_base,
                    wd_by_cluster.get(cluster.ch, []),
                    round_failures, seq_history)
        self._set_tick(steady_base + self.cfg.steady_cycles * cycle_span)
        return collisions_total

    def _run_cluster_cycle(self, cluster: ClusterView, cycle: int,
                           block_base: int, wd_ids: List[int],
                           round_failures, seq_history) -> int:
        members = cluster.members
        block_span = len(members) + 1 + GUARD_TICKS
        slot_tick = {m: block_base + cluster.slots[m] for m in members}
        agg_tick = block_base + len(members)
        watchdog_set = set(wd_ids)
        audience = watchdog_set | {cluster.ch}
        monitors = [self.watchdogs[w] for w in wd_ids]

        planned: Dict[int, List[Transmission]] = {}

        def plan(tx: Transmission) -> None:
            planned.setdefault(tx.tick, []).append(tx)

        # Jamming noise first: its draws are consumed at block start, aimed at
        # the ticks that will actually carry traffic.
        jam_targets = sorted(
            [slot_tick[m] for m in members
             if m not in watchdog_set and not self._is_silent_member(m)]
            + [agg_tick])
        for m in members:
            profile = self._profile(m)
            if profile is not None and profile.kind is AttackKind.JAMMING:
                p = float(profile.params["jam_probability"])
                own = slot_tick.get(m)
                seq_base = 1_000_000 + cycle * 1000
                for i, t in enumerate(jam_targets):
                    if t == own:
                        continue
                    if self.rng.random() < p:
                        plan(Transmission.make(
                            m, Data(src=m, ch=cluster.ch, value=0.0,
                                    seq=seq_base + i),
                            PowerClass.LOCAL, t, scheduled=False))

        # Member emissions.
        alarmed: Set[int] = set()
        for m in members:
            if m in watchdog_set:
                continue  # monitors do not sense; their slot stays silent
            t = slot_tick[m]
            profile = self._profile(m)
            if profile is None:
                plan(Transmission.make(
                    m, Data(src=m, ch=cluster.ch, value=self._sensed_value(m),
                            seq=cycle), PowerClass.LOCAL, t))
                continue
            kind = profile.kind
            if kind is AttackKind.NEGLIGENCE:
                continue
            if kind is AttackKind.PHYSICAL_TAMPER:
                if cycle == 0:
                    plan(Transmission.make(m, AlarmLocal(src=m),
                                           PowerClass.LOCAL, t))
                alarmed.add(m)
                continue
            if kind is AttackKind.MESSAGE_REPETITION:
                repeat = max(2, int(profile.params["repeat_count"]))
                plan(Transmission.make(
                    m, Data(src=m, ch=cluster.ch, value=self._sensed_value(m),
                            seq=cycle // repeat), PowerClass.LOCAL, t))
                continue
            if kind is AttackKind.EXHAUSTION:
                plan(Transmission.make(
                    m, Data(src=m, ch=cluster.ch, value=self._sensed_value(m),
                            seq=cycle), PowerClass.LOCAL, t))
                rate = max(2, int(profile.params["rate_multiplier"]))
                slot_order = sorted(slot_tick.values())
                idx = slot_order.index(t)
                extras: List[int] = []
                if idx + 1 < len(slot_order):
                    # One emission tramples the next slot...
                    extras.append(slot_order[idx + 1])
                g = 0
                while len(extras) < rate - 1:
                    # ...the rest burst into the guard band, decodable but
                    # clearly off schedule.
                    extras.append(agg_tick + 1 + g)
                    g += 1
                for i, et in enumerate(extras):
                    plan(Transmission.make(
                        m, Data(src=m, ch=cluster.ch, value=0.0,
                                seq=500_000 + cycle * 100 + i),
                        PowerClass.LOCAL, et, scheduled=False))
                continue
            # Jamming attackers and lying monitors keep an honest data layer.
            plan(Transmission.make(
                m, Data(src=m, ch=cluster.ch, value=self._sensed_value(m),
                        seq=cycle), PowerClass.LOCAL, t))

        # Shared per-cycle channel state.
        collided_ticks: Set[int] = set()   # cluster-coherent view
        unscheduled_violators: List[int] = []
        collected: List[Tuple[int, float]] = []  # (tick, value) at the head
        collisions = 0

        # Member-slot region, tick order; listener charges per slot.
        for m in sorted(members, key=lambda m: slot_tick[m]):
            t = slot_tick[m]
            self._set_tick(t)
            txs = planned.pop(t, [])
            collisions += self._resolve_steady_tick(
                txs, cluster, audience, monitors, collided_ticks,
                unscheduled_violators, collected, slot_tick)
            decodable = (any(tx.scheduled for tx in txs
                             if self.topo.node(tx.sender).alive)
                         and t not in collided_ticks)
            for listener in sorted(audience):
                if listener == m:
                    continue
                self._charge_rx(listener, SizeClass.DATA, "data-slot",
                                listen=not decodable)

        # Head behavior at the aggregate slot.
        self._set_tick(agg_tick)
        values = [v for _, v in sorted(collected)]
        agg_value = aggregate(values)
        profile_ch = self._profile(cluster.ch)
        agg_on_time = False
        if agg_value is not None and self.topo.node(cluster.ch).alive:
            delay = 0
            drop = False
            if profile_ch is not None:
                kind = profile_ch.kind
                if kind in (AttackKind.BLACK_HOLE,
                            AttackKind.SELECTIVE_FORWARDING):
                    drop = self.rng.random() < float(
                        profile_ch.params["drop_probability"])
                elif kind is AttackKind.MESSAGE_DELAY:
                    delay = min(int(profile_ch.params["delay_ticks"]),
                                GUARD_TICKS - 1)
                elif kind is AttackKind.INTEGRITY_TAMPER:
                    agg_value += float(profile_ch.params["payload_offset"])
            if not drop:
                agg_on_time = delay == 0
                plan(Transmission.make(
                    cluster.ch,
                    Aggregate(ch=cluster.ch, value=agg_value, cycle=cycle),
                    PowerClass.LONG_RANGE, agg_tick + delay,
                    scheduled=(delay == 0)))

        # Aggregate slot and guard band, tick order.
        for t in sorted(planned):
            self._set_tick(t)
            collisions += self._resolve_steady_tick(
                planned[t], cluster, audience, monitors, collided_ticks,
                unscheduled_violators, collected, slot_tick)
        agg_heard = agg_on_time and agg_tick not in collided_ticks
        for wid in wd_ids:
            self._charge_rx(wid, SizeClass.DATA, "agg-slot",
                            listen=not agg_heard)

        # Cycle-end rule application per honest monitor of this cluster.
        for wid in wd_ids:
            w = self.watchdogs[wid]
            entries = w.drain()
            if self._compromised(wid):
                continue  # a compromised monitor contributes no honest records
            ctx = CycleContext(
                cluster=cluster,
                cycle_start_tick=block_base,
                slot_ticks=dict(slot_tick),
                agg_tick=agg_tick,
                watchdog_ids=watchdog_set,
                collided_ticks=collided_ticks,
                collision_unscheduled_senders=unscheduled_violators,
                alarmed=alarmed,
                blacklist=self.announced,
                block_span=block_span,
            )
            failures = evaluate_cycle(entries, ctx, self.rules,
                                      seq_history=seq_history[wid])
            acc = round_failures[wid]
            for key, count in failures.items():
                acc[key] = acc.get(key, 0) + count
        return collisions

    def _is_silent_member(self, node_id: int) -> bool:
        profile = self._profile(node_id)
        return profile is not None and profile.kind in (
            AttackKind.NEGLIGENCE, AttackKind.PHYSICAL_TAMPER)

    def _resolve_steady_tick(self, txs: List[Transmission],
                             cluster: ClusterView, audience: Set[int],
                             monitors: List[WatchdogState],
                             collided_ticks: Set[int],
                             unscheduled_violators: List[int],
                             collected: List[Tuple[int, float]],
                             slot_tick: Dict[int, int]) -> int:
        live = [(tx, None) for tx in txs if self.topo.node(tx.sender).alive]
        if not live:
            return 0
        in_cluster = set(cluster.members) | {cluster.ch}
        resolved = []
        for tx, _ in live:
            extra = audience if tx.sender in in_cluster else set()
            cov = coverage(tx, self.topo, self.cfg.radio_range, extra)
            d_tx = (distance(self.topo.node(tx.sender).pos, self.topo.bs_pos)
                    if tx.power_class is PowerClass.LONG_RANGE else 0.0)
            self._charge_tx(tx.sender, tx.size_class, d_tx, tx.power_class,
                            type(tx.message).__name__.lower())
            resolved.append((tx, cov))
        outcome = resolve_tick([tx for tx, _ in resolved],
                               [cov for _, cov in resolved])
        for event in outcome.collisions:
            self._log(f"ev=collision node={event.receiver} "
                      f"senders={'|'.join(str(s) for s in event.senders)}")
            if event.receiver in audience:
                collided_ticks.add(event.tick)
        if outcome.collisions:
            # Monitors know the schedule: a collision is laid at the door of
            # whoever transmitted outside its slot (once per collided tick).
            monitor_ids = {m.node_id for m in monitors}
            if any(e.receiver in monitor_ids for e in outcome.collisions):
                for v in sorted({tx.sender for tx, _ in resolved
                                 if not tx.scheduled}):
                    unscheduled_violators.append(v)
        for tx, receivers in outcome.delivered.items():
            msg = tx.message
            in_slot = tx.scheduled and tx.tick in slot_tick.values()
            for r in sorted(receivers, key=lambda x: (x == BS_ID, x)):
                if r == BS_ID:
                    continue
                if r == cluster.ch and isinstance(msg, Data) \
                        and msg.ch == cluster.ch and in_slot:
                    collected.append((tx.tick, msg.value))
                if r != cluster.ch and all(m.node_id != r for m in monitors):
                    # Out-of-audience physical reception: protocol-ignored,
                    # radio rejects the foreign cell preamble before decode.
                    continue
                if not in_slot and not (isinstance(msg, Aggregate)
                                        and tx.scheduled):
                    # Off-schedule decodable packet: charged on reception.
                    self._charge_rx(r, tx.size_class,
                                    type(msg).__name__.lower())
                for m in monitors:
                    if m.node_id == r and not self._compromised(r):
                        m.capture(tx, rx_power=tx.tx_power,
                                  power_threshold=self.rules.power_threshold)
                        self._store(r).observed_suspects.add(tx.sender)
        return len(outcome.collisions)

    # -- detection and blacklist ----------------------------------------------------

    def _round_detection(self, formation: FormationResult, round_failures,
                         seq_history) -> List[Tuple[Alert, Optional[int]]]:
        emitted: List[Tuple[Alert, Optional[int]]] = []
        by_cluster: Dict[int, List[Alert]] = {}
        for wid in sorted(self.watchdogs):
            w = self.watchdogs[wid]
            if not self.topo.node(wid).alive:
                continue
            profile = self._profile(wid)
            if profile is not None:
                if profile.kind is AttackKind.LYING_WATCHDOG:
                    lie = Alert(watchdog=wid, suspect=w.cluster.ch,
                                attack_id=RuleId.RETRANSMISSION.value,
                                time=self.clock.tick,
                                sum=self.rules.alert_threshold + 1)
                    self._emit_alert(wid, lie)
                    emitted.append((lie, w.cluster.ch))
                    by_cluster.setdefault(w.cluster.ch, []).append(lie)
                continue
            if self._compromised(wid):
                continue
            failures = dict(round_failures.get(wid, {}))
            for key, count in repetition_failures(
                    seq_history.get(wid, {}), self.rules,
                    self.announced).items():
                failures[key] = failures.get(key, 0) + count
            alerts, indications = self._store(wid).run_detection(
                failures, self.rules, now=self.clock.tick,
                blacklist=self.announced)
            self._note_indications(wid, indications)
            for alert in alerts:
                self._emit_alert(wid, alert)
                emitted.append((alert, w.cluster.ch))
                by_cluster.setdefault(w.cluster.ch, []).append(alert)
        for ch in sorted(by_cluster):
            emitted.extend(self._cross_checks(by_cluster[ch], ch,
                                              self.watchdogs))
        # Single-monitor clusters cannot corroborate; note it.
        counts: Dict[int, int] = {}
        for w in self.watchdogs.values():
            counts[w.cluster.ch] = counts.get(w.cluster.ch, 0) + 1
        for alert, ch in emitted:
            if ch is not None and counts.get(ch, 0) == 1 \
                    and alert.attack_id != RuleId.INTRUDER_WATCHDOG.value:
                self._log(f"ev=uncorroborated-alert node={alert.watchdog} "
                          f"suspect={alert.suspect}")
        return emitted

    def _cross_checks(self, alerts: List[Alert], cluster_ch: int,
                      pool: Dict[int, WatchdogState],
                      ) -> List[Tuple[Alert, Optional[int]]]:
        """Same-cluster monitors give a second opinion on overheard reports."""
        out: List[Tuple[Alert, Optional[int]]] = []
        for alert in list(alerts):
            for wid in sorted(pool):
                w = pool[wid]
                if (w.cluster is None or w.cluster.ch != cluster_ch
                        or wid == alert.watchdog
                        or not self.topo.node(wid).alive
                        or self._compromised(wid)):
                    continue
                counter = cross_check(alert, self._store(wid))
                if counter is not None:
                    self._emit_alert(wid, counter)
                    out.append((counter, cluster_ch))
        return out

    def _emit_alert(self, wid: int, alert: Alert) -> None:
        self._next_tick()
        d = distance(self.topo.node(wid).pos, self.topo.bs_pos)
        self._charge_tx(wid, SizeClass.DATA, d, PowerClass.LONG_RANGE, "alert")
        self._log(f"ev=alert node={wid} suspect={alert.suspect} "
                  f"rule={alert.attack_id} sum={alert.sum}")
        # Same-cluster co-monitors overhear the report; that is what feeds the
        # cross-check quorum, and they pay reception for it.
        w = self.watchdogs.get(wid) or self.carryover.get(wid)
        if w is not None and w.cluster is not None:
            pool = self.watchdogs if wid in self.watchdogs else self.carryover
            for oid in sorted(pool):
                other = pool[oid]
                if oid != wid and other.cluster is not None \
                        and other.cluster.ch == w.cluster.ch \
                        and self.topo.node(oid).alive:
                    self._charge_rx(oid, SizeClass.DATA, "alert")

    def _broadcast_blacklist(self, newly: List[int]) -> None:
        self._next_tick()
        ids = tuple(sorted(self.blacklist_state.ids))
        self._log(f"ev=blacklist ids={'|'.join(str(i) for i in ids) or '-'} "
                  f"new={'|'.join(str(i) for i in newly) or '-'}")
        for n in sorted(self.topo.nodes, key=lambda n: n.id):
            if n.alive:
                self._charge_rx(n.id, SizeClass.DATA, "blacklist")
        self.announced = set(self.blacklist_state.ids)
        for n in self.topo.nodes:
            n.blacklisted = n.id in self.announced

    # -- metrics -----------------------------------------------------------------------

    def _classify_alerts(self, alerts: List[Alert], rnd: int) -> Tuple[int, int]:
        tp = fp = 0
        for alert in alerts:
            pair = (alert.suspect, RuleId(alert.attack_id))
            if pair in self.gt_pairs:
                tp += 1
                for outcome in self.outcomes:
                    if rnd >= outcome.scenario.start_round \
                            and pair in ground_truth(outcome.scenario):
                        outcome.detected = True
                        if outcome.first_tp_round is None:
                            outcome.first_tp_round = rnd
            else:
                fp += 1
        for outcome in self.outcomes:
            if outcome.scenario.attackers and all(
                    a in self.blacklist_state.ids
                    for a in outcome.scenario.attackers):
                outcome.blacklisted = True
        return tp, fp

    def _collect_metrics(self, rnd, heads, formation, zero_wd, collisions,
                         n_alerts, tp, fp, start_energy) -> None:
        ch_spend: List[float] = []
        wd_spend: List[float] = []
        s_spend: List[float] = []
        total = 0.0
        for n in self.topo.nodes:
            spent = self.ledgers[n.id].total - start_energy[n.id]
            total += spent
            if n.id in heads:
                ch_spend.append(spent)
            elif n.id in self.watchdogs:
                wd_spend.append(spent)
            else:
                s_spend.append(spent)

        def mean(xs: List[float]) -> float:
            return sum(xs) / len(xs) if xs else 0.0

        self.metrics.append(RoundMetrics(
            round=rnd,
            alive_nodes=sum(1 for n in self.topo.nodes if n.alive),
            cluster_heads=len(heads),
            orphaned_nodes=len(formation.orphans),
            watchdogs=len(self.watchdogs),
            zero_watchdog_clusters=zero_wd,
            collisions=collisions,
            alerts=n_alerts,
            true_positives=tp,
            false_positives=fp,
            blacklist_size=len(self.blacklist_state.ids),
            energy_ch_mean_j=mean(ch_spend),
            energy_watchdog_mean_j=mean(wd_spend),
            energy_sensor_mean_j=mean(s_spend),
            energy_total_j=total,
        ))

    def _summary(self) -> dict:
        per_scenario = []
        for outcome in self.outcomes:
            per_scenario.append({
                "kind": outcome.scenario.kind.value,
                "attackers": list(outcome.scenario.attackers),
                "start_round": outcome.scenario.start_round,
                "detected": outcome.detected,
                "detection_latency_rounds": outcome.latency_rounds,
                "blacklisted": outcome.blacklisted,
            })
        last = self.metrics[-1] if self.metrics else None
        return {
            "seed": self.cfg.seed,
            "protocol": self.cfg.protocol,
            "nodes": self.cfg.nodes,
            "rounds": self.cfg.rounds,
            "steady_cycles": self.cfg.steady_cycles,
            "energy_total_j": sum(m.energy_total_j for m in self.metrics),
            "alerts": sum(m.alerts for m in self.metrics),
            "true_positives": sum(m.true_positives for m in self.metrics),
            "false_positives": sum(m.false_positives for m in self.metrics),
            "collisions": sum(m.collisions for m in self.metrics),
            "blacklist": sorted(self.blacklist_state.ids),
            "alive_nodes_final": (last.alive_nodes if last else self.cfg.nodes),
            "role_energy_mean_j": {
                "ch": _mean_nonzero([m.energy_ch_mean_j for m in self.metrics]),
                "watchdog": _mean_nonzero(
                    [m.energy_watchdog_mean_j for m in self.metrics]),
                "sensor": _mean_nonzero(
                    [m.energy_sensor_mean_j for m in self.metrics]),
            },
            "scenarios": per_scenario,
        }


def _mean_nonzero(xs: List[float]) -> float:
    vals = [x for x in xs if x > 0.0]
    return sum(vals) / len(vals) if vals else 0.0


def run_simulation(config: SimConfig) -> RunResult:
    """Build and run one simulation instance."""
    return Simulator(config).run()
