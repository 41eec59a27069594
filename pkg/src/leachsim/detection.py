"""Rule-based intrusion detection, alerting, cross-checking and blacklisting.

A monitor applies nine behavioral rules to the traffic it captured, keeps one
failure record per (suspect, rule), and turns per-round failure counts into
attack indications by comparing against a maintained cumulative baseline:
a round's count strictly above the baseline signals an indication and bumps
the record's sum; otherwise the baseline absorbs the round through an
exponentially weighted moving average.  A record whose sum climbs strictly
above the alert threshold is reported to the base station, which corroborates
alerts per distinct reporting monitor, discards reports from monitors
exposed as liars, and broadcasts the blacklist at the end of every round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .core import (Adv, Aggregate, AlarmLocal, Alert, Data, JoinReq, Sched,
                   Transmission)
from .leach import ClusterView, aggregate
from .watchdog import CaptureEntry


class RuleId(Enum):
    INTERVAL = "interval"
    RETRANSMISSION = "retransmission"
    INTEGRITY = "integrity"
    DELAY = "delay"
    REPETITION = "repetition"
    JAMMING = "jamming"
    RADIO_RANGE = "radio-range"
    ALARM = "alarm"
    INTRUDER_WATCHDOG = "intruder-watchdog"


@dataclass
class RuleConfig:
    """Thresholds and baselines of the rule engine.

    Interval gap bounds default to half / one-and-a-half steady cycles when
    left unset; baselines seed each record's cumulative value with the
    expected occasional failure rate per round (zero in a clean network).
    """

    interval_min_gap: Optional[int] = None
    interval_max_gap: Optional[int] = None
    delay_timeout: int = 3
    repetition_limit: int = 2
    collision_baseline: float = 0.0
    power_threshold: float = 1.5
    combine_weight: float = 0.5
    alert_threshold: int = 1
    integrity_rel_tolerance: float = 1e-9
    baselines: Dict[RuleId, float] = field(default_factory=dict)

    def baseline(self, rule: RuleId) -> float:
        if rule is RuleId.JAMMING:
            return self.baselines.get(rule, self.collision_baseline)
        return self.baselines.get(rule, 0.0)

    def validate(self) -> None:
        if not (0.0 < self.combine_weight < 1.0):
            raise ValueError("combine_weight must lie in (0, 1)")
        if self.alert_threshold < 1:
            raise ValueError("alert_threshold must be >= 1")
        if self.delay_timeout < 1:
            raise ValueError("delay_timeout must be >= 1")
        if self.repetition_limit < 1:
            raise ValueError("repetition_limit must be >= 1")
        if self.power_threshold <= 0:
            raise ValueError("power_threshold must be positive")


@dataclass
class FailureRecord:
    """Cumulative state for one (suspect, rule) pair at one monitor."""

    suspect: int
    rule: RuleId
    first_time: int
    last_time: int
    sum: int = 0
    cumulative: float = 0.0


def detect(record: FailureRecord, round_failure: float,
           cfg: RuleConfig) -> bool:
    """Compare a round's failure count with the maintained baseline.

    Strictly above: signal an indication (sum += 1, timestamp updated).
    Otherwise fold the round into the baseline:
    cumulative <- (1-w)*cumulative + w*round_failure.
    """
    if round_failure > record.cumulative:
        record.sum += 1
        return True
    w = cfg.combine_weight
    record.cumulative = (1.0 - w) * record.cumulative + w * round_failure
    return False


def maybe_alert(record: FailureRecord, cfg: RuleConfig,
                watchdog_id: int) -> Optional[Alert]:
    """Report to the station once the sum climbs strictly above the alert
    threshold; the sum resets after reporting."""
    if record.sum > cfg.alert_threshold:
        alert = Alert(watchdog=watchdog_id, suspect=record.suspect,
                      attack_id=record.rule.value, time=record.last_time,
                      sum=record.sum)
        record.sum = 0
        return alert
    return None


# ---------------------------------------------------------------------------
# Rule evaluation over captured traffic
# ---------------------------------------------------------------------------


@dataclass
class CycleContext:
    """What the monitor knows about one steady cycle of its cluster."""

    cluster: ClusterView
    cycle_start_tick: int
    slot_ticks: Dict[int, int]          # member id -> absolute slot tick
    agg_tick: int                       # scheduled aggregate tick
    watchdog_ids: Set[int]              # this round's monitors (embedded schedule)
    collided_ticks: Set[int]            # ticks the monitor saw collide
    collision_unscheduled_senders: List[int]  # per collision event, claimed violator ids
    alarmed: Set[int]                   # members that raised a tamper alarm this round
    blacklist: Set[int]
    block_span: int = 0                 # cluster's whole tick block incl. guard


def evaluate_cycle(entries: List[CaptureEntry], ctx: CycleContext,
                   cfg: RuleConfig,
                   seq_history: Optional[Dict[Tuple[int, int], int]] = None,
                   ) -> Dict[Tuple[int, RuleId], int]:
    """Apply the steady-phase rules to one cycle of captured traffic.

    Returns per-(suspect, rule) failure counts for the cycle and folds the
    cycle's (src, seq) sightings into ``seq_history`` for the round-level
    repetition sweep.  Checks that depend on a slot's content are skipped
    when that slot collided, since the channel view is inconclusive there;
    collisions themselves are counted against the claimed senders violating
    the schedule.
    """
    failures: Dict[Tuple[int, RuleId], int] = {}

    def hit(suspect: int, rule: RuleId, count: int = 1) -> None:
        if suspect in ctx.blacklist:
            return
        key = (suspect, rule)
        failures[key] = failures.get(key, 0) + count

    datas: Dict[int, List[CaptureEntry]] = {}
    agg_entry: Optional[CaptureEntry] = None
    for e in entries:
        msg = e.tx.message
        if isinstance(msg, Data) and msg.ch == ctx.cluster.ch:
            datas.setdefault(msg.src, []).append(e)
        elif isinstance(msg, Aggregate) and msg.ch == ctx.cluster.ch:
            agg_entry = e

    # One packet per member per cycle is on schedule; two packets inside the
    # same cycle's block are necessarily closer than a full block apart.
    auto_min = ctx.block_span if ctx.block_span > 0 else len(ctx.slot_ticks) + 1
    min_gap = cfg.interval_min_gap if cfg.interval_min_gap is not None \
        else max(1, auto_min)
    max_gap = cfg.interval_max_gap

    # Interval rule: data must arrive once per slot, neither bunched nor
    # missing.  Known monitors do not sense, and alarmed nodes already
    # reported themselves, so neither is owed a data packet.
    for member, slot_tick in sorted(ctx.slot_ticks.items()):
        if member in ctx.watchdog_ids or member in ctx.alarmed:
            continue
        if member in ctx.blacklist:
            continue
        seen = sorted(datas.get(member, []), key=lambda e: e.tick)
        if not seen:
            if slot_tick not in ctx.collided_ticks:
                hit(member, RuleId.INTERVAL)
            continue
        ticks = [e.tick for e in seen]
        for a, b in zip(ticks, ticks[1:]):
            gap = b - a
            if gap < min_gap:
                hit(member, RuleId.INTERVAL)
            elif max_gap is not None and gap > max_gap:
                hit(member, RuleId.INTERVAL)

    # Repetition bookkeeping: identical (src, seq) sightings accumulate over
    # the round and are judged by repetition_failures() at round end.
    if seq_history is not None:
        for member, seen in datas.items():
            for e in seen:
                msg = e.tx.message
                key = (msg.src, msg.seq)
                seq_history[key] = seq_history.get(key, 0) + 1

    # Radio range rule: implied transmit power above the licensed level.
    for e in entries:
        if e.rx_power > cfg.power_threshold:
            hit(e.tx.sender, RuleId.RADIO_RANGE)

    # Alarm rule: a tampered node announced itself.
    for e in entries:
        if isinstance(e.tx.message, AlarmLocal):
            hit(e.tx.message.src, RuleId.ALARM)

    # Jamming rule: collisions laid at the door of schedule violators.
    for violator in ctx.collision_unscheduled_senders:
        hit(violator, RuleId.JAMMING)

    member_values = _delivered_values(datas, ctx)
    got_data = bool(member_values)

    if agg_entry is None:
        # Retransmission rule: data went in, nothing came out.
        if got_data and ctx.agg_tick not in ctx.collided_ticks:
            hit(ctx.cluster.ch, RuleId.RETRANSMISSION)
    else:
        # Delay rule: the forward happened, but too long after the last slot.
        last_slot = max(ctx.slot_ticks.values()) if ctx.slot_ticks else ctx.cycle_start_tick
        if agg_entry.tick - last_slot > cfg.delay_timeout:
            hit(ctx.cluster.ch, RuleId.DELAY)
        # Integrity rule: forwarded value must equal the mean of what the
        # members actually delivered.
        if got_data:
            expected = aggregate(member_values)
            reported = agg_entry.tx.message.value
            tol = cfg.integrity_rel_tolerance * max(1.0, abs(expected))
            if abs(reported - expected) > tol:
                hit(ctx.cluster.ch, RuleId.INTEGRITY)

    return failures


def _delivered_values(datas: Dict[int, List[CaptureEntry]],
                      ctx: CycleContext) -> List[float]:
    """Payloads the head aggregated this cycle, in slot order, first copy of
    any repeated sequence number only."""
    values = []
    for member in sorted(ctx.slot_ticks, key=lambda m: ctx.slot_ticks[m]):
        if member in ctx.blacklist:
            continue
        seen = sorted(datas.get(member, []), key=lambda e: e.tick)
        taken: Set[int] = set()
        for e in seen:
            if e.tx.message.seq in taken:
                continue
            taken.add(e.tx.message.seq)
            values.append(e.tx.message.value)
    return values


def repetition_failures(seq_history: Dict[Tuple[int, int], int],
                        cfg: RuleConfig,
                        blacklist: Set[int]) -> Dict[Tuple[int, RuleId], int]:
    """Round-level repetition counts: each (src, seq) above the limit costs
    one failure per excess copy."""
    failures: Dict[Tuple[int, RuleId], int] = {}
    for (src, _seq), count in sorted(seq_history.items()):
        if src in blacklist:
            continue
        if count > cfg.repetition_limit:
            key = (src, RuleId.REPETITION)
            failures[key] = failures.get(key, 0) + (count - cfg.repetition_limit)
    return failures


def evaluate_setup(entries: List[CaptureEntry], cfg: RuleConfig,
                   blacklist: Set[int]) -> Dict[Tuple[int, RuleId], int]:
    """Setup-phase checks over a carried-over monitor's capture: overpowered
    advertisements, and duplicated joins or schedules."""
    failures: Dict[Tuple[int, RuleId], int] = {}

    def hit(suspect: int, rule: RuleId, count: int = 1) -> None:
        if suspect in blacklist:
            return
        key = (suspect, rule)
        failures[key] = failures.get(key, 0) + count

    dupes: Dict[Tuple[str, int, int], int] = {}
    for e in entries:
        msg = e.tx.message
        if isinstance(msg, Adv):
            if e.rx_power > cfg.power_threshold:
                hit(msg.ch, RuleId.RADIO_RANGE)
            continue
        if isinstance(msg, JoinReq):
            key = ("join", msg.src, msg.ch)
        elif isinstance(msg, Sched):
            key = ("sched", msg.ch, 0)
        else:
            continue
        dupes[key] = dupes.get(key, 0) + 1
    for (_kind, src, _tgt), count in sorted(dupes.items()):
        if count > 1:
            hit(src, RuleId.REPETITION, count - 1)
            hit(src, RuleId.INTERVAL, count - 1)
    return failures


# ---------------------------------------------------------------------------
# Per-monitor engine state
# ---------------------------------------------------------------------------


@dataclass
class MonitorStore:
    """Failure records of one node, persistent across rounds."""

    node_id: int
    records: Dict[Tuple[int, RuleId], FailureRecord] = field(default_factory=dict)
    observed_suspects: Set[int] = field(default_factory=set)

    def record_for(self, suspect: int, rule: RuleId, now: int,
                   cfg: RuleConfig) -> FailureRecord:
        key = (suspect, rule)
        rec = self.records.get(key)
        if rec is None:
            rec = FailureRecord(suspect=suspect, rule=rule, first_time=now,
                                last_time=now, cumulative=cfg.baseline(rule))
            self.records[key] = rec
        return rec

    def run_detection(self, round_failures: Dict[Tuple[int, RuleId], int],
                      cfg: RuleConfig, now: int, blacklist: Set[int],
                      ) -> Tuple[List[Alert], List[Tuple[int, RuleId]]]:
        """End-of-round sweep: compare failures against baselines for every
        tracked pair, then emit alerts whose sums crossed the threshold.
        Returns the alerts and the indicated (suspect, rule) pairs."""
        alerts: List[Alert] = []
        indications: List[Tuple[int, RuleId]] = []
        keys = set(round_failures) | set(self.records)
        for key in sorted(keys, key=lambda k: (k[0], k[1].value)):
            suspect, rule = key
            if suspect in blacklist or rule is RuleId.INTRUDER_WATCHDOG:
                continue
            rf = round_failures.get(key, 0)
            if rf == 0 and key not in self.records:
                continue
            rec = self.record_for(suspect, rule, now, cfg)
            indicated = detect(rec, rf, cfg)
            if indicated:
                rec.last_time = now
                indications.append(key)
                alert = maybe_alert(rec, cfg, self.node_id)
                if alert is not None:
                    alerts.append(alert)
        return alerts, indications


def cross_check(alert: Alert, store: MonitorStore) -> Optional[Alert]:
    """Second-opinion check on an overheard report.

    A monitor that observed the suspect but holds no supporting record for
    the reported rule denounces the reporter.  Denunciations themselves are
    exempt (they cite private evidence, not shared traffic), as are reports
    the monitor cannot judge because it never saw the suspect.
    """
    if alert.attack_id == RuleId.INTRUDER_WATCHDOG.value:
        return None
    if alert.watchdog == store.node_id:
        return None
    if alert.suspect not in store.observed_suspects:
        return None
    rec = store.records.get((alert.suspect, RuleId(alert.attack_id)))
    if rec is not None:
        # Some supporting failures were observed (a record only ever exists
        # after observed failures; a zero sum just means already reported or
        # still below baseline), so there is no disagreement to report.
        return None
    return Alert(watchdog=store.node_id, suspect=alert.watchdog,
                 attack_id=RuleId.INTRUDER_WATCHDOG.value,
                 time=alert.time, sum=1)


# ---------------------------------------------------------------------------
# Base-station state
# ---------------------------------------------------------------------------


@dataclass
class BlacklistState:
    """Station-side condemnation bookkeeping; ids are permanent once added."""

    ids: Set[int] = field(default_factory=set)
    corroborators: Dict[int, Set[int]] = field(default_factory=dict)
    quorum: int = 1

    def corroboration(self, suspect: int) -> int:
        return len(self.corroborators.get(suspect, ()))


def bs_update_blacklist(alerts: List[Alert], state: BlacklistState) -> List[int]:
    """Fold one round of alerts into the blacklist.

    Denunciations are tallied first: a reporter named by strictly more
    denouncers than it filed reports this round is treated as a liar and its
    contributions (this round's and earlier rounds') are discarded.  The
    remaining alerts corroborate their suspects per distinct reporter, and
    any suspect reaching the quorum is condemned.  Returns newly added ids.
    """
    counters = [a for a in alerts if a.attack_id == RuleId.INTRUDER_WATCHDOG.value]
    regular = [a for a in alerts if a.attack_id != RuleId.INTRUDER_WATCHDOG.value]

    named: Dict[int, int] = {}
    for a in counters:
        named[a.suspect] = named.get(a.suspect, 0) + 1
    authored: Dict[int, int] = {}
    for a in regular:
        authored[a.watchdog] = authored.get(a.watchdog, 0) + 1

    liars = {w for w, n in named.items() if n > authored.get(w, 0)}
    if liars:
        regular = [a for a in regular if a.watchdog not in liars]
        for suspects in state.corroborators.values():
            suspects -= liars

    for a in sorted(regular + counters, key=lambda a: (a.suspect, a.watchdog)):
        if a.watchdog in liars and a.attack_id != RuleId.INTRUDER_WATCHDOG.value:
            continue
        state.corroborators.setdefault(a.suspect, set()).add(a.watchdog)

    added = []
    for suspect in sorted(state.corroborators):
        if suspect in state.ids:
            continue
        if state.corroboration(suspect) >= state.quorum:
            state.ids.add(suspect)
            added.append(suspect)
    return added
