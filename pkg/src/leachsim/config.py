"""Experiment configuration: YAML grammar, defaults, strict validation.

The config file is YAML with a fixed key set; unknown keys anywhere are hard
errors, as are constraint violations (each error names the offending key).
An empty file yields the documented defaults: 1000 nodes, 100 expected
clusters (election probability 0.1), 10 steady cycles, 60 m radio range,
station placed for a 100 m mean node distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import yaml

from .attacks import AttackKind, AttackScenario
from .detection import RuleConfig, RuleId
from .energy import EnergyMode


class ConfigError(Exception):
    """Base class; the CLI maps these to a dedicated exit code."""


class ConfigSyntaxError(ConfigError):
    pass


class ConfigKeyError(ConfigError):
    def __init__(self, key: str, where: str = ""):
        self.key = key
        suffix = f" in {where}" if where else ""
        super().__init__(f"unknown configuration key {key!r}{suffix}")


class ConfigConstraintError(ConfigError):
    def __init__(self, message: str, keys: Tuple[str, ...]):
        self.keys = keys
        super().__init__(f"{message} (keys: {', '.join(keys)})")


PROTOCOLS = ("leach", "watchdog-leach")


@dataclass
class SimConfig:
    """Validated inputs of one simulation run."""

    seed: int = 42
    nodes: int = 1000
    clusters_expected: int = 100
    area: Tuple[float, float] = (200.0, 200.0)
    bs_position: Union[str, Tuple[float, float]] = "auto-100m-mean"
    rounds: int = 1
    steady_cycles: int = 10
    radio_range: float = 60.0
    dice_m: Union[str, int] = "cluster-size"
    energy_mode: EnergyMode = EnergyMode.PAPER_TABLE
    initial_energy: float = 2.0
    protocol: str = "watchdog-leach"
    nwnc_target: Optional[int] = None   # force exactly this many monitors per cluster
    rules: RuleConfig = field(default_factory=RuleConfig)
    attacks: List[AttackScenario] = field(default_factory=list)

    @property
    def p_ch(self) -> float:
        return self.clusters_expected / self.nodes

    def validate(self) -> None:
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigConstraintError("seed must be a 64-bit non-negative integer",
                                        ("seed",))
        if self.nodes < 1:
            raise ConfigConstraintError("nodes must be >= 1", ("nodes",))
        if not (1 <= self.clusters_expected < self.nodes) and self.nodes > 1:
            raise ConfigConstraintError(
                "clusters_expected must lie in [1, nodes)",
                ("clusters_expected", "nodes"))
        if self.nodes == 1 and self.clusters_expected != 1:
            raise ConfigConstraintError(
                "clusters_expected must be 1 for a single-node network",
                ("clusters_expected", "nodes"))
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ConfigConstraintError("area dimensions must be positive", ("area",))
        if self.rounds < 1:
            raise ConfigConstraintError("rounds must be >= 1", ("rounds",))
        if self.steady_cycles < 0:
            raise ConfigConstraintError("steady_cycles must be >= 0", ("steady_cycles",))
        if self.radio_range <= 0:
            raise ConfigConstraintError("radio_range must be positive", ("radio_range",))
        if isinstance(self.dice_m, int) and self.dice_m < 1:
            raise ConfigConstraintError("dice_m must be >= 1", ("dice_m",))
        if isinstance(self.dice_m, str) and self.dice_m != "cluster-size":
            raise ConfigConstraintError(
                "dice_m must be an integer or 'cluster-size'", ("dice_m",))
        if self.initial_energy <= 0:
            raise ConfigConstraintError("initial_energy must be positive",
                                        ("initial_energy",))
        if self.protocol not in PROTOCOLS:
            raise ConfigConstraintError(
                f"protocol must be one of {PROTOCOLS}", ("protocol",))
        if self.nwnc_target is not None and self.nwnc_target < 0:
            raise ConfigConstraintError("nwnc_target must be >= 0", ("nwnc_target",))
        if isinstance(self.bs_position, str) and self.bs_position != "auto-100m-mean":
            raise ConfigConstraintError(
                "bs_position must be [x, y] or 'auto-100m-mean'", ("bs_position",))
        try:
            self.rules.validate()
        except ValueError as exc:
            raise ConfigConstraintError(str(exc), ("rules",)) from exc
        for i, scenario in enumerate(self.attacks):
            try:
                scenario.validate(n_nodes=self.nodes)
            except ValueError as exc:
                raise ConfigConstraintError(str(exc), (f"attacks[{i}]",)) from exc
            if scenario.start_round >= self.rounds and self.rounds > 1:
                pass  # legal: the attack simply never expresses

    def to_dict(self) -> dict:
        """Round-trippable plain mapping (parse(to_dict()) == self)."""
        out: dict = {
            "seed": self.seed,
            "nodes": self.nodes,
            "clusters_expected": self.clusters_expected,
            "area": [self.area[0], self.area[1]],
            "bs_position": (self.bs_position if isinstance(self.bs_position, str)
                            else [self.bs_position[0], self.bs_position[1]]),
            "rounds": self.rounds,
            "steady_cycles": self.steady_cycles,
            "radio_range": self.radio_range,
            "dice_m": self.dice_m,
            "energy_mode": self.energy_mode.value,
            "initial_energy": self.initial_energy,
            "protocol": self.protocol,
        }
        if self.nwnc_target is not None:
            out["nwnc_target"] = self.nwnc_target
        out["rules"] = _rules_to_dict(self.rules)
        if self.attacks:
            out["attacks"] = [_scenario_to_dict(s) for s in self.attacks]
        return out


_TOP_KEYS = {
    "seed", "nodes", "clusters_expected", "area", "bs_position", "rounds",
    "steady_cycles", "radio_range", "dice_m", "energy_mode", "initial_energy",
    "protocol", "nwnc_target", "rules", "attacks",
}

_RULE_KEYS = {
    "interval_min_gap", "interval_max_gap", "delay_timeout",
    "repetition_limit", "collision_baseline", "power_threshold",
    "combine_weight", "alert_threshold", "integrity_rel_tolerance",
    "expected_failure_rate",
}

_ATTACK_KEYS = {
    "kind", "nodes", "count", "start_round", "ensure_watchdogs",
    "power_multiplier", "delay_ticks", "repeat_count", "jam_probability",
    "drop_probability", "rate_multiplier", "payload_offset",
}

_ATTACK_PARAM_KEYS = {
    "power_multiplier", "delay_ticks", "repeat_count", "jam_probability",
    "drop_probability", "rate_multiplier", "payload_offset",
}


def parse_config(path: str) -> SimConfig:
    """Load, default and validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigSyntaxError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def parse_config_text(text: str) -> SimConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigSyntaxError(f"malformed config: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigSyntaxError("config root must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> SimConfig:
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigKeyError(str(key))
    cfg = SimConfig()
    if "seed" in raw:
        cfg.seed = _expect_int(raw["seed"], "seed")
    if "nodes" in raw:
        cfg.nodes = _expect_int(raw["nodes"], "nodes")
    if "clusters_expected" in raw:
        cfg.clusters_expected = _expect_int(raw["clusters_expected"],
                                            "clusters_expected")
    if "area" in raw:
        cfg.area = _expect_pair(raw["area"], "area")
    if "bs_position" in raw:
        v = raw["bs_position"]
        cfg.bs_position = v if isinstance(v, str) else _expect_pair(v, "bs_position")
    if "rounds" in raw:
        cfg.rounds = _expect_int(raw["rounds"], "rounds")
    if "steady_cycles" in raw:
        cfg.steady_cycles = _expect_int(raw["steady_cycles"], "steady_cycles")
    if "radio_range" in raw:
        cfg.radio_range = _expect_float(raw["radio_range"], "radio_range")
    if "dice_m" in raw:
        v = raw["dice_m"]
        cfg.dice_m = v if isinstance(v, str) else _expect_int(v, "dice_m")
    if "energy_mode" in raw:
        try:
            cfg.energy_mode = EnergyMode(str(raw["energy_mode"]))
        except ValueError as exc:
            raise ConfigConstraintError(
                f"energy_mode must be one of "
                f"{[m.value for m in EnergyMode]}", ("energy_mode",)) from exc
    if "initial_energy" in raw:
        cfg.initial_energy = _expect_float(raw["initial_energy"], "initial_energy")
    if "protocol" in raw:
        cfg.protocol = str(raw["protocol"])
    if "nwnc_target" in raw and raw["nwnc_target"] is not None:
        cfg.nwnc_target = _expect_int(raw["nwnc_target"], "nwnc_target")
    if "rules" in raw and raw["rules"] is not None:
        cfg.rules = _parse_rules(raw["rules"])
    if "attacks" in raw and raw["attacks"] is not None:
        if not isinstance(raw["attacks"], list):
            raise ConfigConstraintError("attacks must be a list", ("attacks",))
        cfg.attacks = [_parse_attack(a, i) for i, a in enumerate(raw["attacks"])]
    cfg.validate()
    return cfg


def _parse_rules(raw: dict) -> RuleConfig:
    if not isinstance(raw, dict):
        raise ConfigConstraintError("rules must be a mapping", ("rules",))
    for key in raw:
        if key not in _RULE_KEYS:
            raise ConfigKeyError(str(key), where="rules")
    rules = RuleConfig()
    if "interval_min_gap" in raw and raw["interval_min_gap"] is not None:
        rules.interval_min_gap = _expect_int(raw["interval_min_gap"],
                                             "rules.interval_min_gap")
    if "interval_max_gap" in raw and raw["interval_max_gap"] is not None:
        rules.interval_max_gap = _expect_int(raw["interval_max_gap"],
                                             "rules.interval_max_gap")
    if "delay_timeout" in raw:
        rules.delay_timeout = _expect_int(raw["delay_timeout"],
                                          "rules.delay_timeout")
    if "repetition_limit" in raw:
        rules.repetition_limit = _expect_int(raw["repetition_limit"],
                                             "rules.repetition_limit")
    if "collision_baseline" in raw:
        rules.collision_baseline = _expect_float(raw["collision_baseline"],
                                                 "rules.collision_baseline")
    if "power_threshold" in raw:
        rules.power_threshold = _expect_float(raw["power_threshold"],
                                              "rules.power_threshold")
    if "combine_weight" in raw:
        rules.combine_weight = _expect_float(raw["combine_weight"],
                                             "rules.combine_weight")
    if "alert_threshold" in raw:
        rules.alert_threshold = _expect_int(raw["alert_threshold"],
                                            "rules.alert_threshold")
    if "integrity_rel_tolerance" in raw:
        rules.integrity_rel_tolerance = _expect_float(
            raw["integrity_rel_tolerance"], "rules.integrity_rel_tolerance")
    if "expected_failure_rate" in raw and raw["expected_failure_rate"] is not None:
        rates = raw["expected_failure_rate"]
        if not isinstance(rates, dict):
            raise ConfigConstraintError("expected_failure_rate must be a mapping",
                                        ("rules.expected_failure_rate",))
        valid = {r.value: r for r in RuleId}
        for name, value in rates.items():
            if name not in valid:
                raise ConfigKeyError(str(name), where="rules.expected_failure_rate")
            rules.baselines[valid[name]] = _expect_float(
                value, f"rules.expected_failure_rate.{name}")
    return rules


def _parse_attack(raw: dict, index: int) -> AttackScenario:
    where = f"attacks[{index}]"
    if not isinstance(raw, dict):
        raise ConfigConstraintError("each attack must be a mapping", (where,))
    for key in raw:
        if key not in _ATTACK_KEYS:
            raise ConfigKeyError(str(key), where=where)
    if "kind" not in raw:
        raise ConfigConstraintError("attack needs a kind", (f"{where}.kind",))
    try:
        kind = AttackKind(str(raw["kind"]))
    except ValueError as exc:
        raise ConfigConstraintError(
            f"unknown attack kind {raw['kind']!r}", (f"{where}.kind",)) from exc
    params = {}
    for key in _ATTACK_PARAM_KEYS:
        if key in raw:
            params[key] = _expect_float(raw[key], f"{where}.{key}")
    attackers: Tuple[int, ...] = ()
    if "nodes" in raw:
        v = raw["nodes"]
        if not isinstance(v, list) or not all(isinstance(x, int) for x in v):
            raise ConfigConstraintError("attack nodes must be a list of ids",
                                        (f"{where}.nodes",))
        attackers = tuple(sorted(v))
    scenario = AttackScenario(
        kind=kind,
        attackers=attackers,
        count=_expect_int(raw.get("count", max(1, len(attackers))), f"{where}.count"),
        start_round=_expect_int(raw.get("start_round", 1), f"{where}.start_round"),
        params=params,
        ensure_watchdogs=_expect_int(raw.get("ensure_watchdogs", 1),
                                     f"{where}.ensure_watchdogs"),
    )
    return scenario


def _rules_to_dict(rules: RuleConfig) -> dict:
    out: dict = {
        "delay_timeout": rules.delay_timeout,
        "repetition_limit": rules.repetition_limit,
        "collision_baseline": rules.collision_baseline,
        "power_threshold": rules.power_threshold,
        "combine_weight": rules.combine_weight,
        "alert_threshold": rules.alert_threshold,
        "integrity_rel_tolerance": rules.integrity_rel_tolerance,
    }
    if rules.interval_min_gap is not None:
        out["interval_min_gap"] = rules.interval_min_gap
    if rules.interval_max_gap is not None:
        out["interval_max_gap"] = rules.interval_max_gap
    if rules.baselines:
        out["expected_failure_rate"] = {r.value: v for r, v in rules.baselines.items()}
    return out


def _scenario_to_dict(s: AttackScenario) -> dict:
    out: dict = {"kind": s.kind.value, "start_round": s.start_round,
                 "ensure_watchdogs": s.ensure_watchdogs}
    if s.attackers:
        out["nodes"] = list(s.attackers)
    else:
        out["count"] = s.count
    out.update(s.params)
    return out


def _expect_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigConstraintError(f"{key} must be an integer", (key,))
    return value


def _expect_float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigConstraintError(f"{key} must be a number", (key,))
    return float(value)


def _expect_pair(value, key: str) -> Tuple[float, float]:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                       for x in value)):
        raise ConfigConstraintError(f"{key} must be a pair of numbers", (key,))
    return (float(value[0]), float(value[1]))
