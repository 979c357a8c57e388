"""Experiment descriptions and their TOML file format.

A scenario file is a handful of flat tables plus one ``[[node_group]]`` entry
per population of identical nodes.  Node ids are assigned in file order as
``<id_prefix><running index>`` (``N0``, ``N1``, ...).  Every key is optional
except ``node_group``; omitted keys take the defaults below.  Unknown keys are
rejected so typos surface as diagnostics instead of silently using a default.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .domain import DomainError, Pool, PriorityMix, validate_node_id
from .energy import PowerParams, SleepPolicy
from .forecast import ALPHA, HORIZON, WINDOW
from .loadbal import TRANSFER_FRAC


class ScenarioError(DomainError):
    """Raised with one ``field: problem`` diagnostic per violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    arrival_rate_pps: float = 0.0
    vip_tags: int = 0
    standard_tags: int = 0

    @property
    def priority_mix(self):
        return PriorityMix(self.vip_tags, self.standard_tags)


@dataclass(frozen=True)
class Scenario:
    nodes: tuple
    pool: Pool
    tick_dt_s: float = 0.01
    duration_ticks: int = 1000
    seed: int = 0
    name: str = "unnamed"
    spectral_efficiency: float = 1.0
    contention_mode: bool = False
    traffic_stop_tick: int | None = None
    packet_size: str = "fixed"
    packet_size_bits: int = 12_000
    packet_size_min_bits: int = 12_000
    packet_size_max_bits: int = 12_000
    power: PowerParams = field(default_factory=PowerParams)
    sleep: SleepPolicy = field(default_factory=SleepPolicy)
    forecast_alpha: float = ALPHA
    forecast_horizon: int = HORIZON
    forecast_window: int = WINDOW
    transfer_frac: float = TRANSFER_FRAC
    bits_per_tag_event: int = 12_000

    def __post_init__(self):
        problems = _check(self)
        if problems:
            raise ScenarioError(problems)

    @property
    def node_ids(self):
        return [n.node_id for n in self.nodes]

    def to_dict(self):
        d = asdict(self)
        d["nodes"] = [asdict(n) for n in self.nodes]
        return d

    def digest(self):
        """SHA-256 over the canonical JSON form, seed excluded."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["nodes"] = tuple(NodeSpec(**n) for n in d["nodes"])
        d["pool"] = Pool(**d["pool"])
        d["power"] = PowerParams(**d["power"])
        d["sleep"] = SleepPolicy(**d["sleep"])
        return cls(**d)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check(s):
    p = []
    if not _num(s.tick_dt_s) or s.tick_dt_s <= 0:
        p.append("sim.tick_dt_s: must be > 0")
    if not _int(s.duration_ticks) or s.duration_ticks < 1:
        p.append("sim.duration_ticks: must be an integer >= 1")
    if not _int(s.seed) or not 0 <= s.seed < 2**64:
        p.append("sim.seed: must be an integer in [0, 2**64)")
    if not _num(s.spectral_efficiency) or s.spectral_efficiency <= 0:
        p.append("sim.spectral_efficiency: must be > 0")
    if s.traffic_stop_tick is not None and (not _int(s.traffic_stop_tick) or s.traffic_stop_tick < 0):
        p.append("sim.traffic_stop_tick: must be an integer >= 0")
    if s.packet_size not in ("fixed", "uniform"):
        p.append("traffic.packet_size: must be 'fixed' or 'uniform'")
    for key in ("packet_size_bits", "packet_size_min_bits", "packet_size_max_bits", "bits_per_tag_event"):
        v = getattr(s, key)
        if not _int(v) or v < 1:
            sec = "replay" if key == "bits_per_tag_event" else "traffic"
            p.append(f"{sec}.{key}: must be an integer >= 1")
    if s.packet_size == "uniform" and _int(s.packet_size_min_bits) and _int(s.packet_size_max_bits) \
            and s.packet_size_min_bits > s.packet_size_max_bits:
        p.append("traffic.packet_size_min_bits: must not exceed packet_size_max_bits")
    if not _num(s.forecast_alpha) or not 0 < s.forecast_alpha <= 1:
        p.append("forecast.alpha: must lie in (0, 1]")
    if not _int(s.forecast_horizon) or s.forecast_horizon < 0:
        p.append("forecast.horizon: must be an integer >= 0")
    if not _int(s.forecast_window) or s.forecast_window < 1:
        p.append("forecast.window: must be an integer >= 1")
    if not _num(s.transfer_frac) or not 0 < s.transfer_frac <= 1:
        p.append("rebalance.transfer_frac: must lie in (0, 1]")
    if not s.nodes:
        p.append("node_group: at least one node is required")
    seen = set()
    for n in s.nodes:
        if not validate_node_id(n.node_id):
            p.append(f"node_group.id_prefix: {n.node_id!r} is not a valid node id")
        if n.node_id in seen:
            p.append(f"node_group: duplicate node id {n.node_id!r}")
        seen.add(n.node_id)
        if not _num(n.arrival_rate_pps) or n.arrival_rate_pps < 0:
            p.append(f"node_group.arrival_rate_pps: must be >= 0 (node {n.node_id})")
        if not _int(n.vip_tags) or not _int(n.standard_tags) or n.vip_tags < 0 or n.standard_tags < 0:
            p.append(f"node_group.vip_tags/standard_tags: must be integers >= 0 (node {n.node_id})")
    return p


# file section -> {toml key: Scenario attribute}
_SECTIONS = {
    "sim": {
        "tick_dt_s": "tick_dt_s", "duration_ticks": "duration_ticks", "seed": "seed",
        "spectral_efficiency": "spectral_efficiency", "contention_mode": "contention_mode",
        "traffic_stop_tick": "traffic_stop_tick",
    },
    "traffic": {
        "packet_size": "packet_size", "packet_size_bits": "packet_size_bits",
        "packet_size_min_bits": "packet_size_min_bits", "packet_size_max_bits": "packet_size_max_bits",
    },
    "forecast": {"alpha": "forecast_alpha", "horizon": "forecast_horizon", "window": "forecast_window"},
    "rebalance": {"transfer_frac": "transfer_frac"},
    "replay": {"bits_per_tag_event": "bits_per_tag_event"},
}
_POOL_KEYS = ("b_avail_hz", "l_threshold", "sensitivity_k")
_ENERGY_KEYS = ("p_sleep_w", "p_base_w", "k_dyn_w_per_hz")
_SLEEP_KEYS = ("idle_frac", "idle_ticks_to_sleep")
_GROUP_KEYS = ("count", "arrival_rate_pps", "vip_tags", "standard_tags", "id_prefix")


def _table(doc, name, allowed, problems):
    t = doc.get(name, {})
    if not isinstance(t, dict):
        problems.append(f"{name}: must be a table")
        return {}
    for k in t:
        if k not in allowed:
            problems.append(f"{name}.{k}: unknown key")
    return {k: v for k, v in t.items() if k in allowed}


def _build(ctor, section, kwargs, problems):
    try:
        return ctor(**kwargs)
    except (DomainError, TypeError) as exc:
        problems.append(f"{section}: {exc}")
        return None


def scenario_from_toml(text):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"syntax: {exc}"]) from None
    return scenario_from_doc(doc)


def scenario_from_doc(doc):
    problems = []
    known = set(_SECTIONS) | {"name", "description", "pool", "energy", "sleep", "node_group"}
    for k in doc:
        if k not in known:
            problems.append(f"{k}: unknown key")

    kwargs = {}
    if "name" in doc:
        kwargs["name"] = str(doc["name"])
    for section, keys in _SECTIONS.items():
        for k, v in _table(doc, section, keys, problems).items():
            kwargs[keys[k]] = v

    pool_kw = _table(doc, "pool", _POOL_KEYS, problems)
    for k in ("b_avail_hz", "l_threshold"):
        if k not in pool_kw:
            problems.append(f"pool.{k}: required")
    pool = None
    if not problems:
        pool = _build(Pool, "pool", pool_kw, problems)
    power = _build(PowerParams, "energy", _table(doc, "energy", _ENERGY_KEYS, problems), problems)
    sleep = _build(SleepPolicy, "sleep", _table(doc, "sleep", _SLEEP_KEYS, problems), problems)

    nodes = []
    groups = doc.get("node_group", [])
    if not isinstance(groups, list):
        problems.append("node_group: must be an array of tables ([[node_group]])")
        groups = []
    for gi, g in enumerate(groups):
        for k in g:
            if k not in _GROUP_KEYS:
                problems.append(f"node_group[{gi}].{k}: unknown key")
        count = g.get("count", 1)
        if not _int(count) or count < 1:
            problems.append(f"node_group[{gi}].count: must be an integer >= 1")
            continue
        prefix = g.get("id_prefix", "N")
        for _ in range(count):
            nodes.append(NodeSpec(
                node_id=f"{prefix}{len(nodes)}",
                arrival_rate_pps=g.get("arrival_rate_pps", 0.0),
                vip_tags=g.get("vip_tags", 0),
                standard_tags=g.get("standard_tags", 0),
            ))

    if problems:
        raise ScenarioError(problems)
    return Scenario(nodes=tuple(nodes), pool=pool, power=power, sleep=sleep, **kwargs)


def load_scenario(path):
    """Read and validate a scenario file; ``OSError`` propagates untouched."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioError([f"encoding: not UTF-8 ({exc})"]) from None
    return scenario_from_toml(text)
