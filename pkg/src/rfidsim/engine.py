"""Deterministic tick-driven simulator comparing the RFID controller with the 4G baseline.

Each control interval runs the same fixed pipeline: ingest arrivals, measure
load, (RFID only) forecast and sleep decisions, allocate, (RFID only)
rebalance, serve queues, account energy, record traces.

Randomness comes from a single numpy ``Generator`` over the PCG64 bit
generator seeded with the scenario seed, so a (scenario, seed, policy) triple
always yields the same report.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import __version__
from .allocator import allocate
from .baseline import T_PF, PfState, fixed_split, pf_order, pf_update
from .domain import L_CAP, DomainError, NodeState, PowerMode
from .energy import accumulate_energy, power_draw, update_sleep
from .forecast import Forecaster, ewma_update, proactive_flag
from .loadbal import LoadClass, classify_load, rebalance

USAGE_ALPHA = 0.3


class Policy(enum.Enum):
    RFID = "rfid"
    BASELINE4G = "baseline4g"


class Packet(NamedTuple):
    arrival_tick: int
    size_bits: int
    node_id: str


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


@functools.lru_cache(maxsize=64)
def _arrival_means(scenario):
    return np.array([n.arrival_rate_pps * scenario.tick_dt_s for n in scenario.nodes])


def _arrival_sizes(scenario, rng, tick):
    """Per-node lists of packet sizes arriving this tick (None when nothing arrives)."""
    if scenario.traffic_stop_tick is not None and tick >= scenario.traffic_stop_tick:
        return None
    counts = rng.poisson(_arrival_means(scenario)).tolist()
    total = sum(counts)
    if total == 0:
        return None
    if scenario.packet_size == "uniform":
        sizes = rng.integers(scenario.packet_size_min_bits, scenario.packet_size_max_bits,
                             size=total, endpoint=True).tolist()
        out, k = [], 0
        for c in counts:
            out.append(sizes[k:k + c])
            k += c
        return out
    size = scenario.packet_size_bits
    return [[size] * c for c in counts]


def generate_traffic(scenario, rng, tick):
    """Poisson packet arrivals for one tick, in node order."""
    per_node = _arrival_sizes(scenario, rng, tick)
    if per_node is None:
        return []
    return [Packet(tick, size, spec.node_id)
            for spec, sizes in zip(scenario.nodes, per_node) for size in sizes]


def serve_queue(queue, capacity_bits, tick, tick_dt_s):
    """Pop whole packets off the head of ``queue`` while they fit in ``capacity_bits``.

    ``queue`` is a deque of ``(arrival_tick, size_bits)`` and is consumed in
    place.  Returns ``(delivered, queue)`` with delivered ``(size_bits, latency_ms)``
    pairs; unused capacity is lost.
    """
    delivered = []
    left = capacity_bits
    step_ms = tick_dt_s * 1000.0
    while queue and queue[0][1] <= left:
        arrival, size = queue.popleft()
        left -= size
        delivered.append((size, (tick - arrival + 1) * step_ms))
    return delivered, queue


def _pct(x):
    # round half up, clamped to a percentage
    return int(min(100, max(0, math.floor(x + 0.5))))


def plan_pressure(demand_bits, final_hz, se, dt):
    cap = final_hz * se * dt
    if demand_bits <= 0:
        return 0.0
    if cap <= 0:
        return L_CAP
    return min(demand_bits / cap, L_CAP)


@dataclass(frozen=True)
class TickResult:
    tick: int
    plan: object
    served_bits: float
    delivered: int
    served_by_node: tuple
    bandwidth_optimized_pct: int
    load_reduced_pct: int


@dataclass(frozen=True)
class MetricsReport:
    policy: str
    scenario_name: str
    scenario_digest: str
    seed: int
    duration_ticks: int
    tick_dt_s: float
    spectrum_utilization: float
    mean_latency_ms: float
    throughput_bps: float
    energy_joules: float
    arrived_packets: int
    delivered_packets: int
    delivered_bits: int
    queued_packets: int
    traces: dict
    tool_version: str = __version__

    def __post_init__(self):
        for k in ("spectrum_utilization", "mean_latency_ms", "throughput_bps", "energy_joules"):
            v = getattr(self, k)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{k} must be finite and >= 0, got {v}")
        if self.spectrum_utilization > 1 + 1e-12:
            raise DomainError("spectrum_utilization exceeds 1")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Simulation:
    """Mutable simulation state plus the per-tick pipeline.

    ``traffic=False`` disables the scenario's Poisson sources; demand then only
    enters through :meth:`step`'s ``tags`` argument (feed replay).
    """

    def __init__(self, scenario, policy, seed=None, traffic=True):
        self.scenario = scenario
        self.policy = Policy(policy)
        self.seed = scenario.seed if seed is None else seed
        self.traffic = traffic
        self.rng = make_rng(self.seed)
        self.tick = 0

        s = scenario
        self.ids = s.node_ids
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        n = len(self.ids)
        share = s.pool.b_avail_hz / n
        self.queues = [deque() for _ in range(n)]
        self.backlog = [0] * n
        self.alloc = [share] * n
        self.usage = [0.0] * n
        self.mode = [PowerMode.ACTIVE] * n
        self.streak = [0] * n
        self.mix = [spec.priority_mix for spec in s.nodes]
        self.tag_home = {}
        self.forecasters = [Forecaster(s.forecast_alpha, s.forecast_horizon) for _ in range(n)]
        self.pf = PfState.initial(self.ids)

        self.arrived = 0
        self.delivered = 0
        self.delivered_bits = 0
        self.latency_sum_ms = 0.0
        self.trace_util = []
        self.trace_latency = []
        self.trace_tput = []
        self.trace_power = []
        self.power_rows = []

    # tags move between nodes: the latest sighting decides where a tag lives
    def _ingest_tag(self, ev):
        i = self.index.get(ev.node_id)
        if i is None:
            raise DomainError(f"tag {ev.tag_id} names unknown node {ev.node_id!r}")
        prev = self.tag_home.get(ev.tag_id)
        if prev is not None:
            j, pri = prev
            self.mix[j] = self.mix[j].add(pri, -1)
        self.mix[i] = self.mix[i].add(ev.priority, 1)
        self.tag_home[ev.tag_id] = (i, ev.priority)
        size = self.scenario.bits_per_tag_event
        self.queues[i].append((self.tick, size))
        self.backlog[i] += size
        self.arrived += 1

    def step(self, tags=()):
        s = self.scenario
        pool = s.pool
        dt = s.tick_dt_s
        se = s.spectral_efficiency
        t = self.tick
        rfid = self.policy is Policy.RFID
        n = len(self.ids)

        # 1. arrivals
        if self.traffic:
            per_node = _arrival_sizes(s, self.rng, t)
            if per_node is not None:
                for i, sizes in enumerate(per_node):
                    if sizes:
                        self.queues[i].extend([(t, b) for b in sizes])
                        self.backlog[i] += sum(sizes)
                        self.arrived += len(sizes)
        for ev in tags:
            self._ingest_tag(ev)

        # 2. load against what the previous grant could carry
        loads = [plan_pressure(self.backlog[i], self.alloc[i], se, dt) for i in range(n)]

        # every field here was produced or validated by the engine itself
        trusted = NodeState.trusted
        active, asleep = PowerMode.ACTIVE, PowerMode.SLEEP
        nodes = [trusted(self.ids[i], loads[i], self.backlog[i], self.usage[i], self.mix[i], active, 0.0)
                 for i in range(n)]

        # 3. forecasting and sleep (RFID only); the forecast may only raise the load fed to allocation
        if rfid:
            for i in range(n):
                f = self.forecasters[i]
                f.observe(loads[i])
                fc = f.predict()
                self.mode[i], self.streak[i] = update_sleep(nodes[i], s.sleep, pool, self.streak[i])
                lc = fc if proactive_flag(fc, pool) and fc > loads[i] else loads[i]
                if lc != loads[i] or self.mode[i] is asleep:
                    nodes[i] = trusted(self.ids[i], lc, self.backlog[i], self.usage[i], self.mix[i],
                                       self.mode[i], 0.0)

        # 4-5. allocation, then rebalancing
        if rfid:
            pre = allocate(nodes, pool, t)
            plan = rebalance(pre, nodes, pool, s.transfer_frac, s.sleep.idle_frac)
            bw_pct = _pct(100.0 * plan.total_final_hz / pool.b_avail_hz)
            load_pct = self._load_reduced(nodes, pre, plan)
        else:
            plan = fixed_split(nodes, pool, t)
            bw_pct = _pct(100.0 * plan.total_final_hz / pool.b_avail_hz)
            load_pct = 0
        final = plan.final()
        grant = [final[nid] for nid in self.ids]

        # 6. service
        served = [0] * n
        tick_delivered = 0
        tick_latency = 0.0
        if not rfid and s.contention_mode:
            order = pf_order(
                [trusted(nd.node_id, nd.l_current, nd.demand_bits, nd.usage_rate, nd.priority_mix, active, grant[i])
                 for i, nd in enumerate(nodes)],
                self.pf, se)
            left = pool.b_avail_hz * se * dt
            for nid in order:
                i = self.index[nid]
                got, _ = serve_queue(self.queues[i], left, t, dt)
                for size, lat in got:
                    served[i] += size
                    tick_latency += lat
                tick_delivered += len(got)
                left -= served[i]
        else:
            for i in range(n):
                got, _ = serve_queue(self.queues[i], grant[i] * se * dt, t, dt)
                for size, lat in got:
                    served[i] += size
                    tick_latency += lat
                tick_delivered += len(got)
        if not rfid:
            self.pf = pf_update(self.pf, dict(zip(self.ids, served)), T_PF, dt)

        served_total = sum(served)
        for i in range(n):
            self.backlog[i] -= served[i]
            self.usage[i] = ewma_update(self.usage[i], served[i] / dt, USAGE_ALPHA)
        self.alloc = grant

        # 7. energy
        row = [power_draw(nodes[i].power_mode, grant[i], s.power) for i in range(n)]
        self.power_rows.append(row)

        # 8. traces
        self.delivered += tick_delivered
        self.delivered_bits += served_total
        self.latency_sum_ms += tick_latency
        self.trace_util.append(served_total / (pool.b_avail_hz * se * dt))
        self.trace_latency.append(tick_latency / tick_delivered if tick_delivered else 0.0)
        self.trace_tput.append(served_total / dt)
        self.trace_power.append(math.fsum(row))
        self.tick += 1
        return TickResult(t, plan, served_total, tick_delivered, tuple(served), bw_pct, load_pct)

    def _load_reduced(self, nodes, pre, post):
        """Relative drop in mean excess load of overloaded nodes caused by rebalancing."""
        s = self.scenario
        pool = s.pool
        over = [nd for nd in nodes
                if nd.active and classify_load(nd, pool, s.sleep.idle_frac) is LoadClass.OVERLOADED]
        if not over:
            return 0
        f_pre, f_post = pre.final(), post.final()
        before = math.fsum(
            max(0.0, plan_pressure(nd.demand_bits, f_pre[nd.node_id], s.spectral_efficiency, s.tick_dt_s)
                - pool.l_threshold) for nd in over) / len(over)
        after = math.fsum(
            max(0.0, plan_pressure(nd.demand_bits, f_post[nd.node_id], s.spectral_efficiency, s.tick_dt_s)
                - pool.l_threshold) for nd in over) / len(over)
        if before <= 0:
            return 0
        return _pct(100.0 * (before - after) / before)

    @property
    def queued(self):
        return sum(len(q) for q in self.queues)

    def digest(self):
        """Hash of everything that determines future behaviour and past output."""
        state = {
            "tick": self.tick,
            "queues": [list(q) for q in self.queues],
            "backlog": self.backlog,
            "alloc": self.alloc,
            "usage": self.usage,
            "mode": [m.value for m in self.mode],
            "streak": self.streak,
            "mix": [list(m) for m in self.mix],
            "forecast": [[f.level, f.trend, f.last, f.n] for f in self.forecasters],
            "pf": sorted(self.pf.avg_tput_bps.items()),
            "rng": repr(self.rng.bit_generator.state),
            "traces": [self.trace_util, self.trace_latency, self.trace_tput, self.trace_power],
        }
        return hashlib.sha256(json.dumps(state, sort_keys=True).encode()).hexdigest()

    def report(self):
        s = self.scenario
        ticks = self.tick
        if ticks == 0:
            raise DomainError("no ticks simulated")
        return MetricsReport(
            policy=self.policy.value,
            scenario_name=s.name,
            scenario_digest=s.digest(),
            seed=self.seed,
            duration_ticks=ticks,
            tick_dt_s=s.tick_dt_s,
            spectrum_utilization=min(1.0, math.fsum(self.trace_util) / ticks),
            mean_latency_ms=self.latency_sum_ms / self.delivered if self.delivered else 0.0,
            throughput_bps=self.delivered_bits / (ticks * s.tick_dt_s),
            energy_joules=accumulate_energy(self.power_rows, s.tick_dt_s),
            arrived_packets=self.arrived,
            delivered_packets=self.delivered,
            delivered_bits=self.delivered_bits,
            queued_packets=self.queued,
            traces={
                "spectrum_utilization": list(self.trace_util),
                "latency_ms": list(self.trace_latency),
                "throughput_bps": list(self.trace_tput),
                "power_w": list(self.trace_power),
            },
        )


def run(scenario, policy, seed=None, duration_ticks=None):
    ticks = scenario.duration_ticks if duration_ticks is None else duration_ticks
    if ticks < 1:
        raise DomainError("duration must be at least one tick")
    sim = Simulation(scenario, policy, seed)
    for _ in range(ticks):
        sim.step()
    return sim.report()
