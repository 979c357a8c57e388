"""4G-style comparator: a fixed equal spectrum split plus proportional-fair ordering."""

from __future__ import annotations

from dataclasses import dataclass

from .domain import AllocationPlan, DomainError, PlanEntry, plan_order

T_PF = 100
EPSILON_PF = 1.0  # bps floor on the smoothed throughput


@dataclass(frozen=True)
class PfState:
    avg_tput_bps: dict

    def __post_init__(self):
        if any(v < EPSILON_PF for v in self.avg_tput_bps.values()):
            raise DomainError("avg_tput_bps below the PF floor")

    @classmethod
    def initial(cls, node_ids):
        return cls({nid: EPSILON_PF for nid in node_ids})


def fixed_split(nodes, pool, interval_index=0) -> AllocationPlan:
    """Every node gets ``b_avail / N`` regardless of load or power state."""
    if not nodes:
        raise DomainError("fixed_split needs at least one node")
    share = pool.b_avail_hz / len(nodes)
    entries = [PlanEntry(n.node_id, share, share) for n in nodes]
    return AllocationPlan(interval_index, plan_order(entries), pool.b_avail_hz)


def pf_metric(node, pf, spectral_efficiency=1.0):
    rate = node.allocated_bw_hz * spectral_efficiency
    return rate / pf.avg_tput_bps.get(node.node_id, EPSILON_PF)


def pf_select(nodes, pf, spectral_efficiency=1.0):
    """Node id maximizing instantaneous rate over smoothed throughput, or None.

    Only nodes with queued demand compete; ties go to the smallest node id.
    """
    best = None
    best_key = None
    for n in nodes:
        if n.demand_bits <= 0:
            continue
        key = (-pf_metric(n, pf, spectral_efficiency), n.node_id)
        if best_key is None or key < best_key:
            best, best_key = n.node_id, key
    return best


def pf_order(nodes, pf, spectral_efficiency=1.0):
    """Node ids in the order repeated :func:`pf_select` calls would pick them."""
    waiting = [n for n in nodes if n.demand_bits > 0]
    waiting.sort(key=lambda n: (-pf_metric(n, pf, spectral_efficiency), n.node_id))
    return [n.node_id for n in waiting]


def pf_update(pf, served_bits, t_pf=T_PF, tick_dt_s=1.0) -> PfState:
    """One step of the PF exponential average; nodes absent from ``served_bits`` served 0."""
    if t_pf < 1:
        raise DomainError("t_pf must be >= 1")
    w = 1.0 / t_pf
    avg = {}
    for nid, prev in pf.avg_tput_bps.items():
        rate = served_bits.get(nid, 0.0) / tick_dt_s
        avg[nid] = max(EPSILON_PF, (1.0 - w) * prev + w * rate)
    return PfState(avg)
