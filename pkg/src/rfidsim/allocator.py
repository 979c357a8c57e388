"""Sigmoid bandwidth allocation with VIP-first, usage-proportional normalization.

Every active node is granted ``B_avail / (1 + exp(-k (L_current - L_threshold)))``
in isolation.  Those grants oversubscribe the pool as soon as more than one node
is loaded, so :func:`allocate` resolves the conflict: nodes hosting VIP tags are
granted their sigmoid value first (scaled down together if they alone exceed the
pool), and the remainder is split across the other nodes in proportion to their
recent usage, each capped at its own sigmoid value.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .domain import AllocationPlan, ContractError, DomainError, PlanEntry, plan_order


class RawAllocation(NamedTuple):
    node_id: str
    sigmoid_fraction: float
    raw_hz: float


def sigmoid_share(l_current, l_threshold, sensitivity_k=1.0):
    """Logistic fraction of the pool a node at ``l_current`` may claim."""
    if not (math.isfinite(l_current) and math.isfinite(l_threshold) and math.isfinite(sensitivity_k)):
        raise DomainError("sigmoid_share needs finite inputs")
    if sensitivity_k <= 0:
        raise DomainError("sensitivity_k must be > 0")
    x = sensitivity_k * (l_current - l_threshold)
    # branch on sign so exp never overflows
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def raw_allocation(node, pool) -> RawAllocation:
    if not node.active:
        raise ContractError(f"{node.node_id} is asleep and cannot be allocated")
    frac = sigmoid_share(node.l_current, pool.l_threshold, pool.sensitivity_k)
    return RawAllocation(node.node_id, frac, frac * pool.b_avail_hz)


def _check_nodes(nodes):
    if not nodes:
        raise DomainError("allocate needs at least one node")
    ids = [n.node_id for n in nodes]
    if len(set(ids)) != len(ids):
        raise DomainError("node ids must be distinct")


def allocate(nodes, pool, interval_index=0) -> AllocationPlan:
    _check_nodes(nodes)
    b = pool.b_avail_hz
    raw = {n.node_id: raw_allocation(n, pool).raw_hz for n in nodes if n.active}
    final = {n.node_id: 0.0 for n in nodes}

    vip = [n for n in nodes if n.active and n.is_vip]
    std = [n for n in nodes if n.active and not n.is_vip]

    vip_sum = math.fsum(raw[n.node_id] for n in vip)
    scale = b / vip_sum if vip_sum > b else 1.0
    for n in vip:
        final[n.node_id] = raw[n.node_id] * scale
    remaining = b - math.fsum(final[n.node_id] for n in vip)

    if std and remaining > 0 and scale == 1.0:
        usage = math.fsum(n.usage_rate for n in std)
        for n in std:
            share = n.usage_rate / usage if usage > 0 else 1.0 / len(std)
            final[n.node_id] = min(remaining * share, raw[n.node_id])

    entries = [PlanEntry(n.node_id, raw.get(n.node_id, 0.0), final[n.node_id]) for n in nodes]
    return AllocationPlan(interval_index, plan_order(entries), b)
