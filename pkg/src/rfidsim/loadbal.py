"""Post-allocation redistribution of slack from idle nodes to overloaded ones."""

from __future__ import annotations

import enum
import math

from .domain import AllocationPlan, DomainError, PlanEntry, plan_order

TRANSFER_FRAC = 0.5
IDLE_FRAC = 0.25


class LoadClass(enum.Enum):
    OVERLOADED = "OVERLOADED"
    NORMAL = "NORMAL"
    IDLE = "IDLE"


def classify_load(node, pool, idle_frac=IDLE_FRAC) -> LoadClass:
    if not 0 < idle_frac < 1:
        raise DomainError("idle_frac must lie in (0, 1)")
    if node.l_current > pool.l_threshold:
        return LoadClass.OVERLOADED
    if node.l_current < idle_frac * pool.l_threshold:
        return LoadClass.IDLE
    return LoadClass.NORMAL


def rebalance(plan, nodes, pool, transfer_frac=TRANSFER_FRAC, idle_frac=IDLE_FRAC) -> AllocationPlan:
    """Move ``transfer_frac`` of every idle node's grant to the overloaded nodes.

    The pot is shared in proportion to each recipient's excess load over the
    threshold.  The plan total is unchanged.
    """
    if not 0 < transfer_frac <= 1:
        raise DomainError("transfer_frac must lie in (0, 1]")
    by_id = {n.node_id: n for n in nodes}
    for e in plan.entries:
        if e.node_id not in by_id:
            raise DomainError(f"plan names unknown node {e.node_id!r}")

    classes = {nid: classify_load(n, pool, idle_frac) for nid, n in by_id.items()}
    over = sorted(nid for nid, c in classes.items()
                  if c is LoadClass.OVERLOADED and by_id[nid].active)
    if not over:
        return plan

    final = {e.node_id: e.final_hz for e in plan.entries}
    pot = 0.0
    for e in plan.entries:
        if classes.get(e.node_id) is LoadClass.IDLE and e.final_hz > 0:
            give = transfer_frac * e.final_hz
            final[e.node_id] = e.final_hz - give
            pot += give
    if pot == 0:
        return plan

    excess = {nid: by_id[nid].l_current - pool.l_threshold for nid in over}
    total_excess = math.fsum(excess.values())
    # last recipient takes the rounding residue so the plan total is preserved
    handed = 0.0
    for nid in over[:-1]:
        add = pot * excess[nid] / total_excess
        final[nid] = final.get(nid, 0.0) + add
        handed += add
    final[over[-1]] = final.get(over[-1], 0.0) + max(0.0, pot - handed)

    entries = [PlanEntry(e.node_id, e.raw_hz, final[e.node_id]) for e in plan.entries]
    return AllocationPlan(plan.interval_index, plan_order(entries), plan.b_avail_hz)
