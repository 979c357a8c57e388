"""Core value types shared by the allocator, the simulator and the wire protocol.

Loads are dimensionless utilization pressures.  A node's load is the backlog it
holds divided by what its previous allocation could carry in one control
interval, clipped at ``L_CAP``; bandwidths are in Hz and backlogs in bits.
"""

from __future__ import annotations

import enum
import functools
import math
import re
from dataclasses import dataclass, field
from collections import namedtuple
from typing import NamedTuple

TAG_ID_RE = re.compile(r"[A-Za-z0-9]{1,32}")
NODE_ID_RE = re.compile(r"[A-Za-z0-9_-]{1,32}")

# upper bound on the load a starved node can report
L_CAP = 10.0
REL_TOL = 1e-9


class DomainError(ValueError):
    """A value or argument violates a documented invariant."""


class ContractError(DomainError):
    """An operation was called outside its precondition (e.g. on a sleeping node)."""


class PriorityClass(enum.Enum):
    VIP = "VIP"
    STANDARD = "STD"

    @property
    def rank(self) -> int:
        return 0 if self is PriorityClass.VIP else 1


class PowerMode(enum.Enum):
    ACTIVE = "ACTIVE"
    SLEEP = "SLEEP"


class PriorityMix(NamedTuple):
    vip: int = 0
    standard: int = 0

    def add(self, priority: PriorityClass, n: int = 1) -> "PriorityMix":
        if priority is PriorityClass.VIP:
            return PriorityMix(self.vip + n, self.standard)
        return PriorityMix(self.vip, self.standard + n)


def validate_tag_id(token) -> bool:
    """True iff ``token`` is 1-32 ASCII letters or digits."""
    return isinstance(token, str) and TAG_ID_RE.fullmatch(token) is not None


@functools.lru_cache(maxsize=4096)
def _node_id_ok(token):
    return NODE_ID_RE.fullmatch(token) is not None


def validate_node_id(token) -> bool:
    return isinstance(token, str) and _node_id_ok(token)


def _finite_nonneg(name, value):
    # NaN fails the chained comparison, non-numbers raise TypeError
    try:
        ok = 0 <= value < math.inf and value.__class__ is not bool
    except TypeError:
        ok = False
    if not ok:
        raise DomainError(f"{name} must be a finite number >= 0, got {value!r}")


@dataclass(frozen=True)
class TagEvent:
    tag_id: str
    node_id: str
    priority: PriorityClass
    timestamp_ms: int

    def __post_init__(self):
        if not validate_tag_id(self.tag_id):
            raise DomainError(f"invalid tag_id {self.tag_id!r}")
        if not validate_node_id(self.node_id):
            raise DomainError(f"invalid node_id {self.node_id!r}")
        if not isinstance(self.priority, PriorityClass):
            raise DomainError(f"invalid priority {self.priority!r}")
        if not isinstance(self.timestamp_ms, int) or isinstance(self.timestamp_ms, bool) \
                or self.timestamp_ms < 0:
            raise DomainError(f"timestamp_ms must be a non-negative integer, got {self.timestamp_ms!r}")


_NodeFields = namedtuple(
    "_NodeFields",
    "node_id l_current demand_bits usage_rate priority_mix power_mode allocated_bw_hz",
    defaults=(0.0, 0.0, 0.0, PriorityMix(), PowerMode.ACTIVE, 0.0),
)


class NodeState(_NodeFields):
    """Snapshot of one schedulable element for a single control interval.

    Immutable; derive modified copies with ``_replace``, which re-validates.
    """

    __slots__ = ()

    def __new__(cls, *args, **kwargs):
        self = super().__new__(cls, *args, **kwargs)
        if not validate_node_id(self.node_id):
            raise DomainError(f"invalid node_id {self.node_id!r}")
        _finite_nonneg("l_current", self.l_current)
        _finite_nonneg("demand_bits", self.demand_bits)
        _finite_nonneg("usage_rate", self.usage_rate)
        _finite_nonneg("allocated_bw_hz", self.allocated_bw_hz)
        if not isinstance(self.power_mode, PowerMode):
            raise DomainError(f"invalid power_mode {self.power_mode!r}")
        if min(self.priority_mix) < 0:
            raise DomainError("priority_mix counts must be >= 0")
        if self.power_mode is PowerMode.SLEEP and self.allocated_bw_hz != 0:
            raise DomainError(f"{self.node_id}: a sleeping node cannot hold bandwidth")
        return self

    def _replace(self, **changes):
        values = [changes.pop(f, v) for f, v in zip(self._fields, self)]
        if changes:
            raise TypeError(f"unknown NodeState fields {sorted(changes)}")
        return NodeState(*values)

    @classmethod
    def trusted(cls, *values):
        """Build without validation, for callers whose inputs are valid by construction."""
        return tuple.__new__(cls, values)

    @property
    def is_vip(self) -> bool:
        return self.priority_mix.vip > 0

    @property
    def active(self) -> bool:
        return self.power_mode is PowerMode.ACTIVE


@dataclass(frozen=True)
class Pool:
    b_avail_hz: float
    l_threshold: float
    sensitivity_k: float = 1.0

    def __post_init__(self):
        _finite_nonneg("b_avail_hz", self.b_avail_hz)
        _finite_nonneg("l_threshold", self.l_threshold)
        _finite_nonneg("sensitivity_k", self.sensitivity_k)
        if self.b_avail_hz == 0:
            raise DomainError("b_avail_hz must be > 0")
        if self.sensitivity_k == 0:
            raise DomainError("sensitivity_k must be > 0")


class PlanEntry(NamedTuple):
    node_id: str
    raw_hz: float
    final_hz: float


def plan_order(entries):
    """Descending final allocation, ties by ascending node id."""
    return tuple(sorted(entries, key=lambda e: (-e.final_hz, e.node_id)))


@dataclass(frozen=True)
class AllocationPlan:
    interval_index: int
    entries: tuple
    b_avail_hz: float
    total_final_hz: float = field(init=False)

    def __post_init__(self):
        entries = tuple(e if e.__class__ is PlanEntry else PlanEntry(*e) for e in self.entries)
        if len({e.node_id for e in entries}) != len(entries):
            raise DomainError("plan lists a node more than once")
        try:
            ok = all(0 <= e.raw_hz < math.inf and 0 <= e.final_hz < math.inf for e in entries)
        except TypeError:
            ok = False
        if not ok:
            for e in entries:
                _finite_nonneg(f"{e.node_id}.raw_hz", e.raw_hz)
                _finite_nonneg(f"{e.node_id}.final_hz", e.final_hz)
        total = math.fsum([e.final_hz for e in entries])
        if total > self.b_avail_hz * (1 + REL_TOL):
            raise DomainError(f"plan total {total} Hz exceeds pool {self.b_avail_hz} Hz")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "total_final_hz", total)

    def final(self) -> dict:
        return {e.node_id: e.final_hz for e in self.entries}

    def get(self, node_id) -> PlanEntry:
        for e in self.entries:
            if e.node_id == node_id:
                return e
        raise KeyError(node_id)
