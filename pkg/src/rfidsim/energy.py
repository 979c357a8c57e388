"""Affine base-station power model and idle-sleep management."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import DomainError, PowerMode
from .loadbal import IDLE_FRAC, LoadClass, classify_load


@dataclass(frozen=True)
class PowerParams:
    p_sleep_w: float = 2.0
    p_base_w: float = 10.0
    k_dyn_w_per_hz: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.p_sleep_w < self.p_base_w:
            raise DomainError("need 0 <= p_sleep_w < p_base_w")
        if self.k_dyn_w_per_hz < 0:
            raise DomainError("k_dyn_w_per_hz must be >= 0")


@dataclass(frozen=True)
class SleepPolicy:
    idle_frac: float = IDLE_FRAC
    idle_ticks_to_sleep: int = 10
    wake_on_demand: bool = True

    def __post_init__(self):
        if self.idle_ticks_to_sleep < 1:
            raise DomainError("idle_ticks_to_sleep must be >= 1")
        if not 0 < self.idle_frac < 1:
            raise DomainError("idle_frac must lie in (0, 1)")
        if not self.wake_on_demand:
            raise DomainError("wake_on_demand cannot be disabled")


def node_power(node, params) -> float:
    return power_draw(node.power_mode, node.allocated_bw_hz, params)


def power_draw(mode, allocated_bw_hz, params) -> float:
    if mode is PowerMode.SLEEP:
        return params.p_sleep_w
    return params.p_base_w + params.k_dyn_w_per_hz * allocated_bw_hz


def update_sleep(node, policy, pool, idle_streak):
    """Return ``(power_mode, idle_streak)`` for the coming tick.

    Queued demand wakes a node immediately.  An idle node with nothing queued
    sleeps once it has been idle for ``idle_ticks_to_sleep`` consecutive ticks.
    """
    if node.demand_bits > 0:
        return PowerMode.ACTIVE, 0
    if classify_load(node, pool, policy.idle_frac) is LoadClass.IDLE:
        streak = idle_streak + 1
        if streak >= policy.idle_ticks_to_sleep:
            return PowerMode.SLEEP, streak
        return PowerMode.ACTIVE, streak
    return PowerMode.ACTIVE, 0


def accumulate_energy(trace, tick_dt_s) -> float:
    """Joules for a trace of per-tick rows of per-node watts."""
    if tick_dt_s <= 0:
        raise DomainError("tick_dt_s must be > 0")
    return math.fsum(w * tick_dt_s for row in trace for w in row)
