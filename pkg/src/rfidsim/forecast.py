"""EWMA-with-trend load forecasting for proactive pre-allocation."""

from __future__ import annotations

from .domain import DomainError

ALPHA = 0.3
HORIZON = 5
WINDOW = 100


def ewma_update(prev, obs, alpha):
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    return alpha * obs + (1.0 - alpha) * prev


def predict_load(history, alpha=ALPHA, horizon=HORIZON):
    """Smoothed level plus ``horizon`` steps of smoothed trend, floored at 0."""
    if len(history) == 0:
        raise DomainError("predict_load needs a non-empty history")
    f = Forecaster(alpha, horizon)
    for x in history:
        f.observe(x)
    return f.predict()


def proactive_flag(forecast, pool) -> bool:
    return forecast > pool.l_threshold


class Forecaster:
    """Incremental form of :func:`predict_load`, one per node.

    The level starts at the first observation and the trend at the first
    difference; both are then smoothed with the same ``alpha``.
    """

    __slots__ = ("alpha", "horizon", "level", "trend", "last", "n")

    def __init__(self, alpha=ALPHA, horizon=HORIZON):
        if not 0 < alpha <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        if horizon < 0:
            raise DomainError("horizon must be >= 0")
        self.alpha = alpha
        self.horizon = horizon
        self.level = 0.0
        self.trend = 0.0
        self.last = 0.0
        self.n = 0

    def observe(self, x):
        if self.n == 0:
            self.level = x
        else:
            d = x - self.last
            self.trend = d if self.n == 1 else ewma_update(self.trend, d, self.alpha)
            self.level = ewma_update(self.level, x, self.alpha)
        self.last = x
        self.n += 1

    def predict(self):
        return max(0.0, self.level + self.horizon * self.trend)
