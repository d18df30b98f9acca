"""Constant-product pool mechanics driven by a population mean trading rate.

The pool holds ``x0`` risky tokens at time zero and keeps ``X * Y = k``, so the
spot price is ``k / X**2``. Traders buying at aggregate rate ``qbar`` deplete
the reserve, ``X(t) = x0 - int_0^t qbar``, which moves the price by the
permanent-impact drift ``2 k qbar / X(t)**3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FloorViolation


@dataclass(frozen=True)
class PoolConfig:
    k: float
    x0: float
    eps0: float
    sigma0: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError(f"pool.k must be > 0, got {self.k}")
        if not self.x0 > 0:
            raise ConfigError(f"pool.x0 must be > 0, got {self.x0}")
        if not 0 < self.eps0 < self.x0:
            raise ConfigError(f"need 0 < pool.eps0 < pool.x0, got eps0={self.eps0}, x0={self.x0}")
        if not self.sigma0 >= 0:
            raise ConfigError(f"pool.sigma0 must be >= 0, got {self.sigma0}")


@dataclass(frozen=True)
class ControlInterval:
    a_min: float
    a_max: float

    def __post_init__(self):
        if not self.a_min <= 0 <= self.a_max:
            raise ConfigError(
                f"control interval must contain 0: a_min={self.a_min}, a_max={self.a_max}"
            )

    @property
    def max_abs(self) -> float:
        return max(-self.a_min, self.a_max)

    @property
    def width(self) -> float:
        return self.a_max - self.a_min

    @property
    def values(self) -> np.ndarray:
        """Bang-bang control values ``(a_min, 0, a_max)``."""
        return np.array([self.a_min, 0.0, self.a_max])


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigError(f"time.horizon must be > 0, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"time.steps must be an integer >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def index(self, t: float) -> int:
        """Grid node at or before ``t`` (clamped to the grid)."""
        j = int(np.floor(t / self.dt + 1e-9))
        return min(max(j, 0), self.steps)


@dataclass(frozen=True)
class MeanFlow:
    """Mean control rate on a time grid, piecewise linear between nodes."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.steps + 1,):
            raise ValueError(f"flow needs {self.grid.steps + 1} node values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> MeanFlow:
        return cls(grid, np.full(grid.steps + 1, float(value)))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> MeanFlow:
        return cls(grid, np.array([fn(t) for t in grid.nodes], dtype=float))

    def within(self, ctrl: ControlInterval) -> bool:
        return bool(np.all(self.values >= ctrl.a_min) and np.all(self.values <= ctrl.a_max))

    def cumulative(self) -> np.ndarray:
        """Trapezoidal ``int_0^{t_j} qbar`` at every node."""
        v = self.values
        out = np.zeros_like(v)
        out[1:] = np.cumsum(0.5 * (v[:-1] + v[1:]) * self.grid.dt)
        return out

    def at(self, t: float) -> float:
        return float(np.interp(t, self.grid.nodes, self.values))

    def integral_to(self, t: float) -> float:
        """Exact integral of the piecewise-linear interpolant over ``[0, t]``."""
        grid = self.grid
        if t <= 0:
            return 0.0
        t = min(t, grid.horizon)
        cum = self.cumulative()
        j = min(int(np.floor(t / grid.dt)), grid.steps - 1)
        tau = t - grid.nodes[j]
        q_j = self.values[j]
        q_t = self.at(t)
        return float(cum[j] + 0.5 * (q_j + q_t) * tau)

    def shifted(self, offset: float) -> MeanFlow:
        return MeanFlow(self.grid, self.values + offset)


@dataclass(frozen=True)
class ReservePath:
    values: np.ndarray
    eps0: float
    violations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def floor_ok(self) -> bool:
        return self.violations.size == 0

    @property
    def minimum(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    lhs: float
    rhs: float
    message: str

    def __bool__(self):
        return self.passed


def spot_price(pool: PoolConfig, reserve):
    """Constant-product spot price ``k / reserve**2``."""
    r = np.asarray(reserve, dtype=float)
    if np.any(r <= 0):
        raise FloorViolation(f"spot price needs a positive reserve, got {reserve}")
    p = pool.k / r**2
    return float(p) if p.ndim == 0 else p


def reserve_path(pool: PoolConfig, flow: MeanFlow) -> ReservePath:
    x = pool.x0 - flow.cumulative()
    bad = np.flatnonzero(x < pool.eps0)
    return ReservePath(x, pool.eps0, bad)


def reserve_at(pool: PoolConfig, flow: MeanFlow, t: float) -> float:
    return pool.x0 - flow.integral_to(t)


def impact_drift(pool: PoolConfig, flow: MeanFlow, t: float) -> float:
    """Permanent-impact price drift ``2 k qbar(t) / X(t)**3``."""
    x = reserve_at(pool, flow, t)
    if x < pool.eps0:
        raise FloorViolation(f"reserve {x:.6g} below floor {pool.eps0} at t={t}")
    return 2.0 * pool.k * flow.at(t) / x**3


def impact_drift_nodes(pool: PoolConfig, flow: MeanFlow) -> np.ndarray:
    """Impact drift evaluated at every grid node (vectorised)."""
    rp = reserve_path(pool, flow)
    if not rp.floor_ok:
        j = int(rp.violations[0])
        raise FloorViolation(
            f"reserve {rp.values[j]:.6g} below floor {pool.eps0} at t={flow.grid.nodes[j]:.6g}"
        )
    return 2.0 * pool.k * flow.values / rp.values**3


def validate_admissibility(pool: PoolConfig, ctrl: ControlInterval, grid: TimeGrid) -> ValidationReport:
    lhs = ctrl.max_abs
    rhs = (pool.x0 - pool.eps0) / grid.horizon
    ok = lhs < rhs
    rel = "<" if ok else "≥"
    msg = (
        f"admissibility max|a| < (x0 - eps0)/T {'holds' if ok else 'violated'}: "
        f"{lhs:g} {rel} ({pool.x0:g}\u2212{pool.eps0:g})/{grid.horizon:g} = {rhs:g}"
    )
    return ValidationReport(ok, lhs, rhs, msg)


def impact_bound(pool: PoolConfig, ctrl: ControlInterval) -> float:
    return 2.0 * pool.k * ctrl.max_abs / pool.eps0**3


def price_path(pool: PoolConfig, flow: MeanFlow, noise) -> np.ndarray:
    """Pool price at the grid nodes given Wiener increments of the pool noise."""
    dw = np.asarray(noise, dtype=float)
    if dw.shape != (flow.grid.steps,):
        raise ValueError(f"need {flow.grid.steps} noise increments, got shape {dw.shape}")
    rp = reserve_path(pool, flow)
    if not rp.floor_ok:
        j = int(rp.violations[0])
        raise FloorViolation(f"reserve {rp.values[j]:.6g} below floor {pool.eps0} at node {j}")
    w = np.concatenate([[0.0], np.cumsum(dw)])
    return pool.k / rp.values**2 + pool.sigma0 * w
