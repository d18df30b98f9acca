"""Reward functionals of the representative trader and the bang-bang Hamiltonian.

The objective maximised by a trader is

    E[ int_0^T (X_t D(t) - h(t, X_t)) dt - l(X_T) ]

where ``D`` is the pool's permanent-impact drift. The running reward does not
depend on the trader's own control, and the state drift is the control itself,
so the Hamiltonian is affine in the control and its maximisers sit at the
endpoints of the control interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError
from .pool import ControlInterval, MeanFlow, PoolConfig, ValidationReport, impact_drift


class CostFamily(str, Enum):
    QUADRATIC = "quadratic"
    LINEAR_TERMINAL = "linear_terminal"
    ZERO = "zero"


@dataclass(frozen=True)
class CostModel:
    """Holding cost ``h`` and terminal cost ``l``.

    * quadratic: ``h(t, x) = phi_h x**2``, ``l(x) = phi_l x**2``
    * linear_terminal: ``h = 0``, ``l(x) = -c_l x`` (terminal reward ``c_l x``)
    * zero: ``h = l = 0``

    ``c1`` is the constant of the exponential growth bound
    ``|h| + |l| <= c1 exp(c1 |x|)``.
    """

    family: CostFamily = CostFamily.ZERO
    phi_h: float = 0.0
    phi_l: float = 0.0
    c_l: float = 0.0
    c1: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", CostFamily(self.family))
        if not self.c1 > 0:
            raise ConfigError(f"cost.c1 must be > 0, got {self.c1}")
        if self.family is CostFamily.QUADRATIC and (self.phi_h < 0 or self.phi_l < 0):
            raise ConfigError(f"quadratic cost needs phi_h, phi_l >= 0, got {self.phi_h}, {self.phi_l}")

    @classmethod
    def quadratic(cls, phi_h: float = 0.0, phi_l: float = 0.0, c1: float = 1.0) -> CostModel:
        return cls(CostFamily.QUADRATIC, phi_h=phi_h, phi_l=phi_l, c1=c1)

    @classmethod
    def linear_terminal(cls, c_l: float = 1.0, c1: float = 1.0) -> CostModel:
        return cls(CostFamily.LINEAR_TERMINAL, c_l=c_l, c1=c1)

    @classmethod
    def zero(cls, c1: float = 1.0) -> CostModel:
        return cls(CostFamily.ZERO, c1=c1)

    def holding(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.family is CostFamily.QUADRATIC:
            return self.phi_h * x**2
        return np.zeros_like(x)

    def terminal_cost(self, x):
        x = np.asarray(x, dtype=float)
        if self.family is CostFamily.QUADRATIC:
            return self.phi_l * x**2
        if self.family is CostFamily.LINEAR_TERMINAL:
            return -self.c_l * x
        return np.zeros_like(x)


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"noise.sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class ArgmaxSet:
    """Maximisers of ``a -> z a / sigma`` over the control interval."""

    lo: float
    hi: float
    representative: float

    @property
    def unique(self) -> bool:
        return self.lo == self.hi


@dataclass(frozen=True)
class GrowthReport(ValidationReport):
    binding_x: float = float("nan")
    failing_x: tuple = ()
    tail_ok: bool = True


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def running_reward(t, x, pool: PoolConfig, flow: MeanFlow, cost: CostModel, a=None):
    """``x * D(t) - h(t, x)``; the control argument is accepted and ignored."""
    d = impact_drift(pool, flow, t)
    return _scalar(np.asarray(x, dtype=float) * d - cost.holding(t, x))


def terminal_reward(x, cost: CostModel):
    return _scalar(-cost.terminal_cost(x))


def validate_growth_bound(cost: CostModel, check_domain=(-10.0, 10.0), samples: int = 201) -> GrowthReport:
    """Check ``|h| + |l| <= c1 exp(c1 |x|)`` on a sampled domain plus the analytic tail.

    All shipped families are polynomial of degree <= 2, which every exponential
    eventually dominates, so the tail test always passes; the sampled test is
    what can fail. ``lhs``/``rhs`` are taken at the binding sample (largest
    ratio of cost to bound).
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    lo, hi = check_domain
    xs = np.linspace(lo, hi, samples)
    lhs = np.abs(cost.holding(0.0, xs)) + np.abs(cost.terminal_cost(xs))
    rhs = cost.c1 * np.exp(cost.c1 * np.abs(xs))
    ratio = lhs / rhs
    b = int(np.argmax(ratio))
    failing = tuple(float(v) for v in xs[lhs > rhs])
    ok = not failing
    msg = (
        f"growth bound |h|+|l| <= c1 e^(c1|x|) {'holds' if ok else 'violated'} on [{lo:g}, {hi:g}]; "
        f"binding x = {xs[b]:g}: {lhs[b]:g} {'<=' if lhs[b] <= rhs[b] else '>'} {rhs[b]:g}"
    )
    return GrowthReport(ok, float(lhs[b]), float(rhs[b]), msg, float(xs[b]), failing, True)


def hamiltonian(t, x, pool, flow, cost, z, a, noise: NoiseConfig):
    return running_reward(t, x, pool, flow, cost) + z * a / noise.sigma


def optimal_control_set(z: float, ctrl: ControlInterval, noise: NoiseConfig) -> tuple[ArgmaxSet, float]:
    """Maximise ``z a / sigma`` over ``[a_min, a_max]``.

    Returns the argmax set and the maximised value. At ``z == 0`` the whole
    interval is optimal and 0 is the canonical pick.
    """
    value = max(z * ctrl.a_min, z * ctrl.a_max) / noise.sigma
    if z > 0:
        return ArgmaxSet(ctrl.a_max, ctrl.a_max, ctrl.a_max), value
    if z < 0:
        return ArgmaxSet(ctrl.a_min, ctrl.a_min, ctrl.a_min), value
    return ArgmaxSet(ctrl.a_min, ctrl.a_max, 0.0), 0.0
