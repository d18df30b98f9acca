"""Representative-trader control problem for a frozen mean flow.

The value function solves

    V_t + max(a_min V_x, a_max V_x) + sigma^2/2 V_xx + x D(t) - h(t, x) = 0,
    V(T, x) = -l(x),

which is integrated backward with an explicit monotone upwind scheme. A
Markov-chain dynamic programme on an unbounded lattice serves as the
independent reference, and ``policy_evaluate`` estimates the payoff of any
feedback by Euler-Maruyama simulation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import AdmissibilityError, CFLViolation, ConfigError, NonFiniteError
from .laws import InitialLaw
from .pool import ControlInterval, MeanFlow, PoolConfig, TimeGrid, impact_drift_nodes, validate_admissibility
from .rewards import CostModel, NoiseConfig

TOL_Z = 1e-8


@dataclass(frozen=True)
class SpatialGrid:
    x_lo: float
    x_hi: float
    n_x: int

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ConfigError(f"grid needs x_lo < x_hi, got {self.x_lo}, {self.x_hi}")
        if int(self.n_x) != self.n_x or self.n_x < 3:
            raise ConfigError(f"grid.n_x must be an integer >= 3, got {self.n_x}")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n_x - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_x)

    def nearest(self, x) -> tuple[np.ndarray, int]:
        """Nearest node indices and the number of points that had to be clamped."""
        x = np.asarray(x, dtype=float)
        raw = np.rint((x - self.x_lo) / self.dx)
        clamped = int(np.count_nonzero((raw < 0) | (raw > self.n_x - 1)))
        return np.clip(raw, 0, self.n_x - 1).astype(np.intp), clamped


def default_spatial_grid(law0: InitialLaw, ctrl: ControlInterval, noise: NoiseConfig,
                         horizon: float, n_x: int = 201) -> SpatialGrid:
    """Cover the initial law (6 sd) plus everything reachable by drift and 6 sd of noise."""
    lo, hi = law0.span(6.0)
    pad = ctrl.max_abs * horizon + 6.0 * noise.sigma * np.sqrt(horizon)
    return SpatialGrid(lo - pad, hi + pad, n_x)


def bang_bang(dvdx: np.ndarray, ctrl: ControlInterval, tol: float = TOL_Z) -> np.ndarray:
    return np.where(dvdx > tol, ctrl.a_max, np.where(dvdx < -tol, ctrl.a_min, 0.0))


def central_gradient(v: np.ndarray, dx: float) -> np.ndarray:
    g = np.empty_like(v)
    g[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2 * dx)
    g[..., 0] = (v[..., 1] - v[..., 0]) / dx
    g[..., -1] = (v[..., -1] - v[..., -2]) / dx
    return g


@dataclass
class ValueSurface:
    tgrid: TimeGrid
    sgrid: SpatialGrid
    ctrl: ControlInterval
    V: np.ndarray
    dVdx: np.ndarray
    policy: np.ndarray
    diagnostics: dict = field(default_factory=lambda: {"clamped": 0})
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __call__(self, t: float, x) -> np.ndarray:
        """Feedback control at time ``t`` for inventories ``x`` (vectorised).

        Time is floored to the grid. In space the sign rule is applied to the
        linearly interpolated gradient, so the switching point moves
        continuously with the value function instead of snapping to a node;
        at grid nodes this is exactly the stored ``policy`` row.
        """
        j = self.tgrid.index(t)
        x = np.asarray(x, dtype=float)
        clamped = int(np.count_nonzero((x < self.sgrid.x_lo) | (x > self.sgrid.x_hi)))
        if clamped:
            with self._lock:
                self.diagnostics["clamped"] += clamped
        return bang_bang(np.interp(x, self.sgrid.nodes, self.dVdx[j]), self.ctrl)

    def value_at(self, j: int, x) -> np.ndarray:
        return np.interp(x, self.sgrid.nodes, self.V[j])


def feedback_policy(surface: ValueSurface, t: float, x) -> float:
    return float(np.asarray(surface(t, np.asarray([x], dtype=float)))[0])


def cfl_number(dt: float, dx: float, sigma: float, max_abs: float) -> float:
    return dt * (sigma**2 / dx**2 + max_abs / dx)


def _check_preconditions(pool, ctrl, flow, check_admissible=True):
    if check_admissible:
        rep = validate_admissibility(pool, ctrl, flow.grid)
        if not rep.passed:
            raise AdmissibilityError(rep.message)
    return impact_drift_nodes(pool, flow)


def solve_hjb(pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, noise: NoiseConfig,
              flow: MeanFlow, sgrid: SpatialGrid) -> ValueSurface:
    tgrid = flow.grid
    dt, dx = tgrid.dt, sgrid.dx
    cfl = cfl_number(dt, dx, noise.sigma, ctrl.max_abs)
    if cfl > 1.0:
        raise CFLViolation(
            f"explicit scheme unstable: dt*(sigma^2/dx^2 + max|a|/dx) = {cfl:.4g} > 1 "
            f"(dt={dt:.4g}, dx={dx:.4g}); refine time steps or coarsen the grid"
        )
    drift = _check_preconditions(pool, ctrl, flow)
    x = sgrid.nodes
    xi = x[1:-1]
    M = tgrid.steps
    half_s2 = 0.5 * noise.sigma**2
    V = np.empty((M + 1, sgrid.n_x))
    V[M] = -cost.terminal_cost(x)
    for j in range(M - 1, -1, -1):
        vn = V[j + 1]
        dp = (vn[2:] - vn[1:-1]) / dx
        dm = (vn[1:-1] - vn[:-2]) / dx
        ham = np.maximum(np.maximum(ctrl.a_max * dp, ctrl.a_min * dm), 0.0)
        diff = half_s2 * ((vn[2:] + vn[:-2]) - 2 * vn[1:-1]) / dx**2
        run = xi * drift[j] - cost.holding(tgrid.nodes[j], xi)
        row = V[j]
        row[1:-1] = vn[1:-1] + dt * (ham + diff + run)
        row[0] = 2 * row[1] - row[2]
        row[-1] = 2 * row[-2] - row[-3]
        if not np.all(np.isfinite(row)):
            i = int(np.flatnonzero(~np.isfinite(row))[0])
            raise NonFiniteError(f"non-finite value at t={tgrid.nodes[j]:.6g}, x={x[i]:.6g}")
    dvdx = central_gradient(V, dx)
    return ValueSurface(tgrid, sgrid, ctrl, V, dvdx, bang_bang(dvdx, ctrl))


def brute_force_value(pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, noise: NoiseConfig,
                      flow: MeanFlow, sgrid: SpatialGrid) -> np.ndarray:
    """Exact dynamic programme on a controlled trinomial chain; returns ``V(0, .)`` on ``sgrid``.

    From node ``i`` under control ``a`` the chain moves one lattice step up,
    down, or stays, with ``p_up = s/2 + a+ dt/dx``, ``p_down = s/2 + a- dt/dx``,
    ``s = sigma^2 dt / dx^2``, which reproduces the drift exactly and the
    variance to first order. The lattice is extended by ``M`` nodes on each
    side, so within ``M`` steps no path from the reported nodes can reach the
    lattice edge and the result is that of the unbounded chain.
    """
    tgrid = flow.grid
    M = tgrid.steps
    if sgrid.n_x > 101 or M > 64:
        raise ValueError(f"brute force is for coarse instances (n_x <= 101, M <= 64), got {sgrid.n_x}, {M}")
    dt, dx = tgrid.dt, sgrid.dx
    s = noise.sigma**2 * dt / dx**2
    if s + ctrl.max_abs * dt / dx > 1.0:
        raise CFLViolation(f"chain consistency violated: sigma^2 dt/dx^2 + max|a| dt/dx = "
                           f"{s + ctrl.max_abs * dt / dx:.4g} > 1")
    drift = _check_preconditions(pool, ctrl, flow, check_admissible=False)

    actions = sorted({ctrl.a_min, 0.0, ctrl.a_max})
    probs = []
    for a in actions:
        p = np.array([s / 2 + max(-a, 0.0) * dt / dx, 0.0, s / 2 + max(a, 0.0) * dt / dx])
        p[1] = 1.0 - p[0] - p[2]
        p = np.clip(p, 0.0, 1.0)
        probs.append(p / p.sum())

    n = sgrid.n_x + 2 * M
    xs = sgrid.x_lo + dx * (np.arange(n) - M)
    value = [float(-cost.terminal_cost(xv)) for xv in xs]
    for j in range(M - 1, -1, -1):
        t = tgrid.nodes[j]
        nxt = value
        value = [0.0] * n
        for i in range(n):
            down = nxt[max(i - 1, 0)]
            up = nxt[min(i + 1, n - 1)]
            best = -np.inf
            for p in probs:
                cand = p[0] * down + p[1] * nxt[i] + p[2] * up
                if cand > best:
                    best = cand
            run = xs[i] * drift[j] - float(cost.holding(t, xs[i]))
            value[i] = best + dt * run
    return np.array(value[M:M + sgrid.n_x])


def _policy_controls(policy, t, x, ctrl):
    return np.clip(np.asarray(policy(t, x), dtype=float), ctrl.a_min, ctrl.a_max)


def constant_policy(a: float):
    def policy(t, x):
        return np.full(np.shape(x), float(a))
    return policy


def policy_payoffs(policy, pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, noise: NoiseConfig,
                   flow: MeanFlow, law0: InitialLaw, n_paths: int, seed: int,
                   purpose: str = "evaluate") -> np.ndarray:
    """Per-path payoffs ``sum_j f(t_j, X_j) dt - l(X_M)`` under ``dX = policy dt + sigma dW``."""
    if n_paths < 1:
        raise ConfigError(f"n_paths must be positive, got {n_paths}")
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    drift = impact_drift_nodes(pool, flow)
    tgrid = flow.grid
    dt, M = tgrid.dt, tgrid.steps
    sq = noise.sigma * np.sqrt(dt)
    nodes = tgrid.nodes

    def run(b, sl):
        rng = streams.block_rng(seed, purpose, b)
        size = sl.stop - sl.start
        x = law0.sample(rng, size)
        z = rng.standard_normal((M, size))
        acc = np.zeros(size)
        for j in range(M):
            acc += (x * drift[j] - cost.holding(nodes[j], x)) * dt
            a = _policy_controls(policy, nodes[j], x, ctrl)
            x = x + a * dt + sq * z[j]
        return acc - cost.terminal_cost(x)

    return np.concatenate(streams.map_blocks(run, n_paths))


def policy_evaluate(policy, pool, ctrl, cost, noise, flow, law0, n_paths: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean payoff of a feedback policy and its standard error."""
    if n_paths < 100:
        raise ConfigError(f"policy evaluation needs n_paths >= 100, got {n_paths}")
    return streams.mean_se(policy_payoffs(policy, pool, ctrl, cost, noise, flow, law0, n_paths, seed))


def law_average_value(surface: ValueSurface, law0: InitialLaw) -> float:
    """``E[V(0, X0)]`` with ``V`` linearly interpolated on the grid."""
    return law0.expectation(lambda x: surface.value_at(0, x))
