"""Finite-N pool game: Monte Carlo payoffs and best-response deviation gaps.

Each of the ``n`` traders holds ``X`` risky and ``Y`` numeraire tokens. At
every step the pool reserve moves by the average control, the price is
``k / R**2`` plus the pool noise, and a trader's wealth is ``Y + X P``. The
payoff is terminal wealth minus holding and terminal inventory costs.

A single deviating trader sees a pool whose reserve depends on their own
cumulative trade ``c``; their best response is computed from a value function
on ``(t, x, c)`` and compared with the mean-field feedback on common random
numbers.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import AdmissibilityError, CFLViolation, ConfigError, FloorViolation, NonFiniteError
from .hjb import SpatialGrid, ValueSurface, central_gradient
from .laws import InitialLaw
from .pool import ControlInterval, PoolConfig, TimeGrid, validate_admissibility
from .rewards import CostModel, NoiseConfig

Z_95 = 1.959963984540054


@dataclass(frozen=True)
class GameConfig:
    n: int
    n_paths: int
    seed: int
    tgrid: TimeGrid
    pool: PoolConfig
    ctrl: ControlInterval
    cost: CostModel
    noise: NoiseConfig
    law0: InitialLaw
    y0: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"game.n must be >= 1, got {self.n}")
        if self.n_paths < 100:
            raise ConfigError(f"game.n_paths must be >= 100, got {self.n_paths}")
        if self.seed < 0:
            raise ConfigError(f"game.seed must be >= 0, got {self.seed}")
        rep = validate_admissibility(self.pool, self.ctrl, self.tgrid)
        if not rep.passed:
            raise AdmissibilityError(rep.message)

    def with_(self, **kw) -> GameConfig:
        from dataclasses import replace
        return replace(self, **kw)


@dataclass
class GameResult:
    j_hat: np.ndarray
    se: np.ndarray
    pooled: float
    pooled_se: float
    payoffs: np.ndarray  # (n_paths, n)
    mean_controls: np.ndarray  # (M, n), path-averaged control per step and player
    terminal_reserve: float
    min_reserve: float
    terminal_price: float
    price_change: float
    price_change_se: float
    accounting_error: float


class MeanFieldFeedback:
    """Game policy that ignores the cumulative-trade argument."""

    def __init__(self, surface):
        self.surface = surface

    def __call__(self, t, x, c):
        return self.surface(t, x)


def empirical_measure(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sorted support and weights of ``(1/n) sum_j delta_{samples_j}``."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("empirical measure of an empty sample")
    support, counts = np.unique(s, return_counts=True)
    return support, counts / s.size


def _group_policies(policies):
    groups: dict[int, tuple[object, list[int]]] = {}
    for i, p in enumerate(policies):
        groups.setdefault(id(p), (p, []))[1].append(i)
    return [(p, np.array(cols)) for p, cols in groups.values()]


def simulate_game(gc: GameConfig, policies) -> GameResult:
    """Simulate the n-player game with one feedback ``policy(t, x, c)`` per player."""
    n = gc.n
    if len(policies) != n:
        raise ConfigError(f"need {n} policies, got {len(policies)}")
    pool, ctrl, cost = gc.pool, gc.ctrl, gc.cost
    grid = gc.tgrid
    M, dt = grid.steps, grid.dt
    sdt = np.sqrt(dt)
    sigma = gc.noise.sigma
    nodes = grid.nodes
    groups = _group_policies(policies)

    def run(b, sl):
        rng = streams.block_rng(gc.seed, "game", b)
        size = sl.stop - sl.start
        x = gc.law0.sample(rng, size * n).reshape(size, n)
        z = rng.standard_normal((M, size, n))
        z0 = rng.standard_normal((M, size))
        y = np.full((size, n), float(gc.y0))
        c = np.zeros((size, n))
        r = np.full(size, float(pool.x0))
        w0 = np.zeros(size)
        p = pool.k / r**2
        v = y + x * p[:, None]
        holding = np.zeros((size, n))
        ctrl_sum = np.zeros((M, n))
        min_r = r.copy()
        err = 0.0
        a = np.empty((size, n))
        for j in range(M):
            t = nodes[j]
            for pol, cols in groups:
                a[:, cols] = np.asarray(pol(t, x[:, cols], c[:, cols]), dtype=float)
            np.clip(a, ctrl.a_min, ctrl.a_max, out=a)
            ctrl_sum[j] = a.sum(axis=0)
            holding += cost.holding(t, x) * dt
            y_new = y - a * p[:, None] * dt
            x_new = x + a * dt + sigma * sdt * z[j]
            r = r - a.mean(axis=1) * dt
            if np.any(r < pool.eps0):
                raise FloorViolation(f"pool reserve {r.min():.6g} below floor {pool.eps0} at t={nodes[j + 1]:.6g}")
            np.minimum(min_r, r, out=min_r)
            w0 += sdt * z0[j]
            p_new = pool.k / r**2 + pool.sigma0 * w0
            dp = (p_new - p)[:, None]
            dx = x_new - x
            v = v + (y_new - y) + x * dp + dx * p[:, None] + dx * dp
            x, y, p, c = x_new, y_new, p_new, c + a * dt
            direct = y + x * p[:, None]
            scale = np.abs(y) + np.abs(x * p[:, None])
            err = max(err, float(np.max(np.abs(v - direct) / np.maximum(scale, np.finfo(float).tiny))))
        payoff = v - holding - cost.terminal_cost(x)
        if not np.all(np.isfinite(payoff)):
            raise NonFiniteError("non-finite payoff in game simulation")
        return payoff, ctrl_sum, r, min_r, p, err

    parts = streams.map_blocks(run, gc.n_paths)
    payoffs = np.concatenate([q[0] for q in parts])
    ctrl_mean = sum(q[1] for q in parts) / gc.n_paths
    r_t = np.concatenate([q[2] for q in parts])
    min_r = min(float(q[3].min()) for q in parts)
    p_t = np.concatenate([q[4] for q in parts])
    err = max(q[5] for q in parts)

    j_hat = payoffs.mean(axis=0)
    se = payoffs.std(axis=0, ddof=1) / np.sqrt(gc.n_paths)
    pooled, pooled_se = streams.mean_se(payoffs.mean(axis=1))
    dp_mean, dp_se = streams.mean_se(p_t - pool.k / pool.x0**2)
    return GameResult(j_hat, se, pooled, pooled_se, payoffs, ctrl_mean, float(r_t.mean()), min_r,
                      float(p_t.mean()), dp_mean, dp_se, err)


@dataclass
class DeviatorSurface:
    """Value function and bang-bang feedback of one deviator on ``(t, x, c)``."""

    tgrid: TimeGrid
    sgrid: SpatialGrid
    c_nodes: np.ndarray
    ctrl: ControlInterval
    U: np.ndarray  # (M + 1, n_x, n_c)
    slope: np.ndarray  # switching function U_x + U_c + own-impact term
    diagnostics: dict = field(default_factory=lambda: {"clamped": 0})
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def policy(self) -> np.ndarray:
        s = self.slope
        return np.where(s > 1e-8, self.ctrl.a_max, np.where(s < -1e-8, self.ctrl.a_min, 0.0))

    def __call__(self, t, x, c):
        j = self.tgrid.index(t)
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        g = self.sgrid
        fx = np.clip((x - g.x_lo) / g.dx, 0, g.n_x - 1)
        outside = int(np.count_nonzero((x < g.x_lo) | (x > g.x_hi)))
        if outside:
            with self._lock:
                self.diagnostics["clamped"] += outside
        ix = np.minimum(fx.astype(np.intp), g.n_x - 2)
        wx = fx - ix
        s = self.slope[j]
        if self.c_nodes.size == 1:
            val = (1 - wx) * s[ix, 0] + wx * s[ix + 1, 0]
        else:
            dc = self.c_nodes[1] - self.c_nodes[0]
            fc = np.clip((c - self.c_nodes[0]) / dc, 0, self.c_nodes.size - 1)
            ic = np.minimum(fc.astype(np.intp), self.c_nodes.size - 2)
            wc = fc - ic
            val = ((1 - wx) * (1 - wc) * s[ix, ic] + wx * (1 - wc) * s[ix + 1, ic]
                   + (1 - wx) * wc * s[ix, ic + 1] + wx * wc * s[ix + 1, ic + 1])
        return np.where(val > 1e-8, self.ctrl.a_max, np.where(val < -1e-8, self.ctrl.a_min, 0.0))


def _extrapolate_c(u: np.ndarray) -> np.ndarray:
    """Pad the last axis with linearly extrapolated ghost layers."""
    if u.shape[-1] == 1:
        return np.concatenate([u, u, u], axis=-1)
    lo = 2 * u[..., :1] - u[..., 1:2]
    hi = 2 * u[..., -1:] - u[..., -2:-1]
    return np.concatenate([lo, u, hi], axis=-1)


def solve_deviator_hjb(gc: GameConfig, q_others: np.ndarray, sgrid: SpatialGrid, n_c: int = 51) -> DeviatorSurface:
    """Best response of one trader against ``n - 1`` others trading at mean rate ``q_others``.

    The deviator's own trades move the reserve by ``c / n``, so with
    ``R(t, c) = x0 - (n-1)/n int q_others - c/n`` the value solves

        U_t + max_a a (U_x + U_c + 2 k x / (n R^3)) + sigma^2/2 U_xx
            + x 2k (n-1) q_others / (n R^3) - h = 0,   U(T, x, c) = -l(x).
    """
    pool, ctrl, cost = gc.pool, gc.ctrl, gc.cost
    n = gc.n
    grid = gc.tgrid
    M, dt = grid.steps, grid.dt
    q = np.asarray(q_others, dtype=float)
    if q.shape != (M,):
        raise ValueError(f"q_others needs {M} step values, got shape {q.shape}")
    dx = sgrid.dx
    x = sgrid.nodes
    if ctrl.a_max > ctrl.a_min:
        c_nodes = np.linspace(ctrl.a_min * grid.horizon, ctrl.a_max * grid.horizon, n_c)
        dc = c_nodes[1] - c_nodes[0]
        cfl = dt * (gc.noise.sigma**2 / dx**2 + ctrl.max_abs / dx + ctrl.max_abs / dc)
    else:
        c_nodes = np.zeros(1)
        dc = 1.0
        cfl = dt * gc.noise.sigma**2 / dx**2
    if cfl > 1.0:
        raise CFLViolation(f"deviator scheme unstable: dt*(sigma^2/dx^2 + max|a|/dx + max|a|/dc) = {cfl:.4g} > 1")

    others_cum = np.concatenate([[0.0], np.cumsum(q) * dt])
    R = pool.x0 - (n - 1) / n * others_cum[:, None] - c_nodes[None, :] / n  # (M + 1, n_c)
    if np.any(R < pool.eps0):
        raise FloorViolation(f"deviator reserve grid reaches {R.min():.6g} < floor {pool.eps0}")
    own = 2 * pool.k * x[:, None] / (n * R[:, None, :] ** 3)  # (M + 1, n_x, n_c)
    base = own * (n - 1) * np.concatenate([q, q[-1:]])[:, None, None]

    U = np.empty((M + 1, sgrid.n_x, c_nodes.size))
    U[M] = -cost.terminal_cost(x)[:, None]
    half_s2 = 0.5 * gc.noise.sigma**2
    for j in range(M - 1, -1, -1):
        un = U[j + 1]
        up = _extrapolate_c(un)
        dcp = (up[:, 2:] - up[:, 1:-1]) / dc if c_nodes.size > 1 else 0.0
        dcm = (up[:, 1:-1] - up[:, :-2]) / dc if c_nodes.size > 1 else 0.0
        s_own = own[j, 1:-1]
        dxp = (un[2:] - un[1:-1]) / dx
        dxm = (un[1:-1] - un[:-2]) / dx
        ham = np.maximum(np.maximum(ctrl.a_max * (dxp + dcp[1:-1] + s_own),
                                    ctrl.a_min * (dxm + dcm[1:-1] + s_own)), 0.0)
        diff = half_s2 * ((un[2:] + un[:-2]) - 2 * un[1:-1]) / dx**2
        run = base[j, 1:-1] - cost.holding(grid.nodes[j], x[1:-1])[:, None]
        row = U[j]
        row[1:-1] = un[1:-1] + dt * (ham + diff + run)
        row[0] = 2 * row[1] - row[2]
        row[-1] = 2 * row[-2] - row[-3]
        if not np.all(np.isfinite(row)):
            raise NonFiniteError(f"non-finite deviator value at t={grid.nodes[j]:.6g}")
    ux = central_gradient(np.moveaxis(U, 2, 1), dx)
    ux = np.moveaxis(ux, 1, 2)
    uc = central_gradient(U, dc) if c_nodes.size > 1 else np.zeros_like(U)
    slope = ux + uc + own
    return DeviatorSurface(grid, sgrid, c_nodes, ctrl, U, slope)


@dataclass(frozen=True)
class BestResponse:
    j_deviation: float
    j_equilibrium: float
    eps_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    n_paths: int
    deviator: DeviatorSurface | None = None


def best_response_value(gc: GameConfig, equilibrium, i: int = 0, sgrid: SpatialGrid | None = None,
                        n_c: int = 51) -> BestResponse:
    """Estimate how much trader ``i`` gains by best-responding instead of playing ``equilibrium``.

    ``equilibrium`` is a mean-field feedback ``(t, x) -> a`` (typically a
    :class:`ValueSurface`). The deviation and the equilibrium run share every
    random draw, so the gain is estimated from paired per-path differences.
    """
    if not 0 <= i < gc.n:
        raise ConfigError(f"deviator index {i} out of range for n={gc.n}")
    if sgrid is None:
        if not isinstance(equilibrium, ValueSurface):
            raise ConfigError("need a spatial grid for the deviator when the equilibrium is not a ValueSurface")
        sgrid = equilibrium.sgrid
    mf = MeanFieldFeedback(equilibrium)
    eq = simulate_game(gc, [mf] * gc.n)
    if gc.n > 1:
        q_others = np.delete(eq.mean_controls, i, axis=1).mean(axis=1)
    else:
        q_others = np.zeros(gc.tgrid.steps)
    dev = solve_deviator_hjb(gc, q_others, sgrid, n_c)
    pols = [mf] * gc.n
    pols[i] = dev
    dv = simulate_game(gc, pols)
    eps, se = streams.mean_se(dv.payoffs[:, i] - eq.payoffs[:, i])
    return BestResponse(float(dv.j_hat[i]), float(eq.j_hat[i]), eps, se,
                        eps - Z_95 * se, eps + Z_95 * se, gc.n_paths, dev)


@dataclass(frozen=True)
class NashGapRow:
    n: int
    eps_hat: float
    ci_lo: float
    ci_hi: float
    paths: int
    se: float


def nash_gap_sweep(gc: GameConfig, equilibrium, n_list, sgrid: SpatialGrid | None = None,
                   n_c: int = 51) -> list[NashGapRow]:
    n_list = list(n_list)
    if not n_list:
        raise ConfigError("sweep.n_list must be non-empty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(f"sweep.n_list must be strictly ascending, got {n_list}")
    rows = []
    for n in n_list:
        g = gc.with_(n=n, seed=streams.derive_seed(gc.seed, n))
        br = best_response_value(g, equilibrium, 0, sgrid, n_c)
        rows.append(NashGapRow(n, br.eps_hat, br.ci_lo, br.ci_hi, br.n_paths, br.se))
    return rows
