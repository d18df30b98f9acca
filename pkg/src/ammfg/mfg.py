"""Mean-field equilibrium of the pool trading game.

One iteration of the fixed-point map freezes the population mean flow,
solves the representative trader's control problem, pushes a particle
approximation of the initial law through the optimal feedback, and reads off
the law of the controls it induces. Because the optimal feedback is
bang-bang, that law lives on ``{a_min, 0, a_max}`` and the flow is updated
through its mean.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from . import streams
from .errors import AdmissibilityError, ConfigError, FloorViolation
from .hjb import SpatialGrid, ValueSurface, policy_payoffs, solve_hjb
from .laws import InitialLaw
from .pool import ControlInterval, MeanFlow, PoolConfig, TimeGrid, impact_drift_nodes, reserve_path, \
    validate_admissibility
from .rewards import CostModel, NoiseConfig, validate_growth_bound

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParticleCloud:
    grid: TimeGrid
    states: np.ndarray  # (M + 1, P)

    @property
    def particles(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class ControlLawFlow:
    """Per-node weights on ``(a_min, 0, a_max)``."""

    grid: TimeGrid
    support: np.ndarray
    weights: np.ndarray  # (M + 1, 3)

    @classmethod
    def dirac_zero(cls, grid: TimeGrid, ctrl: ControlInterval) -> ControlLawFlow:
        w = np.zeros((grid.steps + 1, 3))
        w[:, 1] = 1.0
        return cls(grid, ctrl.values, w)

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.support

    def mean_flow(self) -> MeanFlow:
        return MeanFlow(self.grid, self.mean)


class Mode(str, Enum):
    PICARD_DAMPED = "picard_damped"
    FICTITIOUS_PLAY = "fictitious_play"


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.5
    tol: float | None = None  # defaults to 1e-3 * (a_max - a_min)
    max_iter: int = 50
    mode: Mode = Mode.PICARD_DAMPED
    particles: int = 20000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 0 < self.damping <= 1:
            raise ConfigError(f"mfg.damping must be in (0, 1], got {self.damping}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError(f"mfg.tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"mfg.max_iter must be >= 1, got {self.max_iter}")
        if self.particles < 100:
            raise ConfigError(f"mfg.particles must be >= 100, got {self.particles}")
        if self.seed < 0:
            raise ConfigError(f"mfg.seed must be >= 0, got {self.seed}")

    def tolerance(self, ctrl: ControlInterval) -> float:
        if self.tol is not None:
            return self.tol
        return 1e-3 * ctrl.width if ctrl.width > 0 else 1e-12


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    qbar: np.ndarray
    weights: np.ndarray
    residual: float


@dataclass
class MfgSolution:
    """Result of the fixed-point iteration.

    ``surface`` is the control problem solved against ``iterate`` (the last
    flow fed into the map); ``control_law`` and ``qbar`` are what that policy
    induces on ``cloud``. At a fixed point the two flows coincide up to ``tol``.
    """

    surface: ValueSurface
    cloud: ParticleCloud
    control_law: ControlLawFlow
    iterate: MeanFlow
    history: list[IterationRecord]
    converged: bool
    tol: float
    qbar: MeanFlow = field(default=None)

    def __post_init__(self):
        if self.qbar is None:
            self.qbar = self.control_law.mean_flow()

    @property
    def residuals(self) -> list[float]:
        return [h.residual for h in self.history]

    def with_offset(self, offset: float) -> MfgSolution:
        """Same policy with the equilibrium flow shifted by ``offset``."""
        return dataclasses.replace(self, qbar=self.qbar.shifted(offset))


def propagate_state_law(policy, noise: NoiseConfig, law0: InitialLaw, grid: TimeGrid,
                        particles: int, seed: int) -> ParticleCloud:
    if particles < 100:
        raise ConfigError(f"need at least 100 particles, got {particles}")
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    M, dt = grid.steps, grid.dt
    sq = noise.sigma * np.sqrt(dt)
    nodes = grid.nodes

    def run(b, sl):
        rng = streams.block_rng(seed, "propagate", b)
        size = sl.stop - sl.start
        out = np.empty((M + 1, size))
        out[0] = law0.sample(rng, size)
        z = rng.standard_normal((M, size))
        for j in range(M):
            x = out[j]
            out[j + 1] = x + np.asarray(policy(nodes[j], x), dtype=float) * dt + sq * z[j]
        return out

    return ParticleCloud(grid, np.concatenate(streams.map_blocks(run, particles), axis=1))


def control_weights(a: np.ndarray, ctrl: ControlInterval) -> np.ndarray:
    n = a.size
    w_max = np.count_nonzero(a == ctrl.a_max) / n if ctrl.a_max != 0 else 0.0
    w_min = np.count_nonzero(a == ctrl.a_min) / n if ctrl.a_min != 0 else 0.0
    return np.array([w_min, 1.0 - w_min - w_max, w_max])


def induced_control_law(policy, cloud: ParticleCloud, ctrl: ControlInterval) -> ControlLawFlow:
    nodes = cloud.grid.nodes
    w = np.array([control_weights(np.asarray(policy(t, cloud.states[j]), dtype=float), ctrl)
                  for j, t in enumerate(nodes)])
    return ControlLawFlow(cloud.grid, ctrl.values, w)


def w1_three_point(w1: np.ndarray, w2: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Wasserstein-1 between measures on a common sorted support, row-wise.

    In one dimension W1 is the integral of the gap between the two CDFs.
    """
    gaps = np.diff(support)
    cdf_gap = np.abs(np.cumsum(w1, axis=-1) - np.cumsum(w2, axis=-1))[..., :-1]
    return cdf_gap @ gaps


def _update(old: np.ndarray, new: np.ndarray, mode: Mode, omega: float, k: int) -> np.ndarray:
    if mode is Mode.PICARD_DAMPED:
        return (1 - omega) * old + omega * new
    return (k * old + new) / (k + 1)


def check_model(pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, grid: TimeGrid) -> None:
    rep = validate_admissibility(pool, ctrl, grid)
    if not rep.passed:
        raise AdmissibilityError(rep.message)
    g = validate_growth_bound(cost)
    if not g.passed:
        raise AdmissibilityError(g.message)


def solve_mfg(pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, noise: NoiseConfig,
              law0: InitialLaw, tgrid: TimeGrid, sgrid: SpatialGrid, fp: FixedPointConfig = FixedPointConfig(),
              init_flow: MeanFlow | None = None, init_law: ControlLawFlow | None = None) -> MfgSolution:
    check_model(pool, ctrl, cost, tgrid)
    tol = fp.tolerance(ctrl)
    qbar = np.zeros(tgrid.steps + 1) if init_flow is None else np.array(init_flow.values)
    law = (init_law or ControlLawFlow.dirac_zero(tgrid, ctrl)).weights.copy()
    history: list[IterationRecord] = []
    converged = False
    for k in range(fp.max_iter):
        iterate = MeanFlow(tgrid, qbar)
        surface = solve_hjb(pool, ctrl, cost, noise, iterate, sgrid)
        cloud = propagate_state_law(surface, noise, law0, tgrid, fp.particles, fp.seed)
        induced = induced_control_law(surface, cloud, ctrl)

        omega = fp.damping
        for _ in range(6):
            q_new = _update(qbar, induced.mean, fp.mode, omega, k)
            if reserve_path(pool, MeanFlow(tgrid, q_new)).floor_ok:
                break
            omega /= 2
            logger.warning("iterate %d breaches the reserve floor; damping halved to %g", k + 1, omega)
        else:
            raise FloorViolation(f"iterate {k + 1} breaches the reserve floor after 5 damping halvings")
        w_new = _update(law, induced.weights, fp.mode, omega, k)

        residual = float(np.max(np.abs(q_new - qbar)) + np.max(w1_three_point(w_new, law, ctrl.values)))
        history.append(IterationRecord(k + 1, q_new, w_new, residual))
        logger.info("iteration %d residual %.3e", k + 1, residual)
        qbar, law = q_new, w_new
        if residual <= tol:
            converged = True
            break
    return MfgSolution(surface, cloud, induced, iterate, history, converged, tol)


@dataclass(frozen=True)
class ConsistencyReport:
    j_stored: float
    j_resolved: float
    gap: float
    gap_se: float
    control_w1: float
    state_ks: float

    def gap_within(self, n_se: float) -> bool:
        return self.gap <= n_se * self.gap_se


def verify_solution(sol: MfgSolution, pool: PoolConfig, ctrl: ControlInterval, cost: CostModel,
                    noise: NoiseConfig, law0: InitialLaw, seed: int, n_paths: int = 100_000) -> ConsistencyReport:
    """Check the three equilibrium conditions on an (approximate) solution.

    The best-response gap compares the stored policy with one re-solved
    against the equilibrium flow ``sol.qbar``; both are evaluated on the same
    simulated paths, so ``gap_se`` is the standard error of the paired
    per-path difference.
    """
    flow = sol.qbar
    resolved = solve_hjb(pool, ctrl, cost, noise, flow, sol.surface.sgrid)
    p_old = policy_payoffs(sol.surface, pool, ctrl, cost, noise, flow, law0, n_paths, seed, "verify")
    p_new = policy_payoffs(resolved, pool, ctrl, cost, noise, flow, law0, n_paths, seed, "verify")
    j_old, _ = streams.mean_se(p_old)
    j_new, _ = streams.mean_se(p_new)
    gap, gap_se = streams.mean_se(p_new - p_old)

    fresh_seed = streams.derive_seed(seed, 0x5EED)
    cloud = propagate_state_law(sol.surface, noise, law0, sol.cloud.grid, sol.cloud.particles, fresh_seed)
    law = induced_control_law(sol.surface, cloud, ctrl)
    w1 = float(np.max(w1_three_point(law.weights, sol.control_law.weights, ctrl.values)))
    ks = max(stats.ks_2samp(a, b).statistic for a, b in zip(cloud.states, sol.cloud.states))
    return ConsistencyReport(j_old, j_new, gap, gap_se, w1, float(ks))


@dataclass(frozen=True)
class GirsanovResult:
    strong: float
    reweighted: float
    combined_se: float
    strong_se: float
    reweighted_se: float
    ess_fraction: float

    @property
    def degenerate(self) -> bool:
        return self.ess_fraction < 0.05

    def agree(self, n_se: float = 3.0) -> bool:
        return abs(self.strong - self.reweighted) <= n_se * self.combined_se


def girsanov_reward_check(pool: PoolConfig, ctrl: ControlInterval, cost: CostModel, noise: NoiseConfig,
                          flow: MeanFlow, policy, law0: InitialLaw, n_paths: int, seed: int) -> GirsanovResult:
    """Estimate the payoff of ``policy`` by strong simulation and by Girsanov reweighting.

    The reweighted estimator simulates the driftless state ``dX = sigma dW``
    and weights each path by the discrete stochastic exponential of
    ``policy / sigma`` against the same Brownian increments.
    """
    ratio = ctrl.max_abs / noise.sigma
    if ratio > 2.0:
        raise ConfigError(f"drift-to-noise ratio max|a|/sigma = {ratio:g} exceeds 2; likelihood ratio too heavy")
    if n_paths < 100:
        raise ConfigError(f"need n_paths >= 100, got {n_paths}")
    drift = impact_drift_nodes(pool, flow)
    grid = flow.grid
    M, dt = grid.steps, grid.dt
    sdt = np.sqrt(dt)
    s = noise.sigma
    nodes = grid.nodes

    def run(b, sl):
        rng = streams.block_rng(seed, "girsanov", b)
        size = sl.stop - sl.start
        x0 = law0.sample(rng, size)
        dw = sdt * rng.standard_normal((M, size))
        xs, xw = x0.copy(), x0.copy()
        js, jw = np.zeros(size), np.zeros(size)
        log_w = np.zeros(size)
        for j in range(M):
            js += (xs * drift[j] - cost.holding(nodes[j], xs)) * dt
            jw += (xw * drift[j] - cost.holding(nodes[j], xw)) * dt
            a_s = np.clip(np.asarray(policy(nodes[j], xs), dtype=float), ctrl.a_min, ctrl.a_max)
            a_w = np.clip(np.asarray(policy(nodes[j], xw), dtype=float), ctrl.a_min, ctrl.a_max)
            theta = a_w / s
            log_w += theta * dw[j] - 0.5 * theta**2 * dt
            xs = xs + a_s * dt + s * dw[j]
            xw = xw + s * dw[j]
        js -= cost.terminal_cost(xs)
        jw -= cost.terminal_cost(xw)
        return js, jw, np.exp(log_w)

    parts = streams.map_blocks(run, n_paths)
    js = np.concatenate([p[0] for p in parts])
    jw = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    m_s, se_s = streams.mean_se(js)
    m_w, se_w = streams.mean_se(jw * w)
    ess = float(w.sum() ** 2 / np.sum(w**2)) / n_paths
    return GirsanovResult(m_s, m_w, float(np.hypot(se_s, se_w)), se_s, se_w, ess)
