import numpy as np
import pytest

from ammfg.errors import ConfigError
from ammfg.pool import ControlInterval, MeanFlow, PoolConfig, TimeGrid
from ammfg.rewards import (CostModel, NoiseConfig, hamiltonian, optimal_control_set, running_reward,
                           terminal_reward, validate_growth_bound)

POOL = PoolConfig(100.0, 10.0, 1.0)
GRID = TimeGrid(1.0, 10)
CTRL = ControlInterval(-1.0, 2.0)
NOISE = NoiseConfig(0.5)


def test_running_reward_is_impact_gain_minus_holding():
    flow = MeanFlow.constant(GRID, 0.5)
    cost = CostModel.quadratic(phi_h=0.1, phi_l=1.0)
    # D(0) = 2*100*0.5/1000 = 0.1
    assert running_reward(0.0, 2.0, POOL, flow, cost) == pytest.approx(2.0 * 0.1 - 0.4)
    got = running_reward(0.0, np.array([0.0, 1.0]), POOL, flow, cost)
    assert got == pytest.approx([0.0, 0.0])


def test_control_does_not_enter_running_reward():
    flow = MeanFlow.constant(GRID, 0.3)
    cost = CostModel.quadratic(0.2, 0.0)
    assert running_reward(0.5, 1.3, POOL, flow, cost, a=-1.0) == running_reward(0.5, 1.3, POOL, flow, cost, a=2.0)


def test_terminal_reward_sign():
    assert terminal_reward(2.0, CostModel.quadratic(0.0, 1.5)) == pytest.approx(-6.0)
    assert terminal_reward(2.0, CostModel.linear_terminal(c_l=3.0)) == pytest.approx(6.0)
    assert terminal_reward(2.0, CostModel.zero()) == 0.0


def test_hamiltonian_adds_control_term():
    flow = MeanFlow.constant(GRID, 0.0)
    h = hamiltonian(0.0, 1.0, POOL, flow, CostModel.zero(), z=0.25, a=2.0, noise=NOISE)
    assert h == pytest.approx(1.0)


@pytest.mark.parametrize("z,lo,hi,rep", [(0.3, 2.0, 2.0, 2.0), (-1e-12, -1.0, -1.0, -1.0), (0.0, -1.0, 2.0, 0.0)])
def test_argmax_set(z, lo, hi, rep):
    s, value = optimal_control_set(z, CTRL, NOISE)
    assert (s.lo, s.hi, s.representative) == (lo, hi, rep)
    assert s.unique == (z != 0)
    assert value == pytest.approx(max(z * -1.0, z * 2.0) / 0.5)


def test_growth_bound_reports_binding_sample():
    rep = validate_growth_bound(CostModel.quadratic(0.5, 0.5, c1=1.0))
    assert rep.passed
    # x^2 / e^|x| peaks at |x| = 2
    assert abs(rep.binding_x) == pytest.approx(2.0)
    assert rep.lhs == pytest.approx(4.0)
    assert rep.rhs == pytest.approx(np.exp(2.0))


def test_growth_bound_violation_is_named():
    rep = validate_growth_bound(CostModel.quadratic(50.0, 0.0, c1=0.5))
    assert not rep.passed
    assert "violated" in rep.message
    assert rep.failing_x


def test_invalid_costs():
    with pytest.raises(ConfigError):
        CostModel.quadratic(-1.0, 0.0)
    with pytest.raises(ConfigError):
        CostModel.zero(c1=0.0)
    with pytest.raises(ConfigError):
        NoiseConfig(0.0)
