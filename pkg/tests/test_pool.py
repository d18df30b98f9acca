import numpy as np
import pytest

from ammfg.errors import ConfigError, FloorViolation
from ammfg.pool import (ControlInterval, MeanFlow, PoolConfig, TimeGrid, impact_bound, impact_drift,
                        impact_drift_nodes, price_path, reserve_at, reserve_path, spot_price,
                        validate_admissibility)

POOL = PoolConfig(k=100.0, x0=10.0, eps0=1.0)
CTRL = ControlInterval(-1.0, 1.0)
GRID = TimeGrid(1.0, 100)


def test_spot_price_at_initial_reserve():
    assert spot_price(POOL, 10.0) == pytest.approx(1.0)
    assert spot_price(POOL, 9.5) == pytest.approx(1.10803324099723, rel=1e-14)


def test_spot_price_needs_positive_reserve():
    with pytest.raises(FloorViolation):
        spot_price(POOL, 0.0)


def test_impact_drift_below_floor_raises():
    flow = MeanFlow.constant(TimeGrid(1.0, 10), 9.5)
    with pytest.raises(FloorViolation):
        impact_drift(POOL, flow, 1.0)


def test_constant_flow_reserve_and_drift():
    flow = MeanFlow.constant(GRID, 0.5)
    assert reserve_at(POOL, flow, 1.0) == pytest.approx(9.5, abs=1e-13)
    # 2 k q / X^3 at X = 9.5
    assert impact_drift(POOL, flow, 1.0) == pytest.approx(0.11663507799970842, rel=1e-12)
    assert impact_drift(POOL, flow, 0.0) == pytest.approx(0.1)


def test_zero_flow_has_no_impact():
    flow = MeanFlow.constant(GRID, 0.0)
    assert np.all(impact_drift_nodes(POOL, flow) == 0.0)
    assert np.all(reserve_path(POOL, flow).values == 10.0)


def test_trapezoid_reserve_for_linear_flow():
    # q(t) = t is piecewise linear, so the trapezoid rule is exact: X(1) = 10 - 1/2.
    flow = MeanFlow.from_function(GRID, lambda t: t)
    assert reserve_path(POOL, flow).values[-1] == pytest.approx(9.5, abs=1e-12)
    assert flow.integral_to(0.5) == pytest.approx(0.125, abs=1e-12)


def test_reserve_path_flags_floor_breach():
    pool = PoolConfig(100.0, 2.0, 1.0)
    path = reserve_path(pool, MeanFlow.constant(TimeGrid(2.0, 20), 1.0))
    assert not path.floor_ok
    assert path.minimum == pytest.approx(0.0, abs=1e-12)
    assert path.violations[0] == 11


def test_admissibility_message_quotes_both_sides():
    rep = validate_admissibility(POOL, ControlInterval(-4.0, 4.0), TimeGrid(3.0, 30))
    assert not rep.passed
    assert "4 ≥ (10−1)/3 = 3" in rep.message
    assert rep.lhs == 4.0 and rep.rhs == 3.0


def test_admissibility_is_strict():
    assert not validate_admissibility(POOL, ControlInterval(-9.0, 9.0), GRID)
    assert validate_admissibility(POOL, ControlInterval(-8.99, 8.99), GRID)


def test_impact_bound_reference():
    assert impact_bound(POOL, CTRL) == 200.0


def test_price_path_adds_pool_noise():
    flow = MeanFlow.constant(GRID, 0.5)
    p = price_path(POOL, flow, np.zeros(100))
    assert p[0] == pytest.approx(1.0)
    assert p[-1] == pytest.approx(100 / 9.5**2)
    noisy = price_path(PoolConfig(100.0, 10.0, 1.0, sigma0=0.3), flow, np.full(100, 0.01))
    assert noisy[-1] - p[-1] == pytest.approx(0.3)


def test_price_path_checks_increment_count():
    with pytest.raises(ValueError):
        price_path(POOL, MeanFlow.constant(GRID, 0.0), np.zeros(3))


@pytest.mark.parametrize("kw", [dict(k=0, x0=10, eps0=1), dict(k=1, x0=1, eps0=1), dict(k=1, x0=10, eps0=-1)])
def test_bad_pool_rejected(kw):
    with pytest.raises(ConfigError):
        PoolConfig(**kw)


def test_flow_is_read_only():
    flow = MeanFlow.constant(GRID, 0.0)
    with pytest.raises(ValueError):
        flow.values[0] = 1.0


def test_time_index_floors():
    assert GRID.index(0.0) == 0
    assert GRID.index(0.019999) == 1
    assert GRID.index(0.02) == 2
    assert GRID.index(1.0) == 100
