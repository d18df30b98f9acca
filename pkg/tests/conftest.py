from pathlib import Path

import pytest

from ammfg.config import parse_config
from ammfg.mfg import solve_mfg

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def configs_dir():
    return CONFIGS


@pytest.fixture(scope="session")
def sym_cfg():
    return parse_config(CONFIGS / "symmetric.cfg")


@pytest.fixture(scope="session")
def lin_cfg():
    return parse_config(CONFIGS / "linear_terminal.cfg")


@pytest.fixture(scope="session")
def sym_solution(sym_cfg):
    c = sym_cfg
    return solve_mfg(c.pool, c.control, c.cost, c.noise, c.law0, c.time, c.grid, c.mfg)
