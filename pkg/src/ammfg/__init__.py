"""Mean-field trading game in a constant-product liquidity pool."""

__version__ = "0.1.0"

from .errors import (AdmissibilityError, AmmfgError, CFLViolation, ConfigError, ConvergenceError, FloorViolation,
                     NonFiniteError, NumericalError, OutputError)
from .laws import InitialLaw
from .pool import (ControlInterval, MeanFlow, PoolConfig, TimeGrid, impact_bound, impact_drift, price_path,
                   reserve_path, spot_price, validate_admissibility)
from .rewards import (CostModel, NoiseConfig, hamiltonian, optimal_control_set, running_reward, terminal_reward,
                      validate_growth_bound)
from .hjb import (SpatialGrid, ValueSurface, brute_force_value, feedback_policy, policy_evaluate, solve_hjb)
from .mfg import (ControlLawFlow, FixedPointConfig, MfgSolution, girsanov_reward_check, induced_control_law,
                  propagate_state_law, solve_mfg, verify_solution)
from .game import (GameConfig, best_response_value, empirical_measure, nash_gap_sweep, simulate_game)
