"""Generic block solver machinery."""
from .bregman import (EUCLIDEAN, BregmanGenerator, NonnegIndicator, Proximable,
                      SquaredDistance, Zero, bregman_gprox, bregman_prox, extrapolate)
from .conditions import (ConditionReport, MarginRow, UpdateParams, check_ibp_condition,
                         check_ibpg_condition, constant_params, ibp_theta, ibpg_lambda,
                         max_feasible_ibp_alpha)
from .loops import (BlockParams, BlockProblem, ExtrapState, LyapunovRecord,
                    SeparableQuadratic, SolverSchedule, constant_schedule,
                    ibp_outer_loop, ibpg_outer_loop, lyapunov_trace,
                    lyapunov_violations, select_blocks)

__all__ = [
    "EUCLIDEAN", "BregmanGenerator", "NonnegIndicator", "Proximable",
    "SquaredDistance", "Zero", "bregman_gprox", "bregman_prox", "extrapolate",
    "ConditionReport", "MarginRow", "UpdateParams", "check_ibp_condition",
    "check_ibpg_condition", "constant_params", "ibp_theta", "ibpg_lambda",
    "max_feasible_ibp_alpha", "BlockParams", "BlockProblem", "ExtrapState",
    "LyapunovRecord", "SeparableQuadratic", "SolverSchedule",
    "constant_schedule", "ibp_outer_loop", "ibpg_outer_loop",
    "lyapunov_trace", "lyapunov_violations", "select_blocks",
]
