"""Query-budgeted kernel learning on hard block-structured kernels."""

from .instances import (
    BlockKernel,
    LowRankInstance,
    build_lowrank_instance,
    realize_instances,
    sample_hard_kernel,
)
from .learners import LearnerSpec, nystrom_learn, run_learner
from .losses import LossSpec, block_gap_bound, u_star
from .oracle import BudgetedOracle, BudgetExhausted
from .solvers import (
    Objective,
    delta_gap,
    ridge_closed_form,
    solve_block_erm,
    solve_norm_constrained_abs,
)

__all__ = [
    "BlockKernel", "LowRankInstance", "build_lowrank_instance", "realize_instances",
    "sample_hard_kernel", "LearnerSpec", "nystrom_learn", "run_learner", "LossSpec",
    "block_gap_bound", "u_star", "BudgetedOracle", "BudgetExhausted", "Objective",
    "delta_gap", "ridge_closed_form", "solve_block_erm", "solve_norm_constrained_abs",
]

__version__ = "0.1.0"
