from adrbench.optim.cmaes import CmaResult, CmaState, cmaes_minimize, default_population
from adrbench.optim.gp import (
    GpHyper,
    GpModel,
    bo_suggest,
    expected_improvement,
    gp_fit,
    gp_posterior,
)
from adrbench.optim.reps import (
    RepsConfig,
    reps_update,
    reps_weights,
    solve_dual,
    weight_kl,
)

__all__ = [
    "CmaResult",
    "CmaState",
    "cmaes_minimize",
    "default_population",
    "GpHyper",
    "GpModel",
    "bo_suggest",
    "expected_improvement",
    "gp_fit",
    "gp_posterior",
    "RepsConfig",
    "reps_update",
    "reps_weights",
    "solve_dual",
    "weight_kl",
]
