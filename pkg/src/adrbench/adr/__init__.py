from adrbench.adr.bayrn import BayrnConfig, BayrnDimensionalityError, run_bayrn
from adrbench.adr.collect import STRATEGIES, RandomPolicy, collect_offline_dataset
from adrbench.adr.droid import droid_cost, droid_cost_batch, run_droid
from adrbench.adr.dropo import dropo_loglike, run_dropo
from adrbench.adr.outcome import AdrOutcome, IterationResult
from adrbench.adr.scenario import SETTINGS, Scenario
from adrbench.adr.simopt import run_simopt, simopt_discrepancy
from adrbench.adr.udr import run_udr, sample_uniform_bounds
from adrbench.trajectory import Dataset, Trajectory, Transition

__all__ = [
    "AdrOutcome",
    "BayrnConfig",
    "BayrnDimensionalityError",
    "Dataset",
    "IterationResult",
    "RandomPolicy",
    "SETTINGS",
    "STRATEGIES",
    "Scenario",
    "Trajectory",
    "Transition",
    "collect_offline_dataset",
    "droid_cost",
    "droid_cost_batch",
    "dropo_loglike",
    "run_bayrn",
    "run_droid",
    "run_dropo",
    "run_simopt",
    "run_udr",
    "sample_uniform_bounds",
    "simopt_discrepancy",
]
