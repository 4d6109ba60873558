"""Monte Carlo and exact-law toolkit for percolation peeling on random triangulations."""

__version__ = "0.1.0"

from .exact_laws import (annealed_tail_constant, boltzmann_volume_mean, boltzmann_volume_pmf, harmonic_h,
                         kernel_pmf, ladder_height_pmf, ladder_jump_pmf, lambda_pmf, step_pmf, step_tail)
from .experiments import ExperimentConfig, GridSpec, load_config, run_suite
from .peeling import PeelingOutcome, PeelingState, new_peeling, run_to_theta, step_peeling
from .samplers import RngStream

__all__ = [
    "ExperimentConfig", "GridSpec", "PeelingOutcome", "PeelingState", "RngStream",
    "annealed_tail_constant", "boltzmann_volume_mean", "boltzmann_volume_pmf", "harmonic_h",
    "kernel_pmf", "ladder_height_pmf", "ladder_jump_pmf", "lambda_pmf", "load_config", "new_peeling",
    "run_suite", "run_to_theta", "step_peeling", "step_pmf", "step_tail",
]
