"""Extrapolating Markov parameters of stable LTI systems by polynomial approximation."""

from .baselines import Realization, extrapolate, ho_kalman, truncation_estimate
from .chebyshev import (
    ApproxProblem,
    ApproxSolution,
    chebyshev_truncation,
    remez_minimax,
    sup_norm_residual,
    theorem1_bound,
)
from .estimation import EstimatorState, SolverOptions, identify, identify_all
from .lti import (
    EpisodeRecord,
    MarkovSequence,
    NoiseModel,
    StateSpace,
    output_variance,
    simulate_impulse_episode,
    true_markov,
)
from .regularized import RegProblem, RegSolution, gamma_from_data, solve_regularized, theorem2_bound

__all__ = [
    "ApproxProblem",
    "ApproxSolution",
    "EpisodeRecord",
    "EstimatorState",
    "MarkovSequence",
    "NoiseModel",
    "Realization",
    "RegProblem",
    "RegSolution",
    "SolverOptions",
    "StateSpace",
    "chebyshev_truncation",
    "extrapolate",
    "gamma_from_data",
    "ho_kalman",
    "identify",
    "identify_all",
    "output_variance",
    "remez_minimax",
    "simulate_impulse_episode",
    "solve_regularized",
    "sup_norm_residual",
    "theorem1_bound",
    "theorem2_bound",
    "truncation_estimate",
    "true_markov",
]
