"""Episode-mean Markov parameter estimates and the full identification pipeline."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .chebyshev import ApproxProblem, remez_minimax
from .lti import EpisodeRecord, MarkovSequence
from .regularized import CONVERGED, RegProblem, gamma_from_data, solve_regularized


class SolverError(RuntimeError):
    """A coefficient solve did not converge."""


@dataclass
class EstimatorState:
    """Running means ``H~_t`` and pooled deviation sums for ``Sigma_hat``.

    The mean update is the recursive form
    ``H~_t <- H~_t + (y_t - H~_t) / l``; the squared deviations are
    accumulated Welford-style per time index.
    """

    T: int
    h_tilde: np.ndarray = field(init=False)
    episodes_seen: int = 0
    sum_sq_dev: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        self.h_tilde = np.zeros(self.T)
        self.sum_sq_dev = np.zeros(self.T)

    @property
    def per_time_means(self) -> np.ndarray:
        return self.h_tilde

    def update(self, episode: EpisodeRecord | np.ndarray) -> "EstimatorState":
        if isinstance(episode, EpisodeRecord):
            y, index = episode.outputs, episode.episode_index
            if index != self.episodes_seen + 1:
                raise ValueError(f"expected episode {self.episodes_seen + 1}, got {index}")
        else:
            y = np.asarray(episode, dtype=float)
        if y.shape != (self.T,):
            raise ValueError(f"episode length {y.size} does not match T={self.T}")
        self.episodes_seen += 1
        delta = y - self.h_tilde
        self.h_tilde = self.h_tilde + delta / self.episodes_seen
        self.sum_sq_dev = self.sum_sq_dev + delta * (y - self.h_tilde)
        return self

    def update_many(self, outputs: np.ndarray) -> "EstimatorState":
        for row in np.atleast_2d(outputs):
            self.update(row)
        return self

    def copy(self) -> "EstimatorState":
        new = EstimatorState(self.T)
        new.h_tilde = self.h_tilde.copy()
        new.sum_sq_dev = self.sum_sq_dev.copy()
        new.episodes_seen = self.episodes_seen
        return new

    def sigma_hat(self) -> float:
        """Pooled output variance ``sum_t sum_l (y - ybar_t)**2 / (T N - 1)``."""
        dof = self.T * self.episodes_seen - 1
        if dof < 1:
            raise ValueError("sigma_hat needs T * N >= 2")
        return float(self.sum_sq_dev.sum()) / dof

    @classmethod
    def from_markov(cls, markov) -> "EstimatorState":
        """State holding exact parameters as if from one noise-free episode."""
        values = markov.values if isinstance(markov, MarkovSequence) else np.asarray(markov, float)
        return cls(values.size).update(values)


def sigma_hat(state: EstimatorState) -> float:
    return state.sigma_hat()


@dataclass(frozen=True)
class SolverOptions:
    """How ``identify`` picks gamma and solves for the coefficients.

    ``gamma_mode``: ``"data"`` (``Sigma_hat / (C_m**2 N)``), ``"fixed"``
    (use ``gamma``) or ``"zero"``.  ``c_m_factor`` inflates the supplied
    ``C_m`` for a conservative gamma.  With ``exact_at_zero`` a zero gamma
    is answered by Remez exchange instead of the discretized QP.
    """

    gamma_mode: str = "data"
    gamma: float = 0.0
    grid_size: int = 2001
    c_m_factor: float = 1.0
    exact_at_zero: bool = True

    def __post_init__(self):
        if self.gamma_mode not in ("data", "fixed", "zero"):
            raise ValueError(f"unknown gamma_mode {self.gamma_mode!r}")
        if self.c_m_factor <= 0:
            raise ValueError("c_m_factor must be positive")


@dataclass
class Identification:
    k: int
    h_hat: float
    gamma: float
    alpha: np.ndarray | None
    status: str = CONVERGED


def _round_sig(x: float, digits: int = 12) -> float:
    return float(f"{x:.{digits}g}")


@functools.lru_cache(maxsize=4096)
def _cached_alpha(k: int, T: int, rho: float, gamma: float, grid_size: int, exact_at_zero: bool):
    if gamma == 0.0 and exact_at_zero:
        sol = remez_minimax(ApproxProblem(k, T, rho))
        return tuple(sol.alpha), CONVERGED
    sol = solve_regularized(RegProblem(ApproxProblem(k, T, rho), gamma, grid_size))
    return tuple(sol.alpha), sol.solver_status


def coefficients(k: int, T: int, rho: float, gamma: float, options: SolverOptions = SolverOptions()):
    """Problem-2 coefficients, cached on ``(k, T, rho, gamma to 12 significant digits)``."""
    alpha, status = _cached_alpha(
        k, T, float(rho), _round_sig(gamma), options.grid_size, options.exact_at_zero
    )
    return np.array(alpha), status


def choose_gamma(state: EstimatorState, c_m: float, options: SolverOptions) -> float:
    if options.gamma_mode == "zero":
        return 0.0
    if options.gamma_mode == "fixed":
        return options.gamma
    if state.T * state.episodes_seen < 2:
        return 0.0
    return gamma_from_data(state.sigma_hat(), c_m * options.c_m_factor, state.episodes_seen)


def identify_detail(
    state: EstimatorState, k: int, rho: float, c_m: float, options: SolverOptions = SolverOptions()
) -> Identification:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if state.episodes_seen < 1:
        raise ValueError("no episodes observed yet")
    if k <= state.T:
        return Identification(k, float(state.h_tilde[k - 1]), 0.0, None)
    gamma = choose_gamma(state, c_m, options)
    alpha, status = coefficients(k, state.T, rho, gamma, options)
    if status != CONVERGED:
        raise SolverError(f"coefficient solve for k={k} ended with {status}")
    return Identification(k, float(alpha @ state.h_tilde), gamma, alpha, status)


def identify(
    state: EstimatorState, k: int, rho: float, c_m: float, options: SolverOptions = SolverOptions()
) -> float:
    """Estimate ``H_k``: the running mean for ``k <= T``, else ``sum_t alpha_{t-1} H~_t``."""
    return identify_detail(state, k, rho, c_m, options).h_hat


def identify_all(
    state: EstimatorState, k_max: int, rho: float, c_m: float, options: SolverOptions = SolverOptions()
) -> MarkovSequence:
    values = [identify(state, k, rho, c_m, options) for k in range(1, k_max + 1)]
    return MarkovSequence(np.array(values), "estimated" if k_max <= state.T else "extrapolated")


def clear_cache() -> None:
    _cached_alpha.cache_clear()


__all__ = [
    "EstimatorState",
    "Identification",
    "SolverError",
    "SolverOptions",
    "choose_gamma",
    "clear_cache",
    "coefficients",
    "identify",
    "identify_all",
    "identify_detail",
    "sigma_hat",
]

