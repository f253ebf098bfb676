"""Diagonal SISO state-space systems, steady-state noise and impulse episodes.

The system is kept in diagonal canonical form: ``A = diag(eigenvalues)``,
``B`` is the all-ones column and ``C`` holds the output weights, so the
k-th Markov parameter is ``sum_j c_j * lambda_j**(k-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StabilityError(ValueError):
    """Raised when a steady state is requested for a system with |lambda| >= 1."""


@dataclass(frozen=True)
class StateSpace:
    eigenvalues: np.ndarray
    output_weights: np.ndarray
    rho: float

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        c = np.atleast_1d(np.asarray(self.output_weights, dtype=float))
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty vector")
        if c.shape != lam.shape:
            raise ValueError(
                f"eigenvalues and output_weights differ in length: {lam.size} != {c.size}"
            )
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if np.any(np.abs(lam) > self.rho):
            raise ValueError(f"eigenvalues exceed the spectral bound rho={self.rho}")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "output_weights", c)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def c_m(self) -> float:
        """Modified system energy, the l1 norm of the output row."""
        return float(np.abs(self.output_weights).sum())

    @property
    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.eigenvalues) < 1.0))

    @classmethod
    def benchmark_system(cls) -> "StateSpace":
        """The 6-state benchmark with unit output weights and rho = 0.95."""
        return cls(
            eigenvalues=np.array([0.94, 0.75, -0.75, -0.69, 0.46, 0.42]),
            output_weights=np.ones(6),
            rho=0.95,
        )


@dataclass(frozen=True)
class NoiseModel:
    q_diag: np.ndarray
    r: float = 0.0
    seed: int = 0

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q_diag, dtype=float))
        if np.any(q < 0) or self.r < 0:
            raise ValueError("noise variances must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "q_diag", q)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def uniform(cls, n: int, q: float = 0.01, r: float = 0.01, seed: int = 0) -> "NoiseModel":
        return cls(np.full(n, float(q)), r, seed)

    @classmethod
    def zero(cls, n: int, seed: int = 0) -> "NoiseModel":
        return cls(np.zeros(n), 0.0, seed)

    @property
    def is_zero(self) -> bool:
        return self.r == 0.0 and not np.any(self.q_diag)

    def q_for(self, n: int) -> np.ndarray:
        if self.q_diag.size == 1:
            return np.full(n, self.q_diag[0])
        if self.q_diag.size != n:
            raise ValueError(f"q_diag has length {self.q_diag.size}, system has n={n}")
        return self.q_diag


@dataclass
class EpisodeRecord:
    outputs: np.ndarray
    episode_index: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.episode_index < 1:
            raise ValueError("episode_index is 1-based")

    @property
    def horizon(self) -> int:
        return self.outputs.size


def true_markov(sys: StateSpace, k: int) -> float:
    """Return ``H_k = C A^{k-1} B`` for ``k >= 1``."""
    if k < 1:
        raise ValueError(f"Markov index must be >= 1, got {k}")
    return float(np.dot(sys.output_weights, sys.eigenvalues ** (k - 1)))


def markov_sequence(sys: StateSpace, length: int, start: int = 1) -> np.ndarray:
    """Markov parameters ``H_start .. H_{start+length-1}`` as an array."""
    if start < 1:
        raise ValueError("Markov indices are 1-based")
    powers = np.arange(start - 1, start - 1 + length)
    return sys.eigenvalues[None, :] ** powers[:, None] @ sys.output_weights


def _require_stable(sys: StateSpace) -> None:
    if not sys.is_stable:
        raise StabilityError(
            f"steady state needs |lambda| < 1; max |lambda| = {np.abs(sys.eigenvalues).max()}"
        )


def lyapunov_steady_state(sys: StateSpace, noise: NoiseModel) -> np.ndarray:
    """Solve ``P = A P A^T + Q`` for diagonal ``A`` and diagonal ``Q``.

    With both matrices diagonal the solution is diagonal as well,
    ``P_ii = q_i / (1 - lambda_i**2)``.
    """
    _require_stable(sys)
    q = noise.q_for(sys.n)
    return np.diag(q / (1.0 - sys.eigenvalues**2))


def output_variance(sys: StateSpace, noise: NoiseModel) -> float:
    """Stationary output variance ``C P C^T + R``."""
    p = lyapunov_steady_state(sys, noise)
    c = sys.output_weights
    return float(c @ p @ c + noise.r)


def episode_rng(seed: int, episode_index: int) -> np.random.Generator:
    """Independent PCG64 stream for one episode, keyed on (seed, episode_index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, episode_index])))


def simulate_impulse_episodes(
    sys: StateSpace,
    noise: NoiseModel,
    horizon: int,
    n_episodes: int,
    *,
    first_index: int = 1,
    steady_state: bool = True,
) -> np.ndarray:
    """Simulate ``n_episodes`` unit-impulse experiments; returns shape (n_episodes, horizon).

    Row ``i`` is the episode with index ``first_index + i`` and is drawn from
    the stream ``episode_rng(noise.seed, first_index + i)``, so results do not
    depend on how episodes are batched.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if n_episodes < 0:
        raise ValueError("n_episodes must be >= 0")
    markov = markov_sequence(sys, horizon)
    out = np.tile(markov, (n_episodes, 1))
    if noise.is_zero:
        return out

    _require_stable(sys)
    lam, c = sys.eigenvalues, sys.output_weights
    q_std = np.sqrt(noise.q_for(sys.n))
    p_std = np.sqrt(np.diag(lyapunov_steady_state(sys, noise)))
    r_std = np.sqrt(noise.r)
    x = np.zeros((n_episodes, sys.n))
    w = np.empty((n_episodes, horizon, sys.n))
    v = np.empty((n_episodes, horizon))
    for i in range(n_episodes):
        rng = episode_rng(noise.seed, first_index + i)
        z0 = rng.standard_normal(sys.n)
        if steady_state:
            x[i] = p_std * z0
        w[i] = rng.standard_normal((horizon, sys.n)) * q_std
        v[i] = rng.standard_normal(horizon) * r_std
    # x tracks the zero-mean part of the state; the impulse supplies the mean lambda**(t-1).
    # The row-wise sum keeps each episode bit-identical however episodes are batched.
    for t in range(horizon):
        x = lam * x + w[:, t]
        out[:, t] += (x * c).sum(axis=1) + v[:, t]
    return out


def simulate_impulse_episode(
    sys: StateSpace,
    noise: NoiseModel,
    horizon: int,
    episode_index: int = 1,
    *,
    steady_state: bool = True,
) -> EpisodeRecord:
    """One impulse episode ``y_1..y_T`` with ``u_0 = 1`` and ``x_0 ~ N(0, P)``."""
    y = simulate_impulse_episodes(
        sys, noise, horizon, 1, first_index=episode_index, steady_state=steady_state
    )[0]
    return EpisodeRecord(y, episode_index)


@dataclass
class MarkovSequence:
    """Markov parameters ``H_1..H_len``; ``provenance`` is e.g. 'true', 'estimated', 'extrapolated'."""

    values: np.ndarray
    provenance: str = "true"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k: int) -> float:
        """1-based access, ``seq[k] == H_k``."""
        if not 1 <= k <= self.values.size:
            raise IndexError(f"H_{k} outside 1..{self.values.size}")
        return float(self.values[k - 1])
