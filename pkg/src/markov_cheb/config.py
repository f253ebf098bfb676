"""TOML experiment configuration.

Example::

    [system]
    eigenvalues = [0.94, 0.75, -0.75, -0.69, 0.46, 0.42]
    c = [1, 1, 1, 1, 1, 1]
    rho = 0.95

    [noise]
    q = 0.01          # scalar or one entry per state
    r = 0.01
    seed = 7

    [experiment]
    T = 12
    N = 1000
    k_targets = [13, 22]
    k_range = [13, 50]
    seeds = [1, 2, 3]
    methods = ["proposed", "ho-kalman", "truncation"]
    gamma_mode = "data-driven"   # or "zero", or "fixed" together with gamma = ...

Every section is optional; missing values fall back to the 6-state
benchmark system with q = r = 0.01.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .lti import NoiseModel, StateSpace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


METHODS = ("proposed", "ho-kalman", "truncation")
GAMMA_MODES = ("data-driven", "zero", "fixed")


@dataclass
class BoundSuiteConfig:
    n_systems: int = 100
    n_max: int = 8
    rhos: list = field(default_factory=lambda: [0.95])
    Ts: list = field(default_factory=lambda: [12])
    k_max: int = 60
    seed: int = 2024
    c_m_scale: float = 1.0
    # "stated" uses exp(-2(T-1)^2/(k-1)); "corrected" uses exp(-(T-1)^2/(k-1))
    variant: str = "stated"
    # one-sided Monte Carlo check of the mean-squared-error bound
    mc_systems: int = 3
    mc_episodes: int = 100
    mc_replicas: int = 200
    mc_k: list = field(default_factory=lambda: [13])
    mc_z: float = 1.645


@dataclass
class ExperimentConfig:
    system: StateSpace = field(default_factory=StateSpace.benchmark_system)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel.uniform(6))
    T: int = 12
    N: int = 1000
    k_targets: list = field(default_factory=lambda: [13, 22])
    k_range: tuple = (13, 50)
    seeds: list = field(default_factory=lambda: list(range(1, 21)))
    methods: list = field(default_factory=lambda: list(METHODS))
    gamma_mode: str = "data-driven"
    gamma: float = 0.0
    output_path: str | None = None
    c_m: float | None = None
    c_m_factor: float = 1.0
    grid_size: int = 2001
    steady_state: bool = True
    hankel_rows: int | None = None
    hankel_cols: int | None = None
    ho_kalman_order: int | None = None
    checkpoints: list | None = None
    dense_until: int = 100
    log_points: int = 40
    bounds: BoundSuiteConfig = field(default_factory=BoundSuiteConfig)

    @property
    def c_m_value(self) -> float:
        return self.system.c_m if self.c_m is None else float(self.c_m)

    @property
    def hk_order(self) -> int:
        return self.system.n if self.ho_kalman_order is None else self.ho_kalman_order

    def validate(self) -> "ExperimentConfig":
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        for s in self.seeds:
            if not 0 <= int(s) < 2**64:
                raise ConfigError(f"seed {s} is not an unsigned 64-bit integer")
        if any(k < 1 for k in self.k_targets):
            raise ConfigError("every k target must be >= 1")
        lo, hi = self.k_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"invalid k_range {self.k_range}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ConfigError(f"gamma_mode must be one of {GAMMA_MODES}")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")
        if self.c_m_factor <= 0:
            raise ConfigError("c_m_factor must be positive")
        if self.c_m is not None and self.c_m <= 0:
            raise ConfigError("c_m must be positive")
        if self.grid_size < 2 * self.T:
            raise ConfigError("grid_size must be at least 2T")
        if self.checkpoints is not None and any(c < 1 or c > self.N for c in self.checkpoints):
            raise ConfigError("checkpoints must lie in 1..N")
        if not self.noise.is_zero and not self.system.is_stable:
            raise ConfigError("noisy experiments need |lambda| < 1 for the steady state")
        rows, cols = self.hankel_rows, self.hankel_cols
        if (rows is None) != (cols is None):
            raise ConfigError("set both hankel_rows and hankel_cols or neither")
        if rows is not None and rows + cols > self.T:
            raise ConfigError("hankel_rows + hankel_cols must not exceed T")
        return self

    def schedule(self) -> list[int]:
        """Episode counts at which estimates are recorded.

        Defaults to every episode up to ``dense_until`` and ``log_points``
        log-spaced counts after that, always ending at ``N``.
        """
        if self.checkpoints is not None:
            return sorted(set(int(c) for c in self.checkpoints))
        dense = list(range(1, min(self.N, self.dense_until) + 1))
        if self.N > self.dense_until:
            tail = np.geomspace(self.dense_until, self.N, self.log_points)
            dense += [int(round(x)) for x in tail]
        return sorted(set(dense) | {self.N})


def _system(sec: dict) -> StateSpace:
    try:
        lam = np.asarray(sec["eigenvalues"], dtype=float)
    except KeyError as exc:
        raise ConfigError("[system] needs 'eigenvalues'") from exc
    c = np.asarray(sec.get("c", np.ones(lam.size)), dtype=float)
    rho = float(sec.get("rho", np.abs(lam).max()))
    try:
        return StateSpace(lam, c, rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _noise(sec: dict, n: int) -> NoiseModel:
    q = sec.get("q", 0.01)
    q = np.full(n, float(q)) if np.isscalar(q) else np.asarray(q, dtype=float)
    if q.size != n:
        raise ConfigError(f"[noise] q has {q.size} entries for a {n}-state system")
    try:
        return NoiseModel(q, float(sec.get("r", 0.01)), int(sec.get("seed", 0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if "system" in data:
        cfg.system = _system(data["system"])
    cfg.noise = _noise(data.get("noise", {}), cfg.system.n)

    exp = dict(data.get("experiment", {}))
    if "k_range" in exp:
        exp["k_range"] = tuple(int(v) for v in exp["k_range"])
    if "gamma_mode" in exp and isinstance(exp["gamma_mode"], dict):
        # accept gamma_mode = { fixed = 1e-4 }
        (mode, value), = exp["gamma_mode"].items()
        exp["gamma_mode"], exp["gamma"] = mode, float(value)
    if "seeds" not in exp and "seed" in data.get("noise", {}):
        exp["seeds"] = [cfg.noise.seed]
    known = {f for f in ExperimentConfig.__dataclass_fields__} - {"system", "noise", "bounds"}
    extra = set(exp) - known
    if extra:
        raise ConfigError(f"unknown [experiment] keys: {sorted(extra)}")
    cfg = replace(cfg, **exp)

    b = dict(data.get("bounds", {}))
    for key in ("rhos", "Ts", "mc_k"):
        if key in b and np.isscalar(b[key]):
            b[key] = [b[key]]
    extra = set(b) - set(BoundSuiteConfig.__dataclass_fields__)
    if extra:
        raise ConfigError(f"unknown [bounds] keys: {sorted(extra)}")
    cfg.bounds = replace(BoundSuiteConfig(), **b)
    if cfg.bounds.variant not in ("stated", "corrected"):
        raise ConfigError("[bounds] variant must be 'stated' or 'corrected'")
    return cfg.validate()


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return from_dict(data)
