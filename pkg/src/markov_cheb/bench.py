"""Seeded Monte Carlo experiments and bound-validation suites emitting CSV rows."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .baselines import default_hankel_shape, extrapolate_many, ho_kalman, truncation_estimate
from .chebyshev import ApproxProblem, remez_minimax, theorem1_bound, theorem1_bound_corrected
from .config import ExperimentConfig
from .estimation import EstimatorState, SolverOptions, identify_detail
from .lti import StateSpace, NoiseModel, markov_sequence, output_variance, simulate_impulse_episodes
from .regularized import RegProblem, gamma_from_data, solve_regularized, theorem2_bound

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


@dataclass
class ResultRow:
    method: str
    seed: int
    episode_count: int
    k: int
    h_true: float
    h_hat: float
    abs_error: float
    sq_error: float
    bound: float
    gamma: float
    wall_time_ms: float

    @classmethod
    def make(cls, method, seed, n, k, h_true, h_hat, bound, gamma, t0) -> "ResultRow":
        err = abs(h_true - h_hat)
        return cls(method, seed, n, k, h_true, h_hat, err, err * err, bound, gamma,
                   (time.perf_counter() - t0) * 1e3)


@dataclass
class BoundRow:
    check: str
    system: int
    n: int
    T: int
    k: int
    rho: float
    c_m: float
    lhs: float
    bound: float
    margin: float
    passed: bool


def _fmt(v):
    if isinstance(v, bool):
        return "pass" if v else "fail"
    if isinstance(v, float):
        return format(v, ".15g")
    return str(v)


def write_csv(rows: Iterable, fh, row_type=ResultRow) -> int:
    """Write dataclass rows with a fixed header; returns the row count."""
    writer = csv.writer(fh)
    writer.writerow([f.name for f in fields(row_type)])
    count = 0
    for row in rows:
        writer.writerow([_fmt(v) for v in asdict(row).values()])
        count += 1
    return count


def worker_count(jobs: int) -> int:
    env = os.environ.get("MARKOV_CHEB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, jobs))


def _fan_out(fn, items: list) -> list:
    """Run ``fn`` over ``items`` on a thread pool; results keep the input order."""
    if worker_count(len(items)) == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=worker_count(len(items))) as pool:
        return list(pool.map(fn, items))


def solver_options(cfg: ExperimentConfig) -> SolverOptions:
    mode = {"data-driven": "data"}.get(cfg.gamma_mode, cfg.gamma_mode)
    return SolverOptions(mode, cfg.gamma, cfg.grid_size, cfg.c_m_factor)


def _hankel_shape(cfg: ExperimentConfig):
    if cfg.hankel_rows is not None:
        return cfg.hankel_rows, cfg.hankel_cols
    return default_hankel_shape(cfg.T)


def _bound_proposed(cfg: ExperimentConfig, k: int, alpha, sigma: float, n: int) -> float:
    if alpha is None:
        # k <= T: the mean itself, whose MSE is exactly Sigma / N
        return sigma / n
    return theorem2_bound(ApproxProblem(k, cfg.T, cfg.system.rho), alpha, cfg.c_m_value, sigma, n)


def _true_sigma(cfg: ExperimentConfig) -> float:
    return 0.0 if cfg.noise.is_zero else output_variance(cfg.system, cfg.noise)


def asymptotic_rows(cfg: ExperimentConfig, seed: int, ks: Iterable[int], n: int) -> list[ResultRow]:
    """Gamma = 0 estimate from the exact ``H_1..H_T``: the bias left as N grows without bound."""
    exact = markov_sequence(cfg.system, cfg.T)
    state = EstimatorState.from_markov(exact)
    opts = SolverOptions("zero", grid_size=cfg.grid_size)
    rows = []
    for k in ks:
        t0 = time.perf_counter()
        h_true = float(markov_sequence(cfg.system, 1, start=k)[0])
        h_hat = identify_detail(state, k, cfg.system.rho, cfg.c_m_value, opts).h_hat
        bound = theorem1_bound(ApproxProblem(k, cfg.T, cfg.system.rho), cfg.c_m_value) if k > cfg.T else 0.0
        rows.append(ResultRow.make("asymptotic", seed, n, k, h_true, h_hat, bound, 0.0, t0))
    return rows


def _evaluate(cfg: ExperimentConfig, state: EstimatorState, seed: int, ks, sigma: float, meta: dict):
    """Rows for every configured method at the current estimator state."""
    rows = []
    n = state.episodes_seen
    truth = markov_sequence(cfg.system, max(ks))
    opts = solver_options(cfg)
    if "proposed" in cfg.methods:
        for k in ks:
            t0 = time.perf_counter()
            det = identify_detail(state, k, cfg.system.rho, cfg.c_m_value, opts)
            bound = _bound_proposed(cfg, k, det.alpha, sigma, n)
            rows.append(ResultRow.make("proposed", seed, n, k, truth[k - 1], det.h_hat, bound, det.gamma, t0))
    if "ho-kalman" in cfg.methods:
        t0 = time.perf_counter()
        rows_, cols_ = _hankel_shape(cfg)
        real = ho_kalman(state.h_tilde, cfg.hk_order, rows_, cols_)
        ext = extrapolate_many(real, max(ks))
        meta.setdefault("ho_kalman", []).append(
            {"seed": seed, "episode_count": n, "spectral_radius": real.spectral_radius,
             "unstable": real.spectral_radius >= 1.0, "warnings": real.warnings}
        )
        for k in ks:
            rows.append(ResultRow.make("ho-kalman", seed, n, k, truth[k - 1], float(ext[k - 1]), math.nan, math.nan, t0))
    if "truncation" in cfg.methods:
        for k in ks:
            t0 = time.perf_counter()
            h_hat = truncation_estimate(state.h_tilde, k)
            bound = cfg.c_m_value**2 * cfg.system.rho ** (2 * k - 2) if k > cfg.T else sigma / n
            rows.append(ResultRow.make("truncation", seed, n, k, truth[k - 1], h_hat, bound, math.nan, t0))
    return rows


def base_metadata(cfg: ExperimentConfig) -> dict:
    return {
        "system": {"eigenvalues": cfg.system.eigenvalues.tolist(),
                   "c": cfg.system.output_weights.tolist(), "rho": cfg.system.rho},
        "noise": {"q": cfg.noise.q_diag.tolist(), "r": cfg.noise.r},
        "T": cfg.T,
        "N": cfg.N,
        "gamma_mode": cfg.gamma_mode,
        "hankel_shape": list(_hankel_shape(cfg)),
        "ho_kalman_order": cfg.hk_order,
        "ho_kalman_pole_policy": "no projection or clipping of unstable poles",
    }


def _fig1_seed(cfg: ExperimentConfig, seed: int):
    meta: dict = {}
    noise = NoiseModel(cfg.noise.q_diag, cfg.noise.r, seed)
    sigma = _true_sigma(cfg)
    ys = simulate_impulse_episodes(cfg.system, noise, cfg.T, cfg.N, steady_state=cfg.steady_state)
    state = EstimatorState(cfg.T)
    checkpoints = set(cfg.schedule())
    rows = []
    for y in ys:
        state.update(y)
        if state.episodes_seen in checkpoints:
            rows += _evaluate(cfg, state, seed, cfg.k_targets, sigma, meta)
    rows += asymptotic_rows(cfg, seed, cfg.k_targets, cfg.N)
    return rows, meta


def run_fig1(cfg: ExperimentConfig, metadata: dict | None = None) -> list[ResultRow]:
    """Per-episode error curves for ``k_targets``, one block of rows per seed.

    Estimates are recorded at the episode counts returned by
    ``cfg.schedule()``; gamma is recomputed from the data at each of them.
    """
    results = _fan_out(lambda s: _fig1_seed(cfg, s), list(cfg.seeds))
    rows = []
    meta = base_metadata(cfg)
    meta["checkpoints"] = cfg.schedule()
    meta["ho_kalman"] = []
    for r, m in results:
        rows += r
        meta["ho_kalman"] += m.get("ho_kalman", [])
    if metadata is not None:
        metadata.update(meta)
    return rows


def _fig2_seed(cfg: ExperimentConfig, seed: int):
    meta: dict = {}
    noise = NoiseModel(cfg.noise.q_diag, cfg.noise.r, seed)
    ys = simulate_impulse_episodes(cfg.system, noise, cfg.T, cfg.N, steady_state=cfg.steady_state)
    state = EstimatorState(cfg.T).update_many(ys)
    ks = list(range(cfg.k_range[0], cfg.k_range[1] + 1))
    rows = _evaluate(cfg, state, seed, ks, _true_sigma(cfg), meta)
    rows += asymptotic_rows(cfg, seed, ks, cfg.N)
    return rows, meta


def run_fig2(cfg: ExperimentConfig, metadata: dict | None = None) -> list[ResultRow]:
    """All methods over ``k_range`` after one full pass of ``N`` episodes, per seed."""
    results = _fan_out(lambda s: _fig2_seed(cfg, s), list(cfg.seeds))
    rows = []
    meta = base_metadata(cfg)
    meta["k_range"] = list(cfg.k_range)
    meta["ho_kalman"] = []
    for r, m in results:
        rows += r
        meta["ho_kalman"] += m.get("ho_kalman", [])
    if metadata is not None:
        metadata.update(meta)
    return rows


def random_system(rng: np.random.Generator, n_max: int, rho: float) -> StateSpace:
    n = int(rng.integers(1, n_max + 1))
    lam = rng.uniform(-rho, rho, n)
    c = rng.uniform(-1.0, 1.0, n)
    return StateSpace(lam, c, rho)


def _theorem1_rows(cfg: ExperimentConfig) -> list[BoundRow]:
    b = cfg.bounds
    rng = np.random.default_rng(b.seed)
    systems = {rho: [random_system(rng, b.n_max, rho) for _ in range(b.n_systems)] for rho in b.rhos}
    bound_fn = theorem1_bound if b.variant == "stated" else theorem1_bound_corrected
    rows = []
    for rho in b.rhos:
        for T in b.Ts:
            ks = range(T + 1, b.k_max + 1)
            alphas = {k: remez_minimax(ApproxProblem(k, T, rho)).alpha for k in ks}
            for i, sys in enumerate(systems[rho]):
                h = markov_sequence(sys, b.k_max)
                c_m = sys.c_m * b.c_m_scale
                for k in ks:
                    lhs = float((h[k - 1] - alphas[k] @ h[:T]) ** 2)
                    bound = bound_fn(ApproxProblem(k, T, rho), c_m)
                    rows.append(BoundRow("theorem1", i, sys.n, T, k, rho, c_m, lhs, bound,
                                         bound - lhs, lhs <= bound))
    return rows


def _theorem2_rows(cfg: ExperimentConfig) -> list[BoundRow]:
    """One-sided Monte Carlo check of the mean-squared-error bound.

    The check fails only if the empirical MSE exceeds the bound by more than
    ``mc_z`` standard errors.
    """
    b = cfg.bounds
    if b.mc_systems < 1:
        return []
    rng = np.random.default_rng([b.seed, 2])
    rows = []
    T = b.Ts[0]
    rho = b.rhos[0]
    noise_q = cfg.noise.q_diag
    for i in range(b.mc_systems):
        sys = random_system(rng, b.n_max, rho) if i else cfg.system
        rho_i = sys.rho
        noise = NoiseModel(np.full(sys.n, float(noise_q.mean())), cfg.noise.r, int(rng.integers(2**63)))
        sigma = output_variance(sys, noise)
        c_m = sys.c_m
        for k in b.mc_k:
            prob = ApproxProblem(k, T, rho_i)
            sol = solve_regularized(RegProblem(prob, gamma_from_data(sigma, c_m, b.mc_episodes), cfg.grid_size))
            h_k = float(markov_sequence(sys, 1, start=k)[0])
            sq = np.empty(b.mc_replicas)
            for r in range(b.mc_replicas):
                rep = NoiseModel(noise.q_diag, noise.r, noise.seed + r)
                ys = simulate_impulse_episodes(sys, rep, T, b.mc_episodes)
                sq[r] = (h_k - sol.alpha @ ys.mean(axis=0)) ** 2
            mse = float(sq.mean())
            se = float(sq.std(ddof=1) / math.sqrt(b.mc_replicas))
            bound = theorem2_bound(prob, sol.alpha, c_m * b.c_m_scale, sigma, b.mc_episodes)
            lhs = mse - b.mc_z * se
            rows.append(BoundRow("theorem2-mc", i, sys.n, T, k, rho_i, c_m * b.c_m_scale, lhs, bound,
                                 bound - lhs, lhs <= bound))
    return rows


def run_bound_suite(cfg: ExperimentConfig) -> tuple[list[BoundRow], int]:
    """Theorem-1 sweep on random systems plus the Monte Carlo check; returns rows and an exit code."""
    rows = _theorem1_rows(cfg) + _theorem2_rows(cfg)
    failed = sum(not r.passed for r in rows)
    if failed:
        log.warning("%d of %d bound checks failed", failed, len(rows))
    return rows, EXIT_VIOLATION if failed else EXIT_OK


def write_metadata(path: str | Path, meta: dict) -> Path:
    """Write run metadata next to the CSV as ``<name>.meta.json``."""
    path = Path(path)
    side = path.with_name(path.stem + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, default=float) + "\n")
    return side


@dataclass
class SummaryRow:
    method: str
    episode_count: int
    k: int
    seeds: int
    median_abs_error: float
    q25_abs_error: float
    q75_abs_error: float
    median_sq_error: float


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Median and interquartile band of the errors over seeds, per (method, N, k)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.episode_count, r.k), []).append(r)
    out = []
    for (method, n, k), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1])):
        err = np.array([r.abs_error for r in rs])
        q25, med, q75 = np.percentile(err, [25, 50, 75])
        out.append(SummaryRow(method, n, k, len(rs), float(med), float(q25), float(q75),
                              float(np.median([r.sq_error for r in rs]))))
    return out


def median_by(rows: list[ResultRow], method: str, k: int, n: int, attr: str = "abs_error") -> float:
    vals = [getattr(r, attr) for r in rows if r.method == method and r.k == k and r.episode_count == n]
    if not vals:
        raise KeyError(f"no rows for {method}, k={k}, N={n}")
    return float(np.median(vals))


__all__ = [
    "BoundRow",
    "ResultRow",
    "SummaryRow",
    "asymptotic_rows",
    "median_by",
    "random_system",
    "run_bound_suite",
    "run_fig1",
    "run_fig2",
    "solver_options",
    "summarize",
    "write_csv",
    "write_metadata",
]
