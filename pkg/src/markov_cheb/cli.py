"""Command-line entry point ``markov-cheb``.

With ``--out run.csv`` the experiment commands also write
``run.meta.json`` (run metadata) and ``run.summary.csv`` (median and
interquartile band over seeds).

Exit codes: 0 success, 1 bound violation, 2 configuration error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from pathlib import Path

from . import bench
from .baselines import ho_kalman, extrapolate_many, truncation_estimate
from .chebyshev import (
    ApproxProblem,
    RemezConvergenceError,
    chebyshev_truncation,
    remez_minimax,
    theorem1_bound,
)
from .config import ConfigError, ExperimentConfig, load_config
from .estimation import EstimatorState, SolverError, identify_detail
from .lti import NoiseModel, markov_sequence, simulate_impulse_episodes
from .regularized import RegProblem, gamma_from_data, solve_regularized

log = logging.getLogger("markov_cheb")


def _fmt(v) -> str:
    return format(v, ".15g") if isinstance(v, float) else str(v)


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--seeds expects comma-separated integers, got {text!r}") from exc


def _parse_k(text: str) -> list[int]:
    """``13`` or ``13-50`` or ``13:50`` (inclusive)."""
    for sep in ("-", ":"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            try:
                return list(range(int(lo), int(hi) + 1))
            except ValueError:
                break
    try:
        return [int(text)]
    except ValueError as exc:
        raise ConfigError(f"--k expects an integer or a range like 13-50, got {text!r}") from exc


@contextlib.contextmanager
def _sink(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seeds", None):
        cfg.seeds = _parse_seeds(args.seeds)
    return cfg.validate()


def _out_path(args, cfg: ExperimentConfig) -> str | None:
    return args.out or cfg.output_path


def _emit_results(rows, path, meta=None, row_type=bench.ResultRow) -> None:
    with _sink(path) as fh:
        bench.write_csv(rows, fh, row_type)
    if path is not None and meta is not None:
        bench.write_metadata(path, meta)
    if path is not None and row_type is bench.ResultRow:
        side = Path(path).with_name(Path(path).stem + ".summary.csv")
        with open(side, "w", newline="") as fh:
            bench.write_csv(bench.summarize(rows), fh, bench.SummaryRow)


def cmd_fig1(args) -> int:
    cfg = _config(args)
    meta: dict = {}
    rows = bench.run_fig1(cfg, meta)
    _emit_results(rows, _out_path(args, cfg), meta)
    return 0


def cmd_fig2(args) -> int:
    cfg = _config(args)
    meta: dict = {}
    rows = bench.run_fig2(cfg, meta)
    unstable = [m for m in meta.get("ho_kalman", []) if m["unstable"]]
    if unstable:
        log.warning("Ho-Kalman realization unstable for %d run(s)", len(unstable))
    _emit_results(rows, _out_path(args, cfg), meta)
    return 0


def cmd_bounds(args) -> int:
    cfg = _config(args)
    rows, code = bench.run_bound_suite(cfg)
    _emit_results(rows, _out_path(args, cfg), row_type=bench.BoundRow)
    return code


def _kv(pairs) -> None:
    writer = csv.writer(sys.stdout)
    writer.writerow(["field", "value"])
    for key, value in pairs:
        writer.writerow([key, _fmt(value)])


def cmd_approx(args) -> int:
    prob = ApproxProblem(args.k, args.t, args.rho)
    if args.method == "remez":
        sol = remez_minimax(prob)
    else:
        sol = chebyshev_truncation(prob)
    pairs = [("method", sol.method), ("k", prob.k), ("T", prob.T), ("rho", prob.rho)]
    pairs += [(f"alpha_{t}", float(a)) for t, a in enumerate(sol.alpha)]
    pairs += [("sup_error", float(sol.sup_error)), ("iterations", sol.iterations),
              ("equioscillation_residual", float(sol.equioscillation_residual))]
    if not prob.exact:
        pairs.append(("theorem1_bound", theorem1_bound(prob, args.cm)))
    _kv(pairs)
    return 0


def cmd_regapprox(args) -> int:
    gamma = args.gamma
    if args.gamma_from:
        try:
            s, cm, n = args.gamma_from.split(",")
            gamma = gamma_from_data(float(s), float(cm), int(n))
        except ValueError as exc:
            raise ConfigError(f"--gamma-from expects sigma_hat,C_m,N: {exc}") from exc
    if gamma is None:
        raise ConfigError("regapprox needs --gamma or --gamma-from")
    sol = solve_regularized(RegProblem(ApproxProblem(args.k, args.t, args.rho), gamma, args.grid))
    pairs = [("k", args.k), ("T", args.t), ("rho", float(args.rho)), ("gamma", float(gamma))]
    pairs += [(f"alpha_{t}", float(a)) for t, a in enumerate(sol.alpha)]
    pairs += [("sup_error", sol.sup_error), ("l1_norm", sol.l1_norm), ("objective", sol.objective),
              ("solver_status", sol.solver_status), ("iterations", sol.iterations)]
    _kv(pairs)
    return 0 if sol.solver_status == "converged" else bench.EXIT_SOLVER


def _estimate_state(cfg: ExperimentConfig) -> EstimatorState:
    noise = NoiseModel(cfg.noise.q_diag, cfg.noise.r, cfg.seeds[0])
    ys = simulate_impulse_episodes(cfg.system, noise, cfg.T, cfg.N, steady_state=cfg.steady_state)
    return EstimatorState(cfg.T).update_many(ys)


IDENTIFY_HEADER = ["k", "H_true", "H_hat", "abs_error", "bound"]


def _write_identify(rows, path) -> None:
    with _sink(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(IDENTIFY_HEADER)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def cmd_identify(args) -> int:
    cfg = _config(args)
    ks = _parse_k(args.k)
    state = _estimate_state(cfg)
    sigma = bench._true_sigma(cfg)
    truth = markov_sequence(cfg.system, max(ks))
    opts = bench.solver_options(cfg)
    rows = []
    for k in ks:
        det = identify_detail(state, k, cfg.system.rho, cfg.c_m_value, opts)
        bound = bench._bound_proposed(cfg, k, det.alpha, sigma, cfg.N)
        h = float(truth[k - 1])
        rows.append((k, h, det.h_hat, abs(h - det.h_hat), bound))
    _write_identify(rows, _out_path(args, cfg))
    return 0


def cmd_baseline(args) -> int:
    cfg = _config(args)
    ks = _parse_k(args.k)
    state = _estimate_state(cfg)
    truth = markov_sequence(cfg.system, max(ks))
    if args.method == "ho-kalman":
        rows_, cols_ = bench._hankel_shape(cfg)
        real = ho_kalman(state.h_tilde, cfg.hk_order, rows_, cols_)
        for w in real.warnings:
            log.warning(w)
        ext = extrapolate_many(real, max(ks))
        est = {k: float(ext[k - 1]) for k in ks}
        bound = {k: float("nan") for k in ks}
    else:
        est = {k: truncation_estimate(state.h_tilde, k) for k in ks}
        bound = {k: cfg.c_m_value**2 * cfg.system.rho ** (2 * k - 2) if k > cfg.T else float("nan") for k in ks}
    rows = [(k, float(truth[k - 1]), est[k], abs(float(truth[k - 1]) - est[k]), bound[k]) for k in ks]
    _write_identify(rows, _out_path(args, cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markov-cheb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML config; defaults apply when omitted")
        p.add_argument("--out", help="CSV output path (stdout when omitted)")
        p.add_argument("--seeds", help="comma-separated seeds overriding the config")
        p.set_defaults(func=fn)
        return p

    experiment("fig1", cmd_fig1, "error vs number of episodes for the k targets")
    experiment("fig2", cmd_fig2, "error vs k after a full pass of N episodes")
    experiment("bounds", cmd_bounds, "randomized bound-validation suite")

    p = sub.add_parser("approx", help="minimax polynomial coefficients")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--method", choices=("remez", "cheb-trunc"), default="remez")
    p.add_argument("--grid", type=int, default=2049, help="verification grid size")
    p.add_argument("--cm", type=float, default=1.0, help="C_m used in the bound column")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("regapprox", help="regularized coefficients")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--gamma", type=float)
    p.add_argument("--gamma-from", help="sigma_hat,C_m,N")
    p.add_argument("--grid", type=int, default=2001)
    p.set_defaults(func=cmd_regapprox)

    p = experiment("identify", cmd_identify, "simulate, estimate and extrapolate H_k")
    p.add_argument("--k", required=True, help="integer or inclusive range such as 13-50")

    p = experiment("baseline", cmd_baseline, "Ho-Kalman or truncation estimates")
    p.add_argument("--k", required=True, help="integer or inclusive range such as 13-50")
    p.add_argument("--method", choices=("ho-kalman", "truncation"), default="ho-kalman")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return bench.EXIT_CONFIG
    except (SolverError, RemezConvergenceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return bench.EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return bench.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
