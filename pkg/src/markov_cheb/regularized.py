"""Regularized uniform approximation.

Minimizes ``||x**(k-1) - sum_t alpha_t x**t||_inf**2 + gamma * ||alpha||_1**2``
over ``[-rho, rho]`` by discretizing the uniform norm and solving the
epigraph QP

    min  s**2 + gamma u**2
    s.t. -s <= r_i(alpha) <= s,   |alpha_t| <= v_t,   sum v_t <= u

with a dense primal-dual interior-point method (Mehrotra predictor-corrector).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy import linalg

from .chebyshev import (
    ApproxProblem,
    _critical_points,
    chebyshev_eval,
    power_to_chebyshev,
    residual,
    sup_norm_residual,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max-iter"
INFEASIBLE_TOL = "infeasible-tolerance"


@dataclass(frozen=True)
class RegProblem:
    base: ApproxProblem
    gamma: float = 0.0
    grid_size: int = 2001

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.grid_size < max(2, 2 * self.base.T):
            raise ValueError(
                f"grid_size={self.grid_size} cannot resolve degree {self.base.T - 1}; "
                f"need at least {max(2, 2 * self.base.T)}"
            )


@dataclass
class RegSolution:
    alpha: np.ndarray
    sup_error: float
    l1_norm: float
    objective: float
    solver_status: str = CONVERGED
    iterations: int = 0
    grid_objective: float = float("nan")


@dataclass
class QPResult:
    x: np.ndarray
    objective: float
    status: str
    iterations: int


def build_constraint_grid(prob: RegProblem) -> np.ndarray:
    """Chebyshev-extrema points ``rho cos(pi i / (G-1))``, ``i = 0..G-1``."""
    g = prob.grid_size
    if g < 2:
        raise ValueError("grid_size must be >= 2")
    x = np.cos(np.pi * np.arange(g) / (g - 1))
    # enforce exact symmetry and endpoints
    x = 0.5 * (x - x[::-1])
    return prob.base.rho * x


def _equilibrate(P, q, G, h, passes: int = 10):
    """Ruiz scaling: rows and columns of ``G`` pushed towards unit inf-norm."""
    row = np.ones(G.shape[0])
    col = np.ones(G.shape[1])
    Gs = G.copy()
    for _ in range(passes):
        r = np.sqrt(np.abs(Gs).max(axis=1))
        r[r == 0] = 1.0
        c = np.sqrt(np.maximum(np.abs(Gs).max(axis=0), np.sqrt(np.abs(np.diag(P))) * col))
        c[c == 0] = 1.0
        Gs = Gs / r[:, None] / c[None, :]
        row /= r
        col /= c
    return col[:, None] * P * col[None, :], col * q, Gs, row * h, col


def solve_qp(P, q, G, h, *, max_iter: int = 100, tol: float = 1e-9) -> QPResult:
    """Dense convex QP ``min 1/2 x'Px + q'x  s.t.  Gx <= h``.

    ``G`` must have full column rank; ``P`` only needs to be positive
    semidefinite.  The problem is Ruiz-equilibrated before the
    predictor-corrector iterations.
    """
    P0, q0 = P, q
    P, q, G, h, col = _equilibrate(P, q, G, h)
    n, m = q.size, h.size
    x = np.zeros(n)
    s = np.ones(m)
    z = np.ones(m)
    scale_h = 1.0 + np.linalg.norm(h, np.inf)

    def newton(rd, rp, rc, chol):
        rhs = -rd + G.T @ ((rc - z * rp) / s)
        dx = linalg.cho_solve(chol, rhs)
        for _ in range(2):
            # refine against the first block row  P dx + G'dz = -rd
            ds = -rp - G @ dx
            dz = -(rc + z * ds) / s
            err = P @ dx + G.T @ dz + rd
            dx = dx - linalg.cho_solve(chol, err)
        ds = -rp - G @ dx
        dz = -(rc + z * ds) / s
        return dx, ds, dz

    def max_step(v, dv):
        neg = dv < 0
        if not np.any(neg):
            return 1.0
        return min(1.0, float(np.min(-v[neg] / dv[neg])))

    status, it = MAX_ITER, 0
    best = None
    for it in range(1, max_iter + 1):
        px = P @ x
        gz = G.T @ z
        rd = px + q + gz
        rp = G @ x + s - h
        mu = float(s @ z) / m
        obj = 0.5 * x @ px + q @ x
        pres = np.linalg.norm(rp, np.inf) / scale_h
        dres = np.linalg.norm(rd, np.inf) / (
            1.0 + max(np.linalg.norm(px, np.inf), np.linalg.norm(gz, np.inf), np.linalg.norm(q, np.inf))
        )
        gap = mu * m / (abs(obj) + 1e-12)
        merit = max(pres, dres, gap)
        if best is None or merit < best[0]:
            best = (merit, x.copy(), it)
        if merit < tol:
            status = CONVERGED
            break
        if it - best[2] >= 6:
            # rounding floor reached: the merit has not improved for a while
            status = CONVERGED if best[0] < 100 * tol else INFEASIBLE_TOL
            break

        kkt = P + G.T @ ((z / s)[:, None] * G)
        kkt[np.diag_indices(n)] += 1e-14 * (1.0 + np.abs(np.diag(kkt)))
        try:
            chol = linalg.cho_factor(kkt)
        except linalg.LinAlgError:
            status = INFEASIBLE_TOL
            break

        # predictor
        dx, ds, dz = newton(rd, rp, s * z, chol)
        a_aff = min(max_step(s, ds), max_step(z, dz))
        mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, ds, dz = newton(rd, rp, s * z + ds * dz - sigma * mu, chol)
        a = 0.99 * min(max_step(s, ds), max_step(z, dz))
        if a < 1e-14:
            status = INFEASIBLE_TOL
            break
        x += a * dx
        s += a * ds
        z += a * dz

    if best is not None and best[0] < merit:
        x = best[1]
    x = col * x
    return QPResult(x, float(0.5 * x @ P0 @ x + q0 @ x), status, it)


@dataclass
class _Layout:
    """Discretized problem on [0, 1] in the variable ``mu = x / rho``.

    Unknowns are the parity-matched Chebyshev coefficients ``c`` of the
    approximant.  Error and l1 norm both carry a factor ``scale = rho**(k-1)``,
    which is divided out so ``gamma`` enters unchanged.
    """

    power: int
    idx: np.ndarray
    mu: np.ndarray
    weighted: np.ndarray
    scale: float

    @property
    def to_alpha(self) -> np.ndarray:
        return self.scale * self.weighted


def _layout(prob: RegProblem) -> _Layout:
    base = prob.base
    m = base.power
    idx = base.parity_indices()
    grid = build_constraint_grid(prob) / base.rho
    # the residual is even or odd, so the half grid carries the same constraints
    mu = np.unique(np.abs(grid))
    if m % 2:
        mu = mu[mu > 0]
    t = np.arange(base.T)
    cols = []
    for j in idx:
        e = np.zeros(j + 1)
        e[j] = 1.0
        mono = np.zeros(base.T)
        mono[: j + 1] = npcheb.cheb2poly(e)
        cols.append(mono * base.rho ** (-t.astype(float)))
    weighted = np.stack(cols, axis=1) if cols else np.zeros((base.T, 0))
    return _Layout(m, idx, mu, weighted, base.rho**m)


def _finish(prob: RegProblem, alpha: np.ndarray, status: str, iterations: int, grid_obj: float) -> RegSolution:
    sup = sup_norm_residual(alpha, prob.base, grid_size=max(2049, prob.grid_size))
    l1 = float(np.abs(alpha).sum())
    return RegSolution(alpha, sup, l1, sup**2 + prob.gamma * l1**2, status, iterations, grid_obj)


def _exact(prob: RegProblem) -> np.ndarray:
    alpha = np.zeros(prob.base.T)
    alpha[prob.base.power] = 1.0
    return alpha


def _assemble(lay: _Layout, mu: np.ndarray, gamma: float):
    d = lay.idx.size
    basis = np.stack([chebyshev_eval(int(j), mu) for j in lay.idx], axis=1)
    target = mu**lay.power
    # wrong-parity coefficients vanish identically, so the l1 slacks only
    # cover the d parity-matched entries
    w = lay.weighted[lay.idx]
    n_pts = mu.size
    # unknowns: [c (d), v (d), s, u]
    nv = 2 * d + 2
    i_s, i_u = 2 * d, 2 * d + 1
    G = np.zeros((2 * n_pts + 2 * d + 1, nv))
    G[:n_pts, :d] = basis
    G[n_pts : 2 * n_pts, :d] = -basis
    G[: 2 * n_pts, i_s] = -1.0
    r0 = 2 * n_pts
    G[r0 : r0 + d, :d] = w
    G[r0 + d : r0 + 2 * d, :d] = -w
    G[r0 : r0 + d, d : 2 * d] = -np.eye(d)
    G[r0 + d : r0 + 2 * d, d : 2 * d] = -np.eye(d)
    G[-1, d : 2 * d] = 1.0
    G[-1, i_u] = -1.0
    h = np.concatenate([target, -target, np.zeros(2 * d + 1)])
    P = np.zeros((nv, nv))
    P[i_s, i_s] = 2.0
    P[i_u, i_u] = 2.0 * gamma
    return P, np.zeros(nv), G, h


def _residual_extrema(lay: _Layout, c: np.ndarray) -> np.ndarray:
    """Local extrema in [0, 1] of the scaled residual ``mu**(k-1) - sum c_j T_j``."""
    res = np.zeros(max(lay.power, int(lay.idx.max())) + 1)
    for j, v in power_to_chebyshev(lay.power).items():
        res[j] = float(v)
    res[lay.idx] -= c
    return _critical_points(res, odd=bool(lay.power % 2))


def solve_regularized(
    prob: RegProblem,
    *,
    max_iter: int = 100,
    tol: float = 1e-9,
    extrema_rounds: int = 3,
) -> RegSolution:
    """Minimize ``sup_error**2 + gamma * ||alpha||_1**2``.

    The uniform norm is enforced on the constraint grid.  After each QP solve
    the exact local extrema of the residual are appended to the constraint
    points and the QP is re-solved, up to ``extrema_rounds`` times, so the
    discretized optimum matches the continuous one.  The reported
    ``sup_error`` is re-measured with :func:`sup_norm_residual` and
    ``objective`` is recomputed from it.
    """
    base = prob.base
    T = base.T
    if base.exact and prob.gamma == 0:
        return _finish(prob, _exact(prob), CONVERGED, 0, 0.0)

    lay = _layout(prob)
    if lay.idx.size == 0:
        return _finish(prob, np.zeros(T), CONVERGED, 0, lay.scale**2)

    d = lay.idx.size
    mu = lay.mu
    total_iter = 0
    for rnd in range(extrema_rounds + 1):
        P, q, G, h = _assemble(lay, mu, prob.gamma)
        res = solve_qp(P, q, G, h, max_iter=max_iter, tol=tol)
        total_iter += res.iterations
        c = res.x[:d]
        if res.status != CONVERGED or rnd == extrema_rounds:
            break
        extra = _residual_extrema(lay, c)
        s_grid = res.x[2 * d]
        r_extra = extra**lay.power - npcheb.chebval(extra, _embed(lay, c))
        if np.max(np.abs(r_extra)) <= s_grid * (1.0 + 1e-13):
            break
        mu = np.union1d(mu, extra)

    if res.status != CONVERGED:
        log.warning("regularized solve k=%d T=%d gamma=%g ended with %s", base.k, T, prob.gamma, res.status)
    alpha = lay.to_alpha @ c
    return _finish(prob, alpha, res.status, total_iter, lay.scale**2 * res.objective)


def _embed(lay: _Layout, c: np.ndarray) -> np.ndarray:
    full = np.zeros(int(lay.idx.max()) + 1 if lay.idx.size else 1)
    full[lay.idx] = c
    return full


def grid_objective(alpha, prob: RegProblem) -> float:
    """Objective with the uniform norm replaced by the max over the constraint grid."""
    x = build_constraint_grid(prob)
    s = float(np.abs(residual(alpha, prob.base.k, x)).max())
    return s**2 + prob.gamma * float(np.abs(alpha).sum()) ** 2


def solve_regularized_subgradient(
    prob: RegProblem, *, iterations: int = 20000, alpha0=None
) -> RegSolution:
    """Slow cross-check path: subgradient descent on the parity subspace.

    Diminishing steps, best iterate kept.  Only meant to confirm the
    interior-point result to a few digits.
    """
    base = prob.base
    if base.exact and prob.gamma == 0:
        return _finish(prob, _exact(prob), CONVERGED, 0, 0.0)
    lay = _layout(prob)
    d = lay.idx.size
    if d == 0:
        return _finish(prob, np.zeros(base.T), CONVERGED, 0, lay.scale**2)
    basis = np.stack([chebyshev_eval(int(j), lay.mu) for j in lay.idx], axis=1)
    target = lay.mu**lay.power
    gam = prob.gamma

    if alpha0 is None:
        c = np.zeros(d)
    else:
        c = np.linalg.lstsq(lay.to_alpha, np.asarray(alpha0, dtype=float), rcond=None)[0]

    def f_and_grad(c):
        r = target - basis @ c
        i = int(np.argmax(np.abs(r)))
        s = abs(r[i])
        a = lay.weighted @ c
        u = float(np.abs(a).sum())
        g = -2.0 * s * np.sign(r[i]) * basis[i] + 2.0 * gam * u * (np.sign(a) @ lay.weighted)
        return s**2 + gam * u**2, g

    best_f, best_c = f_and_grad(c)[0], c.copy()
    f0 = best_f
    for it in range(1, iterations + 1):
        f, g = f_and_grad(c)
        if f < best_f:
            best_f, best_c = f, c.copy()
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        c = c - (0.1 * math.sqrt(max(f0, 1e-300)) / math.sqrt(it)) * g / gn
    return _finish(prob, lay.to_alpha @ best_c, MAX_ITER, iterations, lay.scale**2 * best_f)


def gamma_from_data(sigma_hat: float, c_m: float, n: int) -> float:
    """Data-driven weight ``sigma_hat / (C_m**2 N)``."""
    if c_m <= 0:
        raise ValueError("C_m must be positive")
    if n < 1:
        raise ValueError("N must be >= 1")
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be nonnegative")
    return sigma_hat / (c_m**2 * n)


def theorem2_bound(prob: ApproxProblem, alpha, c_m: float, sigma: float, n: int) -> float:
    """Mean-squared-error bound ``C_m**2 ||r||_inf**2 + (Sigma/N) ||alpha||_1**2``."""
    if n < 1:
        raise ValueError("N must be >= 1")
    if sigma < 0:
        raise ValueError("Sigma must be nonnegative")
    alpha = np.asarray(alpha, dtype=float)
    sup = sup_norm_residual(alpha, prob)
    return c_m**2 * sup**2 + sigma / n * float(np.abs(alpha).sum()) ** 2
