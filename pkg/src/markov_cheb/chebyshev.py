"""Uniform approximation of ``lambda**(k-1)`` by polynomials of degree ``T-1``.

The coefficients ``alpha`` that minimize

    max_{|lambda| <= rho} |lambda**(k-1) - sum_t alpha_t lambda**t|

give the estimator ``H_k ~ sum_t alpha_{t-1} H_t``.  Everything is solved on
[-1, 1] in the Chebyshev basis and mapped to [-rho, rho] by
``alpha_t = beta_t * rho**(k-1-t)``; only the returned ``alpha`` lives in the
monomial basis.  The monomial conversion amplifies rounding by roughly
``(1 + sqrt(2))**(T-1)``, harmless for the T <= 20 used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import polynomial as nppoly

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ApproxProblem:
    k: int
    T: int
    rho: float = 1.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    @property
    def power(self) -> int:
        """Exponent of the target monomial, ``k - 1``."""
        return self.k - 1

    @property
    def exact(self) -> bool:
        return self.k <= self.T

    def parity_indices(self) -> np.ndarray:
        """Coefficient indices ``t <= T-1`` with the parity of ``k-1``."""
        return np.arange(self.power % 2, self.T, 2)


@dataclass
class ApproxSolution:
    alpha: np.ndarray
    sup_error: float
    iterations: int = 0
    equioscillation_residual: float = 0.0
    method: str = "remez"
    cheb_coeffs: np.ndarray | None = None
    alternation_points: np.ndarray = field(default_factory=lambda: np.empty(0))
    alternation_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.alpha).sum())


class RemezConvergenceError(RuntimeError):
    """Remez exchange did not level the error; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: ApproxSolution):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# basis utilities


def chebyshev_eval(j: int, x):
    """Evaluate the Chebyshev polynomial ``T_j`` at ``x`` by the three-term recurrence."""
    if j < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    t_prev, t_cur = np.ones_like(x), x.copy()
    if j == 0:
        return t_prev if t_prev.ndim else float(t_prev)
    for _ in range(j - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur if t_cur.ndim else float(t_cur)


def power_to_chebyshev(n: int) -> dict[int, Fraction]:
    """Exact Chebyshev expansion ``x**n = sum_j b_j T_j(x)``.

    Only indices with the parity of ``n`` appear.  ``b_j = 2**(1-n) C(n, (n-j)/2)``
    for ``j >= 1`` and ``b_0 = 2**(-n) C(n, n/2)``.
    """
    if n < 0:
        raise ValueError("power must be nonnegative")
    coeffs = {}
    for j in range(n % 2, n + 1, 2):
        c = Fraction(math.comb(n, (n - j) // 2), 2 ** (n - 1)) if n else Fraction(1)
        coeffs[j] = c / 2 if (j == 0 and n) else c
    return coeffs


def _power_cheb_array(n: int) -> np.ndarray:
    out = np.zeros(n + 1)
    for j, c in power_to_chebyshev(n).items():
        out[j] = float(c)
    return out


def _to_monomial(cheb: np.ndarray, prob: ApproxProblem) -> np.ndarray:
    beta = np.zeros(prob.T)
    mono = npcheb.cheb2poly(cheb)
    beta[: mono.size] = mono[: prob.T]
    # Parity is structural; clear rounding noise in the other parity class.
    wrong = np.ones(prob.T, dtype=bool)
    wrong[prob.parity_indices()] = False
    beta[wrong] = 0.0
    t = np.arange(prob.T)
    return beta * prob.rho ** (prob.power - t)


def _exact_solution(prob: ApproxProblem, method: str) -> ApproxSolution:
    alpha = np.zeros(prob.T)
    alpha[prob.power] = 1.0
    cheb = np.zeros(prob.T)
    cheb[: prob.power + 1] = _power_cheb_array(prob.power)
    return ApproxSolution(alpha, 0.0, 0, 0.0, method, cheb)


# ---------------------------------------------------------------------------
# residual evaluation


def residual(alpha, k: int, x):
    """``x**(k-1) - sum_t alpha_t x**t``, evaluated with Horner's rule."""
    x = np.asarray(x, dtype=float)
    return x ** (k - 1) - nppoly.polyval(x, np.asarray(alpha, dtype=float))


def _golden_max(f, a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized golden-section search for maxima of ``f`` on brackets ``[a, b]``."""
    a, b = a.copy(), b.copy()
    for _ in range(200):
        if np.max(b - a) <= tol:
            break
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = f(c) >= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    vals = f(np.concatenate([a, b, 0.5 * (a + b)])).reshape(3, -1)
    return vals.max(axis=0)


def sup_norm_residual(alpha, prob: ApproxProblem, grid_size: int = 2049) -> float:
    """Uniform norm of the residual on ``[-rho, rho]``.

    The residual is sampled on a Chebyshev-spaced grid, and every local maximum
    of ``|r|`` on that grid is refined by golden-section search over its
    bracketing grid interval.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    alpha = np.asarray(alpha, dtype=float)
    rho = prob.rho
    x = rho * np.cos(np.pi * np.arange(grid_size) / (grid_size - 1))[::-1]
    x[0], x[-1] = -rho, rho

    def f(z):
        return np.abs(residual(alpha, prob.k, z))

    vals = f(x)
    best = float(vals.max())
    if grid_size < 3 or best == 0.0:
        return best
    inner = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    # keep maxima that could plausibly exceed the grid maximum after refinement
    inner = inner[vals[inner] >= 0.5 * best]
    if inner.size:
        refined = _golden_max(f, x[inner - 1], x[inner + 1], tol=4e-16 * rho)
        best = max(best, float(refined.max()))
    return best


# ---------------------------------------------------------------------------
# analytic truncation


def chebyshev_truncation(prob: ApproxProblem) -> ApproxSolution:
    """Drop the Chebyshev terms of ``mu**(k-1)`` above degree ``T-1`` and rescale to ``rho``.

    All dropped coefficients are positive and ``T_j(1) = 1``, so the uniform
    error is exactly the tail sum, attained at ``mu = 1``.
    """
    if prob.exact:
        return _exact_solution(prob, "cheb-trunc")
    full = power_to_chebyshev(prob.power)
    tail = sum(c for j, c in full.items() if j >= prob.T)
    cheb = np.zeros(prob.T)
    for j, c in full.items():
        if j < prob.T:
            cheb[j] = float(c)
    alpha = _to_monomial(cheb, prob)
    return ApproxSolution(
        alpha,
        float(tail) * prob.rho**prob.power,
        0,
        float("nan"),
        "cheb-trunc",
        cheb,
    )


# ---------------------------------------------------------------------------
# Remez exchange on the half interval


def _critical_points(res_cheb: np.ndarray, odd: bool) -> np.ndarray:
    """Endpoints and interior critical points of a Chebyshev series on [0, 1]."""
    der = npcheb.chebder(res_cheb)
    pts = [1.0] if odd else [0.0, 1.0]
    if der.size > 1 and np.any(der):
        roots = npcheb.chebroots(np.trim_zeros(der, "b"))
        roots = roots[np.abs(roots.imag) < 1e-8].real
        roots = roots[(roots > 0.0) & (roots < 1.0)]
        # one Newton polish on r' = 0
        der2 = npcheb.chebder(der)
        d1, d2 = npcheb.chebval(roots, der), npcheb.chebval(roots, der2)
        step = np.divide(d1, d2, out=np.zeros_like(d1), where=d2 != 0)
        polished = roots - step
        ok = (polished > 0.0) & (polished < 1.0) & (np.abs(step) < 1e-3)
        roots = np.where(ok, polished, roots)
        pts.extend(roots.tolist())
    return np.unique(np.asarray(pts))


def _alternating_set(x: np.ndarray, r: np.ndarray, size: int):
    """Pick ``size`` points with alternating residual sign and large magnitude."""
    order = np.argsort(x)
    x, r = x[order], r[order]
    keep_x, keep_r = [], []
    for xi, ri in zip(x, r):
        if ri == 0.0:
            continue
        if keep_r and np.sign(ri) == np.sign(keep_r[-1]):
            if abs(ri) > abs(keep_r[-1]):
                keep_x[-1], keep_r[-1] = xi, ri
        else:
            keep_x.append(xi)
            keep_r.append(ri)
    while len(keep_x) > size:
        if abs(keep_r[0]) < abs(keep_r[-1]):
            keep_x.pop(0)
            keep_r.pop(0)
        else:
            keep_x.pop()
            keep_r.pop()
    return np.asarray(keep_x), np.asarray(keep_r)


def remez_minimax(
    prob: ApproxProblem, *, max_iter: int = 100, tol: float = 1e-10
) -> ApproxSolution:
    """Minimax solution by Remez exchange in the parity-matched subspace.

    Both the target and the allowed polynomials share the parity of ``k-1``,
    so the problem reduces to [0, 1] with ``d`` basis functions and a
    reference of ``d + 1`` points.  Extrema of the residual are located
    exactly as roots of its derivative (a Chebyshev series).
    """
    if prob.exact:
        return _exact_solution(prob, "remez")

    m = prob.power
    odd = bool(m % 2)
    idx = prob.parity_indices()
    d = idx.size
    if d == 0:
        # nothing to fit: alpha = 0 and the error peaks at the interval ends
        ends = np.array([-prob.rho, prob.rho])
        return ApproxSolution(
            np.zeros(prob.T), prob.rho**m, 0, 0.0, "remez", np.zeros(prob.T), ends, ends**m
        )
    target = _power_cheb_array(m)
    # rounding floor for the error level of a series with these coefficients
    floor = 64 * np.finfo(float).eps * float(np.abs(target).sum())

    def residual_cheb(coef_sub):
        res = target.copy()
        res[idx] -= coef_sub
        return res

    # Start from the alternation set of the truncation residual; fall back to
    # the positive extrema of T_{2d} (even) or T_{2d+1} (odd).
    trunc = chebyshev_truncation(ApproxProblem(prob.k, prob.T, 1.0))
    tail = residual_cheb(trunc.cheb_coeffs[idx])
    cand = _critical_points(tail, odd)
    ref, _ = _alternating_set(cand, npcheb.chebval(cand, tail), d + 1)
    if ref.size != d + 1:
        denom = 2 * d + 1 if odd else 2 * d
        ref = np.sort(np.cos(np.pi * np.arange(d + 1) / denom))

    signs = (-1.0) ** np.arange(d + 1)
    best = None
    for it in range(1, max_iter + 1):
        basis = np.stack([chebyshev_eval(int(j), ref) for j in idx], axis=1)
        mat = np.column_stack([basis, signs])
        sol = np.linalg.solve(mat, ref**m)
        coef_sub, level = sol[:d], abs(sol[d])
        res = residual_cheb(coef_sub)
        cand = _critical_points(res, odd)
        vals = npcheb.chebval(cand, res)
        err = float(np.abs(vals).max())
        new_ref, new_vals = _alternating_set(cand, vals, d + 1)

        cheb = np.zeros(prob.T)
        cheb[idx] = coef_sub
        best = ApproxSolution(
            _to_monomial(cheb, prob),
            err * prob.rho**m,
            it,
            float("nan"),
            "remez",
            cheb,
            prob.rho * new_ref,
            prob.rho**m * new_vals,
        )
        if new_ref.size != d + 1:
            break
        gap = err - level
        if gap <= tol * err or gap <= floor:
            best.equioscillation_residual = float(
                np.max(np.abs(np.abs(new_vals) - err)) / err
            )
            return best
        ref = new_ref

    raise RemezConvergenceError(
        f"Remez exchange did not converge for k={prob.k}, T={prob.T} "
        f"after {best.iterations} iterations",
        best,
    )


def minimax_error_unit(k: int, T: int) -> float:
    """Minimax error on [-1, 1]; scale by ``rho**(k-1)`` for other intervals."""
    return remez_minimax(ApproxProblem(k, T, 1.0)).sup_error


# ---------------------------------------------------------------------------
# error bounds


def theorem1_bound(prob: ApproxProblem, c_m: float) -> float:
    """Squared-error bound for the noise-free estimate of ``H_k``, ``k > T``.

    ``C_m**2 rho**(2k-2) min(4 exp(-2 (T-1)**2 / (k-1)), 1/4)``
    """
    if c_m < 0:
        raise ValueError("C_m must be nonnegative")
    if prob.k <= prob.T:
        raise ValueError("the bound is stated for k > T")
    k, T, rho = prob.k, prob.T, prob.rho
    shape = min(4.0 * math.exp(-2.0 * (T - 1) ** 2 / (k - 1)), 0.25)
    return c_m**2 * rho ** (2 * k - 2) * shape


def theorem1_bound_corrected(prob: ApproxProblem, c_m: float) -> float:
    """``theorem1_bound`` with the provable exponent ``-(T-1)**2/(k-1)``.

    The classical truncation estimate is ``2 exp(-(T-1)**2 / (2(k-1)))``;
    squaring it gives this variant, which holds for every system with
    ``|lambda| <= rho``.
    """
    if c_m < 0:
        raise ValueError("C_m must be nonnegative")
    if prob.k <= prob.T:
        raise ValueError("the bound is stated for k > T")
    k, T, rho = prob.k, prob.T, prob.rho
    shape = min(4.0 * math.exp(-((T - 1) ** 2) / (k - 1)), 0.25)
    return c_m**2 * rho ** (2 * k - 2) * shape


def chebyshev_tail_bound(prob: ApproxProblem) -> float:
    """``2 rho**(k-1) exp(-(T-1)**2/(k-1))``, the claimed uniform-error bound of the truncation."""
    k, T = prob.k, prob.T
    return 2.0 * prob.rho ** (k - 1) * math.exp(-((T - 1) ** 2) / (k - 1))


def _check_rho(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")


def theorem1_sup_bound(T: int, rho: float, c_m: float) -> float:
    """Bound on ``sup_k |H_k - H_hat_k|**2`` for strictly stable systems."""
    _check_rho(rho)
    return 4.0 * c_m**2 * math.exp(-4.0 * (T - 1) * math.sqrt(math.log(1.0 / rho)))


def required_T(delta: float, rho: float, c_m: float) -> int:
    """Smallest ``T`` for which ``theorem1_sup_bound(T, rho, c_m) <= delta**2``."""
    _check_rho(rho)
    if not delta > 0:
        raise ValueError("delta must be positive")
    if c_m <= 0:
        return 1
    steps = math.log(2.0 * c_m / delta) / (2.0 * math.sqrt(math.log(1.0 / rho)))
    T = 1 + max(0, math.ceil(steps))
    # guard the ceil against rounding at exact integer boundaries
    while T > 1 and theorem1_sup_bound(T - 1, rho, c_m) <= delta**2:
        T -= 1
    while theorem1_sup_bound(T, rho, c_m) > delta**2:
        T += 1
    return T


def truncation_l2_bound(T: int, rho: float, c_m: float) -> float:
    """l2 error bound of predicting every unknown Markov parameter as zero."""
    _check_rho(rho)
    return c_m * rho**T / math.sqrt(1.0 - rho**2)
