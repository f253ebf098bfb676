"""Comparison methods: finite-time Ho-Kalman realization and truncation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .lti import MarkovSequence

log = logging.getLogger(__name__)


def _values(markov) -> np.ndarray:
    if isinstance(markov, MarkovSequence):
        return markov.values
    return np.asarray(markov, dtype=float)


def hankel(markov, rows: int, cols: int) -> np.ndarray:
    """Hankel matrix with entry (i, j) equal to ``H_{i+j-1}`` (1-based)."""
    h = _values(markov)
    if rows < 1 or cols < 1:
        raise ValueError("Hankel dimensions must be positive")
    if rows + cols - 1 > h.size:
        raise ValueError(f"need {rows + cols - 1} Markov parameters, have {h.size}")
    i, j = np.indices((rows, cols))
    return h[i + j]


def jacobi_svd(a: np.ndarray, *, tol: float = 1e-15, max_sweeps: int = 60):
    """Thin SVD by one-sided (Hestenes) Jacobi rotations.

    Returns ``u, s, vt`` with singular values in descending order.  Columns
    of ``u`` belonging to zero singular values are zero.
    """
    a = np.asarray(a, dtype=float)
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T
    m, n = a.shape
    u = a.copy()
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = u[:, i] @ u[:, i]
                beta = u[:, j] @ u[:, j]
                gamma = u[:, i] @ u[:, j]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                with np.errstate(over="ignore"):
                    # an infinite zeta yields t = 0, the correct no-op rotation
                    zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                ui, uj = u[:, i].copy(), u[:, j]
                u[:, i] = c * ui - s * uj
                u[:, j] = s * ui + c * uj
                vi, vj = v[:, i].copy(), v[:, j]
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            break
    sigma = np.linalg.norm(u, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, u, v = sigma[order], u[:, order], v[:, order]
    nz = sigma > 0
    u[:, nz] /= sigma[nz]
    u[:, ~nz] = 0.0
    if transposed:
        return v, sigma, u.T
    return u, sigma, v.T


def order_by_gap(singular_values: np.ndarray) -> int:
    """Order with the largest ratio between consecutive singular values."""
    s = np.asarray(singular_values, dtype=float)
    s = s[s > 0]
    if s.size <= 1:
        return max(s.size, 1)
    ratios = s[:-1] / s[1:]
    return int(np.argmax(ratios)) + 1


@dataclass
class Realization:
    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    singular_values: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def n_hat(self) -> int:
        return self.a_hat.shape[0]

    @property
    def spectral_radius(self) -> float:
        if self.n_hat == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.a_hat))))


def default_hankel_shape(T: int) -> tuple[int, int]:
    d1 = T // 2
    return d1, T - d1


def ho_kalman(markov, order: int | None = None, rows: int | None = None, cols: int | None = None) -> Realization:
    """Balanced realization from the SVD of the Hankel matrix of ``H_1..``.

    ``order=None`` picks the order at the largest singular-value gap.  Singular
    values below ``1e-12 * sigma_1`` are floored before ``Sigma**-1/2`` is
    formed and reported in ``warnings``; no stabilization is applied to the
    identified ``A``.
    """
    h = _values(markov)
    if rows is None or cols is None:
        rows, cols = default_hankel_shape(h.size)
    if rows + cols > h.size:
        raise ValueError(
            f"Ho-Kalman with {rows}x{cols} Hankel needs {rows + cols} Markov parameters, have {h.size}"
        )
    big = hankel(h, rows, cols)
    shifted = hankel(h[1:], rows, cols)
    u, s, vt = jacobi_svd(big)
    if order is None:
        order = order_by_gap(s)
    if not 1 <= order <= min(rows, cols):
        raise ValueError(f"order must lie in 1..{min(rows, cols)}")

    warnings = []
    if s[0] == 0.0:
        z = np.zeros(order)
        return Realization(np.zeros((order, order)), z.copy(), z.copy(), s, ["zero Hankel matrix"])
    floor = 1e-12 * s[0]
    if s[order - 1] < floor:
        warnings.append(
            f"sigma_{order}/sigma_1 = {s[order - 1] / s[0]:.3e} below 1e-12; Hankel is rank deficient"
        )
    sig = np.maximum(s[:order], floor)
    u, vt = u[:, :order], vt[:order]
    root = np.sqrt(sig)
    obs = u * root
    ctrl = root[:, None] * vt
    a_hat = (u.T @ shifted @ vt.T) / root[:, None] / root[None, :]
    return Realization(a_hat, ctrl[:, 0].copy(), obs[0].copy(), s, warnings)


def extrapolate_many(real: Realization, k_max: int) -> np.ndarray:
    """``c A^{k-1} b`` for ``k = 1..k_max`` by repeated matrix-vector products."""
    out = np.empty(k_max)
    v = real.b_hat.astype(float)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(k_max):
            out[k] = real.c_hat @ v
            v = real.a_hat @ v
    if not np.all(np.isfinite(out)):
        log.warning("Ho-Kalman extrapolation overflowed (spectral radius %.3g)", real.spectral_radius)
    return out


def extrapolate(real: Realization, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(extrapolate_many(real, k)[-1])


def truncation_estimate(markov, k: int) -> float:
    """Known parameter for ``k <= T``, zero beyond."""
    if k < 1:
        raise ValueError("k must be >= 1")
    h = _values(markov)
    return float(h[k - 1]) if k <= h.size else 0.0
