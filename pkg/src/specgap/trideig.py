"""Symmetric tridiagonal eigensolver and Sturm-sequence eigenvalue counting.

Gauss quadrature only needs the eigenvalues of ``T_m`` together with the
first row of its eigenvector matrix, and the residual bound additionally
needs the last row.  The QL sweep below therefore accumulates just those
two rows, which keeps the cost at O(m^2) time and O(m) extra memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "TridiagConvergenceError",
    "TridiagEigen",
    "tridiag_eigen",
    "sturm_count",
    "bisection_eigenvalues",
]


class TridiagConvergenceError(RuntimeError):
    """The implicit QL iteration did not converge."""


@dataclass(frozen=True)
class TridiagEigen:
    """Eigenvalues of a symmetric tridiagonal matrix and two eigenvector rows.

    Attributes
    ----------
    thetas : ndarray
        Eigenvalues in ascending order.
    first_row, last_row : ndarray
        ``U[0, j]`` and ``U[m-1, j]`` for the orthogonal ``U`` with
        ``T = U diag(thetas) U^T``; column ``j`` matches ``thetas[j]``.
    """

    thetas: np.ndarray
    first_row: np.ndarray
    last_row: np.ndarray

    @property
    def m(self) -> int:
        return int(self.thetas.shape[0])

    @property
    def weights(self) -> np.ndarray:
        """Gauss quadrature weights ``first_row**2``."""
        return self.first_row**2


@numba.njit(cache=True)
def _ql_two_rows(d, e, z, max_iter):
    # d: diagonal (overwritten with eigenvalues); e[i] couples i and i+1,
    # e[n-1] = 0; z: (2, n) rows of the eigenvector matrix being accumulated.
    n = d.shape[0]
    eps = np.finfo(np.float64).eps
    total = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            total += 1
            if total > max_iter:
                return -1
            # Wilkinson-type shift from the leading 2x2 block
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                af = abs(f)
                ag = abs(g)
                if af < 1e150 and ag < 1e150:
                    r = np.sqrt(f * f + g * g)
                else:
                    r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(2):
                    f = z[k, i + 1]
                    z[k, i + 1] = s * z[k, i] + c * f
                    z[k, i] = c * z[k, i] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return total


def tridiag_eigen(alphas, betas) -> TridiagEigen:
    """Eigen-decompose the symmetric tridiagonal matrix with diagonal ``alphas``.

    Parameters
    ----------
    alphas : array_like, shape (m,)
    betas : array_like, shape (m-1,)
        Off-diagonal entries; any sign is accepted.
    """
    d = np.array(alphas, dtype=np.float64)
    off = np.asarray(betas, dtype=np.float64)
    m = d.shape[0]
    if m == 0:
        raise ValueError("empty tridiagonal matrix")
    if off.shape[0] != m - 1:
        raise ValueError(f"betas must have length {m - 1}, got {off.shape[0]}")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(off))):
        raise ValueError("tridiagonal entries must be finite")
    e = np.zeros(m)
    e[: m - 1] = off
    z = np.zeros((2, m))
    z[0, 0] = 1.0
    z[1, m - 1] = 1.0
    iters = _ql_two_rows(d, e, z, 50 * m)
    if iters < 0:
        raise TridiagConvergenceError(f"implicit QL did not converge within {50 * m} sweeps")
    order = np.argsort(d, kind="stable")
    return TridiagEigen(thetas=d[order], first_row=z[0, order], last_row=z[1, order])


def sturm_count(alphas, betas, mu):
    """Number of eigenvalues strictly below ``mu`` (vectorized over ``mu``).

    Counts negative pivots of the LDL^T factorization of ``T - mu I``.
    A zero pivot is replaced by a tiny negative number, the usual
    convention that makes the count well defined when ``mu`` coincides
    with an eigenvalue of a leading block.
    """
    a = np.asarray(alphas, dtype=np.float64)
    b2 = np.asarray(betas, dtype=np.float64) ** 2
    mu_arr = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    scale = max(float(np.max(np.abs(a))) if a.size else 0.0,
                float(np.sqrt(np.max(b2))) if b2.size else 0.0, 1.0)
    tiny = np.finfo(np.float64).eps * scale
    count = np.zeros(mu_arr.shape, dtype=np.int64)
    q = a[0] - mu_arr
    q = np.where(q == 0.0, -tiny, q)
    count += q < 0
    for i in range(1, a.shape[0]):
        q = (a[i] - mu_arr) - b2[i - 1] / q
        q = np.where(q == 0.0, -tiny, q)
        count += q < 0
    if np.ndim(mu) == 0:
        return int(count[0])
    return count


def bisection_eigenvalues(alphas, betas, tol: float = 0.0, max_steps: int = 200) -> np.ndarray:
    """All eigenvalues by Sturm-sequence bisection (slow, independent oracle)."""
    a = np.asarray(alphas, dtype=np.float64)
    b = np.abs(np.asarray(betas, dtype=np.float64))
    m = a.shape[0]
    radius = np.zeros(m)
    radius[:-1] += b
    radius[1:] += b
    lo0 = float(np.min(a - radius))
    hi0 = float(np.max(a + radius))
    pad = 1e-12 * max(hi0 - lo0, 1.0)
    lo = np.full(m, lo0 - pad)
    hi = np.full(m, hi0 + pad)
    k = np.arange(m)
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        below = sturm_count(a, b, mid)
        right = below > k  # eigenvalue k lies below mid
        hi = np.where(right, mid, hi)
        lo = np.where(right, lo, mid)
        if np.all(hi - lo <= np.maximum(tol, 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi)))):
            break
    return 0.5 * (lo + hi)
