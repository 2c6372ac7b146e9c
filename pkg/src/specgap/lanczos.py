"""Lanczos tridiagonalization with optional full reorthogonalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LanczosBreakdownError",
    "LanczosDecomposition",
    "lanczos_run",
    "extend",
    "choose_reorth",
    "REORTH_MEMORY_BUDGET",
    "REORTH_WORK_BUDGET",
]

BREAKDOWN_TOL = 1e-13
REORTH_MEMORY_BUDGET = 2 * 1024**3  # bytes held by the stored basis
REORTH_WORK_BUDGET = 1e9            # n * m**2, roughly flops spent reorthogonalizing


class LanczosBreakdownError(RuntimeError):
    """Raised on a zero start vector, non-finite values, or extension past breakdown."""


@dataclass(frozen=True)
class LanczosDecomposition:
    """Coefficients of the (m+1) x m Lanczos matrix.

    Attributes
    ----------
    alphas : ndarray, shape (m,)
        Diagonal of ``T_m``.
    betas : ndarray, shape (m,)
        Subdiagonal; ``betas[:-1]`` is the off-diagonal of ``T_m`` and
        ``betas[-1]`` is ``t_{m+1,m}`` (zero after a breakdown).
    x_norm_sq : float
        Squared norm of the starting vector.
    reorth : {"full", "none"}
    basis : ndarray, shape (m+1, n) or None
        Orthonormal Lanczos vectors as rows, kept only for full
        reorthogonalization.
    breakdown : bool
        True when an invariant subspace was found at step m.
    """

    alphas: np.ndarray
    betas: np.ndarray
    x_norm_sq: float
    reorth: str
    basis: np.ndarray | None = None
    breakdown: bool = False
    norm_estimate: float = 0.0
    tail: np.ndarray | None = None  # rows v_m, v_{m+1} when basis is not stored

    @property
    def m(self) -> int:
        return int(self.alphas.shape[0])

    @property
    def t_off(self) -> float:
        """The entry ``t_{m+1,m}``."""
        return float(self.betas[-1])

    def leading(self, k: int) -> "LanczosDecomposition":
        """Coefficients after the first ``k`` steps (no basis)."""
        if not 1 <= k <= self.m:
            raise ValueError(f"k must be in [1, {self.m}], got {k}")
        return LanczosDecomposition(
            alphas=self.alphas[:k].copy(),
            betas=self.betas[:k].copy(),
            x_norm_sq=self.x_norm_sq,
            reorth=self.reorth,
            breakdown=self.breakdown and k == self.m,
            norm_estimate=self.norm_estimate,
        )

    def tridiagonal(self) -> np.ndarray:
        """Dense ``T_m`` (for tests and small problems)."""
        return np.diag(self.alphas) + np.diag(self.betas[:-1], 1) + np.diag(self.betas[:-1], -1)


def choose_reorth(n: int, m: int, memory_budget: float = REORTH_MEMORY_BUDGET,
                  work_budget: float = REORTH_WORK_BUDGET) -> str:
    """Pick ``"full"`` when storing and reorthogonalizing against the basis is affordable."""
    if 8.0 * n * (m + 1) <= memory_budget and float(n) * m * m <= work_budget:
        return "full"
    return "none"


def lanczos_run(A, x, m_max: int, reorth: str = "auto") -> LanczosDecomposition:
    """Run up to ``m_max`` Lanczos steps for ``A`` started at ``x``.

    Stops early on lucky breakdown, i.e. when the new residual norm drops
    below ``1e-13`` times the running estimate of ``||A||``.
    """
    x = np.asarray(x, dtype=np.float64)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    x_norm_sq = float(x @ x)
    if not np.isfinite(x_norm_sq):
        raise LanczosBreakdownError("starting vector has non-finite entries")
    if x_norm_sq == 0.0:
        raise LanczosBreakdownError("starting vector is zero")
    n = x.shape[0]
    m_max = min(m_max, n)
    if reorth == "auto":
        reorth = choose_reorth(n, m_max)
    if reorth not in ("full", "none"):
        raise ValueError(f"unknown reorth mode {reorth!r}")

    v = x / np.sqrt(x_norm_sq)
    basis = None
    if reorth == "full":
        basis = np.empty((m_max + 1, n))
        basis[0] = v
    state = _State(
        alphas=np.empty(m_max), betas=np.empty(m_max), basis=basis,
        v_prev=np.zeros(n), v=v, beta_prev=0.0, norm_est=0.0, m=0,
    )
    _iterate(A, state, m_max)
    return state.finish(x_norm_sq, reorth)


def extend(decomp: LanczosDecomposition, A, extra: int) -> LanczosDecomposition:
    """Continue the recurrence of ``decomp`` for ``extra`` more steps."""
    if extra < 0:
        raise ValueError("extra must be >= 0")
    if extra == 0:
        return decomp
    if decomp.breakdown:
        raise LanczosBreakdownError("cannot extend a decomposition past a breakdown")
    m = decomp.m
    if decomp.basis is not None:
        n = decomp.basis.shape[1]
        total = min(m + extra, n)
        basis = np.empty((total + 1, n))
        basis[: m + 1] = decomp.basis
        v_prev, v = basis[m - 1], basis[m]
    else:
        if decomp.tail is None:
            raise LanczosBreakdownError("decomposition holds no vectors to continue from")
        n = decomp.tail.shape[1]
        total = min(m + extra, n)
        basis = None
        v_prev, v = decomp.tail
    if total == m:
        return decomp
    alphas = np.empty(total)
    betas = np.empty(total)
    alphas[:m] = decomp.alphas
    betas[:m] = decomp.betas
    state = _State(
        alphas=alphas, betas=betas, basis=basis, v_prev=v_prev.copy(), v=v.copy(),
        beta_prev=float(decomp.betas[-1]), norm_est=decomp.norm_estimate, m=m,
    )
    _iterate(A, state, total)
    return state.finish(decomp.x_norm_sq, decomp.reorth)


@dataclass
class _State:
    alphas: np.ndarray
    betas: np.ndarray
    basis: np.ndarray | None
    v_prev: np.ndarray
    v: np.ndarray
    beta_prev: float
    norm_est: float
    m: int
    breakdown: bool = False

    def finish(self, x_norm_sq, reorth):
        m = self.m
        basis = None if self.basis is None else self.basis[: m + 1]
        tail = None
        if basis is None:
            # v is v_{m+1} unless the recurrence stopped on a breakdown
            if self.breakdown:
                tail = np.vstack([self.v, np.zeros_like(self.v)])
            else:
                tail = np.vstack([self.v_prev, self.v])
        return LanczosDecomposition(
            alphas=self.alphas[:m].copy(), betas=self.betas[:m].copy(),
            x_norm_sq=x_norm_sq, reorth=reorth, basis=basis,
            breakdown=self.breakdown, norm_estimate=self.norm_est, tail=tail,
        )


def _iterate(A, st: _State, total: int) -> None:
    basis = st.basis
    for j in range(st.m, total):
        w = A.matvec(st.v)
        if j > 0:
            w -= st.beta_prev * st.v_prev
        alpha = float(st.v @ w)
        w -= alpha * st.v
        if basis is not None:
            # two passes of classical Gram-Schmidt against v_0..v_j
            V = basis[: j + 1]
            for _ in range(2):
                w -= (V @ w) @ V
        beta = float(np.sqrt(w @ w))
        if not (np.isfinite(alpha) and np.isfinite(beta)):
            raise LanczosBreakdownError(
                f"non-finite value at step {j + 1} (non-symmetric or overflowing input?)")
        st.norm_est = max(st.norm_est, abs(alpha) + beta + st.beta_prev)
        st.alphas[j] = alpha
        st.m = j + 1
        if beta <= BREAKDOWN_TOL * st.norm_est:
            st.betas[j] = 0.0
            st.breakdown = True
            return
        st.betas[j] = beta
        v_next = w / beta
        if basis is not None:
            basis[j + 1] = v_next
        st.v_prev, st.v, st.beta_prev = st.v, v_next, beta
