"""Test-problem generators with exact spectra for checking detected gaps.

All generators are pure functions of their parameters and seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .sparse import SparseSymMatrix, SpectralInterval, spectral_interval

__all__ = [
    "ProblemSpec",
    "AffineMap",
    "OracleGap",
    "logspace_gap_offset",
    "gen_perturbed_logspace",
    "gen_dirac_comb",
    "gen_planted_spectrum",
    "example_three_gaps",
    "shift_scale",
    "exact_gaps",
    "tridiagonal_eigenvalues",
    "dirac_comb_eigenvalues",
]

LOG_LO, LOG_MID, LOG_HI = 1.0, 1e3, 1e4


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for a generated matrix; ``params`` holds the kind-specific sizes."""

    kind: str
    params: dict
    seed: int | None = None
    scale: float = 1.0
    shift: float = 0.0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class AffineMap:
    """``x -> scale * x + shift``."""

    scale: float
    shift: float

    def __call__(self, x):
        return self.scale * np.asarray(x) + self.shift

    def inverse(self, y):
        return (np.asarray(y) - self.shift) / self.scale


@dataclass(frozen=True)
class OracleGap:
    """Open interval between consecutive eigenvalues."""

    lo: float
    hi: float
    relative_width: float
    eigcount_below: int

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "relative_width": self.relative_width,
                "eigcount_below": self.eigcount_below}


# -- perturbed log-spaced spectrum ------------------------------------------


def logspace_gap_offset(theta: float) -> float:
    """Width ``x`` with ``(x/2) / (1e4 - 1e3 - x/2) = theta``."""
    return 2.0 * (LOG_HI - LOG_MID) * theta / (1.0 + theta)


def _perturbed_logspace_parts(n, theta, n_below, seed, perturb):
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if n_below is None:
        n_below = (2 * n) // 3
    if not 0 < n_below < n:
        raise ValueError(f"n_below must lie in (0, n), got {n_below}")
    x = logspace_gap_offset(theta)
    d = np.concatenate([
        np.geomspace(LOG_LO, LOG_MID, n_below),
        np.geomspace(LOG_MID + x, LOG_HI, n - n_below),
    ])
    if perturb:
        rng = np.random.default_rng(seed)
        diag = d + rng.standard_normal(n)
        off = rng.standard_normal(n - 1)
    else:
        diag, off = d, np.zeros(n - 1)
    return diag, off, n_below


def gen_perturbed_logspace(n: int, theta: float, n_below: int | None = None, seed=None,
                           perturb: bool = True) -> SparseSymMatrix:
    """Tridiagonal ``D + T`` with a gap of relative width about ``theta``.

    ``D`` holds ``n_below`` log-spaced values in ``[1, 1e3]`` and the rest in
    ``[1e3 + x, 1e4]``; ``T`` is symmetric tridiagonal with standard normal
    entries.  ``n_below`` defaults to ``2n/3``.

    ``perturb=False`` drops ``T`` so the spectrum is exactly the diagonal.
    """
    diag, off, _ = _perturbed_logspace_parts(n, theta, n_below, seed, perturb)
    return SparseSymMatrix.tridiagonal(diag, off)


def tridiagonal_eigenvalues(A: SparseSymMatrix) -> np.ndarray:
    """All eigenvalues of a tridiagonal matrix via LAPACK (ascending)."""
    d = A.to_scipy()
    diag = d.diagonal()
    off = d.diagonal(1)
    if A.nnz > diag.shape[0] + 2 * off.shape[0]:
        raise ValueError("matrix is not tridiagonal")
    return sla.eigvalsh_tridiagonal(diag, off, lapack_driver="sterf")


# -- Dirac comb -------------------------------------------------------------


def _dirac_comb_bands(N, k):
    if N < 2 or k < 2:
        raise ValueError("need N >= 2 and k >= 2")
    n = N * k
    k2 = float(k * k)
    diag = np.full(n, 2.0 * k2)
    diag[k * np.arange(1, N)] += k2
    off = np.full(n - 1, -k2)
    return n, diag, off, -k2


def gen_dirac_comb(N: int, k: int) -> SparseSymMatrix:
    """Periodic finite-difference ``-L + V`` on ``[0, N]`` with ``k`` points per unit.

    ``V`` equals ``k^2`` at the nodes ``x = 1, ..., N-1`` (indices ``j k``).
    """
    n, diag, off, corner = _dirac_comb_bands(N, k)
    rows = np.concatenate([np.arange(n), np.arange(1, n), [n - 1]])
    cols = np.concatenate([np.arange(n), np.arange(n - 1), [0]])
    vals = np.concatenate([diag, off, [corner]])
    return SparseSymMatrix.from_triangle(n, rows, cols, vals)


def dirac_comb_eigenvalues(N: int, k: int) -> np.ndarray:
    """Exact spectrum of :func:`gen_dirac_comb` via a banded eigensolver.

    Interleaving the nodes as ``0, n-1, 1, n-2, ...`` turns the periodic
    tridiagonal matrix into one of bandwidth 2.
    """
    n, diag, off, corner = _dirac_comb_bands(N, k)
    order = np.empty(n, dtype=np.int64)
    order[0::2] = np.arange((n + 1) // 2)
    order[1::2] = n - 1 - np.arange(n // 2)
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    # couplings (i, i+1) for i < n-1 plus the wrap (n-1, 0)
    i = np.concatenate([np.arange(n - 1), [n - 1]])
    j = np.concatenate([np.arange(1, n), [0]])
    v = np.concatenate([off, [corner]])
    pi, pj = pos[i], pos[j]
    r, c = np.maximum(pi, pj), np.minimum(pi, pj)
    band = np.zeros((3, n))
    band[0] = diag[order]
    band[r - c, c] = v
    return sla.eigvals_banded(band, lower=True)


# -- planted spectrum -------------------------------------------------------


def gen_planted_spectrum(n: int, lo: float, hi: float, gaps) -> tuple[SparseSymMatrix, np.ndarray]:
    """Diagonal matrix with ``n`` equispaced eigenvalues in ``[lo, hi]`` minus ``gaps``.

    Points are split between the remaining segments in proportion to their
    length (largest remainders), each segment including its endpoints.
    Gaussian probes are rotation invariant, so a diagonal matrix is as good
    as any other with the same spectrum.

    Returns the matrix and its sorted eigenvalues.
    """
    edges = [lo]
    for a, b in sorted(gaps):
        if not lo < a < b < hi:
            raise ValueError(f"gap ({a}, {b}) must lie strictly inside ({lo}, {hi})")
        edges += [a, b]
    edges.append(hi)
    segs = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
    lengths = np.array([b - a for a, b in segs])
    if np.any(lengths <= 0):
        raise ValueError("gaps overlap")
    share = n * lengths / lengths.sum()
    counts = np.floor(share).astype(int)
    for idx in np.argsort(-(share - counts), kind="stable")[: n - counts.sum()]:
        counts[idx] += 1
    if np.any(counts < 2):
        raise ValueError("too few points for some segment")
    eigs = np.concatenate([np.linspace(a, b, c) for (a, b), c in zip(segs, counts)])
    return SparseSymMatrix.diagonal(eigs), eigs


def example_three_gaps(n: int = 600):
    """600 eigenvalues in ``[0, 60]`` with gaps ``[20, 21]``, ``[30, 32]``, ``[40, 44]``."""
    return gen_planted_spectrum(n, 0.0, 60.0, [(20.0, 21.0), (30.0, 32.0), (40.0, 44.0)])


# -- utilities --------------------------------------------------------------


def shift_scale(A: SparseSymMatrix, target_lo: float, target_hi: float,
                interval: SpectralInterval | None = None, seed=None):
    """Map the spectrum of ``A`` affinely onto ``[target_lo, target_hi]``.

    ``interval`` should hold the exact extreme eigenvalues when they are
    known; otherwise it is estimated from Ritz values (without margin).

    Returns
    -------
    (SparseSymMatrix, AffineMap)
    """
    if not target_lo < target_hi:
        raise ValueError("need target_lo < target_hi")
    if interval is None:
        interval = spectral_interval(A, margin=0.0, seed=seed)
    if interval.degenerate:
        raise ValueError("cannot rescale a degenerate spectrum")
    scale = (target_hi - target_lo) / interval.width
    shift = target_lo - scale * interval.lo
    if scale == 1.0 and shift == 0.0:
        return A, AffineMap(1.0, 0.0)
    return A.affine(scale, shift), AffineMap(scale, shift)


def exact_gaps(eigenvalues, theta_min: float = 0.0) -> list[OracleGap]:
    """Gaps between consecutive distinct eigenvalues with relative width >= ``theta_min``."""
    from .gapfinder import relative_gap_width

    ev = np.asarray(eigenvalues, dtype=np.float64)
    if ev.ndim != 1 or ev.shape[0] < 2:
        raise ValueError("need at least two eigenvalues")
    if np.any(np.diff(ev) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    lam_lo, lam_hi = float(ev[0]), float(ev[-1])
    out = []
    for i in np.nonzero(np.diff(ev) > 0)[0]:
        a, b = float(ev[i]), float(ev[i + 1])
        theta = relative_gap_width(lam_lo, lam_hi, a, b)
        if theta >= theta_min:
            out.append(OracleGap(a, b, theta, int(i + 1)))
    return out
