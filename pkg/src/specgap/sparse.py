"""Sparse symmetric matrix storage, Matrix Market I/O and spectral intervals.

The only access the gap finder needs to a matrix is a matrix-vector
product, so :class:`SparseSymMatrix` is a thin, immutable wrapper around a
CSR array that stores *both* triangles of the symmetric pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = [
    "MatrixFormatError",
    "SparseSymMatrix",
    "SpectralInterval",
    "load_matrix_market",
    "write_matrix_market",
    "spectral_interval",
]


class MatrixFormatError(ValueError):
    """Raised for unreadable, non-square or non-symmetric matrix input."""


class SparseSymMatrix:
    """Real symmetric matrix in full-pattern CSR form.

    Instances are immutable after construction; the underlying arrays are
    flagged read-only so the object can be shared between threads.

    Parameters
    ----------
    csr : scipy.sparse matrix
        Square matrix with exactly symmetric content (checked with
        tolerance 0).
    """

    __slots__ = ("_csr",)

    def __init__(self, csr):
        csr = sp.csr_matrix(csr, dtype=np.float64)
        if csr.shape[0] != csr.shape[1]:
            raise MatrixFormatError(f"matrix is not square: shape {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise MatrixFormatError("matrix has non-finite entries")
        asym = _max_asymmetry(csr)
        if asym > 0.0:
            raise MatrixFormatError(f"matrix is not symmetric: max |A - A^T| = {asym:.3e}")
        for arr in (csr.data, csr.indices, csr.indptr):
            arr.setflags(write=False)
        self._csr = csr

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_triangle(cls, n, rows, cols, values):
        """Build from one triangle (or a mix); off-diagonal entries are mirrored.

        Duplicate entries are summed, diagonal entries are kept once.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        off = rows != cols
        r = np.concatenate([rows, cols[off]])
        c = np.concatenate([cols, rows[off]])
        v = np.concatenate([values, values[off]])
        return cls(sp.coo_matrix((v, (r, c)), shape=(n, n)))

    @classmethod
    def from_dense(cls, a):
        return cls(sp.csr_matrix(np.asarray(a, dtype=np.float64)))

    @classmethod
    def diagonal(cls, d):
        d = np.asarray(d, dtype=np.float64)
        return cls(sp.diags(d, 0, format="csr"))

    @classmethod
    def tridiagonal(cls, diag, offdiag):
        diag = np.asarray(diag, dtype=np.float64)
        offdiag = np.asarray(offdiag, dtype=np.float64)
        if offdiag.shape[0] != diag.shape[0] - 1:
            raise ValueError("offdiag must have length len(diag) - 1")
        return cls(sp.diags([offdiag, diag, offdiag], [-1, 0, 1], format="csr"))

    # -- accessors --------------------------------------------------------

    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def shape(self):
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    def to_scipy(self) -> sp.csr_matrix:
        """Return a writable copy as a scipy CSR matrix."""
        return self._csr.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self._csr.data))

    def matvec(self, x) -> np.ndarray:
        """Return ``A @ x`` by row-wise CSR accumulation."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: matrix is {self.n}x{self.n}, vector has shape {x.shape}")
        return self._csr @ x

    __matmul__ = matvec

    def affine(self, scale: float, shift: float) -> "SparseSymMatrix":
        """Return ``scale * A + shift * I``."""
        eye = sp.identity(self.n, format="csr")
        return SparseSymMatrix(scale * self._csr + shift * eye)

    def __repr__(self):
        return f"SparseSymMatrix(n={self.n}, nnz={self.nnz})"


def _max_asymmetry(csr) -> float:
    diff = csr - csr.T
    if diff.nnz == 0:
        return 0.0
    return float(np.max(np.abs(diff.data)))


# -- Matrix Market ----------------------------------------------------------


def load_matrix_market(path) -> SparseSymMatrix:
    """Read a Matrix Market coordinate file into a :class:`SparseSymMatrix`.

    Accepts ``real`` or ``integer`` fields with ``symmetric`` or ``general``
    symmetry. Duplicate entries are summed. A ``general`` file must have
    exactly symmetric content.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such file")
    try:
        rows, cols, _, fmt, field, symmetry = scipy.io.mminfo(str(path))
    except OSError:
        raise
    except Exception as exc:  # scipy raises ValueError or its own parse errors
        raise MatrixFormatError(f"{path}: malformed Matrix Market header ({exc})") from exc
    if fmt != "coordinate":
        raise MatrixFormatError(f"{path}: only coordinate format is supported, got {fmt!r}")
    if field not in ("real", "integer"):
        raise MatrixFormatError(f"{path}: unsupported field {field!r} (need real or integer)")
    if symmetry not in ("symmetric", "general"):
        raise MatrixFormatError(f"{path}: unsupported symmetry {symmetry!r}")
    if rows != cols:
        raise MatrixFormatError(f"{path}: matrix is not square ({rows}x{cols})")
    try:
        coo = scipy.io.mmread(str(path))
    except Exception as exc:
        raise MatrixFormatError(f"{path}: cannot parse body ({exc})") from exc
    csr = sp.csr_matrix(coo, dtype=np.float64)
    csr.sum_duplicates()
    asym = _max_asymmetry(csr)
    if asym > 0.0:
        raise MatrixFormatError(f"{path}: 'general' matrix is not symmetric, max |A - A^T| = {asym:.3e}")
    return SparseSymMatrix(csr)


def write_matrix_market(path, A: SparseSymMatrix, comment: str = "") -> None:
    """Write the lower triangle with a ``symmetric`` header at full precision."""
    scipy.io.mmwrite(str(path), A.to_scipy(), comment=comment, field="real",
                     precision=17, symmetry="symmetric")


# -- spectral interval ------------------------------------------------------


@dataclass(frozen=True)
class SpectralInterval:
    """Interval ``[lo, hi]`` assumed to contain the spectrum.

    ``certified`` is True when the endpoints were supplied by the caller
    (or an exact oracle) and False when they come from Ritz values.
    """

    lo: float
    hi: float
    certified: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"invalid interval: lo={self.lo} > hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def degenerate(self) -> bool:
        scale = max(abs(self.lo), abs(self.hi), np.finfo(float).tiny)
        return self.width <= 1e-13 * scale

    def contains(self, values) -> bool:
        values = np.asarray(values)
        return bool(np.all((values >= self.lo) & (values <= self.hi)))

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "certified": self.certified}


def spectral_interval(A: SparseSymMatrix, probe_iters: int = 100, margin: float = 0.01,
                      seed=None) -> SpectralInterval:
    """Estimate ``[lambda_min, lambda_max]`` from one Lanczos pass.

    Returns ``[theta_min - margin*w, theta_max + margin*w]`` with
    ``w = theta_max - theta_min`` the spread of the extremal Ritz values.
    """
    from .lanczos import LanczosBreakdownError, lanczos_run
    from .trideig import tridiag_eigen

    if probe_iters < 2:
        raise ValueError("probe_iters must be >= 2")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    rng = np.random.default_rng(seed)
    m = min(probe_iters, A.n)
    for attempt in range(2):
        x = rng.standard_normal(A.n)
        try:
            dec = lanczos_run(A, x, m, reorth="full" if A.n * m <= 50_000_000 else "none")
            break
        except LanczosBreakdownError:
            if attempt == 1:
                raise
    thetas = tridiag_eigen(dec.alphas, dec.betas[:-1]).thetas
    t_min, t_max = float(thetas[0]), float(thetas[-1])
    w = t_max - t_min
    return SpectralInterval(t_min - margin * w, t_max + margin * w, certified=False)
