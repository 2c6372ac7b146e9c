"""Sparse storage, Matrix Market I/O and spectral interval estimation."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from specgap.sparse import (
    MatrixFormatError,
    SparseSymMatrix,
    SpectralInterval,
    load_matrix_market,
    spectral_interval,
    write_matrix_market,
)


def random_sym(n, density, seed):
    rng = np.random.default_rng(seed)
    a = sp.random(n, n, density=density, random_state=rng, format="csr")
    return SparseSymMatrix(a + a.T + sp.diags(rng.standard_normal(n)))


def write_text(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConstruction:
    def test_full_pattern_is_stored(self):
        A = SparseSymMatrix.from_triangle(3, [1, 2], [0, 2], [4.0, 5.0])
        assert A.nnz == 3
        np.testing.assert_array_equal(A.to_dense(), [[0, 4, 0], [4, 0, 0], [0, 0, 5]])

    def test_csr_invariants(self):
        A = random_sym(40, 0.1, 0)
        assert np.all(np.diff(A.row_offsets) >= 0)
        assert A.col_indices.min() >= 0 and A.col_indices.max() < A.n
        assert np.all(np.isfinite(A.values))
        dense = A.to_dense()
        np.testing.assert_array_equal(dense, dense.T)

    def test_arrays_are_read_only(self):
        A = random_sym(10, 0.3, 1)
        with pytest.raises(ValueError):
            A.values[0] = 1.0

    def test_asymmetric_rejected(self):
        with pytest.raises(MatrixFormatError, match="not symmetric"):
            SparseSymMatrix.from_dense([[1.0, 2.0], [2.0 + 1e-15, 1.0]])

    def test_non_square_rejected(self):
        with pytest.raises(MatrixFormatError, match="square"):
            SparseSymMatrix(sp.csr_matrix((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(MatrixFormatError, match="non-finite"):
            SparseSymMatrix.diagonal([1.0, np.nan])

    def test_affine(self):
        A = SparseSymMatrix.tridiagonal([1.0, 2.0], [3.0])
        np.testing.assert_array_equal(A.affine(2.0, 1.0).to_dense(), [[3, 6], [6, 5]])


class TestMatvec:
    def test_identity(self):
        A = SparseSymMatrix.diagonal(np.ones(3))
        np.testing.assert_array_equal(A.matvec([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_two_by_two(self):
        A = SparseSymMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_array_equal(A @ np.array([1.0, 0.0]), [2.0, 1.0])

    def test_random_against_dense(self):
        A = random_sym(50, 0.2, 2)
        x = np.random.default_rng(3).standard_normal(50)
        err = np.max(np.abs(A.matvec(x) - A.to_dense() @ x))
        assert err <= 1e-13 * A.frobenius_norm() * np.linalg.norm(x)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            SparseSymMatrix.diagonal(np.ones(3)).matvec(np.ones(4))

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 100), density=st.floats(0.01, 0.5), seed=st.integers(0, 2**32 - 1))
    def test_dense_oracle_property(self, n, density, seed):
        A = random_sym(n, density, seed)
        x = np.random.default_rng(seed).standard_normal(n)
        ref = A.to_dense() @ x
        scale = max(np.abs(A.to_dense()).sum(axis=1).max() * np.abs(x).max(), 1e-300)
        assert np.max(np.abs(A.matvec(x) - ref)) <= 1e-12 * scale


class TestMatrixMarket:
    def test_symmetric_file_is_mirrored(self, tmp_path):
        path = write_text(tmp_path, "a.mtx",
                          "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n")
        np.testing.assert_array_equal(load_matrix_market(path).to_dense(), [[2, 1], [1, 2]])

    def test_duplicates_are_summed(self, tmp_path):
        path = write_text(tmp_path, "a.mtx",
                          "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n1 1 1\n2 2 5\n")
        np.testing.assert_array_equal(load_matrix_market(path).to_dense(), [[2, 0], [0, 5]])

    def test_integer_field(self, tmp_path):
        path = write_text(tmp_path, "a.mtx",
                          "%%MatrixMarket matrix coordinate integer symmetric\n2 2 1\n2 1 3\n")
        np.testing.assert_array_equal(load_matrix_market(path).to_dense(), [[0, 3], [3, 0]])

    def test_round_trip(self, tmp_path):
        A = random_sym(60, 0.1, 4)
        write_matrix_market(tmp_path / "r.mtx", A)
        B = load_matrix_market(tmp_path / "r.mtx")
        np.testing.assert_array_equal(A.row_offsets, B.row_offsets)
        np.testing.assert_array_equal(A.col_indices, B.col_indices)
        np.testing.assert_array_equal(A.values, B.values)

    def test_malformed_header(self, tmp_path):
        path = write_text(tmp_path, "a.mtx", "not a matrix\n")
        with pytest.raises(MatrixFormatError, match="header"):
            load_matrix_market(path)

    def test_non_square(self, tmp_path):
        path = write_text(tmp_path, "a.mtx",
                          "%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1\n")
        with pytest.raises(MatrixFormatError, match="not square"):
            load_matrix_market(path)

    def test_pattern_field(self, tmp_path):
        path = write_text(tmp_path, "a.mtx",
                          "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n")
        with pytest.raises(MatrixFormatError, match="pattern"):
            load_matrix_market(path)

    def test_asymmetric_general_reports_asymmetry(self, tmp_path):
        path = write_text(tmp_path, "a.mtx",
                          "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 1 1.5\n")
        with pytest.raises(MatrixFormatError, match=r"max \|A - A\^T\| = 5\.000e-01"):
            load_matrix_market(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_matrix_market(tmp_path / "missing.mtx")


class TestSpectralInterval:
    def test_diagonal_exact(self):
        iv = spectral_interval(SparseSymMatrix.diagonal(np.arange(1.0, 11.0)),
                               probe_iters=10, margin=0.0, seed=0)
        assert abs(iv.lo - 1.0) <= 1e-8 and abs(iv.hi - 10.0) <= 1e-8
        assert not iv.certified

    def test_margin(self):
        iv = spectral_interval(SparseSymMatrix.diagonal(np.arange(1.0, 11.0)),
                               probe_iters=10, margin=0.01, seed=0)
        assert iv.lo == pytest.approx(1 - 0.09, abs=1e-8)
        assert iv.hi == pytest.approx(10 + 0.09, abs=1e-8)

    def test_identity_is_degenerate(self):
        iv = spectral_interval(SparseSymMatrix.diagonal(np.ones(20)), seed=0)
        assert iv.lo == pytest.approx(1.0) and iv.hi == pytest.approx(1.0)
        assert iv.degenerate

    @pytest.mark.parametrize("seed", range(5))
    def test_contains_tridiagonal_spectrum(self, seed):
        rng = np.random.default_rng(seed)
        d, e = rng.standard_normal(300), rng.standard_normal(299)
        ev = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
        iv = spectral_interval(SparseSymMatrix.tridiagonal(d, e), probe_iters=100,
                               margin=0.01, seed=seed)
        assert iv.contains(ev)

    def test_deterministic(self):
        A = random_sym(80, 0.1, 5)
        assert spectral_interval(A, seed=3) == spectral_interval(A, seed=3)

    def test_invalid_arguments(self):
        A = SparseSymMatrix.diagonal(np.arange(3.0))
        with pytest.raises(ValueError):
            spectral_interval(A, probe_iters=1)
        with pytest.raises(ValueError):
            spectral_interval(A, margin=-1.0)
        with pytest.raises(ValueError):
            SpectralInterval(2.0, 1.0)
