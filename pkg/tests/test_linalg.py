import numpy as np
import pytest

from sospcheck.errors import NonFiniteError, NonSymmetricError, RankDeficientError
from sospcheck.linalg import (
    matrix_rank,
    nullspace_basis,
    orthonormal_basis,
    pseudoinverse,
    row_projector,
    sym_eig,
)


class TestSymEig:
    def test_identity(self):
        dec = sym_eig(np.eye(3))
        assert np.allclose(dec.eigenvalues, [1.0, 1.0, 1.0])

    def test_diagonal_sorted_ascending(self):
        dec = sym_eig(np.diag([2.0, -1.0]))
        assert np.allclose(dec.eigenvalues, [-1.0, 2.0])

    def test_reconstruction_random(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((8, 8))
        m = m + m.T
        dec = sym_eig(m)
        assert np.abs(dec.reconstruct() - m).max() <= 1e-10 * np.abs(m).max()

    def test_rejects_nonsymmetric(self):
        with pytest.raises(NonSymmetricError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_nonfinite(self):
        with pytest.raises(NonFiniteError):
            sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_sign_canonicalization_deterministic(self):
        m = np.diag([1.0, 2.0, 3.0])
        dec = sym_eig(m)
        # largest-magnitude entry of every eigenvector is positive
        idx = np.abs(dec.eigenvectors).argmax(axis=0)
        assert (dec.eigenvectors[idx, np.arange(3)] > 0).all()

    def test_property_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(2, 31))
            m = rng.standard_normal((n, n))
            m = m + m.T
            dec = sym_eig(m)
            v = dec.eigenvectors
            assert np.linalg.norm(dec.reconstruct() - m) <= 1e-9 * np.linalg.norm(m)
            assert np.linalg.norm(v.T @ v - np.eye(n)) <= 1e-10


class TestOrthonormalBasis:
    def test_single_unit_vector(self):
        b = orthonormal_basis([np.array([1.0, 0.0, 0.0])])
        assert b.shape == (3, 1)
        assert np.allclose(np.abs(b[:, 0]), [1.0, 0.0, 0.0])

    def test_rank_one_pair(self):
        b = orthonormal_basis([np.array([1.0, 0.0]), np.array([2.0, 0.0])])
        assert b.shape == (2, 1)
        assert np.allclose(np.abs(b[:, 0]), [1.0, 0.0])

    def test_gram_identity(self):
        b = orthonormal_basis([np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0])])
        assert b.shape == (3, 2)
        assert np.abs(b.T @ b - np.eye(2)).max() <= 1e-12
        # spans the same subspace: original vectors project onto the basis exactly
        for v in (np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0])):
            assert np.linalg.norm(b @ (b.T @ v) - v) <= 1e-12


class TestNullspaceBasis:
    def test_full_rank_empty(self):
        assert nullspace_basis(np.eye(2)).shape == (2, 0)

    def test_one_by_two(self):
        n = nullspace_basis(np.array([[1.0, 0.0]]))
        assert n.shape == (2, 1)
        assert np.allclose(np.abs(n[:, 0]), [0.0, 1.0])

    def test_row_of_ones(self):
        n = nullspace_basis(np.array([[1.0, 1.0, 1.0]]))
        assert n.shape == (3, 2)
        assert np.abs(n.sum(axis=0)).max() <= 1e-12
        assert np.abs(n.T @ n - np.eye(2)).max() <= 1e-12

    def test_complement_of_row_space(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((3, 7))
        n = nullspace_basis(a)
        r = orthonormal_basis(a)  # rows of a as the spanning vectors
        combined = np.hstack([n, r])
        assert combined.shape == (7, 7)
        assert np.linalg.norm(combined.T @ combined - np.eye(7)) <= 1e-10


class TestPseudoinverse:
    def test_identity(self):
        assert np.allclose(pseudoinverse(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(pseudoinverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_moore_penrose_identity(self):
        rng = np.random.default_rng(5)
        g = rng.standard_normal((4, 2))
        m = g @ g.T  # PSD, rank 2
        mp = pseudoinverse(m)
        assert np.linalg.norm(m @ mp @ m - m) <= 1e-9 * np.linalg.norm(m)

    def test_requires_positive_tol(self):
        with pytest.raises(ValueError):
            pseudoinverse(np.eye(2), rank_tol=0.0)


class TestRowProjector:
    def test_single_row(self):
        p = row_projector(np.array([[1.0, 0.0]]))
        assert np.allclose(p, np.diag([0.0, 1.0]))

    def test_identity_rows_give_zero(self):
        p = row_projector(np.eye(2))
        assert np.abs(p).max() <= 1e-12

    def test_idempotency(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((3, 7))
        p = row_projector(a)
        assert np.linalg.norm(p @ p - p) <= 1e-10
        assert np.linalg.norm(p @ a.T) <= 1e-10

    def test_rank_deficient_raises(self):
        a = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        with pytest.raises(RankDeficientError):
            row_projector(a)

    def test_fixes_null_vectors(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((2, 6))
        p = row_projector(a)
        n = nullspace_basis(a)
        v = n @ rng.standard_normal(n.shape[1])
        assert np.linalg.norm(p @ v - v) <= 1e-10 * max(1.0, np.linalg.norm(v))


def test_matrix_rank_threshold():
    assert matrix_rank(np.diag([1.0, 1e-14])) == 1
    assert matrix_rank(np.zeros((2, 3))) == 0
