"""Dense linear-algebra primitives with explicit contracts.

Every routine here is a thin, checked wrapper around LAPACK-backed numpy /
scipy calls. Outputs are deterministic (eigenvalues ascending, eigenvector
signs canonicalized) so they can be used in golden tests, and the routines
double as independent oracles for the QP solvers elsewhere in the package.

All rank / zero decisions funnel through a single relative threshold,
``DEFAULT_RANK_TOL``, so the numerical meaning of "rank" is auditable in one
place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, NonSymmetricError, RankDeficientError

DEFAULT_RANK_TOL = 1e-10

# Relative condition-number threshold beyond which AA^T counts as singular.
CONDITION_LIMIT = 1e12


def require_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    """Return ``arr`` as a float ndarray, raising NonFiniteError on NaN/Inf."""
    out = np.asarray(arr, dtype=float)
    if out.size and not np.isfinite(out).all():
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return out


def _require_symmetric(m: np.ndarray, name: str) -> np.ndarray:
    m = require_finite(m, name)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSymmetricError(f"{name} must be square, got shape {m.shape}")
    if m.size == 0:
        return m
    tol = 1e-10 * max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > tol:
        raise NonSymmetricError(f"{name} is not symmetric within {tol:.3e}")
    # Work on the exactly-symmetric part so LAPACK sees a clean input.
    return 0.5 * (m + m.T)


def canonicalize_columns(v: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-magnitude entry is positive."""
    if v.size == 0:
        return v
    idx = np.abs(v).argmax(axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


@dataclass(frozen=True)
class EigenDecomposition:
    """Symmetric eigendecomposition with eigenvalues sorted ascending.

    ``eigenvectors[:, j]`` pairs with ``eigenvalues[j]``; the eigenvector
    matrix is orthonormal and sign-canonicalized.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def sym_eig(m: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix.

    Raises NonSymmetricError if the input fails the relative symmetry check,
    NonFiniteError on NaN/Inf. Eigenvalues come back ascending; eigenvector
    signs are canonicalized for deterministic output.
    """
    m = _require_symmetric(m, "matrix")
    if m.size == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    w, v = np.linalg.eigh(m)
    return EigenDecomposition(w, canonicalize_columns(v))


def orthonormal_basis(vectors, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the span of the given vectors.

    Accepts a nonempty iterable of equal-length vectors (a 2-D array counts
    as its rows). The number of returned columns equals the numerical rank.
    """
    rows = np.vstack([np.asarray(v, dtype=float).ravel() for v in vectors])
    cols = require_finite(rows.T, "vectors")
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((cols.shape[0], 0))
    rank = int(np.sum(s > rank_tol * s[0]))
    return canonicalize_columns(u[:, :rank])


def nullspace_basis(m: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of ``m``."""
    m = require_finite(m, "matrix")
    if m.ndim != 2:
        raise NonFiniteError(f"expected a matrix, got shape {m.shape}")
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > rank_tol * s[0]))
    return canonicalize_columns(vt[rank:].T)


def pseudoinverse(m: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues below ``rank_tol * lambda_max`` are treated as exact zeros.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    dec = sym_eig(m)
    if dec.eigenvalues.size == 0:
        return np.zeros_like(np.asarray(m, dtype=float))
    lam_max = float(dec.eigenvalues[-1])
    cutoff = rank_tol * max(lam_max, 0.0)
    inv = np.where(dec.eigenvalues > cutoff, 1.0, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(inv > 0, 1.0 / np.where(dec.eigenvalues > cutoff, dec.eigenvalues, 1.0), 0.0)
    v = dec.eigenvectors
    return (v * inv) @ v.T


def row_projector(a: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the null space of ``a``: I - A^T (AA^T)^{-1} A.

    ``a`` must have full row rank; a relative condition number of AA^T above
    CONDITION_LIMIT raises RankDeficientError. An empty ``a`` (zero rows)
    yields the identity.
    """
    a = require_finite(a, "constraint matrix")
    if a.ndim != 2:
        raise RankDeficientError(f"expected a matrix, got shape {a.shape}")
    q, p = a.shape
    if q == 0:
        return np.eye(p)
    gram = a @ a.T
    w = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    if w[-1] <= 0.0 or w[0] <= w[-1] / CONDITION_LIMIT:
        raise RankDeficientError(
            f"AA^T is singular or ill-conditioned (eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    proj = np.eye(p) - a.T @ np.linalg.solve(gram, a)
    return 0.5 * (proj + proj.T)


def matrix_rank(m: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank using the package-wide relative threshold."""
    m = require_finite(m, "matrix")
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))
