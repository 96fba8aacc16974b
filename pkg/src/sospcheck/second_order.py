"""Second-order cone quadratic programs and their classification.

Each sign pattern over the boundary samples fixes the hidden-layer slope
matrix of every sample and turns the second-order term of the risk into a
quadratic form ``eta^T Q eta`` over a polyhedral cone
``S = {eta : A eta = 0, B eta >= 0}``. The certification needs to know which
of three mutually exclusive cases holds:

* T1 -- the form is strictly positive on S minus the origin,
* T2 -- nonnegative on S with a nonzero flat direction,
* T3 -- some feasible direction has strictly negative value (a second-order
  descent direction).

With no inequality rows the cone is a subspace and projected gradient
descent on the form settles the question exponentially fast; an
eigendecomposition of the projected form is kept alongside as a fallback
and cross-check. With inequality rows, two changes of variables reduce the
problem to ``min nu^T Rbar nu  s.t. nu_1 >= 0``, which is decided by a
positive-semidefiniteness test on one block and a copositivity test (via
the Pareto spectrum) on an r x r Schur complement, at cost
O(p^3 + r^3 2^r).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import (
    InternalInconsistencyError,
    RankDeficientConstraintsError,
    RankDeficientError,
    SubsetBudgetExceededError,
)
from .linalg import (
    DEFAULT_RANK_TOL,
    EigenDecomposition,
    matrix_rank,
    nullspace_basis,
    pseudoinverse,
    require_finite,
    row_projector,
    sym_eig,
)
from .network import (
    BoundaryAnalysis,
    Dataset,
    DerivativeBundle,
    LossModel,
    NetworkParams,
    Perturbation,
    SignPattern,
    per_sample_derivatives,
    perturbation_layout,
)

DEFAULT_ZERO_EIG_TOL = 1e-8
DEFAULT_POS_TOL = 1e-9
DEFAULT_CP_TOL = 1e-9
WITNESS_FEAS_TOL = 1e-8
WITNESS_CURV_TOL = 1e-10


@dataclass(frozen=True)
class ConeQP:
    """Quadratic form Q over the cone {A eta = 0, B eta >= 0}.

    Q must be symmetric; A and B must each have full row rank and their
    stacked rows must be linearly independent (checked at construction).
    """

    Q: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        q_mat = require_finite(self.Q, "Q")
        p = q_mat.shape[0]
        if q_mat.shape != (p, p) or np.abs(q_mat - q_mat.T).max(initial=0.0) > 1e-9 * max(
            1.0, np.abs(q_mat).max(initial=0.0)
        ):
            raise RankDeficientConstraintsError("Q must be square symmetric")
        object.__setattr__(self, "Q", 0.5 * (q_mat + q_mat.T))
        a = require_finite(self.A, "A").reshape(-1, p)
        b = require_finite(self.B, "B").reshape(-1, p)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        q, r = a.shape[0], b.shape[0]
        stacked = np.vstack([a, b]) if q + r else np.zeros((0, p))
        if q + r and matrix_rank(stacked) != q + r:
            raise RankDeficientConstraintsError(
                f"constraint rows are dependent: rank {matrix_rank(stacked)} < {q + r}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        """(p, q, r)."""
        return (self.Q.shape[0], self.A.shape[0], self.B.shape[0])


@dataclass(frozen=True)
class QPClassification:
    verdict: str  # "T1" | "T2" | "T3"
    witness: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)


def _spectral_norm(q_mat: np.ndarray) -> float:
    if q_mat.size == 0:
        return 0.0
    w = np.linalg.eigvalsh(q_mat)
    return float(max(abs(w[0]), abs(w[-1])))


def verify_witness(qp: ConeQP, eta: np.ndarray, verdict: str) -> None:
    """Re-check a witness in the original coordinates; raise if it fails."""
    n = float(np.linalg.norm(eta))
    if n == 0.0:
        raise InternalInconsistencyError(f"{verdict} witness is the zero vector")
    qnorm = _spectral_norm(qp.Q)
    quad = float(eta @ qp.Q @ eta)
    if qp.A.shape[0] and np.linalg.norm(qp.A @ eta) > WITNESS_FEAS_TOL * n:
        raise InternalInconsistencyError(f"{verdict} witness violates equality constraints")
    if qp.B.shape[0] and float(np.min(qp.B @ eta)) < -WITNESS_FEAS_TOL * n:
        raise InternalInconsistencyError(f"{verdict} witness violates inequality constraints")
    if verdict == "T3" and quad > -WITNESS_CURV_TOL * qnorm * n * n:
        raise InternalInconsistencyError(
            f"T3 witness curvature {quad:.3e} not sufficiently negative"
        )
    if verdict == "T2" and abs(quad) > WITNESS_FEAS_TOL * max(qnorm, 1.0) * n * n:
        raise InternalInconsistencyError(f"T2 witness curvature {quad:.3e} not flat")


# ---------------------------------------------------------------------------
# Assembly of the second-order QP from a sign pattern
# ---------------------------------------------------------------------------


def pattern_jvals(params: NetworkParams, bundle: DerivativeBundle, pattern: SignPattern) -> np.ndarray:
    """Hidden-layer slope of every (sample, unit) pair under the sign pattern."""
    act = params.activation
    jvals = act.hprime(bundle.preact).astype(float)
    for (k, i), sigma in pattern.entries:
        if not bundle.boundary_mask[i, k]:
            raise ValueError(f"pattern entry ({k}, {i}) is not a boundary pair")
        if sigma == 0:
            jvals[i, k] = 0.0
        else:
            jvals[i, k] = act.s_plus if sigma > 0 else act.s_minus
    return jvals


def pattern_objective(
    params: NetworkParams,
    bundle: DerivativeBundle,
    pattern: SignPattern,
    eta: Perturbation,
) -> float:
    """Second-order objective at ``eta`` with slopes fixed by the pattern.

    Used as the direct-evaluation oracle for the assembled quadratic form:
    eta^T Q eta equals exactly twice this value.
    """
    jvals = pattern_jvals(params, bundle, pattern)
    t_lin = bundle.xbar @ eta.v.T
    jt = jvals * t_lin
    dy1 = bundle.hidden @ eta.delta2_matrix.T + eta.delta2_bias + jt @ params.W2.T
    dy2 = jt @ eta.delta2_matrix.T
    val = float(np.sum(bundle.grads * dy2))
    val += 0.5 * float(np.einsum("ia,iab,ib->", dy1, bundle.hessians, dy1))
    return val


def assemble_so_qp(
    params: NetworkParams,
    data: Dataset,
    loss: LossModel,
    boundary: BoundaryAnalysis,
    pattern: SignPattern,
    bundle: DerivativeBundle | None = None,
) -> ConeQP:
    """Build the cone QP for one sign pattern.

    Q is the symmetric matrix with eta^T Q eta equal to twice the
    second-order objective. A stacks one homogeneity row per hidden unit
    (confining directions to the orthogonal complement of the per-unit
    rescaling invariances) plus one boundary row per zero-sign entry; B
    stacks the signed boundary rows. Dependent constraint rows raise
    RankDeficientConstraintsError.
    """
    if bundle is None:
        bundle = per_sample_derivatives(params, data, loss, boundary.boundary_tol)
    if not pattern.matches(boundary):
        raise ValueError("sign pattern does not match the boundary analysis")
    d_x, d_h, d_y = params.dims
    p = params.n_params
    sl_delta2, sl_u, sl_v = perturbation_layout(params.dims)
    jvals = pattern_jvals(params, bundle, pattern)

    # PSD part: sum_i P_i^T H_i P_i with P_i the linear response map.
    q_mat = np.zeros((p, p))
    for i in range(bundle.m):
        p_i = np.zeros((d_y, p))
        p_i[:, sl_delta2] = np.eye(d_y)
        for k in range(d_h):
            p_i[:, sl_u[k]] = bundle.hidden[i, k] * np.eye(d_y)
            p_i[:, sl_v[k]] = jvals[i, k] * np.outer(params.W2[:, k], bundle.xbar[i])
        q_mat += p_i.T @ bundle.hessians[i] @ p_i

    # Bilinear coupling between the u_k and v_k blocks.
    for k in range(d_h):
        w_k = (bundle.grads * jvals[:, k][:, None]).T @ bundle.xbar  # (d_y, d_x+1)
        q_mat[sl_u[k], sl_v[k]] += w_k
        q_mat[sl_v[k], sl_u[k]] += w_k.T
    q_mat = 0.5 * (q_mat + q_mat.T)

    a_rows = []
    for k in range(d_h):
        row = np.zeros(p)
        row[sl_u[k]] = params.W2[:, k]
        row[sl_v[k]] = -params.hyperplane_row(k)
        a_rows.append(row)
    b_rows = []
    sigma = pattern.as_dict()
    for k in range(d_h):
        for i in boundary.boundary_indices[k]:
            s = sigma[(k, int(i))]
            row = np.zeros(p)
            row[sl_v[k]] = bundle.xbar[i] if s >= 0 else -bundle.xbar[i]
            if s == 0:
                a_rows.append(row)
            else:
                b_rows.append(row)
    a_mat = np.vstack(a_rows) if a_rows else np.zeros((0, p))
    b_mat = np.vstack(b_rows) if b_rows else np.zeros((0, p))
    return ConeQP(Q=q_mat, A=a_mat, B=b_mat)


# ---------------------------------------------------------------------------
# Equality-constrained case: projected gradient descent + spectrum oracle
# ---------------------------------------------------------------------------


def solve_ecqp_pgd(
    q_mat: np.ndarray,
    a_mat: np.ndarray,
    seed: int = 0,
    max_iters: int = 10_000,
    div_threshold: float = 1e8,
    conv_threshold: float = 1e-12,
    fixed_point_tol: float = 1e-12,
) -> QPClassification:
    """Classify Q on the subspace {A eta = 0} by projected gradient descent.

    Iterates eta <- P (I - alpha Q) eta from a random start projected onto
    null(A), with alpha = 0.9 / lambda_max(Q) when the top eigenvalue is
    positive (else 1). Convergence to zero means T1, to a nonzero fixed
    point T2; norm growth implies a negative eigenvalue and the iterate is
    then renormalized and run until its Rayleigh quotient is decisively
    negative (T3). If the trajectory does not resolve within the budget the
    eigen oracle decides and the fallback is recorded in the diagnostics.
    """
    q_mat = require_finite(q_mat, "Q")
    p = q_mat.shape[0]
    a_mat = require_finite(a_mat, "A").reshape(-1, p)
    proj = row_projector(a_mat) if a_mat.shape[0] else np.eye(p)
    qnorm = _spectral_norm(q_mat)
    lam_max = float(np.linalg.eigvalsh(q_mat)[-1]) if p else 0.0
    alpha = 0.9 / lam_max if lam_max > 0 else 1.0

    rng = np.random.default_rng(seed)
    eta = proj @ rng.standard_normal(p)
    n0 = float(np.linalg.norm(eta))
    diag = {"alpha": alpha, "lam_max": lam_max, "fallback": False, "mode": "pgd"}
    if n0 == 0.0 or matrix_rank(a_mat) >= p:
        # feasible set is {0}: strictly positive holds vacuously
        diag["mode"] = "trivial"
        return QPClassification("T1", None, diag)

    step_mat = proj @ (np.eye(p) - alpha * q_mat)
    norms = [n0]
    diverged = False
    prev = eta
    for it in range(1, max_iters + 1):
        eta = step_mat @ prev
        n = float(np.linalg.norm(eta))
        norms.append(n)
        if not diverged:
            if n <= conv_threshold * n0:
                diag.update(iterations=it, norms=norms)
                return QPClassification("T1", None, diag)
            if n >= div_threshold * n0:
                diverged = True
                eta = eta / n * n0  # keep iterating on the direction only
            elif (
                float(np.linalg.norm(eta - prev)) <= fixed_point_tol * n
                and n >= 1e-6 * n0
            ):
                diag.update(iterations=it, norms=norms)
                witness = eta / n
                return QPClassification("T2", witness, diag)
        else:
            eta = eta / max(float(np.linalg.norm(eta)), 1e-300) * n0
        if diverged:
            u = eta / n0
            quad = float(u @ q_mat @ u)
            if quad < -max(WITNESS_CURV_TOL * qnorm, 1e-300):
                diag.update(iterations=it, norms=norms)
                return QPClassification("T3", u, diag)
        prev = eta

    oracle = projected_spectrum_oracle(q_mat, a_mat)
    diag.update(iterations=max_iters, norms=norms, fallback=True, mode="oracle-fallback")
    return QPClassification(oracle.verdict, oracle.witness, diag)


@dataclass(frozen=True)
class SpectrumOracle:
    verdict: str
    witness: np.ndarray | None
    decomposition: EigenDecomposition
    basis: np.ndarray  # orthonormal basis of null(A)


def projected_spectrum_oracle(
    q_mat: np.ndarray,
    a_mat: np.ndarray,
    zero_tol: float = DEFAULT_ZERO_EIG_TOL,
) -> SpectrumOracle:
    """Classify Q on {A eta = 0} from the spectrum of the projected form.

    With W an orthonormal basis of null(A), the verdict follows from the
    eigenvalue signs of C = W^T Q W, with |lambda| below
    ``zero_tol * ||Q||`` counted as zero. The top eigenvalue of C never
    exceeds that of Q (interlacing); this is asserted.
    """
    q_mat = require_finite(q_mat, "Q")
    p = q_mat.shape[0]
    a_mat = require_finite(a_mat, "A").reshape(-1, p)
    basis = nullspace_basis(a_mat) if a_mat.shape[0] else np.eye(p)
    if basis.shape[1] == 0:
        return SpectrumOracle("T1", None, EigenDecomposition(np.zeros(0), np.zeros((0, 0))), basis)
    c_mat = basis.T @ q_mat @ basis
    dec = sym_eig(0.5 * (c_mat + c_mat.T))
    qnorm = _spectral_norm(q_mat)
    lam_max_q = float(np.linalg.eigvalsh(q_mat)[-1])
    if dec.eigenvalues[-1] > lam_max_q + 1e-9 * max(1.0, qnorm):
        raise InternalInconsistencyError("projected top eigenvalue exceeds the unprojected one")
    tol = zero_tol * qnorm
    lam_min = float(dec.eigenvalues[0])
    if lam_min < -tol:
        return SpectrumOracle("T3", basis @ dec.eigenvectors[:, 0], dec, basis)
    zero_cols = np.flatnonzero(np.abs(dec.eigenvalues) <= tol)
    if zero_cols.size:
        return SpectrumOracle("T2", basis @ dec.eigenvectors[:, zero_cols[0]], dec, basis)
    return SpectrumOracle("T1", None, dec, basis)


# ---------------------------------------------------------------------------
# Inequality-constrained case: reduction to a sign-constrained form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IcqpReduction:
    """Change-of-variables data for eliminating the equality constraints.

    After permuting coordinates so the leading blocks are invertible, the
    original problem is equivalent to ``min nu^T Rbar nu  s.t. nu_1 >= 0``
    with nu_1 of length r. ``eta_from_nu`` maps reduced coordinates back to
    a feasible original direction (B eta equals nu_1 exactly).
    """

    perm_a: np.ndarray
    t_a: np.ndarray
    r_full: np.ndarray
    b_bar: np.ndarray
    perm_b: np.ndarray
    t_b: np.ndarray
    r11: np.ndarray
    r12: np.ndarray
    r22: np.ndarray
    shape: tuple[int, int, int]  # (p, q, r)

    def eta_from_nu(self, nu1: np.ndarray, nu2: np.ndarray) -> np.ndarray:
        p, q, r = self.shape
        nu = np.concatenate([np.atleast_1d(nu1), np.atleast_1d(nu2)])
        w_perm = self.t_b @ nu
        w = np.empty(p - q)
        w[self.perm_b] = w_perm
        full = self.t_a @ np.concatenate([np.zeros(q), w])
        eta = np.empty(p)
        eta[self.perm_a] = full
        return eta


def _pivot_permutation(mat: np.ndarray) -> np.ndarray:
    """Column order from QR with pivoting; leading columns are independent."""
    _, _, piv = scipy.linalg.qr(mat, mode="economic", pivoting=True)
    return piv


def icqp_reduce(qp: ConeQP, rank_tol: float = DEFAULT_RANK_TOL) -> IcqpReduction:
    """Eliminate the equality constraints of an inequality-constrained QP."""
    p, q, r = qp.shape
    if r == 0:
        raise ValueError("no inequality rows; use the equality-constrained path")
    if q:
        perm_a = _pivot_permutation(qp.A)
        a1 = qp.A[:, perm_a[:q]]
        a2 = qp.A[:, perm_a[q:]]
        s = np.linalg.svd(a1, compute_uv=False)
        if s[-1] <= rank_tol * max(s[0], 1.0):
            raise RankDeficientError("pivoted A1 block is singular")
        a1inv_a2 = np.linalg.solve(a1, a2)
        t_a = np.block(
            [
                [np.linalg.inv(a1), -a1inv_a2],
                [np.zeros((p - q, q)), np.eye(p - q)],
            ]
        )
        q_perm = qp.Q[np.ix_(perm_a, perm_a)]
        m_full = t_a.T @ q_perm @ t_a
        r_full = 0.5 * (m_full[q:, q:] + m_full[q:, q:].T)
        b_perm = qp.B[:, perm_a]
        b_bar = b_perm[:, q:] - b_perm[:, :q] @ a1inv_a2
    else:
        perm_a = np.arange(p)
        t_a = np.eye(p)
        r_full = qp.Q.copy()
        b_bar = qp.B.copy()

    if matrix_rank(b_bar, rank_tol) != r:
        raise RankDeficientError("reduced inequality matrix lost row rank")
    perm_b = _pivot_permutation(b_bar)
    b1 = b_bar[:, perm_b[:r]]
    b2 = b_bar[:, perm_b[r:]]
    s = np.linalg.svd(b1, compute_uv=False)
    if s[-1] <= rank_tol * max(s[0], 1.0):
        raise RankDeficientError("pivoted B1 block is singular")
    n2 = p - q - r
    t_b = np.block(
        [
            [np.linalg.inv(b1), -np.linalg.solve(b1, b2)],
            [np.zeros((n2, r)), np.eye(n2)],
        ]
    )
    r_perm = r_full[np.ix_(perm_b, perm_b)]
    r_bar = t_b.T @ r_perm @ t_b
    r_bar = 0.5 * (r_bar + r_bar.T)
    return IcqpReduction(
        perm_a=perm_a,
        t_a=t_a,
        r_full=r_full,
        b_bar=b_bar,
        perm_b=perm_b,
        t_b=t_b,
        r11=r_bar[:r, :r],
        r12=r_bar[:r, r:],
        r22=r_bar[r:, r:],
        shape=(p, q, r),
    )


# ---------------------------------------------------------------------------
# PSD block classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsdBlockResult:
    kind: str  # "PD1" | "PD2" | "PD3" | "PD4"
    witness_nu2: np.ndarray | None  # negative direction (PD4) or null vector (PD2/PD3)
    decomposition: EigenDecomposition


def classify_psd_block(
    r22: np.ndarray,
    r12: np.ndarray,
    zero_tol: float = DEFAULT_ZERO_EIG_TOL,
    scale: float | None = None,
) -> PsdBlockResult:
    """Eigenvalue trichotomy of the unconstrained block.

    PD1: positive definite. PD2: singular PSD with its null space contained
    in null(R12) (flat directions only). PD3: singular PSD with a null
    vector that R12 sees (the form is then unbounded below). PD4: a negative
    eigenvalue. The zero threshold is relative to ``scale`` (defaults to the
    spectral scale of the blocks themselves).
    """
    r22 = require_finite(np.atleast_2d(r22), "R22")
    n2 = r22.shape[0] if r22.size else 0
    if n2 == 0:
        return PsdBlockResult("PD1", None, EigenDecomposition(np.zeros(0), np.zeros((0, 0))))
    r12 = require_finite(r12, "R12").reshape(-1, n2)
    dec = sym_eig(r22)
    if scale is None:
        scale = max(float(np.abs(dec.eigenvalues).max()), float(np.abs(r12).max(initial=0.0)))
    tol = zero_tol * max(scale, 1e-300)
    if dec.eigenvalues[0] < -tol:
        return PsdBlockResult("PD4", dec.eigenvectors[:, 0], dec)
    zero_cols = np.flatnonzero(np.abs(dec.eigenvalues) <= tol)
    if zero_cols.size == 0:
        return PsdBlockResult("PD1", None, dec)
    null_basis = dec.eigenvectors[:, zero_cols]
    if r12.shape[0] == 0:
        return PsdBlockResult("PD2", null_basis[:, 0], dec)
    images = r12 @ null_basis
    norms = np.linalg.norm(images, axis=0)
    best = int(np.argmax(norms))
    if norms[best] <= tol:
        return PsdBlockResult("PD2", null_basis[:, 0], dec)
    return PsdBlockResult("PD3", null_basis[:, best], dec)


# ---------------------------------------------------------------------------
# Pareto spectrum and copositivity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParetoEigenpair:
    """A Pareto eigenpair: S^J xi = value * xi with xi strictly positive on J.

    ``vector`` is the zero-padded unit eigenvector; complementarity holds on
    the rows outside J.
    """

    value: float
    vector: np.ndarray
    subset: tuple


def pareto_spectrum(
    s_mat: np.ndarray,
    r_max: int = 20,
    pos_tol: float = DEFAULT_POS_TOL,
    comp_tol_factor: float = 1e-10,
) -> tuple[list[ParetoEigenpair], dict]:
    """Enumerate the Pareto spectrum of a symmetric matrix.

    Every nonempty principal submatrix S^J is eigendecomposed; eigenpairs
    whose eigenvector can be signed strictly positive (componentwise above
    ``pos_tol`` after unit normalization) and whose excluded rows satisfy
    the complementarity inequalities are kept. For numerically repeated
    eigenvalues the candidate set additionally includes normalized sums and
    differences of same-eigenvalue eigenvector pairs, and a diagnostic flag
    is raised, since the eigenvectors themselves are then not well defined.
    """
    s_mat = require_finite(np.atleast_2d(s_mat), "S")
    r = s_mat.shape[0]
    if r > r_max:
        raise SubsetBudgetExceededError(f"r={r} exceeds the subset budget r_max={r_max}")
    scale = max(1.0, float(np.abs(s_mat).max(initial=0.0)))
    comp_tol = comp_tol_factor * scale
    degen_tol = 1e-9 * scale
    pairs: list[ParetoEigenpair] = []
    degenerate = False
    for size in range(1, r + 1):
        for subset in combinations(range(r), size):
            idx = np.array(subset)
            dec = sym_eig(s_mat[np.ix_(idx, idx)])
            candidates = [(float(lam), dec.eigenvectors[:, j]) for j, lam in enumerate(dec.eigenvalues)]
            for j in range(len(dec.eigenvalues) - 1):
                if abs(dec.eigenvalues[j + 1] - dec.eigenvalues[j]) <= degen_tol:
                    degenerate = True
                    a = dec.eigenvectors[:, j]
                    b = dec.eigenvectors[:, j + 1]
                    for combo in (a + b, a - b):
                        nrm = np.linalg.norm(combo)
                        if nrm > 0:
                            candidates.append((float(dec.eigenvalues[j]), combo / nrm))
            other = np.setdiff1d(np.arange(r), idx)
            for lam, xi in candidates:
                flip = xi[np.abs(xi).argmax()]
                if flip < 0:
                    xi = -xi
                if xi.min() <= pos_tol:
                    continue
                if other.size and (s_mat[np.ix_(other, idx)] @ xi).min() < -comp_tol:
                    continue
                vec = np.zeros(r)
                vec[idx] = xi
                pairs.append(ParetoEigenpair(lam, vec, subset))
    return pairs, {"degenerate_multiplicity": degenerate, "subsets": 2**r - 1}


@dataclass(frozen=True)
class CopositivityResult:
    kind: str  # "CP1" | "CP2" | "CP3"
    witness: np.ndarray | None  # nonnegative vector with value <= 0 (CP2/CP3)
    min_pareto: float
    spectrum: list
    diagnostics: dict


def copositivity_classify(
    s_mat: np.ndarray,
    r_max: int = 20,
    zero_tol: float = DEFAULT_CP_TOL,
) -> CopositivityResult:
    """Decide (strict) copositivity from the sign of the minimal Pareto eigenvalue."""
    pairs, diag = pareto_spectrum(s_mat, r_max=r_max)
    if not pairs:
        raise InternalInconsistencyError("empty Pareto spectrum; the minimum must be attained")
    values = np.array([p.value for p in pairs])
    best = int(np.argmin(values))
    lam_min = float(values[best])
    tol = zero_tol * max(1.0, float(np.abs(np.atleast_2d(s_mat)).max(initial=0.0)))
    if lam_min > tol:
        return CopositivityResult("CP1", None, lam_min, pairs, diag)
    if lam_min < -tol:
        return CopositivityResult("CP3", pairs[best].vector, lam_min, pairs, diag)
    return CopositivityResult("CP2", pairs[best].vector, lam_min, pairs, diag)


# ---------------------------------------------------------------------------
# Full inequality-constrained solver
# ---------------------------------------------------------------------------


def _polish_unbounded_ray(
    red: IcqpReduction, qp: ConeQP, nu1: np.ndarray, nu2: np.ndarray, cross: float
) -> np.ndarray:
    """Pick the scaling of the null direction giving the best negative curvature.

    For a PD3 pair the reduced value is affine in the scaling t of nu2
    (value = nu1^T R11 nu1 + 2 t cross), so the normalized curvature of the
    mapped direction varies with t; a geometric sweep picks a decisively
    negative one.
    """
    base = float(nu1 @ red.r11 @ nu1)
    sign = -1.0 if cross > 0 else 1.0
    best_eta, best_curv = None, 0.0
    for mag in np.geomspace(1e-3, 1e9, 25):
        t = sign * mag * max(1.0, abs(base) / max(abs(cross), 1e-300))
        value = base + 2.0 * t * cross
        if value >= 0:
            continue
        eta = red.eta_from_nu(nu1, t * nu2)
        n2 = float(eta @ eta)
        curv = float(eta @ qp.Q @ eta) / n2
        if curv < best_curv:
            best_curv, best_eta = curv, eta / np.sqrt(n2)
    if best_eta is None:
        raise InternalInconsistencyError("failed to realize negative curvature from PD3 pair")
    return best_eta


def solve_icqp(
    qp: ConeQP,
    seed: int = 0,
    r_max: int = 20,
    zero_tol: float = DEFAULT_ZERO_EIG_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> QPClassification:
    """Classify an inequality-constrained cone QP.

    Reduces to ``min nu^T Rbar nu, nu_1 >= 0``; a negative or ill-matched
    zero eigenvalue of the unconstrained block settles T3 immediately;
    otherwise copositivity of the r x r Schur complement decides between
    T1 (strict), T3 (negative Pareto eigenvalue) and T2 (everything else).
    Witnesses are mapped back to original coordinates and re-verified.
    """
    p, q, r = qp.shape
    if r == 0:
        raise ValueError("no inequality rows; use the equality-constrained path")
    red = icqp_reduce(qp, rank_tol=rank_tol)
    scale = max(
        float(np.abs(red.r11).max(initial=0.0)),
        float(np.abs(red.r12).max(initial=0.0)),
        float(np.abs(red.r22).max(initial=0.0)),
    )
    psd = classify_psd_block(red.r22, red.r12, zero_tol=zero_tol, scale=scale)
    diag = {"psd": psd.kind, "reduction": red.shape}

    if psd.kind == "PD4":
        eta = red.eta_from_nu(np.zeros(r), psd.witness_nu2)
        eta = eta / np.linalg.norm(eta)
        verify_witness(qp, eta, "T3")
        return QPClassification("T3", eta, diag)

    if psd.kind == "PD3":
        nu2 = psd.witness_nu2
        image = red.r12 @ nu2
        order = np.argsort(-np.abs(image))
        nu1 = None
        cross = 0.0
        for j in order:
            if abs(image[j]) > zero_tol * max(scale, 1e-300):
                nu1 = np.zeros(r)
                nu1[j] = 1.0
                cross = float(image[j])
                break
        if nu1 is None:
            rng = np.random.default_rng(seed)
            for _ in range(32):
                cand = rng.random(r)
                val = float(cand @ image)
                if abs(val) > zero_tol * max(scale, 1e-300):
                    nu1, cross = cand, val
                    break
        if nu1 is not None:
            eta = _polish_unbounded_ray(red, qp, nu1, nu2, cross)
            verify_witness(qp, eta, "T3")
            diag["pd3_cross"] = cross
            return QPClassification("T3", eta, diag)
        diag["pd3_fallback"] = "no nonnegative nu1 coupled to the null direction"
        # fall through to the Schur-complement path, recorded above

    n2 = red.r22.shape[0] if red.r22.size else 0
    if n2:
        r22_pinv = pseudoinverse(red.r22, rank_tol=max(rank_tol, zero_tol))
        schur = red.r11 - red.r12 @ r22_pinv @ red.r12.T
    else:
        r22_pinv = np.zeros((0, 0))
        schur = red.r11.copy()
    schur = 0.5 * (schur + schur.T)
    cp = copositivity_classify(schur, r_max=r_max)
    diag.update(cp=cp.kind, min_pareto=cp.min_pareto, pareto=cp.diagnostics)

    if cp.kind == "CP3":
        nu1 = cp.witness
        nu2 = -(r22_pinv @ (red.r12.T @ nu1)) if n2 else np.zeros(0)
        eta = red.eta_from_nu(nu1, nu2)
        eta = eta / np.linalg.norm(eta)
        verify_witness(qp, eta, "T3")
        return QPClassification("T3", eta, diag)

    if psd.kind == "PD1" and cp.kind == "CP1":
        return QPClassification("T1", None, diag)

    # Remaining combinations are T2; produce a concrete flat direction.
    if psd.kind == "PD2":
        eta = red.eta_from_nu(np.zeros(r), psd.witness_nu2)
    elif cp.witness is not None:  # PD1 with CP2, or the recorded PD3 fallback with CP2
        nu1 = cp.witness
        nu2 = -(r22_pinv @ (red.r12.T @ nu1)) if n2 else np.zeros(0)
        eta = red.eta_from_nu(nu1, nu2)
    else:  # recorded PD3 fallback with CP1: the null direction itself is flat
        eta = red.eta_from_nu(np.zeros(r), psd.witness_nu2)
    eta = eta / np.linalg.norm(eta)
    verify_witness(qp, eta, "T2")
    return QPClassification("T2", eta, diag)
