"""Fast built-in consistency checks, runnable without pytest.

Each check exercises one subsystem against an independent oracle (finite
differences, brute-force enumeration, eigendecompositions, line search).
Intended as a smoke test for installations: `sospcheck selftest`.
"""

from __future__ import annotations

import numpy as np

from .checker import sosp_check
from .harness import construct_boundary_fosp, generate_dataset, init_params
from .linalg import sym_eig
from .network import (
    Dataset,
    Perturbation,
    SquaredLoss,
    empirical_risk,
    expansion_terms,
)
from .second_order import (
    ConeQP,
    copositivity_classify,
    projected_spectrum_oracle,
    solve_ecqp_pgd,
    solve_icqp,
)


def _check_eig(rng) -> str | None:
    m = rng.standard_normal((8, 8))
    m = m + m.T
    dec = sym_eig(m)
    if np.abs(dec.reconstruct() - m).max() > 1e-10 * np.abs(m).max():
        return "eigendecomposition does not reconstruct its input"
    return None


def _check_expansion(rng) -> str | None:
    loss = SquaredLoss()
    params = init_params(3, 2, 2, seed=11)
    data = generate_dataset(3, 2, 6, seed=12)
    eta = Perturbation(
        rng.standard_normal(2), rng.standard_normal((2, 2)), rng.standard_normal((2, 4))
    )
    first, second = expansion_terms(params, data, loss, eta)
    base = empirical_risk(params, data, loss)
    t = 1e-6
    fd = (empirical_risk(params.perturbed(eta, t), data, loss) - base) / t
    if abs(fd - first) > 1e-4 * max(1.0, abs(first)):
        return f"directional derivative mismatch: {fd} vs {first}"
    return None


def _check_ecqp(rng) -> str | None:
    for trial in range(5):
        p = 6
        g = rng.standard_normal((p, p))
        q = g + g.T
        a = rng.standard_normal((2, p))
        got = solve_ecqp_pgd(q, a, seed=trial)
        want = projected_spectrum_oracle(q, a)
        if got.verdict != want.verdict:
            return f"PGD verdict {got.verdict} disagrees with spectrum {want.verdict}"
    return None


def _check_copositivity() -> str | None:
    cases = [
        (np.eye(2), "CP1"),
        (np.array([[0.0, 1.0], [1.0, 0.0]]), "CP2"),
        (np.array([[1.0, -3.0], [-3.0, 1.0]]), "CP3"),
    ]
    for mat, want in cases:
        got = copositivity_classify(mat).kind
        if got != want:
            return f"copositivity of {mat.tolist()} came out {got}, expected {want}"
    return None


def _check_icqp() -> str | None:
    qp = ConeQP(np.diag([-1.0, 1.0]), np.zeros((0, 2)), np.array([[1.0, 0.0]]))
    res = solve_icqp(qp)
    if res.verdict != "T3":
        return f"indefinite cone form classified {res.verdict}, expected T3"
    return None


def _check_pipeline() -> str | None:
    point = construct_boundary_fosp(3, 2, 1, seed=5, mode="interior")
    verdict = sosp_check(point.params, point.data)
    if verdict.diagnostics["M"] != 1 or verdict.diagnostics["n_ecqp"] != 1:
        return "constructed boundary point did not reach the second-order stage cleanly"
    perturbed = Dataset(point.data.inputs, point.data.labels + 0.5)
    verdict2 = sosp_check(point.params, perturbed)
    if verdict2.kind != "descent":
        return "perturbed labels should produce a descent verdict"
    return None


def run_selftest(verbose: bool = False) -> int:
    rng = np.random.default_rng(2024)
    checks = [
        ("symmetric eigendecomposition", lambda: _check_eig(rng)),
        ("directional expansion vs finite differences", lambda: _check_expansion(rng)),
        ("equality-constrained QP vs spectrum oracle", lambda: _check_ecqp(rng)),
        ("copositivity hand cases", _check_copositivity),
        ("inequality-constrained QP", _check_icqp),
        ("end-to-end pipeline on a constructed fixture", _check_pipeline),
    ]
    failures = 0
    for name, fn in checks:
        err = fn()
        status = "ok" if err is None else f"FAIL ({err})"
        if verbose:
            print(f"  {name}: {status}")
        failures += err is not None
    if verbose:
        print(f"selftest: {len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 2
