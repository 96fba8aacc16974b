#!/usr/bin/env python3
"""Directional expansions of the empirical risk, at smooth and boundary points.

The risk of a one-hidden-layer piecewise-linear network is differentiable
wherever no training input sits exactly on a hidden unit's activation
hyperplane. This demo compares the computed first/second-order coefficients
against finite differences at a generic point, then shows how the one-sided
derivative depends on the direction at an exact boundary point.
"""

import numpy as np

from sospcheck import (
    ActivationSpec,
    Dataset,
    NetworkParams,
    Perturbation,
    SquaredLoss,
    empirical_risk,
    expansion_terms,
    generate_dataset,
    init_params,
)

loss = SquaredLoss()
rng = np.random.default_rng(7)

print("=" * 64)
print("Directional expansion vs finite differences (smooth point)")
print("=" * 64)
params = init_params(d_x=3, d_h=2, d_y=1, seed=1)
data = generate_dataset(d_x=3, d_y=1, m=8, seed=2)
eta = Perturbation(
    rng.standard_normal(1), rng.standard_normal((1, 2)), rng.standard_normal((2, 4))
)
eta = eta.scaled(1.0 / eta.norm())
first, second = expansion_terms(params, data, loss, eta)
base = empirical_risk(params, data, loss)
print(f"risk at z               : {base:.6f}")
print(f"first-order coefficient : {first:+.6e}")
print(f"second-order coefficient: {second:+.6e}")
print(f"{'t':>8}  {'(R(z+t*eta)-R)/t':>18}  {'error vs first':>14}")
for t in (1e-3, 1e-4, 1e-5, 1e-6):
    fd = (empirical_risk(params.perturbed(eta, t), data, loss) - base) / t
    print(f"{t:8.0e}  {fd:18.10f}  {abs(fd - first):14.2e}")
print("the error shrinks linearly in t: the linear coefficient is exact\n")

t = 1e-4
fitted = (empirical_risk(params.perturbed(eta, t), data, loss) - base - t * first) / t**2
print(f"quadratic coefficient from the same probe: {fitted:+.6e}")
print(f"matches `second` to {abs(fitted - second):.2e} (squared loss: exact in t)\n")

print("=" * 64)
print("Direction dependence at an exact boundary point")
print("=" * 64)
# one sample exactly on the (single) unit's hyperplane: W1*0 + b1 = 0
params = NetworkParams(
    W1=np.array([[1.0]]), b1=np.zeros(1), W2=np.array([[1.0]]), b2=np.zeros(1),
    activation=ActivationSpec(1.0, 0.0),
)
data = Dataset(np.array([[0.0], [1.0]]), np.array([[-1.0], [2.0]]))
eta = Perturbation(np.zeros(1), np.zeros((1, 1)), np.array([[0.0, 1.0]]))  # bias direction
f_plus, _ = expansion_terms(params, data, loss, eta)
f_minus, _ = expansion_terms(params, data, loss, eta.scaled(-1.0))
print(f"one-sided derivative along +eta: {f_plus:+.6f}")
print(f"one-sided derivative along -eta: {f_minus:+.6f}")
print("for a differentiable point these would be negatives of each other;")
print("here the active slope flips between the two sides of the hyperplane.")
