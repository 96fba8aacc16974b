#!/usr/bin/env python3
"""End-to-end certification on three known-verdict cases.

1. a zero-loss single-sample fit: a second-order stationary point (the
   per-unit rescaling invariance always leaves a flat direction);
2. the same network with a shifted label: strict descent found already at
   the outer-layer gradient test;
3. a constructed exact-boundary stationary point whose second-order form is
   indefinite: descent found by the cone QP, with the step validated by an
   actual decrease of the risk.
"""

import numpy as np

from sospcheck import (
    Dataset,
    NetworkParams,
    SquaredLoss,
    construct_indefinite_fosp,
    empirical_risk,
    sosp_check,
)

loss = SquaredLoss()


def show(title, params, data):
    print("=" * 64)
    print(title)
    print("=" * 64)
    verdict = sosp_check(params, data)
    d = verdict.diagnostics
    print(f"verdict: {verdict.kind}" + (f"  (stage {verdict.stage})" if verdict.stage else ""))
    print(f"boundary samples M = {d['M']}, flat-ray counts K = {d.get('K')}, L = {d.get('L')}")
    print(f"QPs solved: {d['n_ecqp']} equality-constrained, {d['n_icqp']} inequality-constrained")
    print("stage trace:", " -> ".join(t["stage"] for t in d["trace"]))
    if verdict.kind == "descent":
        base = empirical_risk(params, data, loss)
        stepped = empirical_risk(params.perturbed(verdict.direction, verdict.step), data, loss)
        print(f"validated step {verdict.step:.2e}: risk {base:.6f} -> {stepped:.6f}")
    if verdict.kind == "sosp":
        print(f"flat witness: first-order {d['flat_witness_first_order']:+.2e}, "
              f"second-order {d['flat_witness_second_order']:+.2e}")
    print()


net = NetworkParams(np.array([[1.2]]), np.array([0.1]), np.array([[1.5]]), np.array([0.0]))
x = np.array([[0.8]])
y = net.W2 @ net.activation.h(net.W1 @ x[0] + net.b1) + net.b2
show("1. zero-loss single-sample fit", net, Dataset(x, y.reshape(1, 1)))
show("2. same network, shifted label", net, Dataset(x, y.reshape(1, 1) + 1.0))

point = construct_indefinite_fosp(d_x=3, d_h=2, d_y=2, seed=1)
show("3. boundary stationary point with indefinite second-order form",
     point.params, point.data)
