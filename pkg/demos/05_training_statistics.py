#!/usr/bin/env python3
"""Training toward nondifferentiable points and counting boundary samples.

Full-batch Adam with a decaying step size settles into the creases of the
loss surface: at the final iterate, several training inputs have hidden-unit
preactivations within 1e-5 of zero. The per-unit box QP certifies these
points as approximately first-order stationary (objectives near zero), and
the edge/orthogonality counters estimate how many inequality constraints the
second-order stage would need.

This runs a reduced budget (3 seeds, 10k iterations). The command line
reproduces the full protocol:

    sospcheck stats --dx 10 --dh 1 --m 1000 --runs 10 --iters 20000
    sospcheck stats --full-budget          # 40 runs x 200k iterations
"""

import numpy as np

from sospcheck import (
    AdamConfig,
    adam_train,
    boundary_statistics,
    generate_dataset,
    init_params,
)

adam = AdamConfig(iters=10_000, decay_every=1_000)
print(f"{'seed':>4} {'final risk':>12} {'M^':>4} {'L^':>4} {'K^':>4}  "
      f"{'min |preact|':>12}  box-QP objectives")
for seed in range(3):
    data = generate_dataset(d_x=10, d_y=1, m=1000, seed=seed)
    params0 = init_params(d_x=10, d_h=1, d_y=1, seed=seed + 10_000)
    params, trace = adam_train(params0, data, config=adam)
    rep = boundary_statistics(params, data)
    margin = np.abs(data.inputs @ params.W1.T + params.b1).min()
    objs = ", ".join(f"{o:.1e}" for o in rep.qp_objectives) or "-"
    print(f"{seed:>4} {rep.final_risk:12.4f} {rep.m_hat:>4} {rep.l_hat:>4} {rep.k_hat:>4}  "
          f"{margin:12.2e}  {objs}")
print()
print("M^ counts samples with |preactivation| < 1e-5 at the trained point;")
print("L^ counts those contributing an inequality constraint (edge box-QP")
print("solution or orthogonal gradient factor); K^ counts the orthogonal ones.")
