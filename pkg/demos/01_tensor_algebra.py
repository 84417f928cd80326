#!/usr/bin/env python3
# Tour of the algebra layer: unfoldings, Khatri-Rao products, mode
# products, and how aggregation acts on a low-rank tensor.

import numpy as np

from tensagg import (Factors, build_partition_operator, fold, khatri_rao,
                     mode_product, reconstruct, unfold)

rng = np.random.default_rng(0)

# A rank-2 tensor of 4 stores x 3 items x 5 weeks.
factors = Factors(rng.uniform(-1, 1, (4, 2)),
                  rng.uniform(-1, 1, (3, 2)),
                  rng.uniform(-1, 1, (5, 2)))
x = reconstruct(factors)
print("tensor dims:", x.shape, " rank:", factors.rank)

# The three matricizations factor through the Khatri-Rao products of the
# remaining factors.  First index fastest everywhere.
for mode, left, right, tail in ((1, factors.C, factors.B, factors.A),
                                (2, factors.C, factors.A, factors.B),
                                (3, factors.B, factors.A, factors.C)):
    unf = unfold(x, mode)
    err = np.linalg.norm(unf - khatri_rao(left, right) @ tail.T)
    print(f"mode-{mode} unfolding {unf.shape}, factorization error {err:.2e}")
    assert np.array_equal(fold(unf, mode, x.shape), x)

# Aggregation is a mode product by a fat 0/1 matrix: here, two groups of
# two stores each.
u = build_partition_operator(4, [(0, 1), (2, 3)], "sum")
y = mode_product(x, u, 1)
print("\naggregating stores in pairs:", x.shape, "->", y.shape)
print("group sums match slab sums:",
      np.allclose(y[0], x[0] + x[1]) and np.allclose(y[1], x[2] + x[3]))

# The same aggregation acts on the CPD factors directly: the coarse view
# keeps the fine B and C and sees U @ A in mode 1.
y_from_factors = reconstruct(Factors(u @ factors.A, factors.B, factors.C))
print("mode product commutes with the CPD:",
      np.allclose(y, y_from_factors, atol=1e-12))
