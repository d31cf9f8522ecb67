"""
Reading a DAG off the whitening matrix
======================================

A three-variable chain X1 -> X2 -> X3 with unit weights and unit noise.
For each causal order, QWO orthogonalises the columns of the whitening
matrix and reads the edges from ``I - QW``.
"""

import itertools

import numpy as np

from qwo import LigamModel, oracle_whitening, qwo_build

np.set_printoptions(precision=3, suppress=True)

# the true model: X2 = X1 + N2, X3 = X2 + N3
B = np.zeros((3, 3))
B[1, 0] = B[2, 1] = 1.0
model = LigamModel(B, np.ones(3))
print("covariance of the chain:\n", model.covariance())

# exact covariance, so any nonzero entry is a real dependence
ctx = oracle_whitening(model)
print("W @ cov @ W is the identity:", np.allclose(ctx.W @ ctx.cov @ ctx.W, np.eye(3)))

# the topological order gives back B and the noise variances
g, state = qwo_build(ctx, [0, 1, 2], tau=1e-9)
print("\norder (1,2,3) ->", sorted((u + 1, v + 1) for u, v in g.edges))
print("I - QW =\n", np.round(state.B, 9) + 0.0)
print("diag(Q Q^T) =", state.noise_variances)

# every other order gives a DAG with at least as many edges
for order in itertools.permutations(range(3)):
    g, _ = qwo_build(ctx, order, tau=1e-9)
    label = "".join(str(v + 1) for v in order)
    print(f"order {label}: {g.edge_count} edges", sorted((u + 1, v + 1) for u, v in g.edges))
