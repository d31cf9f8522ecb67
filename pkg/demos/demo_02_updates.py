"""
Block updates versus full rebuilds
==================================

Changing a block of ``d`` consecutive positions in the order only touches
``d`` rows of Q. This script times both paths for a few sizes.
"""

import time

import numpy as np

from qwo import Permutation, build_whitening, qwo_build, qwo_update

rng = np.random.default_rng(0)
d = 5

print(f"{'n':>5} {'rebuild (ms)':>13} {'update (ms)':>12} {'ratio':>6}")
for n in (50, 100, 200, 400):
    A = rng.normal(size=(n, n))
    ctx = build_whitening(A @ A.T / n + np.eye(n))
    pi = Permutation(rng.permutation(n))
    _, state = qwo_build(ctx, pi)

    t = time.perf_counter()
    for _ in range(5):
        qwo_build(ctx, pi)
    rebuild = (time.perf_counter() - t) / 5

    # shuffle one block of d positions, many times
    moves = []
    for _ in range(50):
        lo = int(rng.integers(0, n - d + 1))
        order = list(pi.order)
        block = order[lo:lo + d]
        rng.shuffle(block)
        order[lo:lo + d] = block
        moves.append((Permutation(order), lo))
    t = time.perf_counter()
    for p, lo in moves:
        qwo_update(state, p, lo, lo + d - 1)
    update = (time.perf_counter() - t) / len(moves)
    print(f"{n:>5} {rebuild * 1e3:13.3f} {update * 1e3:12.3f} {rebuild / update:6.1f}")

# the two paths agree
p, lo = moves[0]
_, s_up = qwo_update(state, p, lo, lo + d - 1)
_, s_re = qwo_build(ctx, p)
print("\nmax |Q_update - Q_rebuild| =", np.abs(s_up.Q - s_re.Q).max())
