"""Structure-recovery metrics: skeleton F1 and normalised CPDAG Hamming distance."""
from __future__ import annotations

import itertools

import numpy as np

from .model import Cpdag, Dag, DiGraph, GraphError


def _meek(directed: np.ndarray, undirected: np.ndarray) -> None:
    # in-place closure under Meek rules R1-R3; both matrices are n x n bool,
    # undirected symmetric, directed[a, b] means a -> b
    n = directed.shape[0]

    def adjacent(a, b):
        return directed[a, b] or directed[b, a] or undirected[a, b]

    def orient(a, b):
        undirected[a, b] = undirected[b, a] = False
        directed[a, b] = True

    changed = True
    while changed:
        changed = False
        for a, b in zip(*np.nonzero(np.triu(undirected))):
            for x, y in ((a, b), (b, a)):
                if not undirected[x, y]:
                    break
                # R1: c -> x - y, c and y non-adjacent
                if any(not adjacent(c, y) for c in np.flatnonzero(directed[:, x]) if c != y):
                    orient(x, y)
                    changed = True
                    break
                # R2: x -> c -> y
                if np.any(directed[x] & directed[:, y]):
                    orient(x, y)
                    changed = True
                    break
                # R3: x - c1 -> y, x - c2 -> y, c1 and c2 non-adjacent
                cs = np.flatnonzero(undirected[x] & directed[:, y])
                if any(not adjacent(c1, c2) for c1, c2 in itertools.combinations(cs, 2)):
                    orient(x, y)
                    changed = True
                    break


def dag_to_cpdag(g: DiGraph) -> Cpdag:
    """Completed PDAG of the Markov equivalence class of ``g``.

    v-structures keep their orientation, Meek rules R1-R3 propagate it and
    everything else stays undirected.
    """
    if not g.is_acyclic:
        raise GraphError("dag_to_cpdag needs an acyclic graph")
    adj = g.adj
    n = g.n
    skel = adj | adj.T
    directed = np.zeros((n, n), dtype=bool)
    for c in range(n):
        pa = np.flatnonzero(adj[:, c])
        for a, b in itertools.combinations(pa, 2):
            if not skel[a, b]:
                directed[a, c] = directed[b, c] = True
    undirected = skel & ~(directed | directed.T)
    _meek(directed, undirected)
    return Cpdag(
        n,
        directed={(int(a), int(b)) for a, b in zip(*np.nonzero(directed))},
        undirected={frozenset((int(a), int(b))) for a, b in zip(*np.nonzero(np.triu(undirected)))},
    )


def _same_n(pred: DiGraph, truth: DiGraph) -> None:
    if pred.n != truth.n:
        raise GraphError(f"graphs have different sizes ({pred.n} vs {truth.n})")


def skeleton_f1(pred: DiGraph, truth: DiGraph) -> float:
    """F1 of the undirected adjacencies; 1.0 when both skeletons are empty."""
    _same_n(pred, truth)
    p = np.triu(pred.adj | pred.adj.T, 1)
    t = np.triu(truth.adj | truth.adj.T, 1)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def cpdag_shd(a: Cpdag, b: Cpdag) -> int:
    """Pairs that differ in adjacency or in edge mark; a reversal counts once."""
    if a.n != b.n:
        raise GraphError("CPDAGs have different sizes")
    A, B = a.amat(), b.amat()
    iu = np.triu_indices(a.n, 1)
    pa = np.stack([A[iu], A.T[iu]], axis=1)
    pb = np.stack([B[iu], B.T[iu]], axis=1)
    return int(np.count_nonzero(np.any(pa != pb, axis=1)))


def pshd(pred: DiGraph, truth: DiGraph) -> float:
    """CPDAG structural Hamming distance divided by the number of nodes."""
    _same_n(pred, truth)
    if pred.n == 0:
        return 0.0
    return cpdag_shd(dag_to_cpdag(pred), dag_to_cpdag(truth)) / pred.n


def evaluate(pred: DiGraph, truth: DiGraph) -> dict[str, float]:
    return {"skf1": skeleton_f1(pred, truth), "pshd": pshd(pred, truth)}
