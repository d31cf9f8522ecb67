"""Gaussian BIC baseline for building the order-induced DAG.

Each vertex gets the parent set chosen by grow-shrink over its predecessors in
the order. Regressions are solved from covariance sufficient statistics, so a
score evaluation costs O(|parents|^3) regardless of the sample size.
"""
from __future__ import annotations

import math

import numpy as np

from .model import Dag, _as_perm
from .whitening import estimate_covariance


class DegenerateDesignError(ValueError):
    """Collinear parents: the regression system is singular."""


class ScoreCache:
    """Sufficient statistics (ML covariance, N) plus a memo of local scores.

    Parameters
    ----------
    cov : (n, n) array
        Maximum-likelihood covariance of the data.
    N : int
        Number of samples the covariance was computed from.
    """

    def __init__(self, cov, N: int):
        cov = np.array(cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        if N < 2:
            raise ValueError("BIC needs at least 2 samples")
        cov.setflags(write=False)
        self.cov = cov
        self.N = int(N)
        self.memo: dict[tuple[int, frozenset], float] = {}
        self.evaluations = 0

    @classmethod
    def from_data(cls, D) -> "ScoreCache":
        D = np.asarray(D, dtype=float)
        return cls(estimate_covariance(D), D.shape[0])

    @property
    def n(self) -> int:
        return self.cov.shape[0]


def _bic(cov, N, target, parents) -> float:
    var = cov[target, target]
    if parents:
        idx = list(parents)
        S = cov[np.ix_(idx, idx)]
        c = cov[idx, target]
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise DegenerateDesignError(
                f"singular regression of {target} on {sorted(parents)}"
            ) from None
        z = np.linalg.solve(L, c)
        var = var - z @ z
    if not var > 0:
        raise DegenerateDesignError(
            f"non-positive residual variance regressing {target} on {sorted(parents)}"
        )
    return -0.5 * N * math.log(var) - 0.5 * (len(parents) + 1) * math.log(N)


def bic_local_score(target: int, parents, cache: ScoreCache) -> float:
    """BIC of regressing ``target`` on ``parents``; higher is better.

    ``-(N/2) log(RSS/N) - (|parents| + 1) log(N) / 2`` with the intercept
    absorbed by centering.
    """
    parents = frozenset(parents)
    if target in parents:
        raise ValueError("target cannot be its own parent")
    key = (target, parents)
    score = cache.memo.get(key)
    if score is None:
        cache.evaluations += 1
        score = _bic(cache.cov, cache.N, target, sorted(parents))
        cache.memo[key] = score
    return score


def grow_shrink_parents(i: int, pi, cache: ScoreCache) -> set[int]:
    """Parent set of the vertex at position ``i`` (0-based) by grow-shrink.

    Grow adds the predecessor with the largest score gain until none helps;
    shrink then removes the member whose removal helps most. Ties go to the
    lowest vertex index.
    """
    pi = _as_perm(pi)
    target = pi[i]
    candidates = sorted(pi[:i])
    current: set[int] = set()
    best = bic_local_score(target, current, cache)

    while True:
        pick, pick_score = None, best
        for c in candidates:
            if c in current:
                continue
            s = bic_local_score(target, current | {c}, cache)
            if s > pick_score:
                pick, pick_score = c, s
        if pick is None:
            break
        current.add(pick)
        best = pick_score

    while current:
        pick, pick_score = None, best
        for c in sorted(current):
            s = bic_local_score(target, current - {c}, cache)
            if s > pick_score:
                pick, pick_score = c, s
        if pick is None:
            break
        current.discard(pick)
        best = pick_score

    return current


def score_gpi_build(pi, cache: ScoreCache) -> Dag:
    pi = _as_perm(pi)
    adj = np.zeros((len(pi), len(pi)), dtype=bool)
    for i in range(len(pi)):
        for p in grow_shrink_parents(i, pi, cache):
            adj[p, pi[i]] = True
    return Dag._trusted(adj)


def score_gpi_update(prev: Dag, pi, idx_l: int, idx_r: int, cache: ScoreCache) -> Dag:
    """Refresh the parent sets of positions ``idx_l..idx_r``.

    Positions outside the block keep their predecessor sets and therefore
    their parents from ``prev``.
    """
    pi = _as_perm(pi)
    adj = prev.adj.copy()
    for i in range(idx_l, idx_r + 1):
        v = pi[i]
        adj[:, v] = False
        for p in grow_shrink_parents(i, pi, cache):
            adj[p, v] = True
    return Dag._trusted(adj)


def total_score(g: Dag, cache: ScoreCache) -> float:
    return sum(bic_local_score(v, g.parents(v), cache) for v in range(g.n))


class BicBuilder:
    """Adapter exposing the BIC/grow-shrink construction to the searches.

    The search state is simply ``(pi, graph)``.
    """

    name = "bic"

    def __init__(self, cache: ScoreCache):
        self.cache = cache
        self.calls = 0

    def build(self, pi):
        self.calls += 1
        pi = _as_perm(pi)
        g = score_gpi_build(pi, self.cache)
        return g, (pi, g)

    def update(self, state, new_pi, idx_l, idx_r):
        self.calls += 1
        new_pi = _as_perm(new_pi)
        old_pi, prev = state
        if old_pi.order[:idx_l] != new_pi.order[:idx_l] or (
            old_pi.order[idx_r + 1:] != new_pi.order[idx_r + 1:]
        ):
            raise ValueError("new permutation differs from the old one outside the block")
        g = score_gpi_update(prev, new_pi, idx_l, idx_r, self.cache)
        return g, (new_pi, g)
