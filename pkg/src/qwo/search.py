"""Permutation search: GRaSP (covered-edge tucks, depth-bounded DFS) and hill-climbing.

Both strategies minimise the number of edges of the order-induced DAG and
work with either builder (:class:`~qwo.algorithm.QwoBuilder` or
:class:`~qwo.scores.BicBuilder`). Every candidate order is evaluated through
the builder's block-update path.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .algorithm import DEFAULT_TAU, QwoBuilder
from .model import Dag, Permutation, _as_perm
from .scores import BicBuilder, ScoreCache
from .whitening import WhiteningContext

ProgressCallback = Callable[[dict], None]


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "grasp"
    dfs_depth: int = 3
    k: int = 5
    max_iters: int = 100_000
    rng_seed: int = 0
    builder: str = "qwo"
    tau: float = DEFAULT_TAU
    patience: Optional[int] = None
    tau_mb: float = 0.1
    alpha: Optional[float] = None
    first_any_edge: bool = True

    def __post_init__(self):
        if self.strategy not in ("grasp", "hc"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.builder not in ("qwo", "bic"):
            raise ValueError(f"unknown builder {self.builder!r}")
        if self.dfs_depth < 1 or self.k < 1 or self.max_iters < 1:
            raise ValueError("dfs_depth, k and max_iters must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass
class DiscoveryResult:
    graph: Dag
    pi: Permutation
    edge_count: int
    builder_calls: int
    wall_time: float
    iterations: int
    trace: list = field(default_factory=list)


def initial_permutation(ctx: WhiteningContext, tau_mb: float = 0.1) -> Permutation:
    """Order variables by estimated Markov-boundary size, smallest first.

    The boundary of ``i`` is the set of ``j`` whose partial correlation with
    ``i`` (from the precision matrix) exceeds ``tau_mb`` in magnitude. Ties
    are broken by vertex index.
    """
    P = ctx.precision()
    d = np.sqrt(np.diag(P))
    pcor = np.abs(P) / np.outer(d, d)
    np.fill_diagonal(pcor, 0.0)
    counts = (pcor > tau_mb).sum(axis=1)
    return Permutation(np.lexsort((np.arange(ctx.n), counts)))


def tuck(pi, i: int, j: int, g: Dag) -> Permutation:
    """GRaSP tuck of vertex ``j`` in front of ``i``.

    With ``pi = <d1, i, d2, j, d3>``, the members of ``d2`` that are ancestors
    of ``j`` in ``g`` move (in order) ahead of ``j``, followed by ``i`` and the
    remaining members of ``d2``. If ``i`` is not an ancestor of ``j`` the order
    is returned unchanged.
    """
    pi = _as_perm(pi)
    a, b = pi.position(i), pi.position(j)
    if a >= b:
        raise ValueError(f"vertex {i} does not precede vertex {j}")
    anc = g.ancestors(j)
    if i not in anc:
        return pi
    d2 = pi.order[a + 1:b]
    gamma = [t for t in d2 if t in anc]
    rest = [t for t in d2 if t not in anc]
    return Permutation(pi.order[:a] + tuple(gamma) + (j, i) + tuple(rest) + pi.order[b + 1:])


def covered_edges(g: Dag) -> list[tuple[int, int]]:
    """Edges ``u -> v`` with ``Pa(u) == Pa(v) - {u}``, in ascending order."""
    adj = g.adj
    us, vs = np.nonzero(adj)
    if us.size == 0:
        return []
    # columns are parent sets; they may differ only in row u (u is a parent of v)
    diff = adj[:, us] ^ adj[:, vs]
    diff[us, np.arange(us.size)] = False
    keep = ~diff.any(axis=0)
    return [(int(u), int(v)) for u, v in zip(us[keep], vs[keep])]


def changed_block(old: Permutation, new: Permutation) -> Optional[tuple[int, int]]:
    """First and last positions where two orders differ, or None if equal."""
    diff = np.flatnonzero(np.asarray(old.order) != np.asarray(new.order))
    if diff.size == 0:
        return None
    return int(diff[0]), int(diff[-1])


def make_builder(ctx: WhiteningContext, config: SearchConfig, cache: ScoreCache | None = None):
    if config.builder == "qwo":
        return QwoBuilder(ctx, config.tau, config.alpha)
    if cache is None:
        raise ValueError("the BIC builder needs a ScoreCache (data covariance and N)")
    return BicBuilder(cache)


class _Run:
    # shared bookkeeping for one search
    def __init__(self, builder, callback):
        self.builder = builder
        self.callback = callback
        self.t0 = time.perf_counter()
        self.trace = []

    def accept(self, iteration, g):
        self.trace.append(g.edge_count)
        if self.callback is not None:
            self.callback({
                "iteration": iteration,
                "edge_count": g.edge_count,
                "elapsed": time.perf_counter() - self.t0,
            })

    def result(self, pi, g, iterations):
        return DiscoveryResult(
            graph=g, pi=pi, edge_count=g.edge_count, builder_calls=self.builder.calls,
            wall_time=time.perf_counter() - self.t0, iterations=iterations,
            trace=list(self.trace),
        )


def _grasp_dfs(builder, pi, g, state, depth, seen, any_edge=False):
    # returns (pi, g, state) of the first strictly sparser order found, else None.
    # depth is how many more equal-count tucks may be chained below pi, so the
    # tree has depth + 1 levels of tucks. seen maps an order to the depth it was
    # handed; an order first met deep in the tree is expanded again when it is
    # reached with more depth left. any_edge tucks along every edge at this
    # level (children stay covered-only).
    edges = g.edge_count
    for u, v in (sorted(g.edges) if any_edge else covered_edges(g)):
        new_pi = tuck(pi, u, v, g)
        block = changed_block(pi, new_pi)
        if block is None or (new_pi in seen and seen[new_pi] >= depth - 1):
            continue
        g2, s2 = builder.update(state, new_pi, *block)
        e2 = g2.edge_count
        if e2 < edges:
            return new_pi, g2, s2
        seen[new_pi] = depth - 1
        if e2 == edges and depth > 0:
            found = _grasp_dfs(builder, new_pi, g2, s2, depth - 1, seen)
            if found is not None:
                return found
    return None


def grasp_search(
    ctx: WhiteningContext,
    config: SearchConfig = SearchConfig(),
    *,
    cache: ScoreCache | None = None,
    initial=None,
    callback: ProgressCallback | None = None,
) -> DiscoveryResult:
    """GRaSP over tuck moves.

    From the current order, a depth-first search explores tucks; chains of
    up to ``dfs_depth`` moves that keep the edge count are followed, the first
    order with strictly fewer edges is accepted and the search restarts from
    it. Stops when no such order is found or after ``max_iters`` accepted
    moves.

    Below the root only covered edges are tucked. At the root every edge is
    tried when ``config.first_any_edge`` is set (the default); switching it
    off gives the covered-only variant, which tends to stall on thresholded
    finite-sample graphs because they have few covered edges.
    """
    builder = make_builder(ctx, config, cache)
    run = _Run(builder, callback)
    pi = initial_permutation(ctx, config.tau_mb) if initial is None else _as_perm(initial)
    g, state = builder.build(pi)
    run.accept(0, g)
    it = 0
    while it < config.max_iters and g.edge_count > 0:
        found = _grasp_dfs(builder, pi, g, state, config.dfs_depth, {pi: config.dfs_depth},
                           any_edge=config.first_any_edge)
        if found is None:
            break
        pi, g, state = found
        it += 1
        run.accept(it, g)
    return run.result(pi, g, it)


def hc_search(
    ctx: WhiteningContext,
    config: SearchConfig = SearchConfig(strategy="hc"),
    *,
    cache: ScoreCache | None = None,
    initial=None,
    callback: ProgressCallback | None = None,
) -> DiscoveryResult:
    """Random-swap hill climbing.

    Each step swaps the entries at a uniformly drawn pair of positions at
    distance at most ``k`` and keeps the result only if it has strictly fewer
    edges. Stops after ``patience`` consecutive rejections (default ``50 n``)
    or ``max_iters`` proposals.
    """
    builder = make_builder(ctx, config, cache)
    run = _Run(builder, callback)
    n = ctx.n
    pi = initial_permutation(ctx, config.tau_mb) if initial is None else _as_perm(initial)
    g, state = builder.build(pi)
    run.accept(0, g)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, min(n, i + config.k + 1))]
    if not pairs:
        return run.result(pi, g, 0)

    rng = np.random.default_rng(config.rng_seed)
    patience = 50 * n if config.patience is None else config.patience
    rejected = 0
    accepted = 0
    for _ in range(config.max_iters):
        if rejected >= patience or g.edge_count == 0:
            break
        i, j = pairs[rng.integers(len(pairs))]
        new_pi = pi.swap(i, j)
        g2, s2 = builder.update(state, new_pi, i, j)
        if g2.edge_count < g.edge_count:
            pi, g, state = new_pi, g2, s2
            accepted += 1
            rejected = 0
            run.accept(accepted, g)
        else:
            rejected += 1
    return run.result(pi, g, accepted)


def discover(
    ctx: WhiteningContext,
    config: SearchConfig = SearchConfig(),
    *,
    cache: ScoreCache | None = None,
    initial=None,
    callback: ProgressCallback | None = None,
) -> DiscoveryResult:
    """Run the strategy named in ``config``."""
    search = grasp_search if config.strategy == "grasp" else hc_search
    return search(ctx, config, cache=cache, initial=initial, callback=callback)
