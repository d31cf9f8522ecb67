"""Graph and model types, plus exact graphical oracles.

Vertices are 0-based everywhere inside the library. Files (edge lists, CSV
headers) and CLI output use 1-based labels; conversion happens only at the
IO boundary (see :func:`read_edges` / :func:`write_edges`).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised on malformed graphs, size mismatches or invalid vertices."""


def _check_vertex(n: int, v: int) -> int:
    if not 0 <= int(v) < n:
        raise GraphError(f"vertex {v} out of range for a graph on {n} vertices")
    return int(v)


def _has_cycle(adj: np.ndarray) -> bool:
    # Kahn's algorithm; adj[u, v] means u -> v
    indeg = adj.sum(axis=0).astype(int)
    stack = [v for v in range(adj.shape[0]) if indeg[v] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    return seen != adj.shape[0]


class DiGraph:
    """Directed graph on ``n`` vertices backed by a boolean adjacency matrix.

    ``adj[u, v]`` is True iff the edge ``u -> v`` is present. Instances are
    treated as immutable; the adjacency array is flagged read-only.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            u, v = _check_vertex(n, u), _check_vertex(n, v)
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            adj[u, v] = True
        self._set_adj(adj)

    def _set_adj(self, adj: np.ndarray) -> None:
        adj.setflags(write=False)
        self.adj = adj
        self.n = adj.shape[0]

    @classmethod
    def from_adjacency(cls, adj) -> "DiGraph":
        adj = np.array(adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError("adjacency matrix must be square")
        if adj.diagonal().any():
            raise GraphError("adjacency matrix has self-loops")
        obj = cls.__new__(cls)
        obj._set_adj(adj)
        obj._validate()
        return obj

    @classmethod
    def _trusted(cls, adj: np.ndarray) -> "DiGraph":
        # hot path for builders whose output is acyclic by construction
        obj = cls.__new__(cls)
        obj._set_adj(adj)
        return obj

    def _validate(self) -> None:
        pass

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in zip(*np.nonzero(self.adj))}

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adj))

    @property
    def is_acyclic(self) -> bool:
        return not _has_cycle(self.adj)

    def parents(self, v: int) -> set[int]:
        v = _check_vertex(self.n, v)
        return {int(u) for u in np.flatnonzero(self.adj[:, v])}

    def children(self, v: int) -> set[int]:
        v = _check_vertex(self.n, v)
        return {int(u) for u in np.flatnonzero(self.adj[v])}

    def ancestors(self, v: int) -> set[int]:
        """Proper ancestors of ``v`` (``v`` itself excluded)."""
        v = _check_vertex(self.n, v)
        adj = self.adj
        seen = adj[:, v].copy()
        frontier = seen
        while frontier.any():
            frontier = adj[:, frontier].any(axis=1) & ~seen
            seen |= frontier
        seen[v] = False
        return {int(u) for u in np.flatnonzero(seen)}

    def skeleton(self) -> set[frozenset[int]]:
        return {frozenset(e) for e in self.edges}

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiGraph):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self) -> int:
        return hash((self.n, self.adj.tobytes()))

    def __repr__(self) -> str:
        edges = sorted(self.edges)
        return f"{type(self).__name__}(n={self.n}, edges={edges})"


class Dag(DiGraph):
    """A :class:`DiGraph` guaranteed to have no directed cycles."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        super().__init__(n, edges)
        self._validate()

    def _validate(self) -> None:
        if _has_cycle(self.adj):
            raise GraphError("graph contains a directed cycle")

    def topological_order(self) -> list[int]:
        indeg = self.adj.sum(axis=0).astype(int)
        ready = sorted(v for v in range(self.n) if indeg[v] == 0)
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for v in np.flatnonzero(self.adj[u]):
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(int(v))
            ready.sort()
        return order


def parents(g: DiGraph, v: int) -> set[int]:
    return g.parents(v)


def ancestors(g: DiGraph, v: int) -> set[int]:
    return g.ancestors(v)


def edge_count(g: DiGraph) -> int:
    return g.edge_count


class Permutation:
    """A causal order: ``order[i]`` is the vertex at position ``i``.

    ``inverse[v]`` gives the position of vertex ``v``.
    """

    __slots__ = ("order", "inverse")

    def __init__(self, order: Sequence[int]):
        arr = np.asarray(order, dtype=np.intp).reshape(-1)
        n = arr.shape[0]
        inverse = np.full(n, -1, dtype=np.intp)
        if n and (arr.min() < 0 or arr.max() >= n):
            raise GraphError(f"{arr.tolist()} is not a permutation of range({n})")
        inverse[arr] = np.arange(n)
        if n and inverse.min() < 0:
            raise GraphError(f"{arr.tolist()} is not a permutation of range({n})")
        inverse.setflags(write=False)
        self.order = tuple(arr.tolist())
        self.inverse = inverse

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(n))

    def swap(self, i: int, j: int) -> "Permutation":
        """Exchange the vertices at positions ``i`` and ``j``."""
        order = list(self.order)
        order[i], order[j] = order[j], order[i]
        return Permutation(order)

    def position(self, v: int) -> int:
        return int(self.inverse[v])

    def __len__(self) -> int:
        return len(self.order)

    def __getitem__(self, i):
        return self.order[i]

    def __iter__(self):
        return iter(self.order)

    def __eq__(self, other) -> bool:
        if isinstance(other, Permutation):
            return self.order == other.order
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.order)

    def __repr__(self) -> str:
        return f"Permutation({list(self.order)})"


def _as_perm(pi) -> Permutation:
    return pi if isinstance(pi, Permutation) else Permutation(pi)


@dataclass(frozen=True)
class LigamModel:
    """Linear Gaussian model ``X = B X + N`` with ``Cov(N) = diag(sigma)``.

    ``B[v, u] != 0`` encodes the edge ``u -> v``.
    """

    B: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        sigma = np.array(self.sigma, dtype=float).reshape(-1)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise GraphError("B must be a square matrix")
        if sigma.shape[0] != B.shape[0]:
            raise GraphError("sigma must have one entry per variable")
        if np.any(sigma <= 0):
            raise ValueError("noise variances must be strictly positive")
        B.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def graph(self) -> DiGraph:
        return graph_of(self.B, 0.0)

    def covariance(self) -> np.ndarray:
        """Population covariance ``(I-B)^-1 diag(sigma) (I-B)^-T``."""
        A = np.linalg.inv(np.eye(self.n) - self.B)
        cov = (A * self.sigma) @ A.T
        return (cov + cov.T) / 2


@dataclass(frozen=True)
class Cpdag:
    """Completed partially directed acyclic graph (MEC representative)."""

    n: int
    directed: frozenset = field(default_factory=frozenset)
    undirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        directed = frozenset((int(u), int(v)) for u, v in self.directed)
        undirected = frozenset(frozenset(int(x) for x in e) for e in self.undirected)
        if any(len(e) != 2 for e in undirected):
            raise GraphError("undirected edges need two distinct endpoints")
        if {frozenset(e) for e in directed} & undirected:
            raise GraphError("an adjacency is both directed and undirected")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)

    def amat(self) -> np.ndarray:
        """``amat[u, v] = 1`` if ``u -> v`` or ``u - v``."""
        out = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.directed:
            out[u, v] = 1
        for e in self.undirected:
            u, v = tuple(e)
            out[u, v] = out[v, u] = 1
        return out


def graph_of(B, tau: float = 0.0) -> DiGraph:
    """Graph of a coefficient matrix: ``u -> v`` iff ``|B[v, u]| > tau``.

    Returns a :class:`Dag` when the thresholded support is acyclic and a
    plain :class:`DiGraph` otherwise (check ``is_acyclic``).
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise GraphError("B must be square")
    adj = np.abs(B.T) > tau
    np.fill_diagonal(adj, False)
    if _has_cycle(adj):
        return DiGraph._trusted(adj)
    return Dag._trusted(adj)


def is_compatible(g: DiGraph, pi) -> bool:
    """True iff every edge of ``g`` goes forward in the order ``pi``."""
    pi = _as_perm(pi)
    if len(pi) != g.n:
        raise GraphError(f"permutation has {len(pi)} entries, graph has {g.n} vertices")
    pos = pi.inverse
    u, v = np.nonzero(g.adj)
    return bool(np.all(pos[u] < pos[v]))


def d_separated(g: DiGraph, i: int, j: int, S: Iterable[int] = ()) -> bool:
    """d-separation of ``i`` and ``j`` given ``S`` in the DAG ``g``.

    Uses the moral graph of the ancestral closure of ``{i, j} | S``.
    """
    n = g.n
    i, j = _check_vertex(n, i), _check_vertex(n, j)
    S = {_check_vertex(n, s) for s in S}
    if i == j:
        raise GraphError("d-separation needs two distinct vertices")
    if i in S or j in S:
        raise GraphError("conditioning set must not contain the queried vertices")

    keep = {i, j} | S
    for v in list(keep):
        keep |= g.ancestors(v)
    idx = np.array(sorted(keep))
    sub = g.adj[np.ix_(idx, idx)]
    moral = sub | sub.T
    # marry co-parents
    for c in range(len(idx)):
        pa = np.flatnonzero(sub[:, c])
        if len(pa) > 1:
            moral[np.ix_(pa, pa)] = True
    np.fill_diagonal(moral, False)

    local = {int(v): k for k, v in enumerate(idx)}
    blocked = {local[s] for s in S}
    start, goal = local[i], local[j]
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in np.flatnonzero(moral[u]):
            w = int(w)
            if w == goal:
                return False
            if w not in seen and w not in blocked:
                seen.add(w)
                queue.append(w)
    return True


def oracle_gpi(g_star: DiGraph, pi) -> Dag:
    """Minimal I-map of ``g_star`` compatible with ``pi`` via d-separation.

    Edge ``pi[a] -> pi[b]`` (``a < b``) is kept unless ``pi[a]`` and ``pi[b]``
    are d-separated by the other predecessors of ``pi[b]``.
    """
    pi = _as_perm(pi)
    if len(pi) != g_star.n:
        raise GraphError("permutation and graph sizes differ")
    if not g_star.is_acyclic:
        raise GraphError("oracle_gpi needs an acyclic graph")
    edges = []
    for b in range(len(pi)):
        prefix = set(pi[:b])
        for a in range(b):
            u, v = pi[a], pi[b]
            if not d_separated(g_star, u, v, prefix - {u}):
                edges.append((u, v))
    return Dag(g_star.n, edges)


def read_edges(path) -> Dag:
    """Read the edge-list format: ``n <count>`` then one 1-based ``u v`` per line."""
    text = Path(path).read_text().splitlines()
    lines = [ln.split("#", 1)[0].strip() for ln in text]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError(f"{path}: empty edge list")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise GraphError(f"{path}: first line must be 'n <count>'")
    try:
        n = int(head[1])
        edges = []
        for k, ln in enumerate(lines[1:], start=2):
            parts = ln.split()
            if len(parts) != 2:
                raise GraphError(f"{path}: line {k}: expected 'u v'")
            edges.append((int(parts[0]) - 1, int(parts[1]) - 1))
    except ValueError as exc:
        raise GraphError(f"{path}: {exc}") from None
    return Dag(n, edges)


def format_edges(g: DiGraph) -> str:
    lines = [f"n {g.n}"]
    lines += [f"{u + 1} {v + 1}" for u, v in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def write_edges(g: DiGraph, path) -> None:
    Path(path).write_text(format_edges(g))


FIXTURES = ("cancer", "survey", "asia", "sachs")


def load_fixture(name: str) -> Dag:
    """One of the bundled benchmark structures (``cancer``, ``survey``, ``asia``, ``sachs``)."""
    from importlib.resources import files

    name = name.lower()
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return read_edges(files("qwo") / "data" / f"{name}.edges")
