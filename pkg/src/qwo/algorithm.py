"""QW-orthogonality: build and incrementally update the DAG induced by a causal order.

Given the whitening matrix ``W`` and an order ``pi``, the rows of ``Q`` are
obtained by Gram-Schmidt over the columns of ``W`` taken in reverse order
(evaluated blockwise through a Cholesky factorization, see ``_orthogonalize``). Row ``q_{pi[i]}`` is the residual of ``w_{pi[i]}`` after projecting out
``q_{pi[i+1]}, ..., q_{pi[n-1]}``, scaled so that ``<q_{pi[i]}, w_{pi[i]}> = 1``.
The coefficient matrix is ``I - QW`` and the DAG is its support.

Internally the rows of ``Q`` are stored in order position (``Qp[i] = q_{pi[i]}``)
so that the already-processed suffix is a contiguous slice. A block change of
the order only rewrites rows inside the block; the prefix and suffix rows stay
valid, which gives the O(n^2 d) update.

Two rules turn ``QW`` into edges. The default keeps an entry when its
magnitude exceeds ``tau``. The alternative runs a Fisher-z test at level
``alpha`` on the partial correlation of the pair given the other predecessors
of the later vertex. That partial correlation is available from quantities
the orthogonalization already has: with ``M[k, u] = <q_{pi[k]}, w_u>``,

    rho(u, pi[j]) = -M[j, u] / sqrt(|q_{pi[j]}|^2 * T[j, u]),
    T[j, u] = sum_{k <= j} M[k, u]^2 / |q_{pi[k]}|^2,

and ``T[j]`` only depends on the set of vertices after position ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.linalg.blas import dtrsm
from scipy.linalg.lapack import dpotrf

from .model import Dag, Permutation, _as_perm
from .whitening import WhiteningContext

DEFAULT_TAU = 0.1
ORACLE_TAU = 1e-7


class DegenerateWhiteningError(RuntimeError):
    """A Gram-Schmidt residual vanished; W is not of full rank numerically."""


@dataclass(frozen=True)
class QwoState:
    """Result of a QWO pass.

    ``Qp[i]`` is the row of Q belonging to vertex ``pi[i]`` and ``sq[i]`` its
    squared norm. ``QW`` is vertex-indexed (``QW[v] = q_v @ W``), as is the
    cached adjacency ``adj`` of the thresholded graph. ``Tp[j, u]`` is the
    cumulative sum used by the partial-correlation test (rows by position,
    columns by vertex); it is only maintained when ``alpha`` is set, and
    ``alpha`` is None under the plain threshold rule.
    """

    ctx: WhiteningContext
    pi: Permutation
    Qp: np.ndarray
    sq: np.ndarray
    QW: np.ndarray
    Tp: np.ndarray | None
    adj: np.ndarray
    tau: float
    alpha: float | None = None

    @property
    def Q(self) -> np.ndarray:
        Q = np.empty_like(self.Qp)
        Q[list(self.pi.order)] = self.Qp
        return Q

    @property
    def B(self) -> np.ndarray:
        """Coefficient matrix ``I - QW`` compatible with ``pi``."""
        return np.eye(self.ctx.n) - self.QW

    def partial_correlations(self) -> np.ndarray:
        """``R[u, v]``: partial correlation of ``u`` and ``v`` given the other
        predecessors of ``v`` when ``u`` precedes ``v``; zero elsewhere."""
        pos = self.pi.inverse
        forward = pos[:, None] < pos[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            R = -self.QW.T / np.sqrt(self.sq[pos][None, :] * self.cumulative()[pos].T)
        return np.where(forward, R, 0.0)

    def cumulative(self) -> np.ndarray:
        """The ``T`` table (rows by position, columns by vertex)."""
        if self.Tp is not None:
            return self.Tp
        rows = self.QW[list(self.pi.order)]
        return np.cumsum(rows ** 2 / self.sq[:, None], axis=0)

    @property
    def noise_variances(self) -> np.ndarray:
        """Diagonal of ``Q Q^T`` in vertex order."""
        out = np.empty_like(self.sq)
        out[list(self.pi.order)] = self.sq
        return out


def _orthogonalize(W, order, Qp, sq, QW, Tp, lo, hi):
    # rows lo..hi of Qp (plus the matching sq, QW and, unless it is None, Tp
    # entries); rows > hi must already be valid.
    #
    # Gram-Schmidt in the order hi, hi-1, ..., lo is done in block form. The
    # block columns of W are first stripped of their components along the
    # suffix rows. Then, with V holding those residuals in processing order,
    # V V^T = L L^T and E = L^{-1} V has orthonormal rows, row k of E being
    # the normalized residual of V[k] against V[:k]. The residual itself is
    # L[k, k] E[k] and its inner product with w is L[k, k]^2, so the
    # normalized row of Q is E[k] / L[k, k].
    idx = list(order[lo:hi + 1])[::-1]
    V = W[idx]
    if hi + 1 < Qp.shape[0]:
        tail = Qp[hi + 1:]
        V = V - ((V @ tail.T) / sq[hi + 1:]) @ tail
    # raw LAPACK/BLAS calls: the checked wrappers cost more than the
    # arithmetic for the small blocks a search produces
    L, info = dpotrf(V @ V.T, lower=1, clean=1)
    d = np.diag(L)
    d2 = d * d
    if info != 0 or d2.min() < 1e-12:
        k = info - 1 if info > 0 else int(np.argmin(d2))
        raise DegenerateWhiteningError(
            f"residual of w_{idx[k]} is numerically zero; W is not of full rank"
        )
    E = dtrsm(1.0, L, V, lower=1)
    Qp[lo:hi + 1] = (E / d[:, None])[::-1]
    sq[lo:hi + 1] = (1.0 / d2)[::-1]
    rows = Qp[lo:hi + 1] @ W
    QW[idx[::-1]] = rows
    if Tp is None:
        return
    # the cumulative sums run forward, from the prefix row into the block
    prev = Tp[lo - 1] if lo > 0 else 0.0
    Tp[lo:hi + 1] = prev + np.cumsum(rows ** 2 / sq[lo:hi + 1, None], axis=0)


def _fisher_critical(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def _incoming(QW, sq, Tp, pos, vs, tau, alpha, n_samples):
    # adjacency columns for the vertices vs: entry [u, k] is the edge u -> vs[k]
    vs = np.asarray(vs, dtype=np.intp)
    js = pos[vs]
    forward = pos[:, None] < js[None, :]
    if alpha is None:
        return (np.abs(QW[vs]).T > tau) & forward
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.abs(QW[vs]) / np.sqrt(sq[js][:, None] * Tp[js])
    rho = np.nan_to_num(np.minimum(rho, 1.0 - 1e-15), nan=0.0)
    dof = np.maximum(n_samples - js - 2, 1).astype(float)
    z = np.arctanh(rho) * np.sqrt(dof)[:, None]
    return (z > _fisher_critical(alpha)).T & forward


def _n_samples(ctx, alpha):
    if alpha is None:
        return None
    if ctx.n_samples is None:
        raise ValueError("the partial-correlation rule needs the sample size of the covariance")
    return ctx.n_samples


def extract_graph(state: QwoState, tau: float | None = None) -> Dag:
    """Thresholded support of ``I - QW`` restricted to forward pairs of ``pi``.

    Edge ``pi[a] -> pi[b]`` (``a < b``) iff ``|QW[pi[b], pi[a]]| > tau``, or
    iff the partial-correlation test rejects when the state carries an
    ``alpha``. Backward pairs are masked, so the result is always a DAG
    compatible with ``pi``.
    """
    tau = state.tau if tau is None else tau
    n_samples = _n_samples(state.ctx, state.alpha)
    adj = _incoming(state.QW, state.sq, state.Tp, state.pi.inverse, np.arange(state.ctx.n),
                    tau, state.alpha, n_samples)
    return Dag._trusted(adj)


def qwo_build(
    ctx: WhiteningContext, pi, tau: float = DEFAULT_TAU, alpha: float | None = None
) -> tuple[Dag, QwoState]:
    """Compute Q for the order ``pi`` from scratch and return ``(G^pi, state)``.

    With ``alpha`` set, edges come from the Fisher-z test instead of ``tau``
    (``ctx.n_samples`` must then be known).
    """
    pi = _as_perm(pi)
    n = ctx.n
    if len(pi) != n:
        raise ValueError(f"permutation has {len(pi)} entries, expected {n}")
    n_samples = _n_samples(ctx, alpha)
    Qp = np.empty((n, n))
    sq = np.empty(n)
    QW = np.empty((n, n))
    Tp = np.empty((n, n)) if alpha is not None else None
    _orthogonalize(ctx.W, pi.order, Qp, sq, QW, Tp, 0, n - 1)
    adj = _incoming(QW, sq, Tp, pi.inverse, np.arange(n), tau, alpha, n_samples)
    adj.setflags(write=False)
    state = QwoState(ctx=ctx, pi=pi, Qp=Qp, sq=sq, QW=QW, Tp=Tp, adj=adj, tau=tau, alpha=alpha)
    return Dag._trusted(adj), state


def qwo_update(
    state: QwoState, new_pi, idx_l: int, idx_r: int, tau: float | None = None
) -> tuple[Dag, QwoState]:
    """Recompute only the rows for positions ``idx_l..idx_r`` (0-based, inclusive).

    ``new_pi`` must agree with ``state.pi`` outside that block. The input state
    is left untouched.
    """
    new_pi = _as_perm(new_pi)
    old = state.pi.order
    new = new_pi.order
    n = len(old)
    if len(new) != n:
        raise ValueError("new permutation has a different length")
    if not 0 <= idx_l <= idx_r < n:
        raise ValueError(f"invalid block [{idx_l}, {idx_r}] for n = {n}")
    if old[:idx_l] != new[:idx_l] or old[idx_r + 1:] != new[idx_r + 1:]:
        raise ValueError("new permutation differs from the old one outside the block")
    tau = state.tau if tau is None else tau
    alpha = state.alpha
    n_samples = _n_samples(state.ctx, alpha)
    pos = new_pi.inverse

    Qp, sq, QW = state.Qp.copy(), state.sq.copy(), state.QW.copy()
    Tp = None if state.Tp is None else state.Tp.copy()
    if tau != state.tau:
        _orthogonalize(state.ctx.W, new, Qp, sq, QW, Tp, idx_l, idx_r)
        adj = _incoming(QW, sq, Tp, pos, np.arange(n), tau, alpha, n_samples)
    elif old[idx_l:idx_r + 1] != new[idx_l:idx_r + 1]:
        _orthogonalize(state.ctx.W, new, Qp, sq, QW, Tp, idx_l, idx_r)
        # only edges into block vertices can change: rows of QW outside the
        # block are untouched, the block stays on the same side of every other
        # vertex and the predecessor sets of outside vertices are unchanged
        adj = state.adj.copy()
        block = list(new[idx_l:idx_r + 1])
        adj[:, block] = _incoming(QW, sq, Tp, pos, block, tau, alpha, n_samples)
    else:
        adj = state.adj
    adj.setflags(write=False)
    out = QwoState(ctx=state.ctx, pi=new_pi, Qp=Qp, sq=sq, QW=QW, Tp=Tp, adj=adj,
                   tau=tau, alpha=alpha)
    return Dag._trusted(adj), out


def constraint_residuals(state: QwoState) -> dict[str, float]:
    """Scaled violations of the three defining constraints of Q.

    ``triangular``: max ``|<q_{pi[a]}, w_{pi[b]}>|`` over ``a < b`` divided by
    the largest row norm of QW. ``diagonal``: max ``|<q_v, w_v> - 1|``.
    ``orthogonal``: max ``|<q_u, q_v>| / (|q_u| |q_v|)`` over ``u != v``.
    """
    order = list(state.pi.order)
    Mp = state.QW[np.ix_(order, order)]
    scale = float(np.max(np.linalg.norm(state.QW, axis=1)))
    n = Mp.shape[0]
    upper = np.abs(np.triu(Mp, 1))
    G = state.Qp @ state.Qp.T
    norms = np.sqrt(np.diag(G))
    off = np.abs(G) / np.outer(norms, norms)
    np.fill_diagonal(off, 0.0)
    return {
        "triangular": float(upper.max() / scale) if n > 1 else 0.0,
        "diagonal": float(np.max(np.abs(np.diag(Mp) - 1.0))),
        "orthogonal": float(off.max()) if n > 1 else 0.0,
    }


class QwoBuilder:
    """Adapter exposing QWO to the permutation searches."""

    name = "qwo"

    def __init__(self, ctx: WhiteningContext, tau: float = DEFAULT_TAU,
                 alpha: float | None = None):
        if alpha is not None:
            _fisher_critical(alpha)
            _n_samples(ctx, alpha)
        self.ctx = ctx
        self.tau = tau
        self.alpha = alpha
        self.calls = 0

    def build(self, pi):
        self.calls += 1
        return qwo_build(self.ctx, pi, self.tau, self.alpha)

    def update(self, state, new_pi, idx_l, idx_r):
        self.calls += 1
        return qwo_update(state, new_pi, idx_l, idx_r, self.tau)
