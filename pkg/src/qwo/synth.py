"""Synthetic ground truth: Erdos-Renyi DAGs, linear SEM parameters and samples."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import Dag, LigamModel

NOISES = ("gaussian", "exponential", "gumbel")


@dataclass(frozen=True)
class GenConfig:
    n: int
    avg_degree: float = 2.0
    N: int = 500
    noise: str = "gaussian"
    seed: int = 0
    coef_range: tuple = (0.5, 2.0)
    var_range: tuple = (1.0, 2.0)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.avg_degree < 0 or (self.n > 1 and self.avg_degree > self.n - 1):
            raise ValueError(f"avg_degree must lie in [0, n-1], got {self.avg_degree}")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.noise not in NOISES:
            raise ValueError(f"noise must be one of {NOISES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coef_range"] = list(self.coef_range)
        d["var_range"] = list(self.var_range)
        return d


def sample_er_dag(n: int, avg_degree: float, seed=None) -> Dag:
    """Erdos-Renyi DAG with expected degree ``avg_degree``.

    A random order is drawn and each of the ``n(n-1)/2`` forward pairs is an
    edge with probability ``avg_degree / (n - 1)``.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    if n < 2:
        return Dag(n)
    p = avg_degree / (n - 1)
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = np.zeros((n, n), dtype=bool)
    adj[np.ix_(order, order)] = upper
    return Dag.from_adjacency(adj)


def sample_ligam(g: Dag, seed=None, coef_range=(0.5, 2.0), var_range=(1.0, 2.0)) -> LigamModel:
    """Edge weights uniform on ``[-hi, -lo] U [lo, hi]``, variances uniform on ``var_range``."""
    rng = np.random.default_rng(seed)
    n = g.n
    lo, hi = coef_range
    mag = rng.uniform(lo, hi, size=(n, n))
    sign = np.where(rng.random((n, n)) < 0.5, -1.0, 1.0)
    B = np.where(g.adj.T, sign * mag, 0.0)
    sigma = rng.uniform(*var_range, size=n)
    return LigamModel(B, sigma)


def sample_noise(sigma, N: int, noise: str = "gaussian", seed=None) -> np.ndarray:
    """Zero-mean noise with column variances ``sigma``."""
    rng = np.random.default_rng(seed)
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    sd = np.sqrt(sigma)
    if noise == "gaussian":
        return rng.standard_normal((N, n)) * sd
    if noise == "exponential":
        # Exp(scale s) has mean s and variance s^2
        return rng.exponential(1.0, size=(N, n)) * sd - sd
    if noise == "gumbel":
        beta = sd * np.sqrt(6.0) / np.pi
        return rng.gumbel(0.0, 1.0, size=(N, n)) * beta - np.euler_gamma * beta
    raise ValueError(f"unknown noise family {noise!r}")


def solve_sem(B, noise) -> np.ndarray:
    """Rows of ``X`` solving ``X = B X + N`` for an acyclic ``B``."""
    B = np.asarray(B, dtype=float)
    order = Dag.from_adjacency(B.T != 0).topological_order()
    X = np.zeros_like(noise)
    for v in order:
        X[:, v] = noise[:, v] + X @ B[v]
    return X


def sample_data(model: LigamModel, N: int, noise: str = "gaussian", seed=None,
                return_noise: bool = False):
    """Draw ``N`` samples from ``model`` with the given noise family."""
    E = sample_noise(model.sigma, N, noise, seed)
    X = solve_sem(model.B, E)
    return (X, E) if return_noise else X


def simulate(config: GenConfig, g: Dag | None = None):
    """Graph, model and data for one replicate; everything derives from ``config.seed``.

    ``g`` overrides the random graph (e.g. a bundled fixture structure).
    """
    graph_seed, param_seed, data_seed = np.random.SeedSequence(config.seed).spawn(3)
    if g is None:
        g = sample_er_dag(config.n, config.avg_degree, graph_seed)
    model = sample_ligam(g, param_seed, config.coef_range, config.var_range)
    X = sample_data(model, config.N, config.noise, data_seed)
    return g, model, X
