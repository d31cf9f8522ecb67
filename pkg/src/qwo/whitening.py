"""Covariance estimation and symmetric (ZCA) whitening."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LigamModel

EPS_PD = 1e-10


class SingularCovarianceError(ValueError):
    """The covariance is not (numerically) positive definite."""


@dataclass(frozen=True)
class WhiteningContext:
    """Covariance, its eigendecomposition and ``W = U S^-1/2 U^T``.

    Because ``W`` is symmetric, column ``w_i`` equals row ``W[i]``; the QWO
    routines rely on that to read columns contiguously. ``n_samples`` is the
    number of rows the covariance was estimated from (None for an exact one).
    """

    cov: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    W: np.ndarray
    n_samples: int | None = None

    @property
    def n(self) -> int:
        return self.cov.shape[0]

    @property
    def w_columns(self) -> list[np.ndarray]:
        return [self.W[:, i] for i in range(self.n)]

    def precision(self) -> np.ndarray:
        """Inverse covariance ``U S^-1 U^T``."""
        U = self.eigvecs
        P = (U / self.eigvals) @ U.T
        return (P + P.T) / 2


def estimate_covariance(D) -> np.ndarray:
    """Maximum-likelihood (1/N) covariance of the columns of ``D``."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise ValueError("data must be a 2-d array (samples x variables)")
    N = D.shape[0]
    if N < 2:
        raise ValueError(f"need at least 2 samples to estimate a covariance, got {N}")
    if not np.all(np.isfinite(D)):
        raise ValueError("data contains NaN or infinite entries")
    Xc = D - D.mean(axis=0)
    cov = Xc.T @ Xc / N
    return (cov + cov.T) / 2


def build_whitening(cov, ridge: float = 0.0, eps_pd: float = EPS_PD,
                    n_samples: int | None = None) -> WhiteningContext:
    """Eigendecompose ``cov + ridge*I`` and form the symmetric whitening matrix.

    Parameters
    ----------
    cov : (n, n) array_like
        Symmetric covariance matrix.
    ridge : float
        Non-negative value added to the diagonal before decomposing.
    eps_pd : float
        Smallest admissible eigenvalue after the ridge.
    n_samples : int, optional
        Sample size behind ``cov``, kept for tests that need it.

    Raises
    ------
    ValueError
        If ``cov`` is not square and symmetric (to 1e-8, relative to its scale).
    SingularCovarianceError
        If an eigenvalue is ``<= eps_pd``.
    """
    cov = np.array(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    if cov.size and np.max(np.abs(cov - cov.T)) > 1e-8 * scale:
        raise ValueError("covariance matrix is not symmetric")
    cov = (cov + cov.T) / 2 + ridge * np.eye(cov.shape[0])

    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.size and eigvals[0] <= eps_pd:
        raise SingularCovarianceError(
            f"covariance is singular or nearly so (smallest eigenvalue {eigvals[0]:.3g}); "
            "set a positive ridge or provide more samples"
        )
    W = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    W = (W + W.T) / 2
    for a in (cov, eigvals, eigvecs, W):
        a.setflags(write=False)
    return WhiteningContext(cov=cov, eigvals=eigvals, eigvecs=eigvecs, W=W, n_samples=n_samples)


def oracle_whitening(model: LigamModel, ridge: float = 0.0) -> WhiteningContext:
    """Whitening context built from the exact model covariance."""
    if not model.graph.is_acyclic:
        raise ValueError("oracle whitening expects an acyclic model")
    return build_whitening(model.covariance(), ridge=ridge)


def whiten_data(D, ridge: float = 0.0) -> WhiteningContext:
    D = np.asarray(D, dtype=float)
    return build_whitening(estimate_covariance(D), ridge=ridge, n_samples=D.shape[0])
