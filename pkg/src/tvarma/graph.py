"""Weighted undirected graphs, combinatorial Laplacians and graph Fourier bases."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class Graph:
    """Undirected graph given by a symmetric, nonnegative weight matrix with zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] == 0:
            raise ValueError(f"weight matrix must be square and non-empty, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("weight matrix has non-finite entries")
        if np.any(W < 0):
            raise ValueError("edge weights must be nonnegative")
        if not np.array_equal(W, W.T):
            raise ValueError("weight matrix must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("weight matrix must have a zero diagonal")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)


@dataclass(frozen=True)
class GraphSpectrum:
    """Orthonormal Laplacian eigenbasis with ascending eigenvalues."""

    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.eigenvalues.shape[0]

    def gft(self, x: np.ndarray) -> np.ndarray:
        """Graph Fourier transform along the first axis."""
        return self.basis.T @ x

    def igft(self, xhat: np.ndarray) -> np.ndarray:
        return self.basis @ xhat


def knn_graph_from_distances(dist: np.ndarray, k: int, sigma: float) -> Graph:
    """k-NN graph from a precomputed distance matrix, Gaussian weights ``exp(-d^2 / sigma^2)``.

    An edge (i, j) is kept when j is among the k nearest neighbours of i or
    i is among those of j. Ties in distance are broken by node index.
    """
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
        raise ValueError(f"distance matrix must be square and non-empty, got shape {D.shape}")
    if not np.allclose(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(D < 0):
        raise ValueError("distances must be nonnegative")
    N = D.shape[0]
    if k < 1:
        raise ValueError("k must be a positive integer")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if N == 1:
        return Graph(np.zeros((1, 1)))
    if k >= N - 1:
        warnings.warn(f"k={k} >= N-1={N - 1}: the k-NN graph is the complete graph", stacklevel=2)
        k = N - 1

    D = 0.5 * (D + D.T)
    masked = D.copy()
    np.fill_diagonal(masked, np.inf)
    order = np.argsort(masked, axis=1, kind="stable")[:, :k]
    adj = np.zeros((N, N), dtype=bool)
    adj[np.repeat(np.arange(N), k), order.ravel()] = True
    adj |= adj.T
    np.fill_diagonal(adj, False)

    W = np.where(adj, np.exp(-(D**2) / sigma**2), 0.0)
    return Graph(W)


def default_sigma(dist: np.ndarray, k: int) -> float:
    """Mean distance from each node to its k-th nearest neighbour; a scale-free default kernel width."""
    D = np.array(dist, dtype=float)
    np.fill_diagonal(D, np.inf)
    k = min(k, D.shape[0] - 1)
    kth = np.sort(D, axis=1)[:, k - 1]
    s = float(np.mean(kth))
    if not s > 0:
        raise ValueError("all k-th neighbour distances are zero; give sigma explicitly")
    return s


def build_knn_graph(points, k: int, sigma: float) -> Graph:
    """k-NN graph over points in Euclidean space with Gaussian edge weights."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("points must be non-empty")
    if k >= X.shape[0]:
        raise ValueError(f"k={k} must be smaller than the number of points {X.shape[0]}")
    return knn_graph_from_distances(cdist(X, X), k, sigma)


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - W``."""
    W = g.weights
    return np.diag(W.sum(axis=1)) - W


def eigendecompose(lap: np.ndarray, tol: float = 1e-10) -> GraphSpectrum:
    """Symmetric eigendecomposition with a deterministic eigenvector sign.

    Each eigenvector is flipped so that its entry of largest magnitude is
    positive. Within a repeated eigenvalue the basis is whatever LAPACK
    returns; only the eigenspace is meaningful there.
    """
    L = np.asarray(lap, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"matrix must be square, got shape {L.shape}")
    scale = max(1.0, np.abs(L).max())
    if np.abs(L - L.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric")
    lam, U = np.linalg.eigh(0.5 * (L + L.T))
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    lam.setflags(write=False)
    U.setflags(write=False)
    return GraphSpectrum(basis=U, eigenvalues=lam)


def graph_spectrum(g: Graph) -> GraphSpectrum:
    return eigendecompose(laplacian(g))
