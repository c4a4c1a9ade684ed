"""Hypergraph construction from node features and the normalized propagation operator.

Both constructors center one hyperedge on every node, so the incidence
matrix is square (|E| = |V|) and no degree can vanish.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateHypergraphError, DimensionError, DataFormatError

# Above this many intermediate elements (n*n*d) the pairwise-difference kernel
# switches to the Gram-matrix formulation, which runs at BLAS speed.
_DIRECT_KERNEL_LIMIT = 8_000_000


def check_feature_matrix(X) -> np.ndarray:
    """Validate a node-feature matrix: 2-D, non-empty, finite. Returns float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-D, got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"feature matrix must be at least 1x1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataFormatError("feature matrix contains NaN or infinite entries")
    return X


def pairwise_distances(X) -> np.ndarray:
    """Euclidean distance between every pair of rows of X.

    :param X: N x D feature matrix
    :return: N x N symmetric distance matrix with zero diagonal
    """
    X = check_feature_matrix(X)
    n, d = X.shape
    if n * n * d <= _DIRECT_KERNEL_LIMIT:
        diff = X[:, None, :] - X[None, :, :]
        D = np.sqrt((diff * diff).sum(axis=-1))
    else:
        sq = np.einsum("ij,ij->i", X, X)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        np.maximum(d2, 0.0, out=d2)
        d2 = np.minimum(d2, d2.T)  # cancellation noise would otherwise break symmetry
        D = np.sqrt(d2)
    np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True)
class Hypergraph:
    """Incidence structure: H[v, e] = 1 iff node v belongs to hyperedge e."""

    incidence: np.ndarray     # |V| x |E|, entries in {0, 1}
    edge_weights: np.ndarray  # |E|, positive
    node_degrees: np.ndarray  # |V|, weighted row sums of H
    edge_degrees: np.ndarray  # |E|, column sums of H

    @property
    def n_nodes(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]

    @classmethod
    def from_incidence(cls, H, edge_weights=None) -> "Hypergraph":
        H = np.asarray(H, dtype=np.float64)
        if H.ndim != 2:
            raise DimensionError("incidence matrix must be 2-D")
        if not np.all((H == 0.0) | (H == 1.0)):
            raise DataFormatError("incidence matrix entries must be 0 or 1")
        if edge_weights is None:
            w = np.ones(H.shape[1])
        else:
            w = np.asarray(edge_weights, dtype=np.float64)
            if w.shape != (H.shape[1],):
                raise DimensionError(
                    f"edge weights have shape {w.shape}, expected ({H.shape[1]},)"
                )
            if np.any(w <= 0.0):
                raise ConfigError("edge weights must be positive")
        dv = H @ w
        de = H.sum(axis=0)
        for a in (H, w, dv, de):
            a.setflags(write=False)
        return cls(incidence=H, edge_weights=w, node_degrees=dv, edge_degrees=de)


def build_knn_hypergraph(X, k: int) -> Hypergraph:
    """One hyperedge per node: the node plus its k nearest neighbors.

    Distance ties are broken by the smaller node index, so construction is
    deterministic. Every hyperedge has exactly k + 1 members.
    """
    X = check_feature_matrix(X)
    n = X.shape[0]
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ConfigError(f"k must be an integer, got {k!r}")
    if k < 1 or k >= n:
        raise ConfigError(f"k must satisfy 1 <= k < n_nodes={n}, got {k}")
    D = pairwise_distances(X)
    masked = np.where(np.eye(n, dtype=bool), np.inf, D)
    order = np.argsort(masked, axis=1, kind="stable")
    neighbors = order[:, :k]  # row v: the k nearest nodes to v, v excluded

    H = np.zeros((n, n))
    H[neighbors.ravel(), np.repeat(np.arange(n), k)] = 1.0
    H[np.arange(n), np.arange(n)] = 1.0
    return Hypergraph.from_incidence(H)


def build_epsilon_hypergraph(X, eps: float) -> Hypergraph:
    """One hyperedge per node: all nodes within distance eps, plus the node itself.

    Singleton hyperedges are allowed when nothing lies within eps.
    """
    X = check_feature_matrix(X)
    if not np.isfinite(eps) or eps <= 0.0:
        raise ConfigError(f"eps must be a positive finite number, got {eps}")
    D = pairwise_distances(X)
    H = (D <= eps).astype(np.float64)
    np.fill_diagonal(H, 1.0)
    return Hypergraph.from_incidence(H)


def normalized_operator(g: Hypergraph) -> np.ndarray:
    """Degree-normalized propagation matrix Dv^-1/2 H W De^-1 H^T Dv^-1/2.

    Computed as M @ M.T with M = Dv^-1/2 H sqrt(W / De), which keeps the
    result symmetric and positive semi-definite by construction.
    """
    dv = g.node_degrees
    de = g.edge_degrees
    if np.any(dv <= 0.0):
        raise DegenerateHypergraphError("node with zero degree")
    if np.any(de <= 0.0):
        raise DegenerateHypergraphError("hyperedge with zero degree")
    M = (g.incidence / np.sqrt(dv)[:, None]) * np.sqrt(g.edge_weights / de)[None, :]
    op = M @ M.T
    op.setflags(write=False)
    return op
