"""Point-cloud manifold estimates: k-NN graphs, local-PCA tangent charts,
graph geodesics and the directed geodesic discrepancy between two clouds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import cdist

from .errors import ConfigError, DimensionError

DUPLICATE_WEIGHT = 1e-12


@dataclass
class NeighborGraph:
    n: int
    k: int
    knn: np.ndarray  # (n, k) nearest-neighbor indices, closest first
    adjacency: csr_matrix  # symmetric, Euclidean weights
    bridges: list = field(default_factory=list)  # (i, j, weight) added for connectivity

    def neighbors(self, i):
        row = self.adjacency.getrow(i)
        return row.indices

    def edge_weights(self):
        return self.adjacency.data

    @property
    def n_components(self):
        return connected_components(self.adjacency, directed=False)[0]


@dataclass
class TangentChart:
    anchor: int
    basis: np.ndarray  # (d, m), orthonormal columns
    neighbors: np.ndarray
    spectrum: np.ndarray  # descending, length min(d, k)
    rank_deficient: bool = False

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T


@dataclass
class GeoDBreakdown:
    supinf: float
    curvgap: float
    scale: float  # median edge weight of the joint graph
    total: float

    def as_dict(self):
        return {"supinf": self.supinf, "curvgap": self.curvgap, "scale": self.scale, "total": self.total}


def _as_cloud(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"point cloud must be 2-D, got shape {X.shape}")
    return X


def build_graph(X, k: int) -> NeighborGraph:
    """Symmetrized k-NN graph, bridged greedily until connected."""
    X = _as_cloud(X)
    n = X.shape[0]
    if k < 1 or n <= k:
        raise ConfigError(f"need k >= 1 and n > k, got n={n}, k={k}")
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    cand = np.argpartition(D, k - 1, axis=1)[:, :k]
    # order candidates by (distance, index) so ties resolve deterministically
    cand_d = np.take_along_axis(D, cand, axis=1)
    order = np.lexsort((cand, cand_d), axis=1)
    knn = np.take_along_axis(cand, order, axis=1)[:, :k]
    np.fill_diagonal(D, 0.0)

    rows = np.repeat(np.arange(n), k)
    cols = knn.ravel()
    w = np.maximum(D[rows, cols], DUPLICATE_WEIGHT)
    A = csr_matrix((w, (rows, cols)), shape=(n, n))
    A = A.maximum(A.T).tocsr()

    bridges = []
    ncomp, labels = connected_components(A, directed=False)
    if ncomp > 1:
        A = A.tolil()
    while ncomp > 1:
        # Shortest pair between any two different components.
        cross = labels[:, None] != labels[None, :]
        masked = np.where(cross, D, np.inf)
        i, j = divmod(int(np.argmin(masked)), n)
        wij = max(D[i, j], DUPLICATE_WEIGHT)
        A[i, j] = wij
        A[j, i] = wij
        bridges.append((int(min(i, j)), int(max(i, j)), float(wij)))
        ncomp, labels = connected_components(A.tocsr(), directed=False)
    return NeighborGraph(n=n, k=k, knn=knn, adjacency=A.tocsr(), bridges=bridges)


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=-2)
    picked = np.take_along_axis(U, idx[..., None, :], axis=-2)
    return U * np.where(picked < 0, -1.0, 1.0)


def _local_eigh(X, hoods):
    """Descending eigen-decomposition of each neighborhood's covariance."""
    P = X[hoods]  # (b, k+1, d)
    C = P - P.mean(axis=1, keepdims=True)
    cov = np.einsum("bki,bkj->bij", C, C) / P.shape[1]
    vals, vecs = np.linalg.eigh(cov)
    return vals[:, ::-1], vecs[:, :, ::-1]


def _rank(spectrum, tol=1e-10):
    top = max(float(spectrum[0]), 0.0)
    return int(np.sum(spectrum > tol * max(top, 1e-300)))


def tangent_basis(X, graph: NeighborGraph, i: int, m: int) -> TangentChart:
    """Top-m local covariance eigenvectors around point ``i``."""
    X = _as_cloud(X)
    d = X.shape[1]
    if not 1 <= m <= min(d, graph.k):
        raise ConfigError(f"tangent dimension m={m} must lie in [1, min(d={d}, k={graph.k})]")
    hood = np.concatenate([[i], graph.knn[i]])
    vals, vecs = _local_eigh(X, hood[None, :])
    spectrum = vals[0, :min(d, graph.k)].copy()
    spectrum[(spectrum < 0.0) & (spectrum > -1e-12)] = 0.0
    U = _fix_signs(vecs[0, :, :m])
    deficient = m > _rank(vals[0])
    if deficient:
        warnings.warn(f"neighborhood of point {i} has rank < {m}; basis padded", RuntimeWarning, stacklevel=2)
    return TangentChart(anchor=int(i), basis=U, neighbors=graph.knn[i].copy(), spectrum=spectrum, rank_deficient=deficient)


def tangent_bases(X, graph: NeighborGraph, m: int) -> np.ndarray:
    """Bases for every point at once, shape (n, d, m); same values as
    calling :func:`tangent_basis` point by point."""
    X = _as_cloud(X)
    d = X.shape[1]
    if not 1 <= m <= min(d, graph.k):
        raise ConfigError(f"tangent dimension m={m} must lie in [1, min(d={d}, k={graph.k})]")
    hoods = np.concatenate([np.arange(graph.n)[:, None], graph.knn], axis=1)
    _, vecs = _local_eigh(X, hoods)
    return _fix_signs(vecs[:, :, :m])


def project_tangent(chart, v) -> np.ndarray:
    U = chart.basis if isinstance(chart, TangentChart) else np.asarray(chart)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (U.shape[0],):
        raise DimensionError(f"vector of shape {v.shape} does not match ambient dimension {U.shape[0]}")
    return U @ (U.T @ v)


def geodesic_from(graph: NeighborGraph, src) -> np.ndarray:
    """Shortest-path distances from ``src`` (an index or list of indices)."""
    return dijkstra(graph.adjacency, directed=False, indices=src)


def geodesic_matrix(graph: NeighborGraph) -> np.ndarray:
    return dijkstra(graph.adjacency, directed=False)


def _unique_rows(X):
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def curvature_gap(Xs, Xt, k: int, m: int) -> float:
    """Mean normalized projector distance between each source chart and the
    chart of its Euclidean-nearest target point (both clouds charted on
    their own k-NN graphs). Lies in [0, 1]."""
    Us = tangent_bases(Xs, build_graph(Xs, k), m)
    Ut = tangent_bases(Xt, build_graph(Xt, k), m)
    nearest = np.argmin(cdist(Xs, Xt), axis=1)
    Ps = np.einsum("nim,njm->nij", Us, Us)
    Pt = np.einsum("nim,njm->nij", Ut, Ut)[nearest]
    gaps = np.sqrt(np.sum((Ps - Pt) ** 2, axis=(1, 2))) / np.sqrt(2.0 * m)
    return float(np.mean(gaps))


def geo_discrepancy(Xs, Xt, k: int, m: int) -> GeoDBreakdown:
    """Directed source-to-target geodesic discrepancy plus curvature gap.

    Geodesics run on one k-NN graph over the union of both clouds; exactly
    coincident points share a node, so a point present in both clouds is at
    distance 0 from itself.
    """
    Xs = _as_cloud(Xs)
    Xt = _as_cloud(Xt)
    if Xs.shape[0] == 0 or Xt.shape[0] == 0:
        raise ConfigError("both clouds must be nonempty")
    if Xs.shape[1] != Xt.shape[1]:
        raise DimensionError(f"clouds have widths {Xs.shape[1]} and {Xt.shape[1]}")
    if m > Xs.shape[1]:
        raise ConfigError(f"m={m} exceeds ambient dimension {Xs.shape[1]}")

    nodes, inverse = _unique_rows(np.vstack([Xs, Xt]))
    kk = min(k, nodes.shape[0] - 1)
    graph = build_graph(nodes, kk)
    src_nodes = inverse[: Xs.shape[0]]
    tgt_nodes = np.unique(inverse[Xs.shape[0]:])
    to_target = dijkstra(graph.adjacency, directed=False, indices=tgt_nodes, min_only=True)
    supinf = float(np.max(to_target[src_nodes]))
    curvgap = curvature_gap(Xs, Xt, k, m)
    scale = float(np.median(graph.edge_weights()))
    return GeoDBreakdown(supinf=supinf, curvgap=curvgap, scale=scale, total=supinf + curvgap * scale)
