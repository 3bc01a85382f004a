"""kNN graph over the original instance and per-iteration node features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .codec import CodecError, encode_array, one_hot_array
from .core import TspInstance

DEFAULT_K = 50


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BaseGraph:
    """Directed edges ``src[e] -> dst[e]`` from every node to its ``k`` nearest
    neighbours in the original instance, grouped by source node."""

    node_features: np.ndarray  # (n, 2) original coordinates
    src: np.ndarray
    dst: np.ndarray
    edge_features: np.ndarray  # (E, 1) original edge lengths
    k: int

    @property
    def n(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.src.shape[0]

    def aggregation_matrix(self) -> sp.csr_matrix:
        """Sparse ``(n, E)`` operator averaging edge messages per source node.

        Rows of nodes without edges are empty, so their mean is zero.
        """
        cached = self.__dict__.get("_agg")
        if cached is None:
            deg = np.bincount(self.src, minlength=self.n).astype(np.float64)
            w = 1.0 / deg[self.src] if self.num_edges else np.zeros(0)
            cached = sp.csr_matrix(
                (w, (self.src, np.arange(self.num_edges))), shape=(self.n, self.num_edges)
            )
            object.__setattr__(self, "_agg", cached)
        return cached


@dataclass(frozen=True, eq=False)
class DynamicGraph:
    base: BaseGraph
    node_features: np.ndarray  # (n, 2 + 2*(2 + 10*M))
    M: int

    @property
    def src(self):
        return self.base.src

    @property
    def dst(self):
        return self.base.dst

    @property
    def edge_features(self):
        return self.base.edge_features

    @property
    def n(self) -> int:
        return self.base.n


def default_k(n: int, k: int = DEFAULT_K) -> int:
    return min(k, n - 1)


def node_feature_dim(M: int) -> int:
    return 2 + 2 * (2 + 10 * M)


def _knn_rows(xy: np.ndarray, rows: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    dx = xy[rows, None, 0] - xy[None, :, 0]
    dy = xy[rows, None, 1] - xy[None, :, 1]
    d = np.sqrt(dx * dx + dy * dy)
    d[np.arange(rows.shape[0]), rows] = np.inf
    # stable sort: equal distances keep index order
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(d, order, axis=1)


def build_base_graph(inst: TspInstance, k: int) -> BaseGraph:
    n = inst.n
    if not 0 <= k < n:
        raise GraphError(f"k must satisfy 0 <= k < n ({n}), got {k}")
    xy = inst.nodes
    nbrs = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        nbrs[rows], dist[rows] = _knn_rows(xy, rows, k)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    return BaseGraph(
        node_features=xy.copy(),
        src=src,
        dst=nbrs.reshape(-1),
        edge_features=dist.reshape(-1, 1),
        k=k,
    )


def offset_features(offsets: np.ndarray, M: int) -> np.ndarray:
    """One-hot codes of an ``(n, 2)`` offset array, flattened to ``(n, 2*(2+10M))``."""
    try:
        signs, digits = encode_array(offsets, M)
    except CodecError as exc:
        raise GraphError(f"cumulative offset outside (-1, 1); clamp upstream ({exc})") from None
    feats = one_hot_array(signs, digits)
    return feats.reshape(offsets.shape[0], -1)


def build_dynamic_graph(base: BaseGraph, s_star: TspInstance, s: TspInstance, M: int) -> DynamicGraph:
    if s_star.n != s.n or s.n != base.n:
        raise GraphError("node counts of base graph and instances differ")
    offsets = s_star.nodes - s.nodes
    feats = np.concatenate([base.node_features, offset_features(offsets, M)], axis=1)
    return DynamicGraph(base=base, node_features=feats, M=M)
