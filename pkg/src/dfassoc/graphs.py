"""Geometric graphs (k-NN, MST) and the graph functionals used downstream.

Graphs are simple and undirected: a directed k-NN relation is symmetrized,
so ``(i, j)`` is an edge when either point is among the other's nearest
neighbors. Degrees are taken on the symmetrized edge set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError, SizeError

_CHUNK = 1024


@dataclass(frozen=True)
class GraphSpec:
    """Graph functional: ``kind`` is ``"knn"`` or ``"mst"``; ``k=None`` means default."""

    kind: str = "knn"
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("knn", "mst"):
            raise ParameterError(f"unknown graph type {self.kind!r}")
        if self.kind == "mst" and self.k is not None:
            raise ParameterError("an MST takes no k")

    def resolve(self, n: int) -> "GraphSpec":
        if self.kind == "knn" and self.k is None:
            return GraphSpec("knn", default_k(n))
        return self

    def to_dict(self) -> dict:
        return {"type": self.kind, "k": self.k} if self.kind == "knn" else {"type": "mst"}

    @classmethod
    def from_dict(cls, data: dict) -> "GraphSpec":
        return cls(data["type"], data.get("k"))

    @classmethod
    def parse(cls, text: str) -> "GraphSpec":
        """``"knn"``, ``"knn:K"`` or ``"mst"``."""
        kind, _, k = text.strip().lower().partition(":")
        if kind == "mst":
            if k:
                raise ParameterError("an MST takes no k")
            return cls("mst")
        if kind != "knn":
            raise ParameterError(f"unknown graph option {text!r}")
        if not k:
            return cls("knn")
        try:
            return cls("knn", int(k))
        except ValueError as exc:
            raise ParameterError(f"bad k in {text!r}") from exc


def default_k(n: int) -> int:
    return max(1, int(math.floor(math.log(n))))


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    """Simple undirected graph on ``n`` vertices.

    ``edges`` is an ``(m, 2)`` array of pairs ``i < j`` in lexicographic
    order; ``edge_lengths[e]`` is the Euclidean length of edge ``e``.
    """

    n: int
    edges: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    edge_lengths: np.ndarray = field(repr=False)
    spec: Optional[GraphSpec] = None

    @classmethod
    def from_edges(cls, points, pairs, spec=None) -> "GeometricGraph":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = len(pts)
        pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ParameterError("self loops are not allowed")
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise ParameterError("edge endpoint out of range")
        edges = np.unique(np.sort(pairs, axis=1), axis=0)
        degrees = np.bincount(edges.ravel(), minlength=n)
        if n > 1 and degrees.min() < 1:
            raise ParameterError("graph has isolated vertices")
        lengths = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
        for arr in (edges, degrees, lengths):
            arr.setflags(write=False)
        return cls(n, edges, degrees, lengths, spec)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def _csr(self):
        cached = self.__dict__.get("_csr_cache")
        if cached is None:
            both = np.concatenate([self.edges, self.edges[:, ::-1]])
            order = np.lexsort((both[:, 1], both[:, 0]))
            both = both[order]
            indptr = np.zeros(self.n + 1, dtype=np.intp)
            np.cumsum(np.bincount(both[:, 0], minlength=self.n), out=indptr[1:])
            cached = (indptr, both[:, 1].copy())
            object.__setattr__(self, "_csr_cache", cached)
        return cached

    def neighbors(self, i: int) -> np.ndarray:
        indptr, indices = self._csr()
        return indices[indptr[i]:indptr[i + 1]]

    def relabel(self, mapping) -> "GeometricGraph":
        """Graph with vertex ``v`` renamed ``mapping[v]``."""
        mapping = np.asarray(mapping)
        edges = np.sort(mapping[self.edges], axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        degrees = np.empty_like(self.degrees)
        degrees[mapping] = self.degrees
        return GeometricGraph(self.n, edges[order], degrees, self.edge_lengths[order], self.spec)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "spec": None if self.spec is None else self.spec.to_dict(),
            "edges": self.edges.tolist(),
            "degrees": self.degrees.tolist(),
        }


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ShapeError("points must be a 1-d or 2-d array")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise DegenerateInputError("points must be pairwise distinct")
    return pts


def knn_graph(points, k: int) -> GeometricGraph:
    """Symmetrized k-nearest-neighbor graph under Euclidean distance.

    Distance ties are broken in favor of the lexicographically smaller
    neighbor coordinates, so the graph does not depend on input order.
    """
    pts = _as_points(points)
    n = len(pts)
    if int(k) != k or not 1 <= k <= n - 1:
        raise ParameterError(f"k must be in [1, n-1] = [1, {n - 1}], got {k}")
    k = int(k)
    lex_rank = np.empty(n, dtype=np.intp)
    lex_rank[np.lexsort(pts.T[::-1])] = np.arange(n)
    # exact squared differences; the Gram-matrix shortcut perturbs genuine ties
    chunk = max(1, min(_CHUNK, 2**24 // (n * pts.shape[1])))
    sources, targets = [], []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        dist = ((pts[start:stop, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
        rows = np.arange(stop - start)
        dist[rows, rows + start] = np.inf
        kth = np.partition(dist, k - 1, axis=1)[:, k - 1:k]
        chosen = dist < kth
        ties = dist == kth
        need = k - chosen.sum(axis=1)
        n_ties = ties.sum(axis=1)
        chosen |= ties & (n_ties == need)[:, None]
        for r in np.flatnonzero(n_ties > need):
            cand = np.flatnonzero(ties[r])
            chosen[r, cand[np.argsort(lex_rank[cand])[: need[r]]]] = True
        src, dst = np.nonzero(chosen)
        sources.append(src + start)
        targets.append(dst)
    pairs = np.column_stack([np.concatenate(sources), np.concatenate(targets)])
    return GeometricGraph.from_edges(pts, pairs, GraphSpec("knn", k))


def mst_graph(points) -> GeometricGraph:
    """Euclidean minimum spanning tree (dense Prim, O(n^2) time, O(n) memory)."""
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise SizeError("a spanning tree needs at least 2 points")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = np.sum((pts - pts[0]) ** 2, axis=1)
    parent = np.zeros(n, dtype=np.intp)
    best[0] = np.inf
    pairs = np.empty((n - 1, 2), dtype=np.intp)
    for step in range(n - 1):
        j = int(np.argmin(best))
        pairs[step] = parent[j], j
        in_tree[j] = True
        best[j] = np.inf
        d = np.sum((pts - pts[j]) ** 2, axis=1)
        closer = (d < best) & ~in_tree
        best[closer] = d[closer]
        parent[closer] = j
    return GeometricGraph.from_edges(pts, pairs, GraphSpec("mst"))


def build_graph(points, spec: GraphSpec) -> GeometricGraph:
    pts = np.asarray(points, dtype=float)
    spec = spec.resolve(len(pts))
    if spec.kind == "mst":
        return mst_graph(pts)
    return knn_graph(pts, spec.k)


def common_neighbors(graph: GeometricGraph, i: int, j: int) -> int:
    """Number of vertices adjacent to both ``i`` and ``j`` (``d_i`` when i == j)."""
    for v in (i, j):
        if int(v) != v or not 0 <= v < graph.n:
            raise ParameterError(f"vertex {v} out of range for n = {graph.n}")
    return int(np.intersect1d(graph.neighbors(i), graph.neighbors(j), assume_unique=True).size)


@dataclass(frozen=True)
class GraphStats:
    """Graph summaries entering the null variance and the regularity diagnostics.

    ``g2`` sums ``T(i, j) / (d_i d_j)`` over all ordered pairs including
    ``i == j`` and ``g3`` counts each edge in both orientations.
    """

    n: int
    g1: float
    g2: float
    g3: float
    min_degree: int
    max_degree: int
    degree_ratio: float
    holder_sum: float
    beta: float
    max_degree_over_log_n: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def graph_stats(graph: GeometricGraph, beta: float = 1.0) -> GraphStats:
    if not 0.0 < beta <= 1.0:
        raise ParameterError(f"beta must be in (0, 1], got {beta}")
    n = graph.n
    deg = graph.degrees.astype(float)
    inv = 1.0 / deg
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    g1 = inv.mean()
    # sum_{i,j} T(i,j)/(d_i d_j) = sum_k (sum_{i ~ k} 1/d_i)^2
    u = np.bincount(i, weights=inv[j], minlength=n) + np.bincount(j, weights=inv[i], minlength=n)
    g2 = np.dot(u, u) / n
    g3 = 2.0 * np.sum(inv[i] * inv[j]) / n
    dmin, dmax = int(graph.degrees.min()), int(graph.degrees.max())
    holder = np.sum(graph.edge_lengths**beta) / (n * dmin)
    return GraphStats(
        n=n,
        g1=float(g1),
        g2=float(g2),
        g3=float(g3),
        min_degree=dmin,
        max_degree=dmax,
        degree_ratio=dmax / dmin,
        holder_sum=float(holder),
        beta=float(beta),
        max_degree_over_log_n=dmax / math.log(n) if n > 1 else float("inf"),
    )
