"""Graph-based kernel measures of association, plain and rank-based.

For a graph ``G`` on the ``x`` side and a kernel ``K`` on the ``y`` side,

    eta = (core - F_n) / (diag_mean - F_n)

with ``core = n^-1 sum_i d_i^-1 sum_{j ~ i} K(z_i, z_j)``, the off-diagonal
mean ``F_n`` and the diagonal mean ``diag_mean`` of the Gram matrix of the
``z``'s. The rank version uses optimal-transport ranks for both the graph
vertices and the kernel arguments, which makes it distribution-free under
independence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateDenominatorError, ShapeError, SizeError
from .graphs import GeometricGraph, GraphSpec, build_graph
from .grids import ReferenceGrid, default_grid
from .kernels import GramSummary, Kernel, gram_summary
from .oracles import population_eta_rank_oracle  # noqa: F401  (re-export)
from .ranks import RankAssignment, compute_ranks

DEGENERATE_RTOL = 1e-12
_BATCH_ELEMS = 2**22


@dataclass(frozen=True)
class EstimateResult:
    """All pieces of one evaluation of the estimator."""

    eta_hat: float
    numerator_core: float
    F_n: float
    diag_mean: float
    N_n_rank: float
    D_n: float
    n: int
    rank_based: bool
    graph_spec: dict
    kernel_spec: dict
    grid_specs: Optional[dict] = None
    perm_x: Optional[np.ndarray] = field(default=None, repr=False)
    perm_y: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "eta_hat": self.eta_hat,
            "numerator_core": self.numerator_core,
            "F_n": self.F_n,
            "diag_mean": self.diag_mean,
            "N_n_rank": self.N_n_rank,
            "D_n": self.D_n,
            "n": self.n,
            "rank_based": self.rank_based,
            "graph": self.graph_spec,
            "kernel": self.kernel_spec,
            "grids": self.grid_specs,
        }
        if self.perm_x is not None:
            out["ranks"] = {"perm_x": self.perm_x.tolist(), "perm_y": self.perm_y.tolist()}
        return out


def _rows(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be a 1-d or 2-d array")
    return a


def _denominator(diag_mean: float, F_n: float) -> float:
    D = diag_mean - F_n
    if D <= DEGENERATE_RTOL * max(1.0, abs(diag_mean), abs(F_n)):
        raise DegenerateDenominatorError(
            f"D_n = {D:.3e}: the kernel is constant on the sample (duplicate points "
            "or a non-characteristic kernel)"
        )
    return D


def _edge_weights(graph: GeometricGraph) -> np.ndarray:
    # each undirected edge contributes to both endpoints
    inv = 1.0 / graph.degrees
    e = graph.edges
    return (inv[e[:, 0]] + inv[e[:, 1]]) / graph.n


def _assemble(core, F_n, diag_mean, n, **provenance) -> EstimateResult:
    D = _denominator(diag_mean, F_n)
    return EstimateResult(
        eta_hat=float((core - F_n) / D),
        numerator_core=float(core),
        F_n=float(F_n),
        diag_mean=float(diag_mean),
        N_n_rank=float(math.sqrt(n) * (core - F_n)),
        D_n=float(D),
        n=int(n),
        **provenance,
    )


def eta_hat_plain(x, y, graph: GraphSpec = GraphSpec(), kernel: Kernel = Kernel()) -> EstimateResult:
    """Estimator on the raw data: graph on ``x``, kernel on ``y``.

    Parameters
    ----------
    x : array_like, shape (n, d1)
        Must have pairwise distinct rows.
    y : array_like, shape (n, d2)
    graph : GraphSpec
    kernel : Kernel
        A missing bandwidth is filled in from ``y`` by the median heuristic.

    Raises
    ------
    SizeError
        If ``n < 3``.
    DegenerateDenominatorError
        If the kernel is constant on ``y``.
    """
    x, y = _rows(x, "x"), _rows(y, "y")
    if len(x) != len(y):
        raise ShapeError(f"x has {len(x)} rows but y has {len(y)}")
    n = len(x)
    if n < 3:
        raise SizeError("the estimator needs n >= 3")
    kernel = kernel.resolve(y)
    g = build_graph(x, graph)
    summ = gram_summary(kernel, y)
    kv = kernel.paired(y[g.edges[:, 0]], y[g.edges[:, 1]])
    core = float(np.sum(kv * _edge_weights(g)))
    return _assemble(
        core, summ.offdiag_mean, summ.diag_mean, n,
        rank_based=False, graph_spec=g.spec.to_dict(), kernel_spec=kernel.to_dict(),
    )


class RankPipeline:
    """Everything about the rank estimator that does not depend on the data.

    The graph lives on ``grid_x`` in its canonical order and the Gram
    summary on ``grid_y``. A data set only enters through the *pairing*
    ``pairing[a]``: the index of the ``grid_y`` point that is the ``y`` rank
    of the observation whose ``x`` rank is ``grid_x`` point ``a``. Under
    independence the pairing is a uniformly random permutation, which is
    what the null tables simulate through :meth:`cores`.
    """

    def __init__(self, grid_x: ReferenceGrid, grid_y: ReferenceGrid,
                 graph: GraphSpec = GraphSpec(), kernel: Kernel = Kernel()):
        if grid_x.n != grid_y.n:
            raise SizeError(f"grid sizes differ: {grid_x.n} vs {grid_y.n}")
        if grid_x.n < 3:
            raise SizeError("the estimator needs n >= 3")
        self.grid_x, self.grid_y = grid_x, grid_y
        self.n = grid_x.n
        self.kernel = kernel.resolve(grid_y.points)
        self.graph = build_graph(grid_x.points, graph)
        self.graph_spec = self.graph.spec
        self.summary: GramSummary = gram_summary(self.kernel, grid_y.points)
        self.F_n = self.summary.offdiag_mean
        self.diag_mean = self.summary.diag_mean
        self.D_n = _denominator(self.diag_mean, self.F_n)
        self._w = _edge_weights(self.graph)

    def key(self) -> dict:
        return {
            "n": self.n,
            "grid_x": self.grid_x.spec.to_dict(),
            "grid_y": self.grid_y.spec.to_dict(),
            "graph": self.graph_spec.to_dict(),
            "kernel": self.kernel.to_dict(),
        }

    def provenance(self) -> dict:
        return {
            "rank_based": True,
            "graph_spec": self.graph_spec.to_dict(),
            "kernel_spec": self.kernel.to_dict(),
            "grid_specs": {"x": self.grid_x.spec.to_dict(), "y": self.grid_y.spec.to_dict()},
        }

    def ranks(self, x, y, method: str = "auto"):
        x, y = _rows(x, "x"), _rows(y, "y")
        if len(x) != len(y):
            raise ShapeError(f"x has {len(x)} rows but y has {len(y)}")
        return compute_ranks(x, self.grid_x, method), compute_ranks(y, self.grid_y, method)

    @staticmethod
    def pairing(rx: RankAssignment, ry: RankAssignment) -> np.ndarray:
        return ry.perm[rx.inverse()]

    def cores(self, pairings) -> np.ndarray:
        """Graph averages for a batch of pairings, shape ``(B, n)`` -> ``(B,)``.

        Rows are reduced independently, so a value does not depend on the
        batch it was computed in.
        """
        p = np.atleast_2d(np.asarray(pairings, dtype=np.intp))
        e = self.graph.edges
        pts = self.grid_y.points
        out = np.empty(len(p))
        step = max(1, _BATCH_ELEMS // max(1, len(e) * pts.shape[1]))
        for s in range(0, len(p), step):
            blk = p[s:s + step]
            a = pts[blk[:, e[:, 0]]]
            b = pts[blk[:, e[:, 1]]]
            kv = self.kernel.paired(a.reshape(-1, pts.shape[1]), b.reshape(-1, pts.shape[1]))
            out[s:s + step] = (kv.reshape(len(blk), -1) * self._w).sum(axis=1)
        return out

    def from_core(self, core: float, **extra) -> EstimateResult:
        return _assemble(core, self.F_n, self.diag_mean, self.n, **self.provenance(), **extra)

    def estimate(self, x, y, method: str = "auto") -> EstimateResult:
        rx, ry = self.ranks(x, y, method)
        core = self.cores(self.pairing(rx, ry)[None, :])[0]
        return self.from_core(core, perm_x=rx.perm, perm_y=ry.perm)


def eta_hat_rank(x, y, grid_x: Optional[ReferenceGrid] = None,
                 grid_y: Optional[ReferenceGrid] = None,
                 graph: GraphSpec = GraphSpec(), kernel: Kernel = Kernel(),
                 method: str = "auto") -> EstimateResult:
    """Rank-based estimator.

    Grids default to a lattice in one dimension and Halton points otherwise.
    ``F_n``, ``diag_mean`` and ``D_n`` depend on ``grid_y`` and the kernel
    only.
    """
    x, y = _rows(x, "x"), _rows(y, "y")
    n = len(x)
    grid_x = grid_x or default_grid(n, x.shape[1])
    grid_y = grid_y or default_grid(n, y.shape[1])
    return RankPipeline(grid_x, grid_y, graph, kernel).estimate(x, y, method)
