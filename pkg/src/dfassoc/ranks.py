"""Empirical multivariate ranks by optimal assignment to a reference grid.

The rank of sample point ``X_i`` is the grid point ``h_{sigma(i)}`` where
``sigma`` minimises ``sum_i ||X_i - h_sigma(i)||^2`` over all permutations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, OracleSizeError, ParameterError, ShapeError
from .grids import ReferenceGrid

BRUTE_FORCE_MAX_N = 10


@dataclass(frozen=True, eq=False)
class RankAssignment:
    """Optimal matching of sample rows to grid points.

    ``perm[i]`` is the (0-based) index of the grid point assigned to row ``i``.
    """

    perm: np.ndarray
    cost: float
    grid: ReferenceGrid = field(repr=False)

    @property
    def ranks(self) -> np.ndarray:
        return self.grid.points[self.perm]

    def inverse(self) -> np.ndarray:
        """``inverse()[a]`` is the sample row matched to grid point ``a``."""
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return inv

    def to_dict(self) -> dict:
        return {
            "perm": self.perm.tolist(),
            "cost": self.cost,
            "grid": self.grid.spec.to_dict(),
        }


def _as_sample(sample, grid: ReferenceGrid) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError("sample must be a 1-d or 2-d array")
    if x.shape[0] != grid.n:
        raise ShapeError(f"sample has {x.shape[0]} rows but the grid has {grid.n} points")
    if x.shape[1] != grid.dim:
        raise ShapeError(f"sample dimension {x.shape[1]} != grid dimension {grid.dim}")
    if not np.all(np.isfinite(x)):
        raise ShapeError("sample contains non-finite values")
    if len(np.unique(x, axis=0)) != len(x):
        raise DegenerateInputError(
            "sample has duplicate rows; the optimal assignment is not unique"
        )
    return x


def assignment_cost(sample, grid: ReferenceGrid, perm) -> float:
    x = np.asarray(sample, dtype=float).reshape(grid.n, grid.dim)
    diff = x - grid.points[np.asarray(perm)]
    return float(np.sum(diff * diff))


def compute_ranks(sample, grid: ReferenceGrid, method: str = "auto") -> RankAssignment:
    """Exact optimal assignment of ``sample`` rows to ``grid`` points.

    Parameters
    ----------
    sample : array_like, shape (n, d)
    grid : ReferenceGrid
        Must have ``n`` points of dimension ``d``.
    method : {"auto", "lsa", "sort"}
        ``"lsa"`` solves the dense assignment problem with a shortest
        augmenting path solver. ``"sort"`` is the monotone matching, which is
        the exact optimum for one-dimensional data. ``"auto"`` uses ``"sort"``
        when ``d == 1`` and ``"lsa"`` otherwise.

    Returns
    -------
    RankAssignment
    """
    x = _as_sample(sample, grid)
    if method == "auto":
        method = "sort" if grid.dim == 1 else "lsa"
    if method == "sort":
        if grid.dim != 1:
            raise ParameterError("the sorting solver only applies to d = 1")
        perm = np.empty(grid.n, dtype=np.intp)
        perm[np.argsort(x[:, 0], kind="stable")] = np.argsort(grid.points[:, 0], kind="stable")
    elif method == "lsa":
        cost = cdist(x, grid.points, "sqeuclidean")
        rows, cols = linear_sum_assignment(cost)
        perm = np.empty(grid.n, dtype=np.intp)
        perm[rows] = cols
    else:
        raise ParameterError(f"unknown assignment method {method!r}")
    return RankAssignment(perm, assignment_cost(x, grid, perm), grid)


def brute_force_ranks(sample, grid: ReferenceGrid) -> RankAssignment:
    """Exhaustive minimum over all ``n!`` permutations (test oracle, n <= 10)."""
    if grid.n > BRUTE_FORCE_MAX_N:
        raise OracleSizeError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}")
    x = _as_sample(sample, grid)
    cost = cdist(x, grid.points, "sqeuclidean")
    n = grid.n
    rows = np.arange(n)
    all_perms = itertools.permutations(range(n))
    best, best_total = None, np.inf
    for _ in range(0, math.factorial(n), 40320):
        chunk = np.array(list(itertools.islice(all_perms, 40320)), dtype=np.intp)
        totals = cost[rows, chunk].sum(axis=1)
        i = int(np.argmin(totals))
        if totals[i] < best_total:
            best, best_total = chunk[i].copy(), totals[i]
    return RankAssignment(best, assignment_cost(x, grid, best), grid)


def population_rank_oracle(model, x, side: str = "x") -> np.ndarray:
    """Population rank map ``R(x)`` for a law from the oracle catalog.

    ``model`` is either a marginal law (anything with a ``rank_map`` method,
    e.g. :class:`dfassoc.oracles.ProductMarginal`) or a
    :class:`dfassoc.oracles.KnownModel`, in which case ``side`` picks the
    ``"x"`` or ``"y"`` marginal.
    """
    from .oracles import marginal_of

    return marginal_of(model, side).rank_map(x)
