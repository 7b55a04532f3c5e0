"""Kernels on rank space and their moments under uniform ranks.

Three characteristic kernels are provided:

* ``energy``:   ``s * (||y1|| + ||y2|| - ||y1 - y2||)``
* ``gaussian``: ``s * exp(-||y1 - y2||^2 / (2 sigma^2))``
* ``laplace``:  ``s * exp(-||y1 - y2|| / sigma)``

where ``s`` is a positive scale (1 by default). On ``[0, inf)`` the energy
kernel equals ``2 s min(y1, y2)``; ``Kernel("energy", scale=0.5)`` is the
``min`` normalization.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ParameterError, ShapeError, SizeError, UnsupportedError
from .grids import halton_points

KINDS = ("energy", "gaussian", "laplace")
_CHUNK_ELEMS = 2**22


@dataclass(frozen=True)
class Kernel:
    kind: str = "energy"
    bandwidth: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown kernel {self.kind!r}")
        if self.kind == "energy" and self.bandwidth is not None:
            raise ParameterError("the energy kernel takes no bandwidth")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ParameterError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.scale > 0:
            raise ParameterError(f"scale must be positive, got {self.scale}")

    @property
    def characteristic(self) -> bool:
        return True

    def resolve(self, points) -> "Kernel":
        """Fill in a missing bandwidth with the median heuristic on ``points``."""
        if self.kind == "energy" or self.bandwidth is not None:
            return self
        return Kernel(self.kind, median_heuristic(points), self.scale)

    def _check_ready(self):
        if self.kind != "energy" and self.bandwidth is None:
            raise ParameterError("kernel bandwidth is unresolved; call resolve() first")

    def paired(self, a, b) -> np.ndarray:
        """Row-wise values ``K(a[i], b[i])``."""
        self._check_ready()
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != b.shape:
            raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
        if a.ndim == 1:
            a, b = a[:, None], b[:, None]
        diff = np.sqrt(np.sum((a - b) ** 2, axis=-1))
        return self.scale * self._from_dist(diff, a, b)

    def _from_dist(self, dist, a, b):
        if self.kind == "energy":
            return np.linalg.norm(a, axis=-1) + np.linalg.norm(b, axis=-1) - dist
        if self.kind == "gaussian":
            return np.exp(-(dist**2) / (2.0 * self.bandwidth**2))
        return np.exp(-dist / self.bandwidth)

    def __call__(self, y1, y2) -> float:
        y1 = np.atleast_1d(np.asarray(y1, dtype=float))
        y2 = np.atleast_1d(np.asarray(y2, dtype=float))
        if y1.shape != y2.shape or y1.ndim != 1:
            raise ShapeError("kernel arguments must be vectors of equal length")
        return float(self.paired(y1[None, :], y2[None, :])[0])

    def gram(self, a, b=None) -> np.ndarray:
        self._check_ready()
        a = _as_rows(a)
        b = a if b is None else _as_rows(b)
        if a.shape[1] != b.shape[1]:
            raise ShapeError("dimension mismatch")
        dist = np.sqrt(np.maximum(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1), 0.0))
        if self.kind == "energy":
            val = np.linalg.norm(a, axis=1)[:, None] + np.linalg.norm(b, axis=1)[None, :] - dist
        elif self.kind == "gaussian":
            val = np.exp(-(dist**2) / (2.0 * self.bandwidth**2))
        else:
            val = np.exp(-dist / self.bandwidth)
        return self.scale * val

    def to_dict(self) -> dict:
        return {"id": self.kind, "bandwidth": self.bandwidth, "scale": self.scale}

    @classmethod
    def from_dict(cls, data: dict) -> "Kernel":
        return cls(data["id"], data.get("bandwidth"), data.get("scale", 1.0))

    @classmethod
    def parse(cls, text: str) -> "Kernel":
        """``"energy"``, ``"gaussian"``, ``"gaussian:SIGMA"``, ``"laplace:SIGMA"``."""
        kind, _, bw = text.strip().lower().partition(":")
        if not bw:
            return cls(kind)
        try:
            return cls(kind, float(bw))
        except ValueError as exc:
            raise ParameterError(f"bad bandwidth in {text!r}") from exc


def _as_rows(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError("expected a 1-d or 2-d array")
    return a


def median_heuristic(points, max_points: int = 1000) -> float:
    """Median pairwise distance over (at most) the first ``max_points`` points."""
    pts = _as_rows(points)[:max_points]
    if len(pts) < 2:
        raise SizeError("median heuristic needs at least two points")
    med = float(np.median(pdist(pts)))
    if med <= 0:
        raise ParameterError("median pairwise distance is zero")
    return med


@dataclass(frozen=True)
class GramSummary:
    """Row-level reductions of the Gram matrix on a fixed point set.

    ``row_sums[i] = sum_{j != i} K_ij`` and ``row_sq_sums[i] = sum_{j != i} K_ij^2``.
    """

    diag: np.ndarray
    row_sums: np.ndarray
    row_sq_sums: np.ndarray

    @property
    def n(self) -> int:
        return len(self.diag)

    @property
    def offdiag_mean(self) -> float:
        n = self.n
        return float(self.row_sums.sum() / (n * (n - 1)))

    @property
    def diag_mean(self) -> float:
        return float(self.diag.mean())


def gram_summary(kernel: Kernel, points) -> GramSummary:
    """Compute :class:`GramSummary` in row blocks (O(n) memory per block row)."""
    pts = _as_rows(points)
    n = len(pts)
    diag = kernel.paired(pts, pts)
    rows = np.empty(n)
    rows_sq = np.empty(n)
    step = max(1, _CHUNK_ELEMS // max(n * pts.shape[1], 1))
    for start in range(0, n, step):
        stop = min(start + step, n)
        block = kernel.gram(pts[start:stop], pts)
        idx = np.arange(stop - start)
        block[idx, idx + start] = 0.0
        rows[start:stop] = block.sum(axis=1)
        rows_sq[start:stop] = np.einsum("ij,ij->i", block, block)
    return GramSummary(diag, rows, rows_sq)


@dataclass(frozen=True)
class NullMoments:
    """Kernel moments for i.i.d. ``U1, U2, U3 ~ Uniform[0,1]^d``.

    ``a_tilde = E K(U1,U2)^2``, ``b_tilde = E K(U1,U2) K(U1,U3)``,
    ``c_tilde = (E K(U1,U2))^2``, ``diag_mean = E K(U1,U1)``,
    ``offdiag_mean = E K(U1,U2)``.
    """

    a_tilde: float
    b_tilde: float
    c_tilde: float
    diag_mean: float
    offdiag_mean: float
    method: str

    def scaled(self, factor: float) -> "NullMoments":
        """Moments of ``factor * K``."""
        f2 = factor * factor
        return NullMoments(
            self.a_tilde * f2,
            self.b_tilde * f2,
            self.c_tilde * f2,
            self.diag_mean * factor,
            self.offdiag_mean * factor,
            self.method,
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def null_moments(kernel: Kernel, dim: int, method: str = "closed_form",
                 n_points: int = 10**6) -> NullMoments:
    """Moment constants of ``kernel`` under uniform ranks on ``[0,1]^dim``.

    ``method="closed_form"`` is available for the energy kernel in one
    dimension; ``method="qmc"`` integrates with ``n_points`` Halton points.
    """
    if method == "closed_form":
        if kernel.kind != "energy" or dim != 1:
            raise UnsupportedError("closed-form moments exist only for the 1-d energy kernel")
        # min(u, v) moments: 1/6, 2/15, 1/9, 1/2, 1/3; energy = 2 * min
        base = NullMoments(1 / 6, 2 / 15, 1 / 9, 1 / 2, 1 / 3, "closed_form")
        return base.scaled(2.0 * kernel.scale)
    if method == "qmc":
        if n_points < 10**5:
            raise ParameterError("QMC moments need at least 1e5 points")
        if kernel.kind != "energy" and kernel.bandwidth is None:
            raise ParameterError("resolve the kernel bandwidth before computing moments")
        return _qmc_moments(kernel, int(dim), int(n_points))
    raise UnsupportedError(f"unknown moment method {method!r}")


@lru_cache(maxsize=32)
def _qmc_moments(kernel: Kernel, dim: int, n_points: int) -> NullMoments:
    chunk = 2**17
    sums = np.zeros(4)  # diag, off, sq, triple
    for start in range(1, n_points + 1, chunk):
        m = min(chunk, n_points + 1 - start)
        u = halton_points(m, 3 * dim, start=start)
        u1, u2, u3 = u[:, :dim], u[:, dim:2 * dim], u[:, 2 * dim:]
        k12 = kernel.paired(u1, u2)
        sums += (
            kernel.paired(u1, u1).sum(),
            k12.sum(),
            (k12 * k12).sum(),
            (k12 * kernel.paired(u1, u3)).sum(),
        )
    diag, off, sq, triple = (float(v) for v in sums / n_points)
    return NullMoments(sq, triple, off * off, diag, off, f"qmc:{n_points}")


def mmd_squared(kernel: Kernel, sample_a, sample_b, unbiased: bool = True) -> float:
    """Squared maximum mean discrepancy between two samples.

    With ``unbiased=True`` the within-sample means run over distinct pairs
    (the result can be slightly negative); otherwise all pairs are used.
    """
    a = _as_rows(sample_a)
    b = _as_rows(sample_b)
    if len(a) < 2 or len(b) < 2:
        raise SizeError("each sample needs at least two points")
    kaa, kbb, kab = kernel.gram(a), kernel.gram(b), kernel.gram(a, b)
    if unbiased:
        m, l = len(a), len(b)
        within_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
        within_b = (kbb.sum() - np.trace(kbb)) / (l * (l - 1))
    else:
        within_a, within_b = kaa.mean(), kbb.mean()
    return float(within_a + within_b - 2.0 * kab.mean())
