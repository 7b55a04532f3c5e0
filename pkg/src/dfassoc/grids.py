"""Reference point sets in the unit cube.

A reference grid is a fixed set of ``n`` "uniform-like" points in
``[0, 1]^d``. Empirical ranks are obtained by optimally matching a sample to
such a grid (see :mod:`dfassoc.ranks`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateInputError, ParameterError, SizeError

SCHEMES = ("lattice", "halton", "iid")


@dataclass(frozen=True)
class GridSpec:
    """Serializable description of a grid: enough to regenerate it exactly."""

    scheme: str
    n: int
    dim: int
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        out = {"scheme": self.scheme, "n": self.n, "d": self.dim}
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        return cls(data["scheme"], int(data["n"]), int(data["d"]), data.get("seed"))

    def build(self) -> "ReferenceGrid":
        if self.scheme == "lattice":
            if self.dim != 1:
                raise ParameterError("lattice grids are one-dimensional")
            return make_lattice_1d(self.n)
        if self.scheme == "halton":
            return make_halton(self.n, self.dim)
        if self.scheme == "iid":
            if self.seed is None:
                raise ParameterError("iid grids need an explicit seed")
            return make_iid_uniform(self.n, self.dim, self.seed)
        raise ParameterError(f"unknown grid scheme {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class ReferenceGrid:
    """An immutable ``(n, d)`` array of distinct points in the unit cube."""

    spec: GridSpec
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape != (self.spec.n, self.spec.dim):
            raise SizeError(
                f"grid points have shape {pts.shape}, expected "
                f"{(self.spec.n, self.spec.dim)}"
            )
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ParameterError("grid points must lie in [0, 1]^d")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise DegenerateInputError("grid points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def scheme(self) -> str:
        return self.spec.scheme

    def __len__(self):
        return self.spec.n


def _check_size(n, d=1):
    if int(n) != n or n < 1:
        raise SizeError(f"grid size must be a positive integer, got {n}")
    if int(d) != d or d < 1:
        raise SizeError(f"grid dimension must be a positive integer, got {d}")


def make_lattice_1d(n: int) -> ReferenceGrid:
    """The points ``1/n, 2/n, ..., 1`` in increasing order."""
    _check_size(n)
    pts = np.arange(1, n + 1, dtype=float) / n
    return ReferenceGrid(GridSpec("lattice", int(n), 1), pts[:, None])


def halton_points(n: int, d: int, start: int = 1) -> np.ndarray:
    """Unscrambled Halton points with indices ``start, ..., start + n - 1``.

    Bases are the first ``d`` primes. Index 0 (the origin) is skipped by
    the default ``start=1``.
    """
    engine = qmc.Halton(d=d, scramble=False)
    if start:
        engine.fast_forward(start)
    return engine.random(n)


def make_halton(n: int, d: int) -> ReferenceGrid:
    _check_size(n, d)
    return ReferenceGrid(GridSpec("halton", int(n), int(d)), halton_points(n, d))


def make_iid_uniform(n: int, d: int, seed: int) -> ReferenceGrid:
    _check_size(n, d)
    pts = np.random.default_rng(seed).random((n, d))
    return ReferenceGrid(GridSpec("iid", int(n), int(d), int(seed)), pts)


def default_grid(n: int, d: int) -> ReferenceGrid:
    """Lattice in one dimension, Halton otherwise."""
    return make_lattice_1d(n) if d == 1 else make_halton(n, d)


def parse_grid(text: str, n: int, d: int) -> ReferenceGrid:
    """Build a grid from a short option string.

    ``"auto"``, ``"lattice"``, ``"halton"`` or ``"iid:SEED"``.
    """
    text = text.strip().lower()
    if text == "auto":
        return default_grid(n, d)
    if text.startswith("iid"):
        _, _, seed = text.partition(":")
        if not seed:
            raise ParameterError("iid grid needs a seed, e.g. iid:7")
        try:
            seed_value = int(seed)
        except ValueError as exc:
            raise ParameterError(f"bad iid seed {seed!r}") from exc
        return make_iid_uniform(n, d, seed_value)
    if text in ("lattice", "halton"):
        return GridSpec(text, n, d).build()
    raise ParameterError(f"unknown grid option {text!r}")
