"""Independence tests built on the rank estimator.

Two calibrations are offered:

* an exact one, from a Monte-Carlo table of the statistic under uniformly
  random pairings of the two grids (valid at every ``n`` for any continuous
  law, because the rank statistic is pivotal under independence);
* a normal approximation for ``N_n = sqrt(n) (core - F_n)`` studentized by
  its exact conditional variance.
"""
from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .errors import (CacheKeyError, NumericDegeneracyError, ParameterError, ShapeError,
                     SizeError)
from .estimator import EstimateResult, RankPipeline
from .graphs import GeometricGraph, GraphSpec, GraphStats, graph_stats
from .grids import ReferenceGrid, default_grid
from .kernels import Kernel, NullMoments, gram_summary, null_moments

FORMAT_VERSION = 1
CACHE_ENV = "DFASSOC_CACHE_DIR"
_BLOCK = 256
_QMC_POINTS = 10**6


# ---------------------------------------------------------------------------
# variance


@dataclass(frozen=True)
class VarianceComponents:
    n: int
    g1: float
    g2: float
    g3: float
    a_tilde: float
    b_tilde: float
    c_tilde: float
    a_hat: float
    b_hat: float
    c_hat: float
    S_n_sq_asymptotic: float
    var_exact: float
    moments_method: str = ""

    @property
    def nonnegative(self) -> bool:
        return self.var_exact >= 0 and self.S_n_sq_asymptotic >= 0

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["nonnegative"] = self.nonnegative
        return out


def grid_moments(kernel: Kernel, points):
    """Means of ``K_ij^2``, ``K_ij K_il`` and ``K_ij K_lm`` over distinct index tuples.

    Exact in O(n^2) time from the off-diagonal row sums ``r_i`` and row
    sums of squares ``q_i``: with ``S = sum r``, ``Q = sum q`` and
    ``T = sum (r_i^2 - q_i)``, the pair, triple and quadruple sums are
    ``Q``, ``T`` and ``S^2 - 2Q - 4T``.
    """
    summ = gram_summary(kernel, points)
    n = summ.n
    if n < 4:
        raise SizeError("moments over distinct quadruples need n >= 4")
    r, q = summ.row_sums, summ.row_sq_sums
    S, Q = r.sum(), q.sum()
    T = np.sum(r * r - q)
    a = Q / (n * (n - 1))
    b = T / (n * (n - 1) * (n - 2))
    c = (S * S - 2.0 * Q - 4.0 * T) / (n * (n - 1) * (n - 2) * (n - 3))
    return float(a), float(b), float(c)


def _moments_for(kernel: Kernel, dim: int) -> NullMoments:
    if kernel.kind == "energy" and dim == 1:
        return null_moments(kernel, 1, "closed_form")
    return null_moments(kernel, dim, "qmc", _QMC_POINTS)


def variance_components(grid_y: ReferenceGrid, graph: GeometricGraph, kernel: Kernel,
                        moments: Optional[NullMoments] = None) -> VarianceComponents:
    """Exact and asymptotic null variance of ``N_n``.

    ``var_exact = (g1 + g3 - 2/(n-1)) (a - 2b + c) + (g2 - 1)(b - c)`` with
    the grid moments ``a, b, c``; the asymptotic form uses the population
    moments of the kernel under uniform ranks instead.
    """
    n = grid_y.n
    if graph.n != n:
        raise ShapeError(f"graph has {graph.n} vertices but the grid has {n} points")
    if n < 4:
        raise SizeError("variance components need n >= 4")
    kernel = kernel.resolve(grid_y.points)
    a, b, c = grid_moments(kernel, grid_y.points)
    gs = graph_stats(graph)
    mom = moments or _moments_for(kernel, grid_y.dim)
    g1, g2, g3 = gs.g1, gs.g2, gs.g3
    s_asym = (
        mom.a_tilde * (g1 + g3 - 2.0 / (n - 1))
        + mom.b_tilde * (g2 - 2 * g1 - 2 * g3 - (n - 5) / (n - 1))
        + mom.c_tilde * (g1 + g3 - g2 + (n - 3) / (n - 1))
    )
    comps = VarianceComponents(
        n=n, g1=g1, g2=g2, g3=g3,
        a_tilde=mom.a_tilde, b_tilde=mom.b_tilde, c_tilde=mom.c_tilde,
        a_hat=a, b_hat=b, c_hat=c,
        S_n_sq_asymptotic=float(s_asym), var_exact=0.0, moments_method=mom.method,
    )
    return _with_exact(comps)


def _with_exact(comps: VarianceComponents) -> VarianceComponents:
    d = dict(comps.__dict__)
    d["var_exact"] = exact_variance_of_Nn(comps, comps.n)
    return VarianceComponents(**d)


def exact_variance_of_Nn(components: VarianceComponents, n: int) -> float:
    """Finite-sample variance of ``N_n`` under independence."""
    if n != components.n:
        raise ParameterError(f"components were computed for n = {components.n}, not {n}")
    c = components
    return float(
        (c.g1 + c.g3 - 2.0 / (n - 1)) * (c.a_hat - 2 * c.b_hat + c.c_hat)
        + (c.g2 - 1.0) * (c.b_hat - c.c_hat)
    )


# ---------------------------------------------------------------------------
# null tables


@dataclass(frozen=True)
class NullTableKey:
    n: int
    grid_x: dict
    grid_y: dict
    graph: dict
    kernel: dict

    @classmethod
    def of(cls, pipeline: RankPipeline) -> "NullTableKey":
        return cls(**pipeline.key())

    def to_dict(self) -> dict:
        return {"n": self.n, "grid_x": self.grid_x, "grid_y": self.grid_y,
                "graph": self.graph, "kernel": self.kernel}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def pipeline(self) -> RankPipeline:
        from .grids import GridSpec

        return RankPipeline(
            GridSpec.from_dict(self.grid_x).build(),
            GridSpec.from_dict(self.grid_y).build(),
            GraphSpec.from_dict(self.graph),
            Kernel.from_dict(self.kernel),
        )


@dataclass(frozen=True, eq=False)
class NullTable:
    """Sorted null statistics for one configuration."""

    key: NullTableKey
    replicates: int
    seed: int
    eta: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)

    def quantile(self, q, statistic: str = "eta"):
        return np.quantile(self._stat(statistic), q)

    def _stat(self, statistic):
        if statistic not in ("eta", "N"):
            raise ParameterError("statistic must be 'eta' or 'N'")
        return self.eta if statistic == "eta" else self.N

    def p_value(self, observed: float, statistic: str = "eta") -> float:
        """Right-tail Monte-Carlo p-value ``(1 + #{T >= t}) / (B + 1)``."""
        s = self._stat(statistic)
        tol = 1e-12 * max(1.0, abs(observed))
        exceed = len(s) - np.searchsorted(s, observed - tol, side="left")
        return float((1 + exceed) / (len(s) + 1))


def replicate_pairing(n: int, seed: int, r: int) -> np.ndarray:
    """Uniform random permutation for replicate ``r``; depends only on ``(seed, r)``."""
    return np.random.default_rng(np.random.SeedSequence([seed, r])).permutation(n)


def build_null_table(key: NullTableKey, replicates: int, seed: int, n_jobs: int = 1,
                     pipeline: Optional[RankPipeline] = None) -> NullTable:
    """Simulate the null law of the rank statistic.

    Replicate ``r`` pairs the ``grid_x`` points (fixed order) with ``grid_y``
    points permuted by :func:`replicate_pairing`. The table does not depend
    on ``n_jobs``.
    """
    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    if seed is None or int(seed) != seed or seed < 0:
        raise ParameterError("null tables need an explicit nonnegative integer seed")
    pipeline = pipeline or key.pipeline()
    if NullTableKey.of(pipeline) != key:
        raise CacheKeyError("pipeline does not match the table key")
    n = key.n

    def block(start):
        stop = min(start + _BLOCK, replicates)
        perms = np.stack([replicate_pairing(n, seed, r) for r in range(start, stop)])
        return pipeline.cores(perms)

    starts = range(0, replicates, _BLOCK)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    centered = np.concatenate(parts) - pipeline.F_n
    eta = np.sort(centered / pipeline.D_n)
    N = np.sort(math.sqrt(n) * centered)
    for arr in (eta, N):
        arr.setflags(write=False)
    return NullTable(key, int(replicates), int(seed), eta, N)


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def _decode(text: str) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(text), dtype="<f8").copy()
    arr.setflags(write=False)
    return arr


def _checksum(key: dict, seed, replicates, eta_b64, n_b64) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([key, seed, replicates], sort_keys=True).encode())
    h.update(eta_b64.encode())
    h.update(n_b64.encode())
    return h.hexdigest()


def table_to_json(table: NullTable) -> dict:
    eta_b64, n_b64 = _encode(table.eta), _encode(table.N)
    key = table.key.to_dict()
    return {
        "format_version": FORMAT_VERSION,
        "key": key,
        "seed": table.seed,
        "replicates": table.replicates,
        "statistics": {"dtype": "<f8", "eta": eta_b64, "N": n_b64},
        "checksum": _checksum(key, table.seed, table.replicates, eta_b64, n_b64),
    }


def table_from_json(data: dict) -> NullTable:
    try:
        if data["format_version"] != FORMAT_VERSION:
            raise CacheKeyError(f"unsupported table format {data['format_version']}")
        st = data["statistics"]
        if st.get("dtype") != "<f8":
            raise CacheKeyError("unsupported statistic encoding")
        expect = _checksum(data["key"], data["seed"], data["replicates"], st["eta"], st["N"])
        if expect != data["checksum"]:
            raise CacheKeyError("null table checksum mismatch")
        eta, N = _decode(st["eta"]), _decode(st["N"])
        if len(eta) != data["replicates"] or len(N) != data["replicates"]:
            raise CacheKeyError("null table length mismatch")
        return NullTable(NullTableKey(**data["key"]), int(data["replicates"]),
                         int(data["seed"]), eta, N)
    except (KeyError, TypeError, ValueError) as exc:
        raise CacheKeyError(f"malformed null table: {exc}") from exc


def save_table(table: NullTable, path) -> Path:
    """Write ``table`` as JSON atomically (temporary file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(table_to_json(table), fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_table(path) -> NullTable:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CacheKeyError(f"unreadable null table {path}: {exc}") from exc
    return table_from_json(data)


class TableCache:
    """Directory of null tables addressed by configuration digest, seed and size."""

    def __init__(self, directory=None):
        directory = directory or os.environ.get(CACHE_ENV)
        if not directory:
            directory = Path.home() / ".cache" / "dfassoc"
        self.directory = Path(directory)

    def path(self, key: NullTableKey, seed: int, replicates: int) -> Path:
        return self.directory / f"null-v{FORMAT_VERSION}-{key.digest()[:24]}-s{seed}-r{replicates}.json"

    def get_or_build(self, key: NullTableKey, replicates: int, seed: int,
                     pipeline: Optional[RankPipeline] = None, n_jobs: int = 1):
        """Return ``(table, cache_hit)``."""
        path = self.path(key, seed, replicates)
        if path.exists():
            table = load_table(path)
            if table.key != key:
                raise CacheKeyError(f"cached table {path} has a different key")
            return table, True
        table = build_null_table(key, replicates, seed, n_jobs, pipeline)
        save_table(table, path)
        return table, False


# ---------------------------------------------------------------------------
# test


@dataclass(frozen=True)
class TestResult:
    estimate: EstimateResult
    p_exact: float
    z_stat: float
    p_clt: float
    z_asymptotic: float
    alpha: float
    reject: bool
    variance: VarianceComponents
    diagnostics: GraphStats
    table: dict
    cache_hit: bool = False

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.to_dict(),
            "p_exact": self.p_exact,
            "z_stat": self.z_stat,
            "p_clt": self.p_clt,
            "z_asymptotic": self.z_asymptotic,
            "alpha": self.alpha,
            "reject": self.reject,
            "variance": self.variance.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
            "null_table": self.table,
        }


def test_independence(x, y, grid_x: Optional[ReferenceGrid] = None,
                      grid_y: Optional[ReferenceGrid] = None,
                      graph: GraphSpec = GraphSpec(), kernel: Kernel = Kernel(),
                      alpha: float = 0.05, table: Optional[NullTable] = None,
                      replicates: int = 10**4, seed: Optional[int] = None,
                      cache: Optional[TableCache] = None, n_jobs: int = 1,
                      pipeline: Optional[RankPipeline] = None) -> TestResult:
    """Rank test of independence between ``x`` and ``y``.

    The decision uses the exact p-value from ``table`` (built on demand
    from ``replicates`` and ``seed`` when absent, through ``cache`` when
    given). The CLT z-statistic is ``N_n / sqrt(var_exact)``.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if len(x) != len(y):
        raise ShapeError(f"x has {len(x)} rows but y has {len(y)}")
    n = len(x)
    if pipeline is None:
        grid_x = grid_x or default_grid(n, x.shape[1])
        grid_y = grid_y or default_grid(n, y.shape[1])
        pipeline = RankPipeline(grid_x, grid_y, graph, kernel)
    key = NullTableKey.of(pipeline)
    hit = False
    if table is None:
        if seed is None:
            raise ParameterError("building a null table needs an explicit seed")
        if cache is not None:
            table, hit = cache.get_or_build(key, replicates, seed, pipeline, n_jobs)
        else:
            table = build_null_table(key, replicates, seed, n_jobs, pipeline)
    elif table.key != key:
        raise CacheKeyError("null table key does not match this configuration")
    est = pipeline.estimate(x, y)
    var = variance_components(pipeline.grid_y, pipeline.graph, pipeline.kernel)
    if not var.var_exact > 0:
        raise NumericDegeneracyError(f"exact null variance is {var.var_exact:.3e}")
    z = est.N_n_rank / math.sqrt(var.var_exact)
    z_asym = (est.N_n_rank / math.sqrt(var.S_n_sq_asymptotic)
              if var.S_n_sq_asymptotic > 0 else float("nan"))
    p_exact = table.p_value(est.eta_hat)
    return TestResult(
        estimate=est,
        p_exact=p_exact,
        z_stat=float(z),
        p_clt=float(stats.norm.sf(z)),
        z_asymptotic=float(z_asym),
        alpha=float(alpha),
        reject=bool(p_exact <= alpha),
        variance=var,
        diagnostics=graph_stats(pipeline.graph),
        table={"digest": key.digest(), "seed": table.seed, "replicates": table.replicates},
        cache_hit=hit,
    )


test_independence.__test__ = False  # keep pytest from collecting the public API
