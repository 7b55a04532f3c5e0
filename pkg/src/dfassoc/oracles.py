"""Synthetic models with known population quantities, and numerical oracles.

Every model is written as ``X ~ mu_X``, ``Y = h(X, eps)`` with ``eps``
independent noise (absent for noiseless models). Marginals have product
structure, so the population rank map of each side is the coordinatewise
CDF.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special, stats

from .errors import ParameterError, UnsupportedError
from .grids import halton_points
from .kernels import Kernel


# ---------------------------------------------------------------------------
# marginal laws


class ProductMarginal:
    """i.i.d. coordinates from a standard ``uniform``, ``normal`` or ``cauchy`` law."""

    _laws = {"uniform": stats.uniform, "normal": stats.norm, "cauchy": stats.cauchy}

    def __init__(self, family: str, dim: int = 1):
        if family not in self._laws:
            raise UnsupportedError(f"unsupported marginal family {family!r}")
        self.family = family
        self.dim = int(dim)
        self._law = self._laws[family]

    def cdf(self, x):
        return self._law.cdf(x)

    def rank_map(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._law.cdf(x)

    def quantile_map(self, u) -> np.ndarray:
        return self._law.ppf(np.asarray(u, dtype=float))

    def sample(self, rng, n):
        if self.family == "uniform":
            return rng.random((n, self.dim))
        if self.family == "normal":
            return rng.standard_normal((n, self.dim))
        return rng.standard_cauchy((n, self.dim))

    def quadrature(self, m: int):
        """Nodes and normalized weights for integrating against one coordinate."""
        if self.family == "normal":
            x, w = special.roots_hermitenorm(m)
        elif self.family == "uniform":
            x, w = (np.arange(m) + 0.5) / m, np.ones(m)
        else:
            u, w = special.roots_legendre(m)
            x = self.quantile_map((u + 1.0) / 2.0)
        return x, w / w.sum()


class FunctionMarginal:
    """Law of ``g(X) + sigma * Z`` coordinatewise, with ``X`` from ``base`` and ``Z`` normal."""

    def __init__(self, g: "Link", base: ProductMarginal, sigma: float, dim: int):
        self.g, self.base, self.sigma, self.dim = g, base, float(sigma), int(dim)
        if sigma > 0:
            self._nodes, self._weights = base.quadrature(400 if base.family != "uniform" else 2048)
            self._gnodes = g(self._nodes)

    def _mixture_cdf(self, y):
        vals = np.empty(y.shape)
        step = max(1, 2**22 // len(self._gnodes))
        for s in range(0, len(y), step):
            z = (y[s:s + step, None] - self._gnodes[None, :]) / self.sigma
            vals[s:s + step] = stats.norm.cdf(z) @ self._weights
        return vals

    def _table(self):
        # CDF on an arcsinh-spaced axis: fine near the bulk, coarse in the flat tails
        if not hasattr(self, "_tab"):
            s = self.sigma
            lo, hi = self._gnodes.min() - 12 * s, self._gnodes.max() + 12 * s
            u = np.linspace(np.arcsinh(lo / s), np.arcsinh(hi / s), 2**15 + 1)
            self._tab = (u, self._mixture_cdf(s * np.sinh(u)))
        return self._tab

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        if self.sigma == 0:
            return self.g.pushforward_cdf(y, self.base.family)
        if self.g.name == "identity" and self.base.family == "normal":
            return stats.norm.cdf(y / math.sqrt(1.0 + self.sigma**2))
        u, F = self._table()
        return np.interp(np.arcsinh(y / self.sigma), u, F, left=0.0, right=1.0)

    def rank_map(self, y):
        return np.clip(self.cdf(y), 0.0, 1.0)


class Link:
    """Named coordinatewise link function ``g`` with its push-forward CDF."""

    names = ("identity", "cube", "square", "sine")

    def __init__(self, name: str):
        if name not in self.names:
            raise UnsupportedError(f"unknown link {name!r}; choose from {self.names}")
        self.name = name

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "identity":
            return x.copy()
        if self.name == "cube":
            return x**3
        if self.name == "square":
            return x**2
        return np.sin(2.0 * np.pi * x)

    def pushforward_cdf(self, y, family: str):
        """CDF of ``g(X)`` for ``X`` standard ``family``."""
        y = np.asarray(y, dtype=float)
        if family == "normal":
            if self.name == "identity":
                return stats.norm.cdf(y)
            if self.name == "cube":
                return stats.norm.cdf(np.cbrt(y))
            if self.name == "square":
                return stats.chi2.cdf(np.maximum(y, 0.0), 1)
        if family == "uniform" and self.name == "sine":
            return 0.5 + np.arcsin(np.clip(y, -1.0, 1.0)) / np.pi
        raise UnsupportedError(f"no closed-form law for {self.name}(X), X ~ {family}")


# ---------------------------------------------------------------------------
# models


class KnownModel:
    """Base class. Subclasses set ``d1``, ``d2``, the marginals and ``response``."""

    name = "model"
    independent = False
    noiseless = False

    def __init__(self, d1: int, d2: int):
        if d1 < 1 or d2 < 1:
            raise ParameterError("dimensions must be positive")
        self.d1, self.d2 = int(d1), int(d2)

    @property
    def dims(self):
        return self.d1, self.d2

    # sampling
    def sample_x(self, rng, n):
        return self.marginal_x.sample(rng, n)

    def draw_noise(self, rng, n) -> Optional[np.ndarray]:
        return None if self.noiseless else rng.standard_normal((n, self.d2))

    def response(self, x, noise):
        raise NotImplementedError

    def sample(self, n: int, seed: int):
        rng = np.random.default_rng(seed)
        x = self.sample_x(rng, n)
        y = self.response(x, self.draw_noise(rng, n))
        return x, y

    # analytic pieces for d1 = d2 = 1
    def conditional_survival(self, t, x):
        """``P(Y >= t | X = x)``; broadcasts over ``t`` and ``x``."""
        raise UnsupportedError(f"{self.name} has no closed-form conditional law")

    def noise_quadrature(self, m):
        x, w = special.roots_hermitenorm(m)
        return x, w / w.sum()

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"model": self.name, "d1": self.d1, "d2": self.d2, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "model")
        return f"{type(self).__name__}({args})"


class _Independent(KnownModel):
    independent = True
    family = "normal"

    def __init__(self, d1: int = 1, d2: int = 1):
        super().__init__(d1, d2)
        self.marginal_x = ProductMarginal(self.family, d1)
        self.marginal_y = ProductMarginal(self.family, d2)

    def draw_noise(self, rng, n):
        return self.marginal_y.sample(rng, n)

    def response(self, x, noise):
        return np.array(noise, dtype=float)

    def conditional_survival(self, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return 1.0 - self.marginal_y.cdf(t)

    def noise_quadrature(self, m):
        return self.marginal_y.quadrature(m)


class IndependentUniform(_Independent):
    name = "independent-uniform"
    family = "uniform"


class IndependentNormal(_Independent):
    name = "independent-normal"
    family = "normal"


class CauchyMarginalsIndependent(_Independent):
    name = "independent-cauchy"
    family = "cauchy"


class BivariateGaussian(KnownModel):
    """Standard bivariate normal with correlation ``rho``."""

    name = "bivariate-gaussian"

    def __init__(self, rho: float):
        if not -1.0 < rho < 1.0:
            raise ParameterError("rho must lie in (-1, 1)")
        super().__init__(1, 1)
        self.rho = float(rho)
        self.marginal_x = ProductMarginal("normal", 1)
        self.marginal_y = ProductMarginal("normal", 1)
        self.independent = self.rho == 0.0

    def response(self, x, noise):
        return self.rho * x + math.sqrt(1.0 - self.rho**2) * noise

    def conditional_survival(self, t, x):
        s = math.sqrt(1.0 - self.rho**2)
        return stats.norm.sf((np.asarray(t) - self.rho * np.asarray(x)) / s)

    def params(self):
        return {"rho": self.rho}


class NoiselessFunction(KnownModel):
    """``X ~ N(0, I_d)`` and ``Y = g(X)`` coordinatewise."""

    name = "noiseless"
    noiseless = True

    def __init__(self, g: str = "identity", d: int = 1):
        super().__init__(d, d)
        self.g = Link(g)
        if self.g.name == "sine":
            raise UnsupportedError("use the sinusoid model for sine links")
        self.marginal_x = ProductMarginal("normal", d)
        self.marginal_y = FunctionMarginal(self.g, self.marginal_x, 0.0, d)

    def response(self, x, noise):
        return self.g(x)

    def conditional_survival(self, t, x):
        return (self.g(np.asarray(x)) >= np.asarray(t)).astype(float)

    def params(self):
        return {"g": self.g.name}


class AdditiveNoise(KnownModel):
    """``X ~ N(0, I_d)`` and ``Y = g(X) + sigma * eps`` coordinatewise."""

    name = "additive"

    def __init__(self, g: str = "identity", sigma: float = 1.0, d: int = 1):
        if not sigma > 0:
            raise ParameterError("sigma must be positive (use the noiseless model)")
        super().__init__(d, d)
        self.g = Link(g)
        if self.g.name == "sine":
            raise UnsupportedError("use the sinusoid model for sine links")
        self.sigma = float(sigma)
        self.marginal_x = ProductMarginal("normal", d)
        self.marginal_y = FunctionMarginal(self.g, self.marginal_x, self.sigma, d)

    def response(self, x, noise):
        return self.g(x) + self.sigma * noise

    def conditional_survival(self, t, x):
        return stats.norm.sf((np.asarray(t) - self.g(np.asarray(x))) / self.sigma)

    def params(self):
        return {"g": self.g.name, "sigma": self.sigma}


class Sinusoid(KnownModel):
    """``X ~ U[0,1]`` and ``Y = amplitude * sin(2 pi X) + sigma * eps``."""

    name = "sinusoid"

    def __init__(self, amplitude: float = 1.0, sigma: float = 0.2):
        if sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        super().__init__(1, 1)
        self.amplitude, self.sigma = float(amplitude), float(sigma)
        self.noiseless = self.sigma == 0.0
        self.marginal_x = ProductMarginal("uniform", 1)
        self._link = _ScaledSine(self.amplitude)
        self.marginal_y = FunctionMarginal(self._link, self.marginal_x, self.sigma, 1)

    def response(self, x, noise):
        y = self._link(x)
        return y if noise is None else y + self.sigma * noise

    def conditional_survival(self, t, x):
        mean = self._link(np.asarray(x))
        if self.sigma == 0:
            return (mean >= np.asarray(t)).astype(float)
        return stats.norm.sf((np.asarray(t) - mean) / self.sigma)

    def params(self):
        return {"amplitude": self.amplitude, "sigma": self.sigma}


class _ScaledSine(Link):
    def __init__(self, amplitude):
        self.name, self.amplitude = "sine", amplitude

    def __call__(self, x):
        return self.amplitude * np.sin(2.0 * np.pi * np.asarray(x, dtype=float))

    def pushforward_cdf(self, y, family):
        z = np.asarray(y, dtype=float) / self.amplitude
        return 0.5 + np.arcsin(np.clip(z, -1.0, 1.0)) / np.pi


MODELS = {
    cls.name: cls
    for cls in (IndependentUniform, IndependentNormal, CauchyMarginalsIndependent,
                BivariateGaussian, NoiselessFunction, AdditiveNoise, Sinusoid)
}


def parse_model(text: str) -> KnownModel:
    """Build a model from ``"name"`` or ``"name:key=value,key=value"``.

    >>> parse_model("bivariate-gaussian:rho=0.5")
    BivariateGaussian(d1=1, d2=1, rho=0.5)
    """
    name, _, rest = text.strip().partition(":")
    if name not in MODELS:
        raise UnsupportedError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ParameterError(f"expected key=value in {item!r}")
        key = key.strip()
        if key in ("d", "d1", "d2"):
            kwargs[key] = int(value)
        elif key == "g":
            kwargs[key] = value.strip()
        else:
            kwargs[key] = float(value)
    try:
        return MODELS[name](**kwargs)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {name}: {exc}") from exc


def sample(model: KnownModel, n: int, seed: int):
    """Draw ``n`` i.i.d. pairs; deterministic in ``seed``."""
    if n < 1:
        raise ParameterError("n must be positive")
    return model.sample(n, seed)


def marginal_of(model, side: str = "x"):
    if hasattr(model, "rank_map"):
        return model
    if isinstance(model, KnownModel):
        if side not in ("x", "y"):
            raise ParameterError("side must be 'x' or 'y'")
        return model.marginal_x if side == "x" else model.marginal_y
    raise UnsupportedError(f"no population rank map for {model!r}")


# ---------------------------------------------------------------------------
# population dependence coefficients


@dataclass(frozen=True)
class OracleValue:
    value: float
    error: float
    method: str

    def to_dict(self):
        return dict(self.__dict__)


def xi_population(model: KnownModel, method: str = "quadrature", budget: int = 128,
                  seed: int = 0) -> OracleValue:
    """Population regression-dependence coefficient for scalar ``Y``.

    ``xi = int Var(P(Y >= t | X)) dmu_Y(t) / int Var(1(Y >= t)) dmu_Y(t)``.

    ``method="quadrature"`` (needs ``d1 = 1`` and a closed-form conditional
    law) uses product Gauss rules with ``budget`` nodes per axis and reports
    the change from halving the rule as its error. ``method="mc"`` is a
    nested Monte Carlo with ``sqrt(budget)`` outer and inner draws and
    reports one standard error.
    """
    if model.d2 != 1:
        raise UnsupportedError("xi is defined for scalar Y only")
    if method == "quadrature":
        if model.d1 != 1:
            raise UnsupportedError("quadrature route needs d1 = 1")
        fine = _xi_quadrature(model, int(budget))
        coarse = _xi_quadrature(model, max(8, int(budget) // 2))
        return OracleValue(fine, abs(fine - coarse), "quadrature")
    if method == "mc":
        return _xi_nested_mc(model, int(budget), seed)
    raise UnsupportedError(f"unknown method {method!r}")


def _xi_quadrature(model: KnownModel, m: int) -> float:
    xs, wx = model.marginal_x.quadrature(m)
    if model.noiseless:
        ts, wt = model.response(xs, None), wx
    else:
        es, we = model.noise_quadrature(m)
        ts = model.response(np.repeat(xs, len(es)), np.tile(es, len(xs)))
        wt = np.repeat(wx, len(es)) * np.tile(we, len(xs))
    surv = model.conditional_survival(ts[:, None], xs[None, :])
    mean = surv @ wx
    var = ((surv - mean[:, None]) ** 2) @ wx
    return float((var @ wt) / ((mean * (1.0 - mean)) @ wt))


def _xi_nested_mc(model: KnownModel, budget: int, seed: int) -> OracleValue:
    n_out = n_in = max(2, math.isqrt(budget))
    rng = np.random.default_rng(seed)
    x = model.sample_x(rng, n_out)
    t = model.response(model.sample_x(rng, n_out), model.draw_noise(rng, n_out))[:, 0]
    hits = np.empty(n_out)
    step = max(1, 2**22 // n_in)
    for start in range(0, n_out, step):
        stop = min(start + step, n_out)
        xr = np.repeat(x[start:stop], n_in, axis=0)
        y = model.response(xr, model.draw_noise(rng, len(xr)))[:, 0].reshape(-1, n_in)
        hits[start:stop] = (y >= t[start:stop, None]).sum(axis=1)
    # unbiased for P(Y >= t | x)^2
    p2 = hits * (hits - 1.0) / (n_in * (n_in - 1.0))
    # continuous Y: int P(Y>=t)^2 dmu_Y = 1/3 and the denominator is 1/6
    value = 6.0 * p2.mean() - 2.0
    return OracleValue(float(value), float(6.0 * p2.std(ddof=1) / math.sqrt(n_out)), "mc")


def population_eta_rank_oracle(model: KnownModel, kernel: Optional[Kernel] = None,
                               budget: int = 10**6, seed: int = 0) -> OracleValue:
    """Nested Monte Carlo value of the population rank measure of association.

    For outer draws ``X'_i`` and ``sqrt(budget)`` conditional pairs
    ``(Y', Y~')`` per draw, the numerator ``E K(R(Y'), R(Y~')) - E K(R(Y1), R(Y2))``
    and denominator ``E K(R(Y1), R(Y1)) - E K(R(Y1), R(Y2))`` are estimated
    with common random numbers: the independent pair reuses the noise of
    ``Y~'`` with the neighboring outer draw ``X'_{i+1}``. Independence then
    gives exactly 0 and noiseless dependence exactly 1. The error is one
    delta-method standard error of the ratio.
    """
    kernel = kernel or Kernel("energy")
    if kernel.kind != "energy" and kernel.bandwidth is None:
        kernel = kernel.resolve(halton_points(1000, model.d2))
    n_out = n_in = max(2, math.isqrt(int(budget)))
    rng = np.random.default_rng(seed)
    x = model.sample_x(rng, n_out)
    x_next = np.roll(x, -1, axis=0)
    rank = model.marginal_y.rank_map
    num = np.empty(n_out)
    den = np.empty(n_out)
    step = max(1, 2**20 // n_in)
    for start in range(0, n_out, step):
        stop = min(start + step, n_out)
        m = (stop - start) * n_in
        xr = np.repeat(x[start:stop], n_in, axis=0)
        xr_next = np.repeat(x_next[start:stop], n_in, axis=0)
        eps1, eps2 = model.draw_noise(rng, m), model.draw_noise(rng, m)
        r1 = rank(model.response(xr, eps1))
        r2 = rank(model.response(xr, eps2))
        r_ind = rank(model.response(xr_next, eps2))
        k_pair = kernel.paired(r1, r2)
        k_diag = kernel.paired(r1, r1)
        k_ind = kernel.paired(r1, r_ind)
        num[start:stop] = (k_pair - k_ind).reshape(-1, n_in).mean(axis=1)
        den[start:stop] = (k_diag - k_ind).reshape(-1, n_in).mean(axis=1)
    eta = num.mean() / den.mean()
    resid = num - eta * den
    se = resid.std(ddof=1) / math.sqrt(n_out) / abs(den.mean())
    return OracleValue(float(eta), float(se), "nested-mc")


@dataclass(frozen=True)
class EquivalenceReport:
    eta: OracleValue
    xi: OracleValue
    difference: float
    combined_error: float

    @property
    def agree(self) -> bool:
        return abs(self.difference) <= 3.0 * self.combined_error + 1e-12

    def to_dict(self):
        return {
            "eta": self.eta.to_dict(),
            "xi": self.xi.to_dict(),
            "difference": self.difference,
            "combined_error": self.combined_error,
            "agree": self.agree,
        }


def eta_rank_equivalence_check(model: KnownModel, kernel: Optional[Kernel] = None,
                               budget: int = 4 * 10**6, seed: int = 0,
                               xi_budget: int = 128) -> EquivalenceReport:
    """Compare the energy-kernel rank measure with ``xi`` for scalar ``Y``."""
    kernel = kernel or Kernel("energy")
    if kernel.kind != "energy":
        raise UnsupportedError("the equivalence holds for the energy kernel")
    if model.d2 != 1:
        raise UnsupportedError("the equivalence needs scalar Y")
    eta = population_eta_rank_oracle(model, kernel, budget, seed)
    try:
        xi = xi_population(model, "quadrature", xi_budget)
    except UnsupportedError:
        xi = xi_population(model, "mc", budget, seed + 1)
    diff = eta.value - xi.value
    return EquivalenceReport(eta, xi, diff, math.hypot(eta.error, xi.error))
