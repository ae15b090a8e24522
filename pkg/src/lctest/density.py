"""Density representations, the two-component Gaussian test-bed, sampling and
Hellinger distance."""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class EvaluableDensity(Protocol):
    """Anything with a vectorised ``logpdf`` and a ``support`` interval."""

    support: tuple[float, float]

    def logpdf(self, x): ...


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0:
        raise ValueError(f"mu must be finite and nonnegative, got {mu!r}")
    return mu


def normal_logpdf(x, mean=0.0, sd=1.0):
    x = np.asarray(x, dtype=float)
    z = (x - mean) / sd
    return -0.5 * z * z - LOG_SQRT_2PI - np.log(sd)


def mixture_logpdf(mu: float, x):
    """Log density of 0.5 N(-mu/2, 1) + 0.5 N(mu/2, 1), via log-sum-exp."""
    mu = _check_mu(mu)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("x must be finite")
    half = 0.5 * mu
    # symmetric in x by construction: both orderings produce the same pair
    a = -0.5 * (np.abs(arr) - half) ** 2
    b = -0.5 * (np.abs(arr) + half) ** 2
    out = logsumexp(np.stack([a, b]), axis=0) - math.log(2.0) - LOG_SQRT_2PI
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class GaussianMixture1D:
    """Balanced mixture of N(-mu/2, 1) and N(+mu/2, 1).

    Log-concave exactly when ``mu <= 2``.
    """

    mu: float

    def __post_init__(self):
        object.__setattr__(self, "mu", _check_mu(self.mu))

    support = (-math.inf, math.inf)

    @property
    def is_log_concave(self) -> bool:
        return self.mu <= 2.0

    def logpdf(self, x):
        return mixture_logpdf(self.mu, x)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def effective_range(self, pad: float = 10.0) -> tuple[float, float]:
        return -0.5 * self.mu - pad, 0.5 * self.mu + pad

    def sample(self, n: int, seed: int) -> np.ndarray:
        return sample_mixture(self.mu, n, seed)


def sample_mixture(mu: float, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. points: fair coin for the component, then a unit normal.

    The output is a deterministic function of ``(mu, n, seed)``.
    """
    mu = _check_mu(mu)
    if int(n) < 1:
        raise ValueError(f"n must be positive, got {n!r}")
    rng = np.random.default_rng(int(seed))
    signs = np.where(rng.random(int(n)) < 0.5, -1.0, 1.0)
    return signs * (0.5 * mu) + rng.standard_normal(int(n))


def derive_seed(base_seed: int, *key) -> int:
    """Counter-style seed: ``base_seed XOR hash(key)``, stable across processes."""
    payload = repr(tuple(float(k) if isinstance(k, float) else k for k in key))
    digest = hashlib.blake2b(payload.encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "little")) & (2**64 - 1)


@dataclass(frozen=True)
class QuadratureGrid:
    lo: float
    hi: float
    n: int = 4097

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise ValueError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 2:
            raise ValueError("need at least 2 nodes")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def integrate(self, values) -> float:
        """Composite Simpson rule on the uniform nodes."""
        return float(simpson(np.asarray(values, dtype=float), x=self.nodes))

    @classmethod
    def covering(cls, lo: float, hi: float, pad: float = 10.0, n: int = 4097):
        return cls(lo - pad, hi + pad, n)


def integrate_density(density, grid: QuadratureGrid) -> float:
    return grid.integrate(np.exp(density.logpdf(grid.nodes)))


@dataclass(frozen=True)
class HellingerResult:
    distance: float
    tail_warning: bool

    def __float__(self):
        return self.distance


def _mass_in_grid(density, grid: QuadratureGrid) -> float:
    lo, hi = density.support
    # support entirely inside the grid: nothing can be lost
    if lo >= grid.lo and hi <= grid.hi:
        return 1.0
    return integrate_density(density, grid)


def hellinger(p, q, grid: QuadratureGrid, tail_tol: float = 1e-6) -> HellingerResult:
    """Hellinger distance ``sqrt(1 - int sqrt(p q))`` by Simpson quadrature.

    The result carries ``tail_warning=True`` when either density leaves more
    than ``tail_tol`` of its mass outside the grid.
    """
    x = grid.nodes
    with np.errstate(invalid="ignore"):
        half = 0.5 * (np.asarray(p.logpdf(x), float) + np.asarray(q.logpdf(x), float))
    integrand = np.exp(np.where(np.isnan(half), -np.inf, half))
    affinity = grid.integrate(integrand)
    dist = math.sqrt(min(1.0, max(0.0, 1.0 - affinity)))
    lost = max(1.0 - _mass_in_grid(p, grid), 1.0 - _mass_in_grid(q, grid))
    warn = lost > tail_tol
    if warn:
        warnings.warn(f"quadrature grid misses {lost:.2e} of the mass", RuntimeWarning)
    return HellingerResult(dist, warn)


@dataclass(frozen=True)
class Normal1D:
    mean: float = 0.0
    sd: float = 1.0

    support = (-math.inf, math.inf)

    def logpdf(self, x):
        out = normal_logpdf(x, self.mean, self.sd)
        return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class Uniform1D:
    lo: float = 0.0
    hi: float = 1.0

    @property
    def support(self):
        return (self.lo, self.hi)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.where(inside, -math.log(self.hi - self.lo), -np.inf)
        return float(out) if out.ndim == 0 else out
