"""Predictable density estimators for the likelihood-ratio numerator.

Each estimator maps a data prefix to an immutable, strictly positive density
on the whole line.  Three variants: Gaussian KDE, a two-component Gaussian
mixture fitted by EM, and the true test-bed mixture (oracle).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.spatial.distance import pdist

from .density import GaussianMixture1D, normal_logpdf

VARIANCE_FLOOR = 1e-4


class Variant(str, enum.Enum):
    KDE = "KDE"
    GMM2 = "GMM2"
    ORACLE = "ORACLE"


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to use and how to configure it.

    ``bandwidth`` is a rule name (``"plugin"`` or ``"silverman"``) or a
    positive float.  ``oracle_mu=None``
    means "the true mu of whatever stream is being tested", which the
    simulation harness fills in per run.
    """

    variant: Variant = Variant.KDE
    bandwidth: str | float = "plugin"
    gmm_max_iter: int = 500
    gmm_tol: float = 1e-8
    gmm_restarts: int = 3
    gmm_seed: int = 0
    oracle_mu: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        bw = self.bandwidth
        if isinstance(bw, str):
            if bw.lower() not in ("silverman", "plugin"):
                raise ValueError(f"unknown bandwidth rule {bw!r}")
            object.__setattr__(self, "bandwidth", bw.lower())
        elif not (float(bw) > 0 and math.isfinite(float(bw))):
            raise ValueError(f"fixed bandwidth must be positive, got {bw!r}")
        if self.gmm_max_iter < 1 or self.gmm_restarts < 1 or not self.gmm_tol > 0:
            raise ValueError("gmm_max_iter, gmm_restarts and gmm_tol must be positive")
        if self.oracle_mu is not None and not self.oracle_mu >= 0:
            raise ValueError("oracle_mu must be nonnegative")

    def label(self) -> str:
        if self.variant is Variant.KDE:
            bw = self.bandwidth if isinstance(self.bandwidth, str) else f"h={self.bandwidth:g}"
            return f"KDE({bw})"
        return self.variant.value

    def with_oracle_mu(self, mu: float) -> "EstimatorSpec":
        if self.variant is not Variant.ORACLE or self.oracle_mu is not None:
            return self
        return EstimatorSpec(**{**self.__dict__, "oracle_mu": float(mu)})

    def fit(self, prefix):
        """Fit on ``prefix`` and return a density with a vectorised ``logpdf``."""
        if self.variant is Variant.KDE:
            return kde_fit(prefix, self)
        if self.variant is Variant.GMM2:
            arr = np.asarray(prefix, dtype=float)
            if len(arr) < 4 or np.ptp(arr) == 0:
                # too little data for EM; the KDE is still a valid predictor
                return kde_fit(arr)
            return Gmm2Density(gmm2_fit(arr, self))
        if self.oracle_mu is None:
            raise ValueError("ORACLE estimator needs oracle_mu")
        return oracle_density(self.oracle_mu)

    def to_dict(self) -> dict:
        if self.variant is Variant.KDE:
            return {"variant": "KDE", "bandwidth": self.bandwidth}
        if self.variant is Variant.GMM2:
            return {"variant": "GMM2", "max_iter": self.gmm_max_iter,
                    "tol": self.gmm_tol, "restarts": self.gmm_restarts,
                    "seed": self.gmm_seed}
        return {"variant": "ORACLE", "mu": self.oracle_mu}

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        d = dict(d)
        variant = Variant(str(d.pop("variant", "KDE")).upper())
        kw = {"variant": variant}
        if variant is Variant.KDE:
            bw = d.pop("bandwidth", "plugin")
            kw["bandwidth"] = bw if isinstance(bw, str) else float(bw)
        elif variant is Variant.GMM2:
            kw["gmm_max_iter"] = int(d.pop("max_iter", 500))
            kw["gmm_tol"] = float(d.pop("tol", 1e-8))
            kw["gmm_restarts"] = int(d.pop("restarts", 3))
            kw["gmm_seed"] = int(d.pop("seed", 0))
        else:
            mu = d.pop("mu", None)
            kw["oracle_mu"] = None if mu is None else float(mu)
        if d:
            raise ValueError(f"unknown estimator fields: {sorted(d)}")
        return cls(**kw)

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse the CLI shorthand: ``kde``, ``kde:silverman``, ``kde:0.5``,
        ``gmm2``, ``oracle:4``."""
        name, _, arg = text.partition(":")
        name = name.strip().upper()
        if name == "KDE":
            if not arg:
                return cls(Variant.KDE)
            if arg.strip().lower() in ("silverman", "plugin"):
                return cls(Variant.KDE, bandwidth=arg.strip().lower())
            return cls(Variant.KDE, bandwidth=float(arg))
        if name == "GMM2":
            return cls(Variant.GMM2)
        if name == "ORACLE":
            if not arg:
                raise ValueError("oracle estimator needs a mu, e.g. oracle:4")
            return cls(Variant.ORACLE, oracle_mu=float(arg))
        raise ValueError(f"unknown estimator {text!r}")


# ---------------------------------------------------------------------------
# KDE


def silverman_bandwidth(x) -> float:
    """``1.06 * min(sd, IQR / 1.34) * n^(-1/5)``; 0.0 if the data are constant."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return 0.0
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 1.06 * spread * len(x) ** (-0.2)


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _scale_estimate(x) -> float:
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    return min(sd, iqr / 1.349) if iqr > 0 else sd


def _hermite_sum(diff, n: int, g: float, poly) -> float:
    """``sum_{i,j} poly(z^2) phi(z)`` over all ordered pairs, ``z = (x_i - x_j) / g``.

    ``diff`` holds the distinct-pair distances; the diagonal contributes
    ``n * poly(0) * phi(0)``.
    """
    z2 = (diff / g) ** 2
    off = 2.0 * float(np.sum(poly(z2) * np.exp(-0.5 * z2)))
    return (n * poly(0.0) + off) / _SQRT_2PI


def plugin_bandwidth(x) -> float:
    """Two-stage direct plug-in bandwidth for a Gaussian kernel.

    Normal-scale estimate of psi_8, then kernel estimates of psi_6 and psi_4
    at their asymptotically optimal pilot bandwidths.
    Returns 0.0 when the data carry no usable scale.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return 0.0
    s = _scale_estimate(x)
    if not s > 0:
        return 0.0
    diff = pdist(x[:, None])
    psi8 = 105.0 / (32.0 * math.sqrt(math.pi) * s**9)
    g1 = (2.0 * 15.0 / _SQRT_2PI / (psi8 * n)) ** (1.0 / 9.0)
    psi6 = _hermite_sum(diff, n, g1, lambda z2: z2**3 - 15.0 * z2**2 + 45.0 * z2 - 15.0) / (n * n * g1**7)
    if not psi6 < 0:
        return 0.0
    g2 = (-2.0 * 3.0 / _SQRT_2PI / (psi6 * n)) ** (1.0 / 7.0)
    psi4 = _hermite_sum(diff, n, g2, lambda z2: z2 * z2 - 6.0 * z2 + 3.0) / (n * n * g2**5)
    if not psi4 > 0:
        return 0.0
    return (1.0 / (2.0 * math.sqrt(math.pi) * psi4 * n)) ** 0.2


BANDWIDTH_RULES = {"plugin": plugin_bandwidth, "silverman": silverman_bandwidth}


@dataclass(frozen=True)
class KdeDensity:
    points: np.ndarray
    bandwidth: float
    bandwidth_fallback: bool = False

    support = (-math.inf, math.inf)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def logpdf(self, x):
        xa = np.asarray(x, dtype=float)
        z = (xa.reshape(-1, 1) - self.points) / self.bandwidth
        lp = logsumexp(-0.5 * z * z, axis=1)
        lp = lp - math.log(len(self.points)) - math.log(self.bandwidth) - 0.5 * math.log(2 * math.pi)
        return float(lp[0]) if xa.ndim == 0 else lp.reshape(xa.shape)


def kde_fit(prefix, spec: EstimatorSpec | None = None) -> KdeDensity:
    spec = spec or EstimatorSpec()
    pts = np.asarray(prefix, dtype=float).ravel()
    if len(pts) == 0:
        raise ValueError("KDE needs a nonempty prefix")
    if isinstance(spec.bandwidth, str):
        h = BANDWIDTH_RULES[spec.bandwidth](pts)
        if h <= 0 and spec.bandwidth != "silverman":
            h = silverman_bandwidth(pts)
        if h > 0:
            return KdeDensity(pts, h)
        return KdeDensity(pts, 1.0, bandwidth_fallback=True)
    return KdeDensity(pts, float(spec.bandwidth))


# ---------------------------------------------------------------------------
# two-component Gaussian mixture


@dataclass(frozen=True)
class Gmm2Params:
    weights: tuple[float, float]
    means: tuple[float, float]
    variances: tuple[float, float]
    loglik: float = float("nan")
    loglik_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def logpdf(self, x):
        xa = np.asarray(x, dtype=float)
        comps = [
            math.log(w) + normal_logpdf(xa, m, math.sqrt(v))
            for w, m, v in zip(self.weights, self.means, self.variances)
        ]
        return np.logaddexp(comps[0], comps[1])


@dataclass(frozen=True)
class Gmm2Density:
    params: Gmm2Params

    support = (-math.inf, math.inf)

    def logpdf(self, x):
        out = self.params.logpdf(x)
        return float(out) if np.ndim(x) == 0 else out


def _em(x, w, m, v, max_iter, tol):
    trace = []
    prev = -math.inf
    for it in range(max_iter + 1):
        lw = np.log(w)[:, None] + normal_logpdf(x[None, :], m[:, None], np.sqrt(v)[:, None])
        ll_point = np.logaddexp(lw[0], lw[1])
        ll = float(ll_point.sum())
        trace.append(ll)
        if it == max_iter or (math.isfinite(prev) and ll - prev <= tol * abs(ll)):
            break
        prev = ll
        r = np.exp(lw - ll_point)
        nk = r.sum(axis=1)
        if np.any(nk <= 1e-12):
            break
        w = nk / len(x)
        m = (r @ x) / nk
        v = np.maximum((r * (x[None, :] - m[:, None]) ** 2).sum(axis=1) / nk, VARIANCE_FLOOR)
    return w, m, v, trace


def gmm2_fit(prefix, spec: EstimatorSpec | None = None) -> Gmm2Params:
    """EM fit of a two-component Gaussian mixture, best of several starts.

    The first start splits the sorted prefix at the median; later starts
    jitter those means by up to half a standard deviation, seeded from the
    spec and the prefix length so the fit is a pure function of its inputs.
    """
    spec = spec or EstimatorSpec(Variant.GMM2)
    x = np.sort(np.asarray(prefix, dtype=float).ravel())
    n = len(x)
    if n < 4:
        raise ValueError(f"GMM2 needs at least 4 points, got {n}")
    if np.ptp(x) == 0:
        raise ValueError("GMM2 cannot fit identical points")
    lo, hi = x[: n // 2], x[n // 2:]
    m0 = np.array([lo.mean(), hi.mean()])
    v0 = np.maximum(np.array([lo.var(), hi.var()]), VARIANCE_FLOOR)
    sd = float(np.std(x))
    rng = np.random.default_rng([spec.gmm_seed, n])

    best = None
    for r in range(spec.gmm_restarts):
        m = m0 if r == 0 else m0 + rng.uniform(-0.5, 0.5, size=2) * sd
        w, mm, vv, trace = _em(x, np.array([0.5, 0.5]), m.copy(), v0.copy(),
                               spec.gmm_max_iter, spec.gmm_tol)
        if best is None or trace[-1] > best[3][-1]:
            best = (w, mm, vv, trace)
    w, m, v, trace = best
    order = np.argsort(m)
    return Gmm2Params(
        weights=tuple(float(a) for a in w[order]),
        means=tuple(float(a) for a in m[order]),
        variances=tuple(float(a) for a in v[order]),
        loglik=trace[-1],
        loglik_trace=tuple(trace),
    )


def oracle_density(mu: float) -> GaussianMixture1D:
    """The true test-bed density; ignores any prefix."""
    return GaussianMixture1D(mu)
