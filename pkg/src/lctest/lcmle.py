"""Exact one-dimensional log-concave maximum likelihood estimation.

The MLE of a log-concave density on a sample ``x_1 < ... < x_m`` is supported
on ``[x_1, x_m]`` and its log-density is piecewise linear with kinks only at
data points.  We maximise

    L(phi) = sum_i w_i phi(x_i) / n - int exp(phi)

over concave piecewise-linear ``phi`` (whose maximiser integrates to one) with
an active-set method: Newton iterations on the values at the current knot set,
knots added where the directional derivative along a concave hinge is
positive, and knots dropped when a Newton step would create a convex kink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 500
CONCAVITY_TOL = 1e-9

_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 26


class DegenerateSampleError(ValueError):
    """Fewer than two distinct sample positions."""


# ---------------------------------------------------------------------------
# segment integrals


def _series_moments(d):
    # m_k(d) = int_0^1 u^k e^{d u} du = sum_j d^j / (j! (j + k + 1))
    j = np.arange(_SERIES_TERMS, dtype=float)
    fact = np.cumprod(np.concatenate([[1.0], j[1:]]))
    pw = d[..., None] ** j / fact
    return tuple((pw / (j + k + 1)).sum(axis=-1) for k in range(3))


def _closed_moments(d):
    # valid (and accurate) for d <= -_SERIES_CUTOFF
    ed = np.exp(d)
    m0 = np.expm1(d) / d
    m1 = (ed * (d - 1.0) + 1.0) / d**2
    m2 = (ed * (d * d - 2.0 * d + 2.0) - 2.0) / d**3
    return m0, m1, m2


def segment_moments(a, b):
    """Return ``M_k = int_0^1 u^k exp(a + (b - a) u) du`` for k = 0, 1, 2.

    Vectorised over arrays ``a`` and ``b``.  A positive slope is handled by
    reflecting ``u -> 1 - u`` so the exponentials never overflow.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    d = b - a
    out = [np.empty(d.shape) for _ in range(3)]

    small = np.abs(d) < _SERIES_CUTOFF
    if small.any():
        s = _series_moments(d[small])
        ea = np.exp(a[small])
        for k in range(3):
            out[k][small] = ea * s[k]

    neg = (~small) & (d < 0)
    if neg.any():
        c = _closed_moments(d[neg])
        ea = np.exp(a[neg])
        for k in range(3):
            out[k][neg] = ea * c[k]

    pos = (~small) & (d > 0)
    if pos.any():
        n0, n1, n2 = _closed_moments(-d[pos])
        eb = np.exp(b[pos])
        out[0][pos] = eb * n0
        out[1][pos] = eb * (n0 - n1)
        out[2][pos] = eb * (n0 - 2.0 * n1 + n2)
    return tuple(out)


def log_integral_exp_segment(a: float, b: float, length: float) -> float:
    """``log int_0^length exp(a + (b - a) u / length) du``.

    Returns ``-inf`` for an empty segment.
    """
    if length < 0:
        raise ValueError(f"segment length must be nonnegative, got {length!r}")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("segment endpoints must be finite")
    if length == 0:
        return -math.inf
    d = b - a
    if abs(d) < 1e-9:
        # e^a * (1 + d/2 + d^2/6)
        return a + math.log(length) + math.log1p(d / 2 + d * d / 6)
    hi, lo = max(a, b), min(a, b)
    # (e^b - e^a) / (b - a) = e^hi * (1 - e^{lo - hi}) / |d|
    return hi + math.log(-math.expm1(lo - hi)) - math.log(abs(d)) + math.log(length)


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class WeightedSortedSample:
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pos.ndim != 1 or pos.shape != w.shape:
            raise ValueError("positions and weights must be 1-D of equal length")
        if len(pos) < 2:
            raise DegenerateSampleError("need at least two distinct positions")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_values(cls, values) -> "WeightedSortedSample":
        """Sort the raw values and collapse duplicates into weights."""
        arr = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample contains non-finite values")
        pos, counts = np.unique(arr, return_counts=True)
        if len(pos) < 2:
            raise DegenerateSampleError(
                f"need at least two distinct values, got {len(pos)}"
            )
        return cls(pos, counts.astype(float))

    @property
    def n(self) -> float:
        return float(self.weights.sum())

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.positions) / self.n)


@dataclass(frozen=True)
class PiecewiseLogLinearDensity:
    """Density whose log is the linear interpolation of ``phi`` at ``knots``
    and ``-inf`` off ``[knots[0], knots[-1]]``."""

    knots: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        p = np.asarray(self.phi, dtype=float)
        if k.ndim != 1 or k.shape != p.shape or len(k) < 2:
            raise ValueError("knots and phi must be 1-D of equal length >= 2")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        k.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "phi", p)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.phi) / np.diff(self.knots)

    def max_slope_increase(self) -> float:
        """Largest slope increase between consecutive segments (<= 0 if concave)."""
        s = self.slopes
        return float(np.max(np.diff(s))) if len(s) > 1 else -math.inf

    def is_concave(self, tol: float = CONCAVITY_TOL) -> bool:
        return self.max_slope_increase() <= tol

    def logpdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.interp(xa, self.knots, self.phi)
        out = np.where((xa < self.knots[0]) | (xa > self.knots[-1]), -np.inf, out)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def log_normalizer(self) -> float:
        m0, _, _ = segment_moments(self.phi[:-1], self.phi[1:])
        return float(np.log(np.sum(np.diff(self.knots) * m0)))

    def total_mass(self) -> float:
        return math.exp(self.log_normalizer())

    def mean(self) -> float:
        """Exact first moment from the segment integrals."""
        h = np.diff(self.knots)
        m0, m1, _ = segment_moments(self.phi[:-1], self.phi[1:])
        return float(np.sum(self.knots[:-1] * h * m0 + h * h * m1))

    def cdf(self, x):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        h = np.diff(self.knots)
        m0, _, _ = segment_moments(self.phi[:-1], self.phi[1:])
        cum = np.concatenate([[0.0], np.cumsum(h * m0)])
        idx = np.clip(np.searchsorted(self.knots, xa, side="right") - 1, 0, len(h) - 1)
        part = np.empty_like(xa)
        for i, (xi, k) in enumerate(zip(xa, idx)):
            u = min(max(xi - self.knots[k], 0.0), h[k])
            if u == 0:
                part[i] = 0.0
                continue
            b = self.phi[k] + (self.phi[k + 1] - self.phi[k]) * u / h[k]
            part[i] = u * segment_moments(self.phi[k], b)[0]
        out = np.where(xa < self.knots[0], 0.0, np.where(xa >= self.knots[-1], cum[-1], cum[idx] + part))
        return float(out[0]) if np.ndim(x) == 0 else out

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "phi": self.phi.tolist()}


@dataclass(frozen=True)
class MleFitReport:
    density: PiecewiseLogLinearDensity
    loglik: float
    iterations: int
    converged: bool
    gap: float

    def to_dict(self) -> dict:
        d = self.density.to_dict()
        d.update(loglik=self.loglik, gap=self.gap, iterations=self.iterations,
                 converged=self.converged)
        return d


def evaluate_logpdf(density: PiecewiseLogLinearDensity, x):
    return density.logpdf(x)


def loglik(density, sample: WeightedSortedSample) -> float:
    """Weighted log-likelihood; ``-inf`` if any position has zero density."""
    lp = np.asarray(density.logpdf(sample.positions), dtype=float)
    if np.any(np.isneginf(lp)):
        return -math.inf
    return float(np.dot(sample.weights, lp))


# ---------------------------------------------------------------------------
# active-set solver (standardised coordinates)


@dataclass
class _Problem:
    x: np.ndarray  # standardised positions
    w: np.ndarray  # weights normalised to sum 1
    knot_tol: float
    newton_evals: int = field(default=0)

    def knot_weights(self, K):
        """c = B^T w where B interpolates knot values onto the data."""
        x, xk = self.x, self.x[K]
        seg = np.clip(np.searchsorted(xk, x, side="right") - 1, 0, len(K) - 2)
        alpha = (x - xk[seg]) / (xk[seg + 1] - xk[seg])
        c = np.zeros(len(K))
        np.add.at(c, seg, self.w * (1.0 - alpha))
        np.add.at(c, seg + 1, self.w * alpha)
        return c

    def objective(self, K, v, c):
        h = np.diff(self.x[K])
        m0, _, _ = segment_moments(v[:-1], v[1:])
        return float(c @ v - np.sum(h * m0))

    def newton(self, K, v, max_steps=80):
        """Maximise the objective over knot values for a fixed knot set."""
        c = self.knot_weights(K)
        h = np.diff(self.x[K])
        k = len(K)
        val = self.objective(K, v, c)
        dec = math.inf
        for _ in range(max_steps):
            self.newton_evals += 1
            m0, m1, m2 = segment_moments(v[:-1], v[1:])
            grad = c.copy()
            grad[:-1] -= h * (m0 - m1)
            grad[1:] -= h * m1
            diag = np.zeros(k)
            diag[:-1] += h * (m0 - 2.0 * m1 + m2)
            diag[1:] += h * m2
            off = h * (m1 - m2)
            ab = np.zeros((2, k))
            ab[0, 1:] = off
            ab[1] = diag
            try:
                step = solveh_banded(ab, grad)
            except np.linalg.LinAlgError:
                step = grad / np.maximum(diag, 1e-300)
            dec = float(grad @ step)
            if not math.isfinite(dec) or dec < 1e-24:
                dec = max(dec, 0.0) if math.isfinite(dec) else 0.0
                break
            t = 1.0
            while t > 1e-12:
                cand = v + t * step
                cval = self.objective(K, cand, c)
                if cval >= val + 0.25 * t * dec:
                    break
                t *= 0.5
            else:
                break
            improvement = cval - val
            v, val = cand, cval
            if dec < 1e-20 or improvement <= 1e-17 * max(1.0, abs(val)):
                # one more decrement evaluation would change nothing measurable
                break
        return v, val, 0.5 * dec

    def interior_kinks(self, K, v):
        s = np.diff(v) / np.diff(self.x[K])
        return np.diff(s)

    def hinge_derivatives(self, phi):
        """Directional derivative of the objective along ``-(x - x_j)_+`` for
        every data index ``j``, and the curvature along the same direction."""
        x, w = self.x, self.w
        h = np.diff(x)
        m0, m1, m2 = segment_moments(phi[:-1], phi[1:])
        i0 = h * m0
        i1 = h * h * m1
        i2 = h**3 * m2
        xl = x[:-1]

        def suffix(arr):
            # suffix[j] = sum_{k >= j} arr[k], padded so suffix[m-1] = 0
            return np.concatenate([np.cumsum(arr[::-1])[::-1], [0.0]])

        s0 = suffix(i0)
        s1 = suffix(i1 + xl * i0)
        s2 = suffix(i2 + 2.0 * xl * i1 + xl * xl * i0)
        int_first = s1 - x * s0
        int_second = s2 - 2.0 * x * s1 + x * x * s0

        ws = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
        wxs = np.concatenate([np.cumsum((w * x)[::-1])[::-1][1:], [0.0]])
        data_first = wxs - x * ws
        return int_first - data_first, np.maximum(int_second, 1e-300)


def _solve(prob: _Problem, tol_dd: float, max_iter: int):
    x = prob.x
    m = len(x)
    K = np.array([0, m - 1])
    v = np.full(2, -math.log(x[-1] - x[0]))
    v, val, newton_gap = prob.newton(K, v)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        phi = np.interp(x, x[K], v)
        D, _ = prob.hinge_derivatives(phi)
        D[K] = -np.inf
        j = int(np.argmax(D))
        if D[j] <= tol_dd:
            converged = True
            break
        Kn = np.sort(np.append(K, j))
        vn = phi[Kn]
        pos_j = int(np.searchsorted(Kn, j))
        stuck = True
        for _ in range(m + 2):
            psi, pval, pgap = prob.newton(Kn, vn)
            kpsi = prob.interior_kinks(Kn, psi)
            if np.all(kpsi <= prob.knot_tol):
                K, v, val, newton_gap = Kn, psi, pval, pgap
                stuck = False
                break
            kold = prob.interior_kinks(Kn, vn)
            viol = kpsi > prob.knot_tol
            with np.errstate(divide="ignore", invalid="ignore"):
                tcross = np.where(viol, kold / (kold - kpsi), np.inf)
            tcross = np.clip(tcross, 0.0, 1.0)
            tstar = float(np.min(tcross))
            # kinks live at interior knots, hence the +1
            blockers = np.flatnonzero(tcross <= tstar + 1e-14) + 1
            if tstar <= 0.0 and len(blockers) == 1 and blockers[0] == pos_j:
                vn = _hinge_ray_step(prob, Kn, vn, j)
                if vn is None:
                    break
                continue
            vn = vn + tstar * (psi - vn)
            keep = np.ones(len(Kn), dtype=bool)
            keep[blockers] = False
            pos_j = int(np.sum(keep[:pos_j])) if keep[pos_j] else -1
            Kn, vn = Kn[keep], vn[keep]
        if stuck:
            break
    phi = np.interp(x, x[K], v)
    D, C = prob.hinge_derivatives(phi)
    D[K] = -np.inf
    pos = D > 0
    hinge_gap = float(np.sum(D[pos] ** 2 / (2.0 * C[pos]))) if pos.any() else 0.0
    return K, v, iterations, converged, newton_gap + hinge_gap


def _hinge_ray_step(prob: _Problem, K, v, j):
    """Move along the concave hinge at data index ``j`` until the objective
    stops increasing; returns new knot values or None."""
    hinge = -np.maximum(prob.x[K] - prob.x[j], 0.0)
    c = prob.knot_weights(K)
    base = prob.objective(K, v, c)
    phi = np.interp(prob.x, prob.x[K], v)
    D, C = prob.hinge_derivatives(phi)
    s = D[j] / C[j]
    while s > 1e-14:
        cand = v + s * hinge
        if prob.objective(K, cand, c) > base:
            return cand
        s *= 0.5
    return None


def fit_lcmle(
    sample,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MleFitReport:
    """Log-concave MLE of a (weighted) sample.

    Parameters
    ----------
    sample : WeightedSortedSample or array-like
        Raw values are sorted and duplicates collapsed into weights.
    tol : float
        Target bound on the log-likelihood suboptimality.
    max_iter : int
        Cap on active-set iterations.

    Returns
    -------
    MleFitReport
        ``gap`` is a second-order bound on the remaining log-likelihood
        improvement: the Newton decrement on the final knot set plus the
        quadratic-model gain available from every hinge with a positive
        directional derivative.
    """
    if not isinstance(sample, WeightedSortedSample):
        sample = WeightedSortedSample.from_values(sample)
    if tol <= 0:
        raise ValueError("tol must be positive")
    pos, wts = sample.positions, sample.weights
    n = sample.n
    center = 0.5 * (pos[0] + pos[-1])
    scale = 0.5 * (pos[-1] - pos[0])
    y = (pos - center) / scale
    prob = _Problem(x=y, w=wts / n, knot_tol=CONCAVITY_TOL * 1e-3)
    tol_dd = min(1e-10, tol / (10.0 * n))
    K, v, iterations, ok, gap = _solve(prob, tol_dd, max_iter)

    # normalise exactly, then map back to the original scale
    h = np.diff(y[K])
    m0, _, _ = segment_moments(v[:-1], v[1:])
    v = v - math.log(float(np.sum(h * m0))) - math.log(scale)
    density = PiecewiseLogLinearDensity(pos[K], v)
    gap = float(n * gap)
    converged = bool(ok and gap <= tol)
    return MleFitReport(
        density=density,
        loglik=loglik(density, sample),
        iterations=iterations,
        converged=converged,
        gap=gap,
    )
