"""One-dimensional log-concave densities: certified truncation, quadrature, exact draws.

A :class:`Density1D` carries an unnormalized log-density together with a finite
interval outside of which the mass is provably negligible. All expectations are
ratios of two integrals over the same nodes, so normalizing constants never
appear on their own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special

LogPdf = Callable[[np.ndarray], np.ndarray]

GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
DEFAULT_TAIL_TOL = 1e-12
DEFAULT_RTOL = 1e-12
MAX_NODES = 2**16
_FIRST_PANELS = 8


class EnvelopeError(ValueError):
    """Raised when the Gaussian envelope cannot be formed (convexity <= 0)."""


class NonConvergentError(RuntimeError):
    """Successive quadrature refinements disagree at the node budget."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    nodes_used: int


def _mass_lower_bound(logpdf: LogPdf, mode: float, scale: float) -> float:
    """Lower bound on the integral of exp(logpdf - logpdf(mode)).

    On [m, m+s] a convex potential lies below its chord, which bounds the
    density from below by an exponential.
    """
    top = float(logpdf(np.array([mode]))[0])
    total = 0.0
    for side in (-1.0, 1.0):
        best = 0.0
        s = scale
        for _ in range(6):
            drop = top - float(logpdf(np.array([mode + side * s]))[0])
            drop = max(drop, 0.0)
            piece = s if drop < 1e-12 else s * (-math.expm1(-drop)) / drop
            best = max(best, piece)
            s *= 0.5
        total += best
    return total


def truncate(logpdf: LogPdf, mode: float, epsilon: float, tol: float = DEFAULT_TAIL_TOL,
             scale: Optional[float] = None) -> tuple[float, float]:
    """Interval [lo, hi] around ``mode`` from the Gaussian envelope.

    Uses logpdf(x) <= logpdf(mode) - epsilon*(x-mode)^2/2, valid whenever the
    potential has second derivative >= epsilon. The tail mass outside the interval
    is below ``tol`` times the mass inside.
    """
    if not epsilon > 0:
        raise EnvelopeError("envelope failure: convexity parameter must be positive")
    if scale is None:
        scale = 1.0 / math.sqrt(epsilon)
    zlow = _mass_lower_bound(logpdf, mode, scale)
    # two Gaussian tails: 2*sqrt(pi/(2 eps))*erfc(t*sqrt(eps/2)) <= tol*zlow/2 (half the
    # budget is kept for the in-interval approximation of the total)
    q = 0.5 * tol * zlow / (2.0 * math.sqrt(math.pi / (2.0 * epsilon)))
    q = min(q, 1.0)
    t = float(special.erfcinv(q)) / math.sqrt(epsilon / 2.0)
    return mode - t, mode + t


def _support_tail(logpdf: LogPdf, dlogpdf: Optional[LogPdf], top: float, p: float, side: float) -> float:
    """Certified tail mass beyond p (relative to exp(top)) from a support line at p."""
    lp = float(logpdf(np.array([p]))[0])
    if dlogpdf is not None:
        slope = float(dlogpdf(np.array([p]))[0])
    else:
        h = 1e-3 * (1.0 + abs(p))
        lq = float(logpdf(np.array([p - side * h]))[0])
        # secant of a concave function is a valid (shallower) support slope beyond p
        slope = (lp - lq) / (side * h)
    slope *= side
    if not slope < 0:
        return math.inf
    return math.exp(lp - top) / (-slope)


@dataclass(frozen=True)
class Density1D:
    """Unnormalized log-concave density on the line with certified truncation.

    ``tail_mass_bound`` is relative: certified tail mass divided by a lower bound on
    the total mass.
    """

    log_density: LogPdf
    mode: float
    lo: float
    hi: float
    tail_mass_bound: float
    epsilon: float
    top: float  # log_density(mode), subtracted before exponentiating

    @classmethod
    def build(cls, logpdf: LogPdf, epsilon: float, dlogpdf: Optional[LogPdf] = None,
              tol: float = DEFAULT_TAIL_TOL, start: float = 0.0) -> "Density1D":
        mode = find_mode(logpdf, epsilon, dlogpdf, start)
        top = float(logpdf(np.array([mode]))[0])
        lo, hi = truncate(logpdf, mode, epsilon, tol)
        zlow = _mass_lower_bound(logpdf, mode, 1.0 / math.sqrt(epsilon))
        budget = 0.25 * tol * zlow
        ends = []
        for side, far in ((-1.0, lo), (1.0, hi)):
            # the tail bound decreases away from the mode; bisect for the nearest point
            # that still meets the budget
            if _support_tail(logpdf, dlogpdf, top, far, side) > budget:
                ends.append(far)
                continue
            near = mode
            for _ in range(40):
                mid = 0.5 * (near + far)
                if _support_tail(logpdf, dlogpdf, top, mid, side) <= budget:
                    far = mid
                else:
                    near = mid
            ends.append(far)
        lo, hi = ends
        tails = (_support_tail(logpdf, dlogpdf, top, lo, -1.0)
                 + _support_tail(logpdf, dlogpdf, top, hi, 1.0))
        # the envelope bound still holds where the support line is not sharper
        env = 2 * math.sqrt(math.pi / (2 * epsilon)) * special.erfc(
            min(mode - lo, hi - mode) * math.sqrt(epsilon / 2))
        return cls(logpdf, mode, lo, hi, min(tails, env) / zlow, epsilon, top)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        """Density scaled so that its value at the mode is 1."""
        return np.exp(self.log_density(np.asarray(x, dtype=float)) - self.top)

    def _panels(self, n: int):
        edges = np.linspace(self.lo, self.hi, n + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        weights = half[:, None] * _GL_W[None, :]
        return edges, nodes, weights

    @cached_property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """(panel edges, cumulative mass at edges) at the converged refinement level."""
        prev = None
        n = _FIRST_PANELS
        while n * GL_ORDER <= MAX_NODES:
            edges, nodes, weights = self._panels(n)
            masses = (self.pdf(nodes) * weights).sum(axis=1)
            z = masses.sum()
            if prev is not None and abs(z - prev) <= DEFAULT_RTOL * z:
                if not np.all(masses > 0):
                    raise ValueError("cumulative table is not strictly increasing")
                return edges, np.concatenate(([0.0], np.cumsum(masses)))
            prev = z
            n *= 2
        raise NonConvergentError("cumulative table did not converge within the node budget")

    @property
    def mass(self) -> float:
        """Mass inside [lo, hi], relative to the density value at the mode."""
        return float(self.table[1][-1])


def find_mode(logpdf: LogPdf, epsilon: float, dlogpdf: Optional[LogPdf] = None,
              start: float = 0.0) -> float:
    """Maximizer of a strongly log-concave density.

    With the derivative, strong convexity brackets the root of the score within
    |score(start)|/epsilon of ``start``.
    """
    if dlogpdf is not None:
        g = float(dlogpdf(np.array([start]))[0])
        if g == 0.0:
            return float(start)
        width = abs(g) / epsilon
        a, b = (start, start + width) if g > 0 else (start - width, start)
        # widen by a hair so that roundoff cannot put the root outside
        pad = 1e-12 * (1 + abs(a) + abs(b))
        a -= pad
        b += pad
        score = lambda x: float(dlogpdf(np.array([x]))[0])
        if score(a) * score(b) > 0:
            return a if abs(score(a)) < abs(score(b)) else b
        return float(optimize.brentq(score, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    neg = lambda x: -float(logpdf(np.array([x]))[0])
    res = optimize.minimize_scalar(neg, bracket=(start - 1.0, start + 1.0), tol=1e-12)
    return float(res.x)


def integrate(d: Density1D, g: Callable[[np.ndarray], np.ndarray], rtol: float = DEFAULT_RTOL,
              atol: float = 1e-14, max_nodes: int = MAX_NODES) -> QuadratureResult:
    """Expectation of ``g`` under the normalized density ``d`` over [lo, hi].

    Composite Gauss-Legendre with the panel count doubled per level; the error
    estimate is the change between the last two levels.
    """
    prev = None
    n = _FIRST_PANELS
    while n * GL_ORDER <= max_nodes:
        _, nodes, weights = d._panels(n)
        p = d.pdf(nodes) * weights
        gv = np.asarray(g(nodes), dtype=float)
        z = p.sum()
        num = (gv * p).sum()
        scale = (np.abs(gv) * p).sum() / z
        ratio = num / z
        if prev is not None:
            err = abs(ratio - prev[0])
            if err <= atol + rtol * scale and abs(z - prev[1]) <= rtol * z:
                floor = 1e-15 * max(scale, 1e-300)
                return QuadratureResult(float(ratio), float(max(err, floor)), int(nodes.size))
        prev = (ratio, z)
        n *= 2
    raise NonConvergentError("quadrature did not converge within %d nodes" % max_nodes)


def _partial_mass(d: Density1D, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    half = 0.5 * (x - a)
    mid = 0.5 * (x + a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    return (d.pdf(nodes) * _GL_W[None, :]).sum(axis=1) * half


def invert_cdf(d: Density1D, u: np.ndarray) -> np.ndarray:
    """Quantiles of ``d`` at probabilities ``u`` (vectorized).

    The panel is located in the cumulative table, the starting point comes from
    linear interpolation inside the panel, and Newton steps on the exact partial
    mass finish the job.
    """
    edges, cum = d.table
    total = cum[-1]
    u = np.atleast_1d(np.asarray(u, dtype=float))
    target = u * total
    idx = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(edges) - 2)
    a = edges[idx]
    b = edges[idx + 1]
    rem = target - cum[idx]
    pm = cum[idx + 1] - cum[idx]
    frac = np.where(pm > 0, rem / np.where(pm > 0, pm, 1.0), 0.5)
    x = a + (b - a) * np.clip(frac, 0.0, 1.0)
    lo, hi = a.copy(), b.copy()
    for _ in range(60):
        resid = _partial_mass(d, a, x) - rem
        lo = np.where(resid < 0, x, lo)
        hi = np.where(resid > 0, x, hi)
        dens = d.pdf(x)
        step = np.where(dens > 0, resid / np.where(dens > 0, dens, 1.0), 0.0)
        xn = x - step
        bad = (xn <= lo) | (xn >= hi) | ~np.isfinite(xn)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(resid) <= 1e-14 * total
        x = np.where(done, x, xn)
        if done.all():
            break
    return x


def sample_logconcave(d: Density1D, rng, size: Optional[int] = None):
    """Exact-up-to-tolerance draw(s) from ``d`` by inverse CDF, using ``rng.uniform``."""
    if size is None:
        return float(invert_cdf(d, np.array([rng.uniform()]))[0])
    return invert_cdf(d, rng.uniforms(size))
