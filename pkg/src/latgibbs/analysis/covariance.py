"""Two-point covariances with batch-means error bars and exponential decay fits."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..lattice import LatticeSpec
from .observables import ObservableSpec

MIN_RECORDS = 100
N_BATCHES = 32
SIGNAL_SIGMAS = 3.0


class InsufficientSamples(ValueError):
    pass


class NoSignal(ValueError):
    pass


@dataclass
class CovarianceSeries:
    displacements: List[Tuple[int, ...]]
    cov: np.ndarray
    stderr: np.ndarray
    n_samples: int
    f_name: str = "f"
    g_name: str = "g"
    n_batches: int = N_BATCHES

    def __post_init__(self):
        self.displacements = [tuple(int(a) for a in k) for k in self.displacements]
        self.cov = np.asarray(self.cov, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def norms(self) -> np.ndarray:
        return np.array([sum(abs(a) for a in k) for k in self.displacements], dtype=float)

    def weights(self, alpha: float) -> np.ndarray:
        return np.exp(alpha * self.norms)

    def lookup(self, k) -> int:
        return self.displacements.index(tuple(int(a) for a in np.atleast_1d(k)))

    def signal_mask(self, sigmas: float = SIGNAL_SIGMAS) -> np.ndarray:
        return np.abs(self.cov) > sigmas * self.stderr

    @classmethod
    def exact(cls, displacements, cov, rel: float = 1e-9, name: str = "oracle") -> "CovarianceSeries":
        """Series for exactly known covariances; error bars are a fixed relative floor."""
        cov = np.asarray(cov, dtype=float)
        err = np.maximum(rel * np.abs(cov), np.finfo(float).tiny)
        return cls(list(displacements), cov, err, 0, name, name, 0)


def displacement_ball(dim: int, radius: int, include_zero: bool = True) -> List[Tuple[int, ...]]:
    """All k in Z^dim with ||k||_1 <= radius, sorted by norm then lexicographically."""
    out = [k for k in itertools.product(range(-radius, radius + 1), repeat=dim)
           if sum(abs(a) for a in k) <= radius and (include_zero or any(k))]
    return sorted(out, key=lambda k: (sum(abs(a) for a in k), k))


def _batch_stderr(infl: np.ndarray, n_batches: int) -> float:
    """Standard error of the mean of ``infl`` from contiguous batch means."""
    R = infl.shape[0]
    nb = min(n_batches, R)
    edges = np.linspace(0, R, nb + 1).astype(int)
    means = np.array([infl[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    return float(means.std(ddof=1) / np.sqrt(nb))


def batch_means(values: np.ndarray, n_batches: int = N_BATCHES):
    """Mean and batch-means standard error along axis 0 (vectorized over trailing axes)."""
    values = np.asarray(values, dtype=float)
    R = values.shape[0]
    nb = min(n_batches, R)
    edges = np.linspace(0, R, nb + 1).astype(int)
    means = np.stack([values[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    return values.mean(axis=0), means.std(axis=0, ddof=1) / np.sqrt(nb)


def estimate_covariances(samples: np.ndarray, lattice: LatticeSpec, f: ObservableSpec,
                         g: ObservableSpec, displacements: Sequence[Sequence[int]],
                         n_batches: int = N_BATCHES) -> CovarianceSeries:
    """cov(f, tau_k g) for each k from records of shape (R, n_sites).

    On a torus every base translate is used; otherwise only f's base site.
    Error bars: batch means of the per-record influence function of the estimator.
    """
    samples = np.asarray(samples, dtype=float)
    R = samples.shape[0]
    if R < MIN_RECORDS:
        raise InsufficientSamples("insufficient samples: %d records (need >= %d)" % (R, MIN_RECORDS))
    shape = (R,) + lattice.shape
    fv = f(samples).reshape(shape)
    gv = g(samples).reshape(shape)
    axes = tuple(range(1, lattice.dim + 1))
    ext = np.array(lattice.extents)
    disps = [tuple(int(a) for a in k) for k in displacements]
    cov = np.empty(len(disps))
    err = np.empty(len(disps))
    torus = lattice.boundary == "torus"
    if torus:
        a_f = fv.mean(axis=axes)
        a_g = gv.mean(axis=axes)
    else:
        base = np.unravel_index(f.base_site, lattice.shape)
        a_f = fv[(slice(None),) + base]
    for m, k in enumerate(disps):
        if len(k) != lattice.dim:
            raise ValueError("displacement %s has wrong dimension" % (k,))
        if torus:
            if np.any(np.abs(k) >= ext):
                raise ValueError("displacement %s wraps around the torus" % (k,))
            shifted = np.roll(gv, shift=tuple(-a for a in k), axis=axes)
            prod = (fv * shifted).mean(axis=axes)
            mg = a_g
        else:
            target = tuple(b + a for b, a in zip(base, k))
            if any(t < 0 or t >= L for t, L in zip(target, lattice.extents)):
                raise ValueError("displacement %s leaves the volume from the base site" % (k,))
            mg = gv[(slice(None),) + target]
            prod = a_f * mg
        mf_bar = a_f.mean()
        mg_bar = mg.mean()
        cov[m] = prod.mean() - mf_bar * mg_bar
        infl = prod - mg_bar * a_f - mf_bar * mg
        err[m] = _batch_stderr(infl, n_batches)
    err = np.maximum(err, np.finfo(float).tiny)
    return CovarianceSeries(disps, cov, err, R, f.label, g.label, n_batches)


@dataclass
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    included: np.ndarray  # mask over the series displacements
    excluded: List[Tuple[int, ...]] = field(default_factory=list)


def fit_decay_rate(series: CovarianceSeries, min_norm: int = 1, max_norm: Optional[int] = None,
                   sigmas: float = SIGNAL_SIGMAS) -> DecayFit:
    """Weighted least squares of log|cov| against ||k||_1.

    Weights are 1/(stderr/|cov|)^2; points below the sigma cut (or outside the
    norm window) are excluded and listed.
    """
    norms = series.norms
    window = norms >= min_norm
    if max_norm is not None:
        window &= norms <= max_norm
    keep = window & series.signal_mask(sigmas)
    excluded = [k for k, w, s in zip(series.displacements, window, keep) if w and not s]
    if keep.sum() < 3 or len(np.unique(norms[keep])) < 2:
        raise NoSignal("no signal: %d displacement(s) pass the %g-sigma cut" % (keep.sum(), sigmas))
    x = norms[keep]
    y = np.log(np.abs(series.cov[keep]))
    rel = series.stderr[keep] / np.abs(series.cov[keep])
    w = 1.0 / rel  # polyfit squares the weights
    slope, intercept = np.polyfit(x, y, 1, w=w)
    resid = y - (slope * x + intercept)
    W = w * w
    ybar = np.sum(W * y) / W.sum()
    ss_tot = np.sum(W * (y - ybar) ** 2)
    r2 = 1.0 - np.sum(W * resid**2) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), float(intercept), float(r2), keep, excluded)
