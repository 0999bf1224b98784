"""Bound reports: the weighted covariance-decay bound and the moment bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..lattice import Semimetric, uniqueness_threshold
from ..numerics.rho import cumulative_rho_many
from ..potentials import ModelSpec, SelfPotential
from .covariance import N_BATCHES, CovarianceSeries, batch_means
from .observables import ObservableSpec, delta_with_tolerance


class OutsideUniqueness(ValueError):
    pass


def _finite(v):
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class BoundReport:
    """lhs <= rhs checked with allowance 3*stat_error + num_error."""

    name: str
    lhs: float
    rhs: float
    stat_error: float = 0.0
    num_error: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs + 3.0 * self.stat_error + self.num_error)

    def to_json(self) -> dict:
        out = {"name": self.name, "lhs": _finite(self.lhs), "rhs": _finite(self.rhs),
               "slack": _finite(self.slack), "stat_error": _finite(self.stat_error),
               "num_error": _finite(self.num_error), "pass": self.passed}
        if self.details:
            out["details"] = {k: (_finite(v) if isinstance(v, float) else v)
                              for k, v in self.details.items()}
        return out

    def line(self) -> str:
        return "%-28s %s  lhs=%.6g rhs=%.6g slack=%.3g" % (
            self.name, "PASS" if self.passed else "FAIL", self.lhs, self.rhs, self.slack)


def check_decay_bound(series: CovarianceSeries, model: ModelSpec, metric: Semimetric,
                      f: ObservableSpec, g: ObservableSpec, conditions=None) -> BoundReport:
    """Partial weighted sum of |cov(f, tau_k g)| against delta(f) delta(g) / (1 - lam gamma_d).

    The measured displacements cover only a finite ball, so the left side is a
    lower bound on the full lattice sum.
    """
    dob = uniqueness_threshold(model, metric, conditions)
    lg = dob.lam_gamma
    if lg >= 1.0:
        raise OutsideUniqueness("outside uniqueness region: lambda*gamma_d = %.6g >= 1" % lg)
    w = series.weights(metric.alpha)
    lhs = float(np.sum(w * np.abs(series.cov)))
    stat = float(np.sum(w * series.stderr))
    df, tf = delta_with_tolerance(f, model.F)
    dg, tg = delta_with_tolerance(g, model.F)
    amp = 1.0 / (1.0 - lg)
    rhs = df * dg * amp
    # first-order propagation of the sup tolerances and the gamma_d tolerance
    num = amp * (tf * dg + df * tg) + df * dg * amp * amp * model.lam * dob.tolerance * dob.gamma_d**2
    details = {
        "lhs_kind": "partial sum (lower bound on LHS)",
        "alpha": metric.alpha, "lambda": model.lam, "gamma_d": dob.gamma_d,
        "lambda_gamma_d": lg, "delta_f": df, "delta_g": dg,
        "max_displacement": int(series.norms.max()) if len(series.norms) else 0,
        "n_samples": series.n_samples,
    }
    return BoundReport("decay_bound", lhs, rhs, stat, num, details)


def check_moment_bounds(samples: np.ndarray, epsilon: float, a: float,
                        F: Optional[SelfPotential] = None,
                        n_batches: int = N_BATCHES) -> List[BoundReport]:
    """Site-maximal E x_k^2 <= 1/eps, E exp(a x_k^2) <= exp(a/(eps-2a)), and m_mu.

    m_mu = max_k E rho(x_k, 0)^2 is reported without a bound (rhs = inf); it
    needs ``F`` and is skipped otherwise.
    """
    if not (0.0 <= a < 0.5 * epsilon):
        raise ValueError("a out of range: need 0 <= a < epsilon/2 = %g" % (0.5 * epsilon))
    x = np.asarray(samples, dtype=float)
    out = []
    m2, e2 = batch_means(x * x, n_batches)
    i = int(np.argmax(m2))
    out.append(BoundReport("second_moment", float(m2[i]), 1.0 / epsilon, float(e2[i]), 0.0,
                           {"site": i, "n_samples": int(x.shape[0])}))
    mx, ex = batch_means(np.exp(a * x * x), n_batches)
    i = int(np.argmax(mx))
    out.append(BoundReport("exp_moment", float(mx[i]), math.exp(a / (epsilon - 2.0 * a)),
                           float(ex[i]), 0.0, {"site": i, "a": a}))
    if F is not None:
        rho = cumulative_rho_many(F, x)
        mr, er = batch_means(rho * rho, n_batches)
        i = int(np.argmax(mr))
        out.append(BoundReport("m_mu", float(mr[i]), math.inf, float(er[i]), 0.0,
                               {"site": i, "note": "finite value reported, no bound claimed"}))
    return out
