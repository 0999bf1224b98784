"""Quadrature checks of the one-site functional inequalities and the one-step contraction.

All expectations are taken under dmu ~ exp(-F) (or a two-site conditional of
it) with the certified truncation and Gauss-Legendre quadrature of
``numerics.density``; nothing here depends on random numbers.
"""
from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np
from scipy import integrate as spi
from scipy import optimize

from ..numerics.density import Density1D, NonConvergentError, find_mode, integrate, truncate
from ..potentials import ModelSpec, SelfPotential, interaction_ratio_sup
from .bounds import BoundReport
from .observables import (BATTERY, ObservableSpec, UnboundedSeminorm, delta_with_tolerance,
                          observable, product_deltas)

ENTROPY_FLOOR = 1e-300
QUAD_RTOL = 1e-13
FD_STEP = 1e-4
FD_TOL = 1e-6


def self_measure(F: SelfPotential) -> Density1D:
    return Density1D.build(lambda x: -F(x), F.epsilon, lambda x: -F.d1(x))


def _tail_allowance(d: Density1D, g) -> float:
    # mass cut off by truncation times the integrand size at the cut
    edge = np.abs(np.asarray(g(np.array([d.lo, d.hi])), dtype=float))
    return d.tail_mass_bound * (1.0 + float(edge.max()))


def _expect(d: Density1D, g) -> Tuple[float, float]:
    r = integrate(d, g, rtol=QUAD_RTOL)
    return r.value, r.abs_error_estimate + _tail_allowance(d, g)


def _expect_adaptive(d: Density1D, g) -> Tuple[float, float]:
    """Adaptive quadrature for integrands with weak (log-type) singularities."""
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=500)
    z, ez = spi.quad(lambda x: float(d.pdf(np.array([x]))[0]), d.lo, d.hi, **opts)
    num, en = spi.quad(lambda x: float((g(np.array([x])) * d.pdf(np.array([x])))[0]),
                       d.lo, d.hi, **opts)
    return num / z, en / z + abs(num) * ez / (z * z) + _tail_allowance(d, g)


def _variance(d: Density1D, phi) -> Tuple[float, float]:
    m, em = _expect(d, phi)
    v, ev = _expect(d, lambda x: (phi(x) - m) ** 2)
    return v, ev + em * em


def _equality(rep: BoundReport) -> BoundReport:
    rep.details["equality"] = bool(abs(rep.slack) <= rep.num_error + 1e-12 * max(1.0, abs(rep.rhs)))
    return rep


def moment_quadrature(F: SelfPotential, a: float = 0.0) -> dict:
    """E x^2, E exp(a x^2) and E tanh(x)^2 under exp(-F)."""
    d = self_measure(F)
    return {
        "x2": _expect(d, lambda x: x * x)[0],
        "exp_ax2": _expect(d, lambda x: np.exp(a * x * x))[0],
        "tanh": _expect(d, np.tanh)[0],
        "tanh2": _expect(d, lambda x: np.tanh(x) ** 2)[0],
    }


def verify_brascamp_lieb_1d(F: SelfPotential, phi: ObservableSpec) -> Tuple[BoundReport, BoundReport]:
    """cov(phi, phi) <= int phi'^2 / F'' dmu, and that <= (1/eps) int phi'^2 dmu."""
    d = self_measure(F)
    eps = F.epsilon
    V, eV = _variance(d, phi)
    B7, e7 = _expect(d, lambda x: phi.derivative(x) ** 2 / F.d2(x))
    P, eP = _expect(d, lambda x: phi.derivative(x) ** 2)
    B6, e6 = P / eps, eP / eps
    tag = phi.label
    bl = _equality(BoundReport("brascamp_lieb:" + tag, V, B7, 0.0, eV + e7,
                               {"variance": V, "bl_bound": B7, "poincare_bound": B6}))
    pc = _equality(BoundReport("bl_vs_poincare:" + tag, B7, B6, 0.0, e7 + e6, {"epsilon": eps}))
    return bl, pc


def verify_kkk_chain(F: SelfPotential, phi: ObservableSpec) -> List[BoundReport]:
    """cov(phi, phi) <= int phi'^2/F'' dmu <= delta(phi)^2, each link separately.

    The second link is omitted when delta(phi) is infinite.
    """
    bl, _ = verify_brascamp_lieb_1d(F, phi)
    out = [bl]
    try:
        dl, tol = delta_with_tolerance(phi, F)
    except UnboundedSeminorm:
        return out
    out.append(_equality(BoundReport("kkk:" + phi.label, bl.rhs, dl * dl, 0.0,
                                     bl.num_error + 2 * dl * tol, {"delta": dl})))
    return out


def verify_lsi_1d(F: SelfPotential, phi: ObservableSpec, epsilon: Optional[float] = None) -> BoundReport:
    """Ent(phi^2) <= (2/eps) int phi'^2 dmu."""
    eps = F.epsilon if epsilon is None else float(epsilon)
    d = self_measure(F)

    def xlogx(x):
        s = phi(x) ** 2
        return s * np.log(np.maximum(s, ENTROPY_FLOOR))

    # x log x has a weak singularity at zeros of phi; Gauss-Legendre panels converge slowly there
    A, eA = _expect_adaptive(d, xlogx)
    M, eM = _expect_adaptive(d, lambda x: phi(x) ** 2)
    ent = A - (M * math.log(M) if M > 0 else 0.0)
    P, eP = _expect(d, lambda x: phi.derivative(x) ** 2)
    bound = 2.0 * P / eps
    err = eA + abs(math.log(M) + 1.0) * eM + 2.0 * eP / eps if M > 0 else eA + 2.0 * eP / eps
    return _equality(BoundReport("lsi:" + phi.label, ent, bound, 0.0, err,
                                 {"entropy": ent, "epsilon": eps}))


class _Conditional:
    """Law of x_0 given x_1 for the two-site model; expectations by quadrature."""

    def __init__(self, F: SelfPotential, G, lam: float):
        self.F = F
        self.G = G
        self.lam = lam

    def density(self, x1: float) -> Density1D:
        F, G, lam = self.F, self.G, self.lam
        return Density1D.build(lambda x: -F(x) - lam * G(x - x1), F.epsilon,
                               lambda x: -F.d1(x) - lam * G(x - x1, 1))

    def mean(self, x1: float, phi0) -> Tuple[float, float]:
        return _expect(self.density(x1), phi0)

    def derivative(self, x1: float, phi0: ObservableSpec, phi1: ObservableSpec):
        """d/dx1 of mu_0(phi0 * phi1)(x1) via the covariance identity; (value, error, mean)."""
        d = self.density(x1)
        m, em = _expect(d, phi0)
        if self.lam == 0.0:
            c, ec = 0.0, 0.0
        else:
            g1 = lambda x: self.G(x - x1, 1)
            eg, eeg = _expect(d, g1)
            c, ec = _expect(d, lambda x: (phi0(x) - m) * (g1(x) - eg))
            ec += em * eeg
        p1 = float(phi1(np.array([x1]))[0])
        dp1 = float(phi1.derivative(np.array([x1]))[0])
        val = dp1 * m + p1 * self.lam * c
        err = abs(dp1) * em + abs(p1) * self.lam * ec
        return val, err, m


def verify_contraction(model: ModelSpec, phi0: ObservableSpec, phi1: ObservableSpec,
                       n_grid: int = 257, tail_tol: float = 1e-12) -> BoundReport:
    """delta_1(mu_0(f)) <= delta_1(f) + lam C_01 delta_0(f) for f = phi0(x_0) phi1(x_1).

    The left side is a grid supremum of |d/dx1 mu_0(f)| / sqrt(F''(x1)) over the
    Gaussian-envelope truncation interval of exp(-F), refined locally around the
    best grid point; the derivative comes from the covariance identity and is
    cross-checked by central differences at three points.
    """
    F = model.F
    dim = model.dim or 1
    j = (1,) + (0,) * (dim - 1)
    kj = tuple(-a for a in j)  # displacement k - j with k = 0
    if kj not in model.pairs:
        raise ValueError("model has no interaction between the two sites")
    G = model.pairs[kj].poly
    lam = model.lam
    cond = _Conditional(F, G, lam)

    logp = lambda x: -F(x)
    lo, hi = truncate(logp, find_mode(logp, F.epsilon, lambda x: -F.d1(x)), F.epsilon, tail_tol)
    grid = np.linspace(lo, hi, n_grid)

    def ratio(x1):
        v, _, _ = cond.derivative(float(x1), phi0, phi1)
        return abs(v) / math.sqrt(float(F.d2(x1)))

    vals = np.array([ratio(x) for x in grid])

    def refine(step):
        sub = vals[::step]
        xs = grid[::step]
        i = int(np.argmax(sub))
        a = xs[max(i - 1, 0)]
        b = xs[min(i + 1, len(xs) - 1)]
        res = optimize.minimize_scalar(lambda x: -ratio(x), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-10})
        if -res.fun >= sub[i]:
            return float(res.x), float(-res.fun)
        return float(xs[i]), float(sub[i])

    x_fine, lhs = refine(1)
    x_coarse, lhs_coarse = refine(2)
    spread = abs(lhs - lhs_coarse)
    if spread > 1e-8 * max(1.0, lhs):
        raise NonConvergentError("grid-sup not converged under refinement (%.3g vs %.3g)"
                                 % (lhs, lhs_coarse))
    _, qerr, _ = cond.derivative(x_fine, phi0, phi1)
    qerr /= math.sqrt(float(F.d2(x_fine)))

    # finite-difference cross-check of the identity
    fd_diff = 0.0
    for x1 in (x_fine, 0.5 * lo, 0.3 * hi):
        val, _, _ = cond.derivative(x1, phi0, phi1)
        up = cond.mean(x1 + FD_STEP, phi0)[0] * float(phi1(np.array([x1 + FD_STEP]))[0])
        dn = cond.mean(x1 - FD_STEP, phi0)[0] * float(phi1(np.array([x1 - FD_STEP]))[0])
        fd_diff = max(fd_diff, abs((up - dn) / (2 * FD_STEP) - val))
    if fd_diff > FD_TOL:
        raise NonConvergentError("covariance identity disagrees with finite differences (%.3g)" % fd_diff)

    d0, d1 = product_deltas(phi0, phi1, F)
    C01 = interaction_ratio_sup(F, model.pairs[kj]).max if lam != 0.0 else 0.0
    rhs = d1 + lam * C01 * d0
    details = {"delta_0": d0, "delta_1": d1, "C_01": C01, "lambda": lam, "argmax_x1": x_fine,
               "interval": [float(lo), float(hi)], "grid_points": n_grid,
               "refinement_spread": spread, "fd_max_abs_diff": fd_diff,
               "argmax_at_edge": bool(x_fine <= grid[1] or x_fine >= grid[-2])}
    return BoundReport("contraction:%s*%s" % (phi0.label, phi1.label), lhs, rhs, 0.0,
                       qerr + spread, details)


def run_battery(model: ModelSpec, names=BATTERY) -> List[BoundReport]:
    """All single-site checks over the test-function battery plus the two-site contraction."""
    F = model.F
    out: List[BoundReport] = []
    for name in names:
        phi = observable(name)
        bl, pc = verify_brascamp_lieb_1d(F, phi)
        out += [bl, pc]
        out += verify_kkk_chain(F, phi)[1:]
        out.append(verify_lsi_1d(F, phi))
    if model.displacements:
        t = observable("tanh")
        out.append(verify_contraction(model, t, t.at(1)))
    return out
