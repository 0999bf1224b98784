"""Single-site observables f(x) = c * phi(x_base) and their seminorms."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional

import numpy as np

from ..numerics.maximize import DivergentSupError, maximize_1d
from ..potentials import SelfPotential

Func = Callable[[np.ndarray], np.ndarray]


class UnboundedSeminorm(ArithmeticError):
    pass


@dataclass(frozen=True)
class ObservableSpec:
    """f(x) = scale * phi(x[base_site]); ``dphi`` is the exact derivative of phi."""

    kind: str
    phi: Func
    dphi: Func
    base_site: int = 0
    scale: float = 1.0
    name: str = ""

    def __call__(self, x):
        return self.scale * self.phi(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.scale * self.dphi(np.asarray(x, dtype=float))

    def scaled(self, c: float) -> "ObservableSpec":
        return replace(self, scale=self.scale * float(c))

    def at(self, site: int) -> "ObservableSpec":
        return replace(self, base_site=int(site))

    @property
    def label(self) -> str:
        base = self.name or self.kind
        return base if self.scale == 1.0 else "%g*%s" % (self.scale, base)


def _tanh_d(x):
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


_BUILTIN: Dict[str, tuple] = {
    "x": ("coordinate", lambda x: x + 0.0, lambda x: np.ones_like(x)),
    "tanh": ("tanh", np.tanh, _tanh_d),
    "x+0.3sin": ("custom", lambda x: x + 0.3 * np.sin(x), lambda x: 1.0 + 0.3 * np.cos(x)),
    "1+tanh": ("custom", lambda x: 1.0 + np.tanh(x), _tanh_d),
    "exp_half": ("custom", lambda x: np.exp(0.5 * x), lambda x: 0.5 * np.exp(0.5 * x)),
    "one": ("custom", lambda x: np.ones_like(x), _zeros),
}

BATTERY = ("x", "tanh", "x+0.3sin", "1+tanh")


def observable(name: str, base_site: int = 0) -> ObservableSpec:
    """Built-in observable by name: x, tanh, x+0.3sin, 1+tanh, exp_half, one."""
    try:
        kind, phi, dphi = _BUILTIN[name]
    except KeyError:
        raise ValueError("unknown observable %r (known: %s)" % (name, ", ".join(_BUILTIN))) from None
    return ObservableSpec(kind, phi, dphi, int(base_site), 1.0, name)


def custom_observable(phi: Func, dphi: Func, base_site: int = 0, name: str = "custom") -> ObservableSpec:
    return ObservableSpec("custom", phi, dphi, int(base_site), 1.0, name)


def weighted_sup(num: Func, F: SelfPotential, rounds: int = 8):
    """sup over the line of |num(u)| / sqrt(F''(u)); returns (value, tolerance)."""
    try:
        res = maximize_1d(lambda u: np.abs(num(u)) / np.sqrt(F.d2(u)), rounds=rounds)
    except DivergentSupError as exc:
        raise UnboundedSeminorm("unbounded seminorm: %s" % exc) from None
    return res.max, res.tolerance


def sup_abs(phi: Func, rounds: int = 8):
    """sup over the line of |phi|; returns (value, tolerance)."""
    try:
        res = maximize_1d(lambda u: np.abs(phi(u)), rounds=rounds)
    except DivergentSupError as exc:
        raise UnboundedSeminorm("unbounded observable: %s" % exc) from None
    return res.max, res.tolerance


def delta_k(obs: ObservableSpec, F: SelfPotential, site: Optional[int] = None, rounds: int = 8) -> float:
    """sup |d f / d x_site| / sqrt(F''(x_site)); zero away from the base site."""
    if site is not None and site != obs.base_site:
        return 0.0
    if obs.scale == 0.0:
        return 0.0
    value, _ = weighted_sup(obs.dphi, F, rounds)
    return abs(obs.scale) * value


def delta_with_tolerance(obs: ObservableSpec, F: SelfPotential, rounds: int = 8):
    value, tol = weighted_sup(obs.dphi, F, rounds)
    s = abs(obs.scale)
    return s * value, s * tol


def product_deltas(phi0: ObservableSpec, phi1: ObservableSpec, F: SelfPotential):
    """(delta_0, delta_1) of f = phi0(x_0) * phi1(x_1); each sup factorizes."""
    d0, _ = weighted_sup(phi0.derivative, F)
    d1, _ = weighted_sup(phi1.derivative, F)
    s0, _ = sup_abs(phi0)
    s1, _ = sup_abs(phi1)
    if not (math.isfinite(s0) and math.isfinite(s1)):
        raise UnboundedSeminorm("product observable factors must be bounded")
    return d0 * s1, d1 * s0
