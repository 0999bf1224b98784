"""Polynomial self-action and pair potentials, model builders and conditions A-C."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .numerics.maximize import DivergentSupError, MaxResult, maximize_ratio

Displacement = Tuple[int, ...]

RATIO_TOL = 1e-6
CONVEXITY_GRID = np.linspace(-20.0, 20.0, 4001)


class NotUniformlyConvex(ValueError):
    pass


class ConditionCViolated(DivergentSupError):
    pass


def _trim(coeffs: Sequence[float]) -> Tuple[float, ...]:
    c = [float(v) for v in coeffs]
    while c and c[-1] == 0.0:
        c.pop()
    return tuple(c)


def _horner(c: Sequence[float], x):
    if not c:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
    acc = c[-1]
    for a in reversed(c[:-1]):
        acc = acc * x + a
    if np.ndim(x) and np.ndim(acc) == 0:
        acc = np.full(np.shape(x), acc, dtype=float)
    return acc


def _derive(c: Sequence[float]) -> Tuple[float, ...]:
    return tuple(i * c[i] for i in range(1, len(c)))


@dataclass(frozen=True)
class PolynomialSpec:
    """Dense polynomial, ``coefficients[i]`` multiplies x**i."""

    coefficients: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _trim(self.coefficients))
        if not all(math.isfinite(v) for v in self.coefficients):
            raise ValueError("polynomial coefficients must be finite")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1  # -1 for the zero polynomial

    def derivative(self, order: int = 1) -> "PolynomialSpec":
        c = self.coefficients
        for _ in range(order):
            c = _derive(c)
        return PolynomialSpec(c)

    @cached_property
    def _derivs(self):
        c0 = self.coefficients
        c1 = _derive(c0)
        return (c0, c1, _derive(c1), _derive(_derive(c1)))

    def __call__(self, x, order: int = 0):
        return _horner(self._derivs[order], x)

    def reflect(self) -> "PolynomialSpec":
        """p(-u)."""
        return PolynomialSpec(tuple(v * (-1) ** i for i, v in enumerate(self.coefficients)))

    def scale(self, c: float) -> "PolynomialSpec":
        return PolynomialSpec(tuple(c * v for v in self.coefficients))


def eval_potential(p: PolynomialSpec, x, order: int = 0):
    """Value of the order-th derivative of ``p`` at ``x`` (Horner form)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    return p(x, order)


def epsilon_of(F: "SelfPotential | PolynomialSpec") -> float:
    """Global infimum of F'' over the real line."""
    poly = F.poly if isinstance(F, SelfPotential) else F
    d2 = poly.derivative(2)
    if d2.degree <= 0:
        val = d2.coefficients[0] if d2.coefficients else 0.0
    else:
        lead = d2.coefficients[-1]
        if d2.degree % 2 or lead <= 0:
            raise NotUniformlyConvex("not uniformly convex: F'' is unbounded below")
        d3 = d2.derivative()
        cands = [0.0]
        if d3.degree >= 1:
            roots = np.roots(d3.coefficients[::-1])
            cands += [r.real for r in roots if abs(r.imag) <= 1e-9 * (1 + abs(r))]
        val = min(float(d2(c)) for c in cands)
    if not val > 0:
        raise NotUniformlyConvex("not uniformly convex: inf F'' = %.6g" % val)
    return float(val)


@dataclass(frozen=True)
class SelfPotential:
    """Single-site potential F, stored with the constant removed so that F(0) = 0."""

    poly: PolynomialSpec

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[float]) -> "SelfPotential":
        c = list(_trim(coeffs)) or [0.0]
        c[0] = 0.0
        return cls(PolynomialSpec(tuple(c)))

    @cached_property
    def epsilon(self) -> float:
        return epsilon_of(self.poly)

    def __call__(self, x):
        return self.poly(x, 0)

    def d1(self, x):
        return self.poly(x, 1)

    def d2(self, x):
        return self.poly(x, 2)


@dataclass(frozen=True)
class PairPotential:
    """Pair potential G_j as a polynomial in u = x_k - x_{k-j}."""

    displacement: Displacement
    poly: PolynomialSpec
    b: Optional[float] = None


@dataclass(frozen=True)
class ModelSpec:
    F: SelfPotential
    pairs: Mapping[Displacement, PairPotential]
    lam: float
    kind: str = "custom"
    source: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        for j, p in self.pairs.items():
            if p.displacement != j:
                raise ValueError("pair table key does not match its displacement")
            if not any(j):
                raise ValueError("self-interaction displacement 0 is not allowed")

    @property
    def r0(self) -> int:
        active = [max(abs(v) for v in j) for j, p in self.pairs.items() if p.poly.degree >= 0]
        return max(active, default=0)

    @property
    def dim(self) -> Optional[int]:
        dims = {len(j) for j in self.pairs}
        if len(dims) > 1:
            raise ValueError("mixed displacement dimensions")
        return dims.pop() if dims else None

    @property
    def displacements(self) -> list:
        return sorted(self.pairs)

    def with_lambda(self, lam: float) -> "ModelSpec":
        src = dict(self.source)
        if src:
            src["lambda"] = lam
        return ModelSpec(self.F, self.pairs, lam, self.kind, src)

    def is_gaussian(self) -> bool:
        return self.F.poly.degree <= 2 and all(p.poly.degree <= 2 for p in self.pairs.values())


def _symmetrize(table: Mapping[Displacement, object], reflect) -> Dict[Displacement, object]:
    out = dict(table)
    for j, v in table.items():
        mj = tuple(-a for a in j)
        if mj in table:
            if table[mj] != reflect(v):
                raise ValueError("pair table is not symmetric under j -> -j at %s" % (j,))
        else:
            out[mj] = reflect(v)
    return out


def _check_b(b: Mapping[Displacement, float]) -> Dict[Displacement, float]:
    out = {}
    for j, v in b.items():
        v = float(v)
        if v < 0:
            raise ValueError("condition B violated: negative coupling b%s = %g" % (j, v))
        if v > 0:
            out[tuple(int(a) for a in j)] = v
    return _symmetrize(out, lambda v: v)


def build_model1(n: int, b: Mapping[Displacement, float], lam: float) -> ModelSpec:
    """F = (1+x^2)^(2n+1) - 1 and G_j(u) = b_j u^(2n+2)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    b = _check_b(b)
    m = 2 * n + 1
    fc = [0.0] * (2 * m + 1)
    for i in range(m + 1):
        fc[2 * i] = float(comb(m, i))
    F = SelfPotential.from_coefficients(fc)
    pairs = {}
    for j, v in b.items():
        gc = [0.0] * (2 * n + 2) + [v]
        pairs[j] = PairPotential(j, PolynomialSpec(tuple(gc)), v)
    src = {"type": "model1", "n": n, "lambda": lam, "b": _b_to_json(b)}
    return ModelSpec(F, pairs, float(lam), "model1", src)


def build_gaussian(epsilon: float, b: Mapping[Displacement, float], lam: float) -> ModelSpec:
    """F = epsilon x^2 / 2 and G_j(u) = b_j u^2."""
    b = _check_b(b)
    F = SelfPotential.from_coefficients([0.0, 0.0, 0.5 * epsilon])
    pairs = {j: PairPotential(j, PolynomialSpec((0.0, 0.0, v)), v) for j, v in b.items()}
    src = {"type": "gaussian", "epsilon": epsilon, "lambda": lam, "b": _b_to_json(b)}
    return ModelSpec(F, pairs, float(lam), "gaussian", src)


def build_custom(F: Sequence[float], G: Mapping[Displacement, Sequence[float]], lam: float) -> ModelSpec:
    """Arbitrary polynomial F and G_j; a missing -j entry is filled with G_j(-u)."""
    polys = {tuple(int(a) for a in j): PolynomialSpec(tuple(c)) for j, c in G.items()}
    polys = _symmetrize(polys, lambda p: p.reflect())
    pairs = {j: PairPotential(j, p) for j, p in polys.items()}
    src = {"type": "custom", "F": [float(v) for v in F], "lambda": lam,
           "G": {_key(j): list(p.coefficients) for j, p in polys.items()}}
    return ModelSpec(SelfPotential.from_coefficients(F), pairs, float(lam), "custom", src)


def _key(j: Displacement) -> str:
    return ",".join(str(a) for a in j)


def parse_key(s: str) -> Displacement:
    return tuple(int(a) for a in str(s).split(","))


def _b_to_json(b):
    return {_key(j): v for j, v in sorted(b.items())}


def model_from_json(cfg: Mapping) -> ModelSpec:
    """Build a model from its JSON description (types model1, gaussian, custom)."""
    kind = cfg.get("type")
    lam = float(cfg.get("lambda", 0.0))
    if kind == "model1":
        b = {parse_key(k): v for k, v in cfg.get("b", {}).items()}
        return build_model1(int(cfg["n"]), b, lam)
    if kind == "gaussian":
        b = {parse_key(k): v for k, v in cfg.get("b", {}).items()}
        return build_gaussian(float(cfg["epsilon"]), b, lam)
    if kind == "custom":
        G = {parse_key(k): v for k, v in cfg.get("G", {}).items()}
        return build_custom(cfg["F"], G, lam)
    raise ValueError("unknown model type %r" % (kind,))


def interaction_ratio_sup(F: SelfPotential, G: PairPotential, rounds: int = 8) -> MaxResult:
    """sup over (x, y) of |G''(x - y)| / sqrt(F''(x) F''(y))."""
    g2 = G.poly.derivative(2)
    if g2.degree < 0:
        return MaxResult((0.0, 0.0), 0.0, 0.0, False, (0.0,))

    def ratio(x, y):
        return np.abs(g2(x - y)) / (np.sqrt(F.d2(x)) * np.sqrt(F.d2(y)))

    try:
        return maximize_ratio(ratio, rounds=rounds)
    except DivergentSupError as exc:
        raise ConditionCViolated("condition C violated: %s" % exc) from exc


@dataclass
class ConditionReport:
    epsilon: float
    condA_ok: bool
    condB_ok: bool
    condC_ok: bool
    C: Dict[Displacement, float]
    tolerance: float = RATIO_TOL
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.condA_ok and self.condB_ok and self.condC_ok

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon if math.isfinite(self.epsilon) else None,
            "condA_ok": self.condA_ok,
            "condB_ok": self.condB_ok,
            "condC_ok": self.condC_ok,
            "C": {_key(j): (v if math.isfinite(v) else None) for j, v in sorted(self.C.items())},
            "tolerance": self.tolerance,
            "notes": list(self.notes),
        }


def convexity_certificate(G: PairPotential) -> Optional[str]:
    """None when G passes the condition-B checks, else the reason it fails."""
    p = G.poly
    if abs(p(0.0)) > 0:
        return "G%s(0) != 0" % (G.displacement,)
    g2 = p.derivative(2)
    if g2.degree >= 0:
        if g2.degree % 2 or g2.coefficients[-1] <= 0:
            return "G%s'' has no positive even-degree leading term" % (G.displacement,)
        if np.min(g2(CONVEXITY_GRID)) < 0:
            return "G%s'' is negative on the probe grid" % (G.displacement,)
    if G.b is not None and G.b < 0:
        return "negative coupling at %s" % (G.displacement,)
    return None


def check_conditions(model: ModelSpec, rounds: int = 8) -> ConditionReport:
    notes = ["condition A growth bound |F| <= c exp(a|x|): automatic for polynomials, not tested"]
    try:
        eps = model.F.epsilon
        condA = True
    except NotUniformlyConvex as exc:
        eps = -math.inf
        condA = False
        notes.append(str(exc))
    condB = True
    for j in model.displacements:
        why = convexity_certificate(model.pairs[j])
        if why:
            condB = False
            notes.append("condition B: " + why)
        mj = tuple(-a for a in j)
        if mj not in model.pairs or model.pairs[mj].poly != model.pairs[j].poly.reflect():
            condB = False
            notes.append("condition B: table not symmetric at %s" % (j,))
    C: Dict[Displacement, float] = {}
    condC = False
    tol = RATIO_TOL
    if condA and condB:
        condC = True
        for j in model.displacements:
            try:
                res = interaction_ratio_sup(model.F, model.pairs[j], rounds=rounds)
                C[j] = res.max
                tol = max(tol, res.tolerance)
                if res.at_infinity:
                    notes.append("C%s approached at infinity (limit value reported)" % (j,))
            except ConditionCViolated as exc:
                C[j] = math.inf
                condC = False
                notes.append(str(exc))
    else:
        notes.append("condition C not evaluated: conditions A/B failed")
    return ConditionReport(eps, condA, condB, condC, C, tol, notes)
