"""Finite boxes of Z^d, the exponential semimetric weights, gamma_d and the Gaussian oracle."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .potentials import ModelSpec, check_conditions

BOUNDARIES = ("free", "torus", "fixed")


class WrapViolation(ValueError):
    pass


class NotGaussian(ValueError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    """Box with ``extents`` in row-major site order.

    For a fixed boundary the shell of width ``r0`` around the box carries frozen
    spins; shell sites get indices after the volume sites.
    """

    dim: int
    extents: Tuple[int, ...]
    boundary: str = "free"
    r0: int = 1
    boundary_field: Optional[Tuple[float, ...]] = None

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.extents)

    def coords(self) -> np.ndarray:
        return np.array(list(np.ndindex(*self.extents)), dtype=np.int64).reshape(-1, self.dim)

    def index(self, coord: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coord), self.extents))

    def shell_coords(self) -> np.ndarray:
        if self.boundary != "fixed":
            return np.zeros((0, self.dim), dtype=np.int64)
        r = self.r0
        ranges = [range(-r, L + r) for L in self.extents]
        out = [c for c in itertools.product(*ranges)
               if any(a < 0 or a >= L for a, L in zip(c, self.extents))]
        return np.array(out, dtype=np.int64).reshape(-1, self.dim)

    @property
    def n_shell(self) -> int:
        return len(self.shell_coords())

    def shell_values(self) -> np.ndarray:
        n = self.n_shell
        if n == 0:
            return np.zeros(0)
        bf = self.boundary_field if self.boundary_field is not None else (0.0,)
        vals = np.asarray(bf, dtype=float)
        if vals.size == 1:
            return np.full(n, float(vals[0]))
        if vals.size != n:
            raise ValueError("fixed boundary needs %d shell values, got %d" % (n, vals.size))
        return vals.copy()

    def neighbor_table(self, displacements: Sequence[Tuple[int, ...]]) -> np.ndarray:
        """Index of site k + j for every site k and displacement j; -1 when absent.

        With a fixed boundary the index points into the extended field
        (volume values followed by shell values).
        """
        coords = self.coords()
        ext = np.array(self.extents)
        out = np.full((self.n_sites, len(displacements)), -1, dtype=np.int64)
        shell_index = {}
        if self.boundary == "fixed":
            shell_index = {tuple(c): self.n_sites + i for i, c in enumerate(self.shell_coords())}
        for m, j in enumerate(displacements):
            t = coords + np.array(j, dtype=np.int64)
            if self.boundary == "torus":
                out[:, m] = np.ravel_multi_index(tuple((t % ext).T), self.extents)
                continue
            inside = np.all((t >= 0) & (t < ext), axis=1)
            out[inside, m] = np.ravel_multi_index(tuple(t[inside].T), self.extents)
            if self.boundary == "fixed":
                for i in np.flatnonzero(~inside):
                    out[i, m] = shell_index.get(tuple(t[i]), -1)
        return out

    def to_json(self) -> dict:
        d = {"dim": self.dim, "L": list(self.extents), "bc": self.boundary}
        if self.boundary == "fixed":
            d["boundary_field"] = list(self.boundary_field or (0.0,))
        return d


def build_lattice(dim: int, extents: Sequence[int], boundary: str = "free", r0: int = 1,
                  boundary_field=None) -> LatticeSpec:
    extents = tuple(int(L) for L in extents)
    if dim < 1 or len(extents) != dim or any(L < 1 for L in extents):
        raise ValueError("extents must be %d positive integers" % dim)
    if boundary not in BOUNDARIES:
        raise ValueError("boundary must be one of %s" % (BOUNDARIES,))
    if boundary == "torus" and any(L < 2 * r0 + 1 for L in extents):
        raise WrapViolation("wrap violation: torus extent %s < 2*r0+1 = %d" % (extents, 2 * r0 + 1))
    if boundary_field is not None:
        boundary_field = tuple(float(v) for v in np.atleast_1d(boundary_field))
    lat = LatticeSpec(dim, extents, boundary, int(r0), boundary_field)
    if boundary == "fixed":
        lat.shell_values()  # validates the shell is complete
    return lat


def lattice_from_json(cfg: Mapping, r0: int) -> LatticeSpec:
    L = cfg["L"]
    L = [L] if isinstance(L, int) else list(L)
    dim = int(cfg.get("dim", len(L)))
    return build_lattice(dim, L, cfg.get("bc", "free"), r0, cfg.get("boundary_field"))


@dataclass(frozen=True)
class Semimetric:
    """d(k, j) = alpha * ||k - j||_1."""

    alpha: float = 0.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")

    def __call__(self, k, j=None) -> float:
        k = np.asarray(k)
        if j is not None:
            k = k - np.asarray(j)
        return float(self.alpha * np.abs(k).sum())

    def weight(self, k) -> float:
        return math.exp(self(k))


def gamma_d(C: Mapping[Tuple[int, ...], float], metric: Semimetric) -> float:
    """Sum over displacements of exp(d(j, 0)) * C_j."""
    return float(sum(metric.weight(j) * c for j, c in sorted(C.items())))


def model1_norm(b: Mapping[Tuple[int, ...], float], metric: Semimetric) -> float:
    return float(sum(metric.weight(j) * v for j, v in b.items()))


def model1_threshold(n: int, b: Mapping[Tuple[int, ...], float], metric: Semimetric) -> float:
    """The explicit Model 1 coupling bound 1 / ((n+1) 2^(2n+1) ||b||_d)."""
    nb = model1_norm(b, metric)
    return math.inf if nb == 0 else 1.0 / ((n + 1) * 2 ** (2 * n + 1) * nb)


@dataclass
class DobrushinReport:
    epsilon: float
    C: Dict[Tuple[int, ...], float]
    gamma_d: float
    threshold: float
    lam: float
    unique: bool
    tolerance: float
    alpha: float = 0.0

    @property
    def lam_gamma(self) -> float:
        return self.lam * self.gamma_d

    def to_json(self) -> dict:
        fin = lambda v: v if math.isfinite(v) else None
        return {
            "epsilon": self.epsilon, "alpha": self.alpha,
            "C": {",".join(map(str, j)): fin(v) for j, v in sorted(self.C.items())},
            "gamma_d": self.gamma_d, "threshold": fin(self.threshold), "lambda": self.lam,
            "lambda_gamma_d": self.lam_gamma, "unique": self.unique, "tolerance": self.tolerance,
        }


class ConditionFailure(ValueError):
    def __init__(self, report):
        super().__init__("conditions A-C failed: " + "; ".join(report.notes[1:]))
        self.report = report


def uniqueness_threshold(model: ModelSpec, metric: Semimetric, conditions=None,
                         rounds: int = 8) -> DobrushinReport:
    rep = conditions if conditions is not None else check_conditions(model, rounds=rounds)
    if not rep.ok:
        raise ConditionFailure(rep)
    g = gamma_d(rep.C, metric)
    thr = math.inf if g == 0 else 1.0 / g
    # absolute ratio tolerance per C_j carried through 1/gamma
    tol = 0.0 if g == 0 else thr * thr * sum(metric.weight(j) for j in rep.C) * rep.tolerance
    unique = model.lam < thr - tol
    return DobrushinReport(rep.epsilon, dict(rep.C), g, thr, model.lam, unique, tol, metric.alpha)


def gaussian_precision(model: ModelSpec, lattice: LatticeSpec) -> np.ndarray:
    """Matrix Q with exponent x^T Q x + linear terms; covariance is (2Q)^-1."""
    if not model.is_gaussian():
        raise NotGaussian("not Gaussian: potentials of degree > 2")
    N = lattice.n_sites
    if N > 4096:
        raise ValueError("dense oracle limited to 4096 sites")
    disp = model.displacements
    nb = lattice.neighbor_table(disp)
    F = model.F.poly.coefficients
    a = F[2] if len(F) > 2 else 0.0
    Q = np.zeros((N, N))
    Q[np.diag_indices(N)] = a
    for m, j in enumerate(disp):
        c = model.pairs[j].poly.coefficients
        bj = c[2] if len(c) > 2 else 0.0
        if bj == 0:
            continue
        for k in range(N):
            t = nb[k, m]
            if t < 0:
                continue
            # each unordered pair is visited from both ends
            Q[k, k] += model.lam * bj
            if t < N:
                Q[k, t] -= model.lam * bj
    return Q


def gaussian_covariance_oracle(model: ModelSpec, lattice: LatticeSpec) -> np.ndarray:
    Q = gaussian_precision(model, lattice)
    N = Q.shape[0]
    cov = linalg.solve(2.0 * Q, np.eye(N), assume_a="pos")
    return 0.5 * (cov + cov.T)


def oracle_series(cov: np.ndarray, lattice: LatticeSpec, displacements) -> np.ndarray:
    """Translation average of cov[i, i+k] over base sites i with i+k in the volume."""
    nb = lattice.neighbor_table([tuple(k) for k in displacements])
    out = np.empty(len(displacements))
    for m in range(len(displacements)):
        ok = (nb[:, m] >= 0) & (nb[:, m] < lattice.n_sites)
        i = np.flatnonzero(ok)
        out[m] = cov[i, nb[i, m]].mean()
    return out
