"""Heat-bath chains for the finite-volume Gibbs measure."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..lattice import LatticeSpec
from ..numerics.density import Density1D
from ..numerics.rng import keyed_uniform
from ..potentials import ModelSpec
from . import kernel

ORDERS = ("sequential", "checkerboard")


class InvalidPartition(ValueError):
    pass


class ChainError(RuntimeError):
    pass


def model_hash(model: ModelSpec, lattice: LatticeSpec) -> str:
    blob = json.dumps({"model": model.source, "lattice": lattice.to_json()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _pad(rows, width):
    out = np.zeros((len(rows), max(width, 1)))
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


class CompiledModel:
    """Flat arrays describing a (model, lattice) pair for the compiled kernel."""

    def __init__(self, model: ModelSpec, lattice: LatticeSpec):
        if model.dim is not None and model.dim != lattice.dim:
            raise ValueError("model displacements are %d-dimensional, lattice is %d-dimensional"
                             % (model.dim, lattice.dim))
        if model.r0 > lattice.r0:
            raise ValueError("lattice built for r0=%d but model range is %d" % (lattice.r0, model.r0))
        self.model = model
        self.lattice = lattice
        self.eps = float(model.F.epsilon)
        self.lam = float(model.lam)
        self.displacements = model.displacements
        self.nb = lattice.neighbor_table(self.displacements)
        if not self.displacements:
            self.nb = np.full((lattice.n_sites, 1), -1, dtype=np.int64)
        F = model.F.poly
        self.fc = np.array(F.coefficients or (0.0,), dtype=float)
        self.f1 = np.array(F.derivative(1).coefficients or (0.0,), dtype=float)
        self.f2 = np.array(F.derivative(2).coefficients or (0.0,), dtype=float)
        # neighbor at k + j interacts with k through G_{-j}(x_k - x_{k+j})
        polys = [model.pairs[tuple(-a for a in j)].poly for j in self.displacements]
        width = max([len(p.coefficients) for p in polys], default=1)
        self.pc = _pad([p.coefficients for p in polys], width)
        self.p1 = _pad([p.derivative(1).coefficients for p in polys], width)
        self.p2 = _pad([p.derivative(2).coefficients for p in polys], width)
        if not polys:
            self.pc = self.p1 = self.p2 = np.zeros((1, 1))
        self.gx = kernel._GX
        self.gw = kernel._GW
        self.hash = model_hash(model, lattice)

    def ext_field(self, field: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(field, dtype=float), self.lattice.shell_values()])

    def kernel_args(self):
        return (self.nb, self.fc, self.f1, self.f2, self.pc, self.p1, self.p2,
                self.lam, self.eps, self.gx, self.gw)

    def draw(self, ext: np.ndarray, site: int, u: float) -> float:
        return kernel.update_site(ext, site, u, *self.kernel_args(), np.empty(kernel.MAX_PANELS))


def checkerboard_classes(lattice: LatticeSpec, r0: int, nb: Optional[np.ndarray] = None):
    """Sites grouped by coordinates mod (r0+1); (r0+1)^d classes."""
    q = r0 + 1
    coords = lattice.coords()
    color = np.zeros(lattice.n_sites, dtype=np.int64)
    for i in range(lattice.dim):
        color += (coords[:, i] % q) * q**i
    if nb is not None:
        for m in range(nb.shape[1]):
            t = nb[:, m]
            inside = (t >= 0) & (t < lattice.n_sites)
            if np.any(color[inside] == color[t[inside]]):
                raise InvalidPartition("invalid partition: interacting sites share a class "
                                       "(torus extents must be multiples of r0+1)")
    return [np.flatnonzero(color == c) for c in range(q**lattice.dim)]


@dataclass(frozen=True)
class ChainState:
    field: np.ndarray
    sweep: int
    seed: int
    model_hash: str


def initial_state(cm: CompiledModel, seed: int, init=None) -> ChainState:
    N = cm.lattice.n_sites
    if init is None:
        field = np.zeros(N)
    else:
        field = np.broadcast_to(np.asarray(init, dtype=float), (N,)).copy()
    return ChainState(field, 0, int(seed), cm.hash)


def conditional_logdensity(model: ModelSpec, lattice: LatticeSpec, field: np.ndarray, site: int,
                           tol: float = kernel.TAIL_TOL) -> Density1D:
    """One-point conditional density of ``site`` given the rest of ``field``."""
    cm = CompiledModel(model, lattice)
    ext = cm.ext_field(field)
    ys = [(ext[t], model.pairs[tuple(-a for a in j)].poly)
          for j, t in zip(cm.displacements, cm.nb[site]) if t >= 0]
    F = model.F
    lam = model.lam

    def logp(x):
        v = F(x)
        for y, g in ys:
            v = v + lam * g(x - y)
        return -v

    def dlogp(x):
        v = F.d1(x)
        for y, g in ys:
            v = v + lam * g(x - y, 1)
        return -v

    return Density1D.build(logp, F.epsilon, dlogp, tol=tol)


def heatbath_update(cm: CompiledModel, state: ChainState, site: int, draw: int = 0) -> ChainState:
    """Replace one site by an exact conditional draw keyed by (seed, site, sweep, draw)."""
    if state.model_hash != cm.hash:
        raise ChainError("state belongs to a different model/lattice")
    ext = cm.ext_field(state.field)
    u = keyed_uniform(state.seed, site, state.sweep, draw)
    v = cm.draw(ext, site, u)
    if not np.isfinite(v):
        raise ChainError("conditional draw did not converge at site %d" % site)
    field = state.field.copy()
    field[site] = v
    return replace(state, field=field)


def _plan(cm: CompiledModel, order: str):
    N = cm.lattice.n_sites
    if order == "sequential":
        return np.arange(N, dtype=np.int64), np.array([0, N], dtype=np.int64), False
    if order == "checkerboard":
        classes = checkerboard_classes(cm.lattice, cm.model.r0, cm.nb)
        bounds = np.cumsum([0] + [len(c) for c in classes]).astype(np.int64)
        return np.concatenate(classes).astype(np.int64), bounds, True
    raise ValueError("order must be one of %s" % (ORDERS,))


def _n_emitted(start: int, stop: int, burnin: int, thin: int) -> int:
    return sum(1 for s in range(start + 1, stop + 1) if s > burnin and (s - burnin) % thin == 0)


def sweep(cm: CompiledModel, state: ChainState, order: str = "checkerboard") -> ChainState:
    res = advance(cm, state, 1, order=order, burnin=state.sweep + 1, thin=1)
    return res.state


@dataclass
class ChainResult:
    sweeps: np.ndarray  # sweep number of each record
    fields: np.ndarray  # (records, sites)
    state: ChainState


def advance(cm: CompiledModel, state: ChainState, nsweeps: int, order: str = "checkerboard",
            burnin: int = 0, thin: int = 1) -> ChainResult:
    if state.model_hash != cm.hash:
        raise ChainError("checkpoint/model hash mismatch")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    order_arr, bounds, buffered = _plan(cm, order)
    N = cm.lattice.n_sites
    n_rec = _n_emitted(state.sweep, state.sweep + nsweeps, burnin, thin)
    records = np.empty((n_rec, N))
    rec_sweeps = np.empty(n_rec, dtype=np.int64)
    ext = cm.ext_field(state.field)
    written, status = kernel.run_sweeps(ext, order_arr, bounds, buffered, state.seed, state.sweep,
                                        nsweeps, burnin, thin, records, rec_sweeps,
                                        *cm.kernel_args())
    if status != 0:
        raise ChainError("conditional draw failed to converge")
    field = ext[:N].copy()
    if not np.all(np.isfinite(field)):
        raise ChainError("non-finite spin value")
    if np.max(np.abs(field)) > 50 or (n_rec and np.max(np.abs(records)) > 50):
        warnings.warn("spin magnitude above 50 encountered", RuntimeWarning)
    new = ChainState(field, state.sweep + nsweeps, state.seed, state.model_hash)
    return ChainResult(rec_sweeps[:written], records[:written], new)


def run_chain(model: ModelSpec, lattice: LatticeSpec, sweeps: int, burnin: Optional[int] = None,
              thin: int = 1, seed: int = 0, order: str = "checkerboard",
              state: Optional[ChainState] = None, init=None) -> ChainResult:
    """Run until the state has completed ``sweeps`` sweeps (resuming from ``state`` if given).

    Records are emitted after every ``thin``-th sweep past ``burnin`` (default 10%).
    """
    if burnin is None:
        burnin = sweeps // 10
    if not (sweeps > burnin >= 0):
        raise ValueError("need sweeps > burnin >= 0")
    cm = CompiledModel(model, lattice)
    if state is None:
        state = initial_state(cm, seed, init)
    elif state.model_hash != cm.hash:
        raise ChainError("checkpoint/model hash mismatch")
    todo = sweeps - state.sweep
    if todo < 0:
        raise ValueError("state is already past the requested sweep count")
    return advance(cm, state, todo, order=order, burnin=burnin, thin=thin)
