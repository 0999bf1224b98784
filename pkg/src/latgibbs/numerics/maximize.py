"""Suprema over the whole line or plane via the tangent compactification.

Points are parametrized as x = tan(theta) with theta in the open interval
(-pi/2, pi/2). A coarse grid over the theta box is followed by rounds of local
grids whose window shrinks by a factor 4 per round. A supremum reached only at
infinity shows up as a maximizer hugging the edge of the theta box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

HALF_PI = 0.5 * math.pi


class DivergentSupError(ArithmeticError):
    """The supremum grows without bound toward the compactified boundary."""


@dataclass(frozen=True)
class MaxResult:
    argmax: tuple
    max: float
    tolerance: float  # improvement gained in the last refinement round
    at_infinity: bool  # maximizer sits on the compactified boundary
    history: tuple  # running maximum after the coarse pass and each round


def _grid_axes(centers, half_width, n_local):
    axes = []
    for c in centers:
        t = np.linspace(c - half_width, c + half_width, n_local)
        t = t[(t > -HALF_PI) & (t < HALF_PI)]
        axes.append(t)
    return axes


def _evaluate(f, axes):
    if len(axes) == 1:
        th = axes[0]
        vals = np.asarray(f(np.tan(th)), dtype=float)
        return vals, [th]
    tx, ty = np.meshgrid(axes[0], axes[1], indexing="ij")
    vals = np.asarray(f(np.tan(tx), np.tan(ty)), dtype=float)
    return vals, [tx, ty]


def compact_maximize(f: Callable, ndim: int, n_coarse: int, n_local: int = 33,
                     rounds: int = 8) -> MaxResult:
    """Maximize ``f`` over R^ndim (ndim in {1, 2}); ``f`` takes broadcastable arrays.

    Divergence rule: if the maximizer touches the theta boundary in two successive
    rounds and the gain did not shrink between them, the supremum is declared
    infinite. A supremum approached at infinity with shrinking gains is returned
    as a finite value with ``at_infinity`` set.
    """
    spacing = math.pi / n_coarse
    theta = -HALF_PI + (np.arange(n_coarse) + 0.5) * spacing
    vals, coords = _evaluate(f, [theta] * ndim)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    if np.isposinf(vals).any():
        raise DivergentSupError("objective is infinite on the search grid")
    i = int(np.argmax(vals))
    best = float(vals.flat[i])
    center = [float(c.flat[i]) for c in coords]
    history = [best]
    width = 2.0 * spacing
    step = spacing
    gains = []
    hits = []
    for _ in range(rounds):
        width /= 4.0
        step = 2.0 * width / (n_local - 1)
        axes = _grid_axes(center, width, n_local)
        if any(a.size == 0 for a in axes):
            break
        vals, coords = _evaluate(f, axes)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        if np.isposinf(vals).any():
            raise DivergentSupError("objective is infinite near the boundary")
        i = int(np.argmax(vals))
        cand = float(vals.flat[i])
        gain = 0.0
        if cand > best:
            gain = cand - best
            best = cand
            center = [float(c.flat[i]) for c in coords]
        hit = any(HALF_PI - abs(c) < 2.0 * step for c in center)
        gains.append(gain)
        hits.append(hit)
        history.append(best)
        if (len(hits) >= 2 and hits[-1] and hits[-2] and gain > 1e-12 * abs(best)
                and gain >= 0.5 * gains[-2]):
            raise DivergentSupError(
                "supremum keeps growing toward the compactified boundary (last value %.6g)" % best)
    tol = gains[-1] if gains else 0.0
    # a maximizer left in the outermost coarse cell also counts (plateaus at float precision)
    at_inf = bool(hits and hits[-1]) or any(HALF_PI - abs(c) < spacing for c in center)
    return MaxResult(tuple(math.tan(c) for c in center), best, tol, at_inf, tuple(history))


def maximize_ratio(f: Callable, n_coarse: int = 257, rounds: int = 8) -> MaxResult:
    """Supremum of f(x, y) over the plane."""
    return compact_maximize(f, 2, n_coarse, rounds=rounds)


def maximize_1d(f: Callable, n_coarse: int = 2049, rounds: int = 8) -> MaxResult:
    """Supremum of f(x) over the line."""
    return compact_maximize(f, 1, n_coarse, n_local=65, rounds=rounds)
