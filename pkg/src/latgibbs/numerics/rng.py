"""Counter-based random streams (Philox4x32-10).

Every uniform is a pure function of ``(seed, site, sweep, draw)``, so results do not
depend on the order in which sites are visited or on how work is split.
"""
from __future__ import annotations

import numba
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


@numba.njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds. All arguments are uint64 holding 32-bit words."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@numba.njit(cache=True)
def keyed_uniform(seed, site, sweep, draw):
    """Uniform in the open interval (0, 1) with 53 random bits."""
    s = np.uint64(seed)
    w = np.uint64(sweep)
    o0, o1, o2, o3 = philox4x32(
        np.uint64(site) & _MASK32,
        w & _MASK32,
        w >> _SHIFT32,
        np.uint64(draw) & _MASK32,
        s & _MASK32,
        s >> _SHIFT32,
    )
    a = o0 >> np.uint64(5)
    b = o1 >> np.uint64(6)
    return (float(a) * 67108864.0 + float(b) + 0.5) / 9007199254740992.0


@numba.njit(cache=True)
def _fill_uniforms(seed, site, sweep, first_draw, out):
    for i in range(out.shape[0]):
        out[i] = keyed_uniform(seed, site, sweep, first_draw + i)


class RngStream:
    """Stream of uniforms for one (seed, site, sweep) key; draws are numbered 0, 1, ..."""

    def __init__(self, seed: int, site: int = 0, sweep: int = 0, draw: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = int(seed)
        self.site = int(site)
        self.sweep = int(sweep)
        self.draw = int(draw)

    def uniform(self) -> float:
        u = keyed_uniform(self.seed, self.site, self.sweep, self.draw)
        self.draw += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(int(n))
        _fill_uniforms(self.seed, self.site, self.sweep, self.draw, out)
        self.draw += int(n)
        return out

    def __repr__(self):
        return f"RngStream(seed={self.seed}, site={self.site}, sweep={self.sweep}, draw={self.draw})"
