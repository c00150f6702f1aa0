"""
Integer-lattice geometry in R^N.

The torus-density step of the collapse argument needs integer points close
to a ray (or a line) far from its origin.  :func:`find_integer_shift` walks
the ray and inspects the lattice points around each sample.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ShiftNotFound
from .potential import phase_shift

COORD_LIMIT = 2 ** 62
WALK_STEP = 0.5


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    dir: np.ndarray
    two_sided: bool = False

    def __post_init__(self):
        o = np.array(self.origin, dtype=float)
        d = np.array(self.dir, dtype=float)
        if o.ndim != 1 or o.shape != d.shape:
            raise ValueError("origin and dir must be vectors of equal length")
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("dir must be a unit vector")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "dir", d)

    @classmethod
    def through(cls, origin, direction, two_sided=False):
        """Ray with ``direction`` normalised for the caller."""
        d = np.asarray(direction, dtype=float)
        return cls(origin, d / np.linalg.norm(d), two_sided)

    @property
    def dim(self):
        return self.origin.shape[0]


@dataclass(frozen=True)
class LatticeShift:
    m: tuple
    dist_to_ray: float
    dist_to_origin: float

    def to_dict(self):
        return {"m": list(self.m), "dist_to_ray": self.dist_to_ray,
                "dist_to_origin": self.dist_to_origin}


def dist_point_ray(p, ray: Ray):
    """Euclidean distance from ``p`` (one point or a stack of points) to ``ray``.

    One-sided rays clamp the foot point at the origin.
    """
    w = np.asarray(p, dtype=float) - ray.origin
    t = w @ ray.dir
    if not ray.two_sided:
        t = np.maximum(t, 0.0)
    perp = w - t[..., None] * ray.dir if np.ndim(t) else w - t * ray.dir
    return np.linalg.norm(perp, axis=-1)


def _walk_params(k, two_sided):
    if not two_sided:
        return k * WALK_STEP
    # 0, +s, -s, +2s, -2s, ...
    half = (k + 1) // 2
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    return sign * half * WALK_STEP


def find_integer_shift(ray: Ray, delta: float, min_dist: float = 0.0,
                       max_steps: int = 10 ** 6, chunk: int | None = None) -> LatticeShift:
    """
    Integer point within ``delta`` of ``ray`` and farther than ``min_dist`` from its origin.

    The walk samples the ray every half unit, rounds each sample to the
    nearest lattice point and tests the 3^N block around it, which cannot miss
    a point within ``delta <= 1/2``.  Among all hits the one nearest the
    origin wins (ties go to the lexicographically smallest ``m``); the walk
    stops early once no later sample can beat it.

    Raises
    ------
    ShiftNotFound
        The budget of ``max_steps`` samples ran out.  This is not a proof
        that no such point exists.
    OverflowError
        A lattice coordinate would exceed ``2**62``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if min_dist < 0:
        raise ValueError("min_dist must be non-negative")
    n = ray.dim
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int64)
    reach = 1.5 * np.sqrt(n)  # |m - sample| <= |block offset| + rounding error
    if chunk is None:
        chunk = max(1, min(4096, 2 ** 20 // len(offsets)))
    best = None
    k0 = 0
    while k0 < max_steps:
        k = np.arange(k0, min(k0 + chunk, max_steps), dtype=np.int64)
        t = _walk_params(k, ray.two_sided)
        q = ray.origin + t[:, None] * ray.dir
        if np.max(np.abs(q)) + 2 >= COORD_LIMIT:
            raise OverflowError("lattice coordinates exceed 2**62")
        base = np.round(q).astype(np.int64)
        cand = (base[:, None, :] + offsets[None, :, :]).reshape(-1, n)
        cand = np.unique(cand, axis=0)
        dr = dist_point_ray(cand, ray)
        do = np.linalg.norm(cand - ray.origin, axis=1)
        ok = (dr < delta) & (do > min_dist)
        if np.any(ok):
            c, dr, do = cand[ok], dr[ok], do[ok]
            i = np.lexsort(tuple(c.T[::-1]) + (do,))[0]
            hit = (do[i], tuple(int(v) for v in c[i]), dr[i])
            if best is None or hit[:2] < best[:2]:
                best = hit
        k0 = int(k[-1]) + 1
        if best is not None and np.abs(t[-1]) - reach > best[0]:
            break
    if best is None:
        raise ShiftNotFound(f"no lattice point within {delta} after {max_steps} steps", max_steps)
    return LatticeShift(best[1], float(best[2]), float(best[0]))


def shift_potential_by_lattice(p, s: LatticeShift):
    """Phase-shift ``p`` by the integer vector of ``s``; pointwise identical to ``p``."""
    m = np.asarray(s.m, dtype=float)
    if m.shape != (p.dim_n,):
        raise ValueError(f"shift has length {m.shape[0]}, potential lives in R^{p.dim_n}")
    return phase_shift(p, m)


def residual_vector(s: LatticeShift, ray: Ray):
    """Shortest vector from the lattice point of ``s`` to ``ray`` (length ``dist_to_ray``)."""
    m = np.asarray(s.m, dtype=float)
    w = m - ray.origin
    t = float(w @ ray.dir)
    if not ray.two_sided:
        t = max(t, 0.0)
    return ray.origin + t * ray.dir - m
