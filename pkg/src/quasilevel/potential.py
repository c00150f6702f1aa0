"""
Quasiperiodic potentials on the plane.

A potential is the restriction of a real trigonometric polynomial ``f`` on
the N-torus to an affinely embedded plane.  Frequencies are integer vectors
in the torus basis; every irrational number lives in the embedding frame.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi

ORTHO_TOL = 1e-12
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class FrequencyTerm:
    freq: tuple
    amp: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "freq", tuple(int(k) for k in self.freq))
        object.__setattr__(self, "amp", float(self.amp))
        object.__setattr__(self, "phase", float(self.phase))
        if not math.isfinite(self.amp):
            raise ValueError("term amplitude must be finite")


class PeriodicFunction:
    """
    Trigonometric polynomial ``f(z) = constant + sum amp * cos(2 pi k.z + phase)``.

    Terms sharing a frequency vector are merged (as phasors) and zero-frequency
    terms are folded into ``constant``, so the stored terms have distinct,
    nonzero integer frequencies and nonzero amplitudes.
    """

    def __init__(self, dim_n: int, terms: Sequence[FrequencyTerm] = (), constant: float = 0.0):
        dim_n = int(dim_n)
        if dim_n < 1:
            raise ValueError("dim_n must be positive")
        const = float(constant)
        groups: dict[tuple, list] = {}
        for t in terms:
            if not isinstance(t, FrequencyTerm):
                t = FrequencyTerm(*t)
            if len(t.freq) != dim_n:
                raise ValueError(f"frequency {t.freq} does not have length {dim_n}")
            if not any(t.freq):
                const += t.amp * math.cos(t.phase)
            elif t.amp != 0.0:
                groups.setdefault(t.freq, []).append(t)
        kept = []
        for freq, group in groups.items():
            if len(group) == 1:
                # untouched terms keep their amplitude and phase bit-exactly
                kept.append(group[0])
                continue
            z = sum(t.amp * complex(math.cos(t.phase), math.sin(t.phase)) for t in group)
            # cancellation down to rounding noise counts as an exact zero
            if abs(z) > 4 * np.finfo(float).eps * sum(abs(t.amp) for t in group):
                kept.append(FrequencyTerm(freq, abs(z), math.atan2(z.imag, z.real)))
        self.dim_n = dim_n
        self.terms = tuple(kept)
        self.constant = const
        if kept:
            self.freqs = np.array([t.freq for t in kept], dtype=np.int64)
        else:
            self.freqs = np.zeros((0, dim_n), dtype=np.int64)
        self.amps = np.array([t.amp for t in kept], dtype=float)
        self.phases = np.array([t.phase for t in kept], dtype=float)

    def __len__(self):
        return len(self.terms)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape[:-1], self.constant)
        for k, a, ph in zip(self.freqs, self.amps, self.phases):
            out = out + a * np.cos(TWO_PI * (z @ k) + ph)
        return out

    def gradient(self, z):
        """Gradient with respect to the torus coordinates, shape ``z.shape``."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape)
        for k, a, ph in zip(self.freqs, self.amps, self.phases):
            s = -TWO_PI * a * np.sin(TWO_PI * (z @ k) + ph)
            out = out + s[..., None] * k
        return out

    def gradient_bound(self) -> float:
        """Upper bound on ``|grad f|`` over the whole torus."""
        if not len(self.terms):
            return 0.0
        return float(TWO_PI * np.sum(np.abs(self.amps) * np.linalg.norm(self.freqs, axis=1)))


@dataclass(frozen=True)
class Embedding:
    """Affine plane in R^N: ``z(x, y) = offset + phase_shift + scale * (x u + y v)``.

    ``u`` and ``v`` are orthonormal.  ``scale`` is a conformal factor (1 for a
    plain orthonormal frame) so that rotations and reflections of the plane
    still act isometrically.
    """

    u: np.ndarray
    v: np.ndarray
    offset: np.ndarray = None
    phase_shift: np.ndarray = None
    scale: float = 1.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.ndim != 1 or u.shape != v.shape:
            raise ValueError("frame vectors must be 1-D and of equal length")
        n = u.shape[0]
        off = np.zeros(n) if self.offset is None else np.array(self.offset, dtype=float)
        a = np.zeros(n) if self.phase_shift is None else np.array(self.phase_shift, dtype=float)
        if off.shape != (n,) or a.shape != (n,):
            raise ValueError("offset and phase_shift must have the frame's dimension")
        if abs(np.dot(u, u) - 1) > ORTHO_TOL or abs(np.dot(v, v) - 1) > ORTHO_TOL:
            raise ValueError("frame vectors must have unit length")
        if abs(np.dot(u, v)) > ORTHO_TOL:
            raise ValueError("frame vectors must be orthogonal")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive")
        for name, arr in (("u", u), ("v", v), ("offset", off), ("phase_shift", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def dim_n(self) -> int:
        return self.u.shape[0]

    def point(self, r):
        """Map plane points ``(..., 2)`` into R^N."""
        r = np.asarray(r, dtype=float)
        return (self.offset + self.phase_shift) + self.scale * (r[..., :1] * self.u + r[..., 1:2] * self.v)

    def shifted(self, a):
        """Embedding of the plane moved by ``a``; the accumulated shift is kept modulo Z^N.

        Both parts are reduced before they are added (``x - round(x)`` is
        exact), so shifting by an integer vector first leaves no trace in the
        floating-point result.
        """
        a = np.asarray(a, dtype=float)
        if a.shape != (self.dim_n,):
            raise ValueError(f"shift must have length {self.dim_n}, got {a.shape}")
        s = _frac(_frac(self.phase_shift) + _frac(a))
        return Embedding(self.u, self.v, self.offset, s, self.scale)


def _frac(x):
    return x - np.round(x)


@dataclass(frozen=True)
class DihedralDescriptor:
    """Point symmetry D_n about ``center``; axis k sits at ``axis_angle0 + pi k / n``."""

    n: int
    center: tuple = (0.0, 0.0)
    axis_angle0: float = 0.0

    def __post_init__(self):
        if int(self.n) < 3:
            raise ValueError("dihedral order must be at least 3")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "axis_angle0", float(self.axis_angle0))

    def axis_angles(self):
        return self.axis_angle0 + np.pi * np.arange(self.n) / self.n

    def ray_angles(self):
        """The 2n rays bounding the sectors, counter-clockwise."""
        return self.axis_angle0 + np.pi * np.arange(2 * self.n) / self.n

    def rotate(self, pts, s=1):
        """Rotate by ``2 pi s / n`` about the center."""
        return _rotate(pts, self.center, TWO_PI * s / self.n)

    def reflect(self, pts, k):
        """Mirror across axis ``k``."""
        c = np.asarray(self.center)
        p = np.asarray(pts, dtype=float) - c
        t = 2.0 * (self.axis_angle0 + np.pi * k / self.n)
        m = np.array([[np.cos(t), np.sin(t)], [np.sin(t), -np.cos(t)]])
        return p @ m.T + c

    def polar(self, pts):
        """Distance from the center and angle measured from the first axis, in [0, 2 pi)."""
        p = np.asarray(pts, dtype=float) - np.asarray(self.center)
        rad = np.hypot(p[..., 0], p[..., 1])
        ang = np.mod(np.arctan2(p[..., 1], p[..., 0]) - self.axis_angle0, TWO_PI)
        return rad, ang

    def sector_index(self, pts):
        """Sector number in ``1..2n`` and a mask of points lying strictly inside a sector."""
        _, ang = self.polar(pts)
        width = np.pi / self.n
        q = ang / width
        idx = np.floor(q).astype(np.int64)
        idx = np.clip(idx, 0, 2 * self.n - 1)
        inside = (q - np.floor(q)) > 0
        return idx + 1, inside


def _rotate(pts, center, angle):
    c = np.asarray(center, dtype=float)
    p = np.asarray(pts, dtype=float) - c
    ca, sa = np.cos(angle), np.sin(angle)
    return np.stack([ca * p[..., 0] - sa * p[..., 1], sa * p[..., 0] + ca * p[..., 1]], axis=-1) + c


@dataclass(frozen=True)
class QuasiperiodicPotential:
    """
    ``V(r) = f(z(r))`` for a periodic function ``f`` and plane embedding ``emb``.

    Parameters
    ----------
    f : PeriodicFunction
    emb : Embedding
    symmetry : DihedralDescriptor, optional
        Declared point symmetry.  Only the builders set this; use
        :func:`check_dihedral_symmetry` to verify a declaration.
    relations : ndarray, optional
        Integer vectors orthogonal to the embedded plane.  Shifts along them
        leave the phase family (they change the potential itself).
    quasiperiods : int, optional
        Rank of the frequency module when it is known exactly.
    """

    f: PeriodicFunction
    emb: Embedding
    symmetry: DihedralDescriptor | None = None
    relations: np.ndarray | None = None
    quasiperiods: int | None = None
    star: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.f.dim_n != self.emb.dim_n:
            raise ValueError("periodic function and embedding dimensions differ")
        k = self.f.freqs.astype(float)
        e = self.emb
        kx = e.scale * (k @ e.u)
        ky = e.scale * (k @ e.v)
        # integer frequencies make the base offset periodic mod 1
        c = np.mod(k @ e.offset + k @ e.phase_shift, 1.0)
        object.__setattr__(self, "_kx", kx)
        object.__setattr__(self, "_ky", ky)
        object.__setattr__(self, "_c", c)

    @property
    def dim_n(self) -> int:
        return self.f.dim_n

    def values(self, x, y):
        """Vectorised evaluation; ``x`` and ``y`` broadcast against each other."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast_shapes(x.shape, y.shape), self.f.constant)
        for kx, ky, c, a, ph in zip(self._kx, self._ky, self._c, self.f.amps, self.f.phases):
            arg = (c + kx * x) + ky * y
            out += a * np.cos(TWO_PI * arg + ph)
        return out

    def gradient(self, x, y):
        """Plane gradient ``(dV/dx, dV/dy)`` as two arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        gx = np.zeros(shape)
        gy = np.zeros(shape)
        for kx, ky, c, a, ph in zip(self._kx, self._ky, self._c, self.f.amps, self.f.phases):
            s = -TWO_PI * a * np.sin(TWO_PI * ((c + kx * x) + ky * y) + ph)
            gx += s * kx
            gy += s * ky
        return gx, gy

    def __call__(self, r):
        return evaluate(self, r)

    def amplitude_sum(self) -> float:
        return float(np.sum(np.abs(self.f.amps)))

    def project_to_family(self, a):
        """
        Component of torus shift ``a`` that changes the potential non-trivially.

        Shifts along the plane only translate the picture and shifts along an
        integer relation only change a global phase, so both are removed.
        """
        a = np.asarray(a, dtype=float)
        cols = [self.emb.u, self.emb.v]
        if self.relations is not None and len(self.relations):
            cols.extend(np.asarray(self.relations, dtype=float))
        q, _ = np.linalg.qr(np.column_stack(cols))
        return a - q @ (q.T @ a)


def evaluate(p, r) -> float:
    """Value of the potential at the plane point ``r``."""
    x, y = float(r[0]), float(r[1])
    return float(p.values(np.array([x]), np.array([y]))[0])


def grid_nodes(window, nx: int, ny: int):
    """Node coordinates ``(xs, ys)`` of an ``nx`` by ``ny`` grid on ``window``.

    ``window`` is ``(xmin, xmax, ymin, ymax)`` or any object with a ``bounds``
    attribute of that form.
    """
    x0, x1, y0, y1 = _bounds(window)
    if nx < 2 or ny < 2:
        raise ValueError("grid needs at least two nodes per axis")
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window is degenerate")
    return np.linspace(x0, x1, int(nx)), np.linspace(y0, y1, int(ny))


def _bounds(window):
    b = getattr(window, "bounds", window)
    x0, x1, y0, y1 = (float(t) for t in b)
    return x0, x1, y0, y1


def evaluate_grid(p, window, nx: int, ny: int, jobs: int = 1):
    """
    Potential sampled on a regular grid.

    Returns an array of shape ``(nx, ny)`` whose entry ``[i, j]`` is the value
    at ``(xs[i], ys[j])`` from :func:`grid_nodes`.  Entries are bit-identical
    to :func:`evaluate` at the same node, whatever ``jobs`` is.
    """
    nx, ny = int(nx), int(ny)
    itemsize = np.dtype(float).itemsize
    if nx * ny > np.iinfo(np.intp).max // itemsize:
        raise OverflowError(f"{nx}x{ny} grid exceeds the addressable size")
    xs, ys = grid_nodes(window, nx, ny)
    if jobs <= 1 or nx < 2 * jobs:
        return p.values(xs[:, None], ys[None, :])
    out = np.empty((nx, ny))
    chunks = np.array_split(np.arange(nx), jobs)

    def work(idx):
        out[idx[0]: idx[-1] + 1] = p.values(xs[idx][:, None], ys[None, :])

    with ThreadPoolExecutor(max_workers=jobs) as ex:
        list(ex.map(work, [c for c in chunks if len(c)]))
    return out


def gradient_bound(p) -> float:
    """
    Bound ``C`` on the plane gradient of ``p``.

    Sums ``2 pi |amp| |projected frequency|`` over the terms, so
    ``sup |grad V| <= C`` by the triangle inequality.  Fields without Fourier
    data may supply their own ``gradient_bound`` method.
    """
    if not isinstance(p, QuasiperiodicPotential):
        return float(p.gradient_bound())
    if not len(p.f):
        return 0.0
    return float(TWO_PI * np.sum(np.abs(p.f.amps) * np.hypot(p._kx, p._ky)))


def phase_shift(p: QuasiperiodicPotential, a) -> QuasiperiodicPotential:
    """Potential of the plane shifted by ``a`` in R^N: ``V(r, a) = f(z(r) + a)``.

    The stored shift is reduced modulo Z^N, which ``f`` cannot see.
    """
    a = np.asarray(a, dtype=float)
    emb = p.emb.shifted(a)
    sym = p.symmetry if np.all(a == np.round(a)) else None
    return QuasiperiodicPotential(p.f, emb, sym, p.relations, p.quasiperiods, p.star)


# -- star family -------------------------------------------------------------

def cyclotomic(n: int) -> list:
    """Integer coefficients of the n-th cyclotomic polynomial, constant term first."""
    if n < 1:
        raise ValueError("n must be positive")
    num = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            num = _polydiv_exact(num, cyclotomic(d))
    return num


def _polydiv_exact(num, den):
    num = list(num)
    out = [0] * (len(num) - len(den) + 1)
    for i in range(len(out) - 1, -1, -1):
        q = num[i + len(den) - 1] // den[-1]
        out[i] = q
        for j, c in enumerate(den):
            num[i + j] -= q * c
    if any(num[: len(den) - 1]):
        raise ArithmeticError("inexact polynomial division")
    return out


def totient(n: int) -> int:
    return sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)


def star_relations(n: int) -> np.ndarray:
    """Integer relations among the n unit star vectors.

    A vector ``c`` satisfies ``sum c_k e_k = 0`` exactly when the polynomial
    ``sum c_k x^k`` is divisible by the n-th cyclotomic polynomial, so the
    multiples ``x^j Phi_n(x)`` of degree below n form a basis.
    """
    phi = cyclotomic(n)
    deg = len(phi) - 1
    rows = []
    for j in range(n - deg):
        row = [0] * n
        for i, c in enumerate(phi):
            row[i + j] = c
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, n)


def build_star_potential(n: int, amps, global_phase: float = 0.0) -> QuasiperiodicPotential:
    """
    Standard n-fold potential ``sum_h amps[h-1] sum_k cos(2 pi h e_k.r + global_phase)``.

    The star vectors are ``e_k = (cos 2 pi k/n, sin 2 pi k/n)``.  The function
    lives on T^n with one coordinate per star vector, so harmonic ``h`` of
    vector ``k`` has the integer frequency ``h * unit_k``.
    """
    n = int(n)
    if n < 3:
        raise ValueError("star potential needs n >= 3")
    amps = [float(a) for a in amps]
    if not amps or all(a == 0.0 for a in amps):
        raise ValueError("amps must contain a nonzero amplitude")
    terms = []
    for h, a in enumerate(amps, start=1):
        if a == 0.0:
            continue
        for k in range(n):
            freq = [0] * n
            freq[k] = h
            terms.append(FrequencyTerm(tuple(freq), a, global_phase))
    f = PeriodicFunction(n, terms)
    ang = TWO_PI * np.arange(n) / n
    cu, cv = np.cos(ang), np.sin(ang)
    scale = math.sqrt(n / 2.0)
    # cos/sin columns are orthogonal with norm sqrt(n/2) for every n >= 3
    emb = Embedding(cu / np.linalg.norm(cu), cv / np.linalg.norm(cv), scale=scale)
    rel = star_relations(n)
    return QuasiperiodicPotential(
        f, emb,
        symmetry=DihedralDescriptor(n, (0.0, 0.0), 0.0),
        relations=rel,
        quasiperiods=n - len(rel),
        star={"n": n, "amps": amps, "global_phase": float(global_phase)},
    )


# -- symmetry check ------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    max_rotation_err: float
    max_reflection_err: float
    passed: bool

    def to_dict(self):
        return {"max_rotation_err": self.max_rotation_err,
                "max_reflection_err": self.max_reflection_err,
                "pass": self.passed}


def check_dihedral_symmetry(p, d: DihedralDescriptor, samples: int = 10_000,
                            tol: float = SYMMETRY_TOL, seed: int = 0,
                            radius: float = 100.0) -> SymmetryReport:
    """Sample points in a disc about ``d.center`` and compare V against its images."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    rad = radius * np.sqrt(rng.random(samples))
    ang = TWO_PI * rng.random(samples)
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1) + np.asarray(d.center)
    v0 = p.values(pts[:, 0], pts[:, 1])
    q = d.rotate(pts)
    rot = float(np.max(np.abs(p.values(q[:, 0], q[:, 1]) - v0)))
    refl = 0.0
    for k in range(d.n):
        q = d.reflect(pts, k)
        refl = max(refl, float(np.max(np.abs(p.values(q[:, 0], q[:, 1]) - v0))))
    return SymmetryReport(rot, refl, bool(rot < tol and refl < tol))


# -- potential spec files ------------------------------------------------------

_STAR_KEYS = {"kind", "n", "amps", "global_phase", "phase_shift"}
_EXPLICIT_KEYS = {"kind", "dim_n", "terms", "constant", "frame_u", "frame_v",
                  "offset", "phase_shift", "scale"}


def potential_from_spec(spec: dict) -> QuasiperiodicPotential:
    """Build a potential from its JSON description (``kind`` star or explicit)."""
    if not isinstance(spec, dict):
        raise ConfigError("potential spec must be an object", key="potential")
    kind = spec.get("kind")
    if kind == "star":
        _reject_unknown(spec, _STAR_KEYS, "potential")
        try:
            p = build_star_potential(spec["n"], spec["amps"], spec.get("global_phase", 0.0))
        except KeyError as exc:
            raise ConfigError(f"star spec is missing {exc.args[0]!r}", key=exc.args[0]) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid star spec: {exc}", key="potential") from None
        if spec.get("phase_shift") is not None:
            p = _spec_shift(p, spec["phase_shift"])
        return p
    if kind == "explicit":
        _reject_unknown(spec, _EXPLICIT_KEYS, "potential")
        try:
            n = int(spec["dim_n"])
            terms = [FrequencyTerm(t["freq"], t["amp"], t.get("phase", 0.0)) for t in spec["terms"]]
            f = PeriodicFunction(n, terms, spec.get("constant", 0.0))
            emb = Embedding(spec["frame_u"], spec["frame_v"], spec.get("offset"),
                            spec.get("phase_shift"), spec.get("scale", 1.0))
        except KeyError as exc:
            raise ConfigError(f"explicit spec is missing {exc.args[0]!r}", key=exc.args[0]) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid explicit spec: {exc}", key="potential") from None
        return QuasiperiodicPotential(f, emb)
    raise ConfigError(f"unknown potential kind {kind!r}", key="kind")


def _spec_shift(p, a):
    try:
        return phase_shift(p, a)
    except ValueError as exc:
        raise ConfigError(str(exc), key="phase_shift") from None


def _reject_unknown(d, allowed, where):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}", key=key)


def potential_to_spec(p: QuasiperiodicPotential) -> dict:
    """JSON-ready description; star potentials keep their compact form."""
    if p.star is not None:
        spec = {"kind": "star", "n": p.star["n"], "amps": list(p.star["amps"]),
                "global_phase": p.star["global_phase"]}
        if np.any(p.emb.phase_shift != 0):
            spec["phase_shift"] = p.emb.phase_shift.tolist()
        return spec
    return {
        "kind": "explicit",
        "dim_n": p.dim_n,
        "terms": [{"freq": list(t.freq), "amp": t.amp, "phase": t.phase} for t in p.f.terms],
        "constant": p.f.constant,
        "frame_u": p.emb.u.tolist(),
        "frame_v": p.emb.v.tolist(),
        "offset": p.emb.offset.tolist(),
        "phase_shift": p.emb.phase_shift.tolist(),
        "scale": p.emb.scale,
    }


def load_potential(path) -> QuasiperiodicPotential:
    with open(path) as fh:
        return potential_from_spec(json.load(fh))


def square_potential(ax: float = 2.0, ay: float = 2.0) -> QuasiperiodicPotential:
    """Periodic ``ax cos 2 pi x + ay cos 2 pi y`` on T^2 with the identity frame."""
    terms = [FrequencyTerm((1, 0), ax), FrequencyTerm((0, 1), ay)]
    return QuasiperiodicPotential(PeriodicFunction(2, terms), Embedding([1, 0], [0, 1]),
                                  relations=np.zeros((0, 2), dtype=np.int64), quasiperiods=2)
