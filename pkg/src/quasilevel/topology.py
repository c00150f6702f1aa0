"""
Topology of traced level lines across window scales.

Open lines are classified by fitting a total-least-squares line to the
component at each scale and watching the strip half-width: a line confined
to a strip keeps its width and direction, a wandering line keeps widening.
Sector curves and the closed-diameter curve D(eps) live here too.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .contour import (Contour, ContourSet, Window, check_node_cap, fmt,
                      max_closed_diameter, trace_level)
from .potential import evaluate_grid

CLOSED = "Closed"
OPEN_REGULAR = "OpenRegular"
OPEN_CHAOTIC = "OpenChaotic"
INDETERMINATE = "Indeterminate"
VERDICTS = (CLOSED, OPEN_REGULAR, OPEN_CHAOTIC, INDETERMINATE)


@dataclass(frozen=True)
class TopologyConfig:
    """Thresholds of the strip test and of D(eps) saturation."""

    flatness: float = 0.20          # max relative spread of strip widths for a regular line
    max_turn_deg: float = 2.0       # direction change between the two largest scales
    chaos_exponent: float = 0.20    # min log-log growth exponent for a chaotic line
    saturation: float = 0.05        # relative D change between the two largest windows
    criterion_version: str = "tls-strip/1"

    @classmethod
    def from_dict(cls, d):
        from .errors import ConfigError
        known = {f for f in cls.__dataclass_fields__}
        for k in d:
            if k not in known:
                raise ConfigError(f"unknown key {k!r} in topology thresholds", key=k)
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class ClassifiedLine:
    contour: Contour
    verdict: str
    scales_used: list
    direction: tuple | None = None
    strip_width: float | None = None
    width_growth_exponent: float | None = None
    widths: list = field(default_factory=list)
    criterion_version: str = TopologyConfig.criterion_version
    note: str = ""

    def to_dict(self):
        d = {"verdict": self.verdict}
        if self.verdict == OPEN_REGULAR:
            d["direction"] = [float(c) for c in self.direction]
            d["strip_width"] = float(self.strip_width)
        elif self.verdict == OPEN_CHAOTIC:
            d["width_growth_exponent"] = float(self.width_growth_exponent)
        d["scales"] = [float(s) for s in self.scales_used]
        d["widths"] = [float(w) for w in self.widths]
        d["criterion_version"] = self.criterion_version
        if self.note:
            d["note"] = self.note
        return d


def tls_fit(points):
    """
    Total-least-squares line through ``points``.

    Returns
    -------
    centroid : ndarray
    direction : ndarray
        Unit vector, sign fixed so the first nonzero component is positive.
    half_width : float
        Largest perpendicular distance from the line.
    """
    pts = np.asarray(points, dtype=float)
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c, full_matrices=False)
    d = vt[0]
    if d[0] < 0 or (d[0] == 0 and d[1] < 0):
        d = -d
    normal = np.array([-d[1], d[0]])
    return c, d, float(np.max(np.abs((pts - c) @ normal)))


def angle_between_deg(d1, d2):
    """Angle between two undirected lines, in degrees."""
    c = abs(float(np.dot(d1, d2)))
    return math.degrees(math.acos(min(1.0, c)))


def growth_exponent(scales, widths):
    """Slope of ``log(width)`` against ``log(scale)`` by least squares."""
    s = np.log(np.asarray(scales, dtype=float))
    w = np.log(np.maximum(np.asarray(widths, dtype=float), 1e-300))
    return float(np.polyfit(s, w, 1)[0])


def strip_verdict(scales, widths, directions, cfg: TopologyConfig = TopologyConfig(),
                  width_floor: float = 0.0):
    """
    Verdict from per-scale strip half-widths and fitted directions.

    ``width_floor`` is the width below which a strip counts as flat no matter
    its relative spread (a grid spacing for traced lines; straight lines have
    widths at rounding level whose ratios mean nothing).

    Returns ``(verdict, exponent)``.
    """
    if len(scales) < 3:
        raise ValueError("the strip test needs at least three scales")
    w = np.asarray(widths, dtype=float)
    top = float(w.max())
    flat = top <= width_floor or (top - float(w.min())) / top < cfg.flatness
    steady = angle_between_deg(directions[-1], directions[-2]) < cfg.max_turn_deg
    regular = flat and steady
    growing = bool(np.all(np.diff(w) > 0)) and w[0] > 0
    expo = growth_exponent(scales, w) if np.all(w > 0) else float("nan")
    chaotic = growing and expo > cfg.chaos_exponent
    if regular and not chaotic:
        return OPEN_REGULAR, expo
    if chaotic and not regular:
        return OPEN_CHAOTIC, expo
    return INDETERMINATE, expo


def clip_to_window(points, center, L, anchor):
    """Maximal run of consecutive vertices inside the square window that contains index ``anchor``."""
    pts = np.asarray(points, dtype=float)
    inside = np.all(np.abs(pts - np.asarray(center, dtype=float)) <= L, axis=1)
    if not inside[anchor]:
        return pts[:0]
    lo = anchor
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    hi = anchor
    while hi + 1 < len(pts) and inside[hi + 1]:
        hi += 1
    return pts[lo:hi + 1]


def classify_polyline(points, L_list, center=(0.0, 0.0), cfg: TopologyConfig = TopologyConfig(),
                      width_floor: float = 0.0):
    """
    Strip test on a given polyline viewed through growing windows.

    At each half-size ``L`` the run of vertices inside the window that holds
    the vertex nearest ``center`` is fitted.  Useful for calibrating the
    thresholds on synthetic curves.
    """
    pts = np.asarray(points, dtype=float)
    anchor = int(np.argmin(np.hypot(*(pts - np.asarray(center)).T)))
    widths, dirs = [], []
    for L in L_list:
        run = clip_to_window(pts, center, L, anchor)
        if len(run) < 2:
            return INDETERMINATE, float("nan"), widths, dirs
        _, d, hw = tls_fit(run)
        widths.append(hw)
        dirs.append(d)
    verdict, expo = strip_verdict(L_list, widths, dirs, cfg, width_floor)
    return verdict, expo, widths, dirs


def classify_line(p, seed: Contour, L_list, resolution=8.0, center=(0.0, 0.0),
                  cfg: TopologyConfig = TopologyConfig(), node_cap=None, jobs=1) -> ClassifiedLine:
    """
    Follow an open seed contour through windows of growing half-size and classify it.

    The component is re-identified at each scale as the one with a vertex
    within ``2h`` of the seed's middle vertex.  If that fails, or the line
    closes inside a larger window, the verdict is Indeterminate.

    Raises
    ------
    ValueError
        The seed is closed, or fewer than three scales are given.
    """
    return classify_lines(p, [seed], L_list, resolution, center, cfg, node_cap, jobs)[0]


def classify_lines(p, seeds, L_list, resolution=8.0, center=(0.0, 0.0),
                   cfg: TopologyConfig = TopologyConfig(), node_cap=None, jobs=1):
    """:func:`classify_line` for several seeds of one level, tracing each window once."""
    if any(s.closed for s in seeds):
        raise ValueError("classify_line needs open seed contours")
    levels = {s.level for s in seeds}
    if len(levels) > 1:
        raise ValueError("all seeds must share one level")
    L_list = [float(L) for L in L_list]
    if len(L_list) < 3 or any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must hold at least three increasing scales")
    if not seeds:
        return []
    level = seeds[0].level
    anchors = [s.points[len(s.points) // 2] for s in seeds]
    state = [{"widths": [], "dirs": [], "used": [], "note": ""} for _ in seeds]
    h = None
    for L in L_list:
        w = Window.from_resolution(center, L, resolution)
        if node_cap is not None:
            check_node_cap(w, node_cap)
        cs = trace_level(p, w, level, jobs=jobs)
        h = w.h
        for q, st in zip(anchors, state):
            if st["note"]:
                continue
            lab = cs.component_at(q, 2.0 * h)
            if lab is None:
                st["note"] = f"seed lost at L={L:g}"
                continue
            if not cs.component_is_open(lab):
                st["note"] = f"line closes inside the window at L={L:g}"
                continue
            _, d, hw = tls_fit(cs.open_component_points(lab))
            st["widths"].append(hw)
            st["dirs"].append(d)
            st["used"].append(L)
    out = []
    for seed, st in zip(seeds, state):
        line = ClassifiedLine(seed, INDETERMINATE, st["used"], widths=st["widths"],
                              criterion_version=cfg.criterion_version, note=st["note"])
        if not st["note"]:
            verdict, expo = strip_verdict(st["used"], st["widths"], st["dirs"], cfg, width_floor=h)
            line.verdict = verdict
            if verdict == OPEN_REGULAR:
                line.direction = (float(st["dirs"][-1][0]), float(st["dirs"][-1][1]))
                line.strip_width = float(st["widths"][-1])
            elif verdict == OPEN_CHAOTIC:
                line.width_growth_exponent = expo
        out.append(line)
    return out


def closed_line(seed: Contour, cfg: TopologyConfig = TopologyConfig()) -> ClassifiedLine:
    return ClassifiedLine(seed, CLOSED, [], criterion_version=cfg.criterion_version)


# -- sector curves -------------------------------------------------------------

@dataclass
class SectorCurve:
    points: np.ndarray
    sector_index: int
    min_dist_to_center: float


def default_sector_radius(p) -> float:
    """Five periods of the dominant harmonic of ``p``."""
    k = np.hypot(p._kx, p._ky)
    a = np.abs(p.f.amps)
    if not len(a):
        raise ValueError("a constant potential has no dominant harmonic")
    i = int(np.argmax(np.where(k > 0, a, -1.0)))
    return 5.0 / float(k[i])


def extract_sector_curves(cs: ContourSet, d, R: float, outer_radius: float | None = None):
    """
    Pieces of the level lines lying in one open sector beyond radius ``R``.

    A piece is a maximal run of consecutive vertices strictly inside a single
    sector at distance at least ``R`` from the symmetry center.  Runs are kept
    if they come within ``1.5 R`` of the disc and reach the window boundary
    (within one grid spacing), or the circle ``outer_radius`` when given.
    A circular outer boundary keeps the selection itself symmetric, which the
    square window is not.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    w = cs.window
    if w.half_size <= 2 * R:
        raise ValueError("window half-size must exceed 2R")
    h = w.h
    x0, x1, y0, y1 = w.bounds
    out = []
    for c in cs.contours:
        pts = c.points[:-1] if c.closed else c.points
        r, _ = d.polar(pts)
        sec, strict = d.sector_index(pts)
        ok = strict & (r >= R)
        if outer_radius is not None:
            ok &= r <= outer_radius
        if not np.any(ok):
            continue
        key = np.where(ok, sec, 0)
        runs = _runs(key, wrap=c.closed)
        for s, e in runs:
            idx = np.arange(s, e) % len(pts)
            rr = r[idx]
            if rr.min() - R > 1.5 * R:
                continue
            seg = pts[idx]
            if outer_radius is not None:
                reach = _reaches_circle(r, s, e, c.closed, outer_radius)
            else:
                ends = seg[[0, -1]]
                reach = bool(np.any((ends[:, 0] - x0 <= h) | (x1 - ends[:, 0] <= h)
                                    | (ends[:, 1] - y0 <= h) | (y1 - ends[:, 1] <= h)))
            if reach:
                out.append(SectorCurve(seg, int(key[s % len(pts)]), float(R)))
    out.sort(key=lambda sc: (sc.sector_index, float(sc.points[0, 0]), float(sc.points[0, 1])))
    return out


def _runs(key, wrap):
    """Half-open index ranges of constant nonzero ``key``; on closed lines a range may wrap."""
    n = len(key)
    change = np.flatnonzero(key[1:] != key[:-1]) + 1
    bounds = np.r_[0, change, n]
    runs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if key[a] != 0]
    if wrap and len(runs) > 1 and key[0] != 0 and key[-1] == key[0]:
        first = runs.pop(0)
        last = runs.pop()
        runs.append((last[0], n + first[1]))
    return runs


def _reaches_circle(r, s, e, closed, R_out):
    """Whether the vertex just past either end of run ``[s, e)`` lies outside ``R_out``."""
    n = len(r)
    nb = []
    if closed or s > 0:
        nb.append((s - 1) % n)
    if closed or e < n:
        nb.append(e % n)
    return any(r[k] > R_out for k in nb)


def sector_map_to_first(d, pts, sector_index):
    """Carry points of sector ``sector_index`` into sector 1 with a symmetry of the descriptor."""
    i = int(sector_index)
    if i % 2 == 1:
        return d.rotate(pts, -((i - 1) // 2))
    q = d.rotate(pts, -((i - 2) // 2))
    return d.reflect(q, 1)


def sector_equivariance_error(curves, d, margin):
    """
    Worst distance between corresponding sector-curve point sets after
    mapping every sector onto sector 1.

    Points within ``margin`` of a sector ray, of the inner radius or of the
    outermost point are ignored, since truncation there depends on where the
    grid happens to cut the curve.  Distances are measured to densified
    polylines.  Returns ``inf`` when a sector has curves and another has none.
    """
    by_sector = {}
    for sc in curves:
        by_sector.setdefault(sc.sector_index, []).append(sc)
    if not by_sector:
        return 0.0
    sectors = range(1, 2 * d.n + 1)
    if any(s not in by_sector for s in sectors):
        return float("inf")
    R = curves[0].min_dist_to_center
    mapped = {s: [sector_map_to_first(d, sc.points, s) for sc in by_sector[s]] for s in sectors}
    r_out = max(float(np.max(d.polar(c)[0])) for cs in mapped.values() for c in cs)
    width = math.pi / d.n

    def core(c):
        r, th = d.polar(c)
        away = r * np.sin(np.clip(np.minimum(th, width - th), 0, None)) > margin
        return c[away & (r > R + margin) & (r < r_out - margin)]

    def dense(cs):
        out = []
        for c in cs:
            seg = np.diff(c, axis=0)
            k = max(1, int(np.ceil(np.max(np.hypot(*seg.T)) / (margin / 20)))) if len(c) > 1 else 1
            t = np.linspace(0, 1, k, endpoint=False)
            out.append((c[:-1, None, :] + t[None, :, None] * seg[:, None, :]).reshape(-1, 2))
            out.append(c[-1:])
        return np.vstack(out)

    ref = dense(mapped[1])
    ref_tree = cKDTree(ref)
    worst = 0.0
    for s in sectors:
        if s == 1:
            continue
        other = dense(mapped[s])
        tree = cKDTree(other)
        a = np.vstack([core(c) for c in mapped[s]])
        b = np.vstack([core(c) for c in mapped[1]])
        if len(a):
            worst = max(worst, float(ref_tree.query(a)[0].max()))
        if len(b):
            worst = max(worst, float(tree.query(b)[0].max()))
    return worst


# -- D(eps) --------------------------------------------------------------------

@dataclass
class DiameterCurve:
    entries: list   # (eps, D, saturated, L_max)
    per_scale: dict = field(default_factory=dict)

    def to_csv(self, fh=None):
        own = fh is None
        if own:
            fh = io.StringIO()
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("eps", "D", "saturated", "L_max"))
        for eps, D, sat, L in self.entries:
            wr.writerow((fmt(eps), fmt(D), "true" if sat else "false", fmt(L)))
        return fh.getvalue() if own else None

    @property
    def unsaturated(self):
        return [e for e in self.entries if not e[2]]


def is_saturated(d_prev, d_last, tol):
    top = max(d_prev, d_last)
    if top == 0:
        return True
    return abs(d_last - d_prev) / top < tol


def measure_D_of_eps(p, eps_list, L_list, resolution=8.0, center=(0.0, 0.0),
                     cfg: TopologyConfig = TopologyConfig(), node_cap=None, jobs=1) -> DiameterCurve:
    """
    Largest closed-line diameter for each level, window by window.

    Each window is evaluated once and all levels are traced on that grid.
    ``D`` is taken at the largest window; an entry is saturated when ``D``
    moved by less than ``cfg.saturation`` (relative) between the two largest
    windows.  Unsaturated entries are flagged, never raised.
    """
    L_list = [float(L) for L in L_list]
    if len(L_list) < 2 or any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must hold at least two increasing scales")
    eps_list = [float(e) for e in eps_list]
    table = {e: [] for e in eps_list}
    for L in L_list:
        w = Window.from_resolution(center, L, resolution)
        if node_cap is not None:
            check_node_cap(w, node_cap)
        G = evaluate_grid(p, w.bounds, w.nx, w.ny, jobs=jobs)
        for e in eps_list:
            table[e].append(max_closed_diameter(trace_level(p, w, e, grid=G)))
        del G
    entries = []
    for e in eps_list:
        ds = table[e]
        entries.append((e, float(ds[-1]), is_saturated(ds[-2], ds[-1], cfg.saturation), L_list[-1]))
    return DiameterCurve(entries, {e: list(zip(L_list, table[e])) for e in eps_list})
