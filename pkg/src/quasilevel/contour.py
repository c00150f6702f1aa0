"""
Level-line extraction by marching squares.

The grid is thresholded once (a node value equal to the level counts as
above it), every cell contributes oriented segments between its crossing
edges, and ambiguous saddle cells are resolved by evaluating the field at
the cell center.  Segments are oriented with the high side on the left, so
each crossing carries at most one outgoing and one incoming segment and the
polylines fall out of a single depth-first pass.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, depth_first_order
from scipy.spatial import ConvexHull, QhullError

from .errors import ResourceCapError
from .potential import evaluate_grid, grid_nodes

BOTTOM, RIGHT, TOP, LEFT = 0, 1, 2, 3
SIDE_NAMES = ("bottom", "right", "top", "left")
DEFAULT_NODE_CAP = 200_000_000


@dataclass(frozen=True)
class Window:
    """Square viewport ``[cx-L, cx+L] x [cy-L, cy+L]`` sampled by ``nx`` by ``ny`` nodes."""

    center: tuple
    half_size: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.half_size > 0:
            raise ValueError("half_size must be positive")
        if int(self.nx) < 2 or int(self.ny) < 2:
            raise ValueError("grid needs at least two nodes per axis")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "half_size", float(self.half_size))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def from_resolution(cls, center, half_size, per_unit):
        n = int(math.ceil(2.0 * half_size * per_unit - 1e-9)) + 1
        return cls(center, half_size, n, n)

    @property
    def bounds(self):
        cx, cy = self.center
        L = self.half_size
        return (cx - L, cx + L, cy - L, cy + L)

    @property
    def h(self):
        return 2.0 * self.half_size / (self.nx - 1)

    @property
    def nodes(self):
        return self.nx * self.ny

    def grid(self):
        return grid_nodes(self.bounds, self.nx, self.ny)


@dataclass
class Contour:
    level: float
    points: np.ndarray
    closed: bool
    boundary_endpoints: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    sides: tuple = ()

    def __len__(self):
        return len(self.points)

    @property
    def spanning(self):
        return len(self.sides) == 2 and set(self.sides) in ({LEFT, RIGHT}, {BOTTOM, TOP})

    def length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def diameter(self):
        return point_set_diameter(self.points)


class FunctionField:
    """Adapter giving any vectorised ``func(x, y)`` the potential evaluation interface."""

    def __init__(self, func, gradient_bound=None):
        self.func = func
        self._bound = gradient_bound

    def values(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, y), dtype=float),
                               np.broadcast_shapes(x.shape, y.shape)).copy()

    def gradient_bound(self):
        if self._bound is None:
            raise ValueError("no gradient bound supplied for this field")
        return float(self._bound)


# -- segment tables ------------------------------------------------------------
# corners 0..3 = (i,j), (i+1,j), (i+1,j+1), (i,j+1); edges 0..3 = bottom, right, top, left
_CORNER_XY = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
_EDGE_MID = np.array([(0.5, 0), (1, 0.5), (0.5, 1), (0, 0.5)])
_EDGE_CORNERS = ((0, 1), (1, 2), (2, 3), (3, 0))


def _orient(ea, eb, high, cut=None):
    """Order edges ``ea, eb`` so that the high side lies to the left."""
    pa, pb = _EDGE_MID[ea], _EDGE_MID[eb]
    if cut is None:
        cut = next(c for c in range(4) if high[c])
        want_left = True
    else:
        want_left = bool(high[cut])
    d = pb - pa
    w = _CORNER_XY[cut] - pa
    left = d[0] * w[1] - d[1] * w[0] > 0
    return (ea, eb) if left == want_left else (eb, ea)


def _segment_table():
    """``table[case][center_high]`` -> list of oriented (edge, edge) pairs."""
    table = {}
    for case in range(16):
        high = [(case >> c) & 1 for c in range(4)]
        crossing = [e for e, (a, b) in enumerate(_EDGE_CORNERS) if high[a] != high[b]]
        if not crossing:
            table[case] = {True: [], False: []}
        elif len(crossing) == 2:
            seg = [_orient(crossing[0], crossing[1], high)]
            table[case] = {True: seg, False: seg}
        else:
            # saddle: a high center joins the high corners, so the low corners are cut off
            out = {}
            for center_high in (True, False):
                segs = []
                for c in range(4):
                    if bool(high[c]) == center_high:
                        continue
                    e1 = (c - 1) % 4  # edge ending at corner c
                    e2 = c            # edge starting at corner c
                    segs.append(_orient(e1, e2, high, cut=c))
                out[center_high] = segs
            table[case] = out
    return table


_TABLE = _segment_table()
_SADDLES = (5, 10)


class ContourSet:
    """
    All level lines of one level inside one window.

    Topology (components, open/closed status, spanning) is computed eagerly
    from the segment graph; ordered polylines are assembled on first access
    to :attr:`contours`.
    """

    def __init__(self, window, level, xy, side, src, dst):
        self.window = window
        self.level = float(level)
        self._xy = xy
        self._side = side
        self._src = src
        self._dst = dst
        m = len(xy)
        if m:
            g = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(m, m))
            self._ncomp, self._label = connected_components(g, directed=False)
        else:
            self._ncomp, self._label = 0, np.zeros(0, dtype=np.int32)
        bnd = np.flatnonzero(side >= 0)
        comp_open = np.zeros(self._ncomp, dtype=bool)
        comp_open[self._label[bnd]] = True
        self._comp_open = comp_open
        # each open component has exactly two boundary crossings
        lab = self._label[bnd]
        o = np.argsort(lab, kind="stable")
        pairs = side[bnd][o].reshape(-1, 2)
        self._open_labels = lab[o][::2]
        self._open_sides = pairs
        lo, hi = np.sort(pairs, axis=1).T if len(pairs) else (np.array([]), np.array([]))
        span = ((lo == RIGHT) & (hi == LEFT)) | ((lo == BOTTOM) & (hi == TOP))
        self._span_mask = span
        self.spanning = bool(np.any(span))

    @property
    def n_components(self):
        return int(self._ncomp)

    @property
    def n_closed(self):
        return int(np.count_nonzero(~self._comp_open))

    @property
    def n_open(self):
        return int(np.count_nonzero(self._comp_open))

    @property
    def spanning_directions(self):
        """Set of ``"x"`` (left-right) and/or ``"y"`` (bottom-top) crossings present."""
        out = set()
        for a, b in np.sort(self._open_sides[self._span_mask], axis=1):
            out.add("x" if (a, b) == (RIGHT, LEFT) else "y")
        return out

    @cached_property
    def contours(self):
        return self._assemble()

    def __len__(self):
        return self.n_components

    def __iter__(self):
        return iter(self.contours)

    def _assemble(self):
        m = len(self._xy)
        if not m:
            return []
        has_pred = np.zeros(m, dtype=bool)
        has_pred[self._dst] = True
        starts = np.full(self._ncomp, m, dtype=np.int64)
        open_start = np.flatnonzero(~has_pred)
        starts[self._label[open_start]] = open_start
        closed = ~self._comp_open
        ids = np.arange(m)
        cyc = closed[self._label]
        np.minimum.at(starts, self._label[cyc], ids[cyc])
        root = m
        rows = np.concatenate([np.full(self._ncomp, root), self._src])
        cols = np.concatenate([starts, self._dst])
        g = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(m + 1, m + 1))
        order, pred = depth_first_order(g, root, directed=True, return_predecessors=True)
        order = order[1:]
        cuts = np.flatnonzero(pred[order] == root)
        out = []
        for seq in np.split(order, cuts[1:]):
            comp = self._label[seq[0]]
            pts = self._xy[seq]
            if self._comp_open[comp]:
                ends = pts[[0, -1]].copy()
                sides = (int(self._side[seq[0]]), int(self._side[seq[-1]]))
                out.append(Contour(self.level, pts, False, ends, sides))
            else:
                pts = np.vstack([pts, pts[:1]])
                out.append(Contour(self.level, pts, True))
        return out

    def closed_groups(self):
        """Unordered vertices of the closed components: ``(points, starts)`` grouped by component."""
        closed = ~self._comp_open
        sel = np.flatnonzero(closed[self._label])
        if not len(sel):
            return np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
        lab = self._label[sel]
        o = np.argsort(lab, kind="stable")
        sel, lab = sel[o], lab[o]
        starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
        return self._xy[sel], starts

    def open_component_points(self, label):
        sel = np.flatnonzero(self._label == label)
        return self._xy[sel]

    def component_at(self, q, tol):
        """Label of the component with a vertex within ``tol`` of point ``q``, else None."""
        if not len(self._xy):
            return None
        d = np.hypot(self._xy[:, 0] - q[0], self._xy[:, 1] - q[1])
        k = int(np.argmin(d))
        return int(self._label[k]) if d[k] <= tol else None

    def component(self, label) -> Contour:
        """Ordered polyline of one component, without assembling the others."""
        nodes = np.flatnonzero(self._label == label)
        succ = {}
        has_pred = set()
        sel = np.isin(self._src, nodes)
        for a, b in zip(self._src[sel].tolist(), self._dst[sel].tolist()):
            succ[a] = b
            has_pred.add(b)
        is_open = bool(self._comp_open[label])
        start = next((n for n in nodes.tolist() if n not in has_pred), None) if is_open \
            else int(nodes[0])
        seq = [start]
        nxt = succ.get(start)
        while nxt is not None and nxt != start:
            seq.append(nxt)
            nxt = succ.get(nxt)
        pts = self._xy[seq]
        if is_open:
            sides = (int(self._side[seq[0]]), int(self._side[seq[-1]]))
            return Contour(self.level, pts, False, pts[[0, -1]].copy(), sides)
        return Contour(self.level, np.vstack([pts, pts[:1]]), True)

    def component_is_open(self, label) -> bool:
        return bool(self._comp_open[label])


def trace_level(p, w: Window, eps: float, grid=None, jobs: int = 1) -> ContourSet:
    """
    Level lines ``V = eps`` of ``p`` inside window ``w``.

    Parameters
    ----------
    p : potential or field
        Anything with a vectorised ``values(x, y)`` method.
    w : Window
    eps : float
        The level; must be finite.
    grid : ndarray, optional
        Precomputed ``evaluate_grid`` output for ``w``.  Saves re-evaluating
        the potential when several levels are traced on one window.
    jobs : int
        Threads for grid evaluation.
    """
    eps = float(eps)
    if not math.isfinite(eps):
        raise ValueError("level must be finite")
    xs, ys = w.grid()
    if grid is None:
        grid = evaluate_grid(p, w.bounds, w.nx, w.ny, jobs=jobs)
    elif grid.shape != (w.nx, w.ny):
        raise ValueError("grid shape does not match the window")
    return _march(p, grid, xs, ys, eps, w)


def _march(p, G, xs, ys, eps, w):
    nx, ny = G.shape
    B = G >= eps
    h_idx = np.flatnonzero(B[:-1, :] != B[1:, :])
    v_idx = np.flatnonzero(B[:, :-1] != B[:, 1:])
    nh = len(h_idx)

    # crossing coordinates by linear interpolation along the edge
    hi, hj = np.divmod(h_idx, ny)
    g0, g1 = G[hi, hj], G[hi + 1, hj]
    t = (eps - g0) / (g1 - g0)
    hxy = np.column_stack([xs[hi] + t * (xs[hi + 1] - xs[hi]), ys[hj]])
    vi, vj = np.divmod(v_idx, ny - 1)
    g0, g1 = G[vi, vj], G[vi, vj + 1]
    t = (eps - g0) / (g1 - g0)
    vxy = np.column_stack([xs[vi], ys[vj] + t * (ys[vj + 1] - ys[vj])])
    xy = np.vstack([hxy, vxy])

    side = np.full(len(xy), -1, dtype=np.int8)
    side[:nh][hj == 0] = BOTTOM
    side[:nh][hj == ny - 1] = TOP
    side[nh:][vi == 0] = LEFT
    side[nh:][vi == nx - 1] = RIGHT

    case = (B[:-1, :-1].astype(np.uint8) | (B[1:, :-1].astype(np.uint8) << 1)
            | (B[1:, 1:].astype(np.uint8) << 2) | (B[:-1, 1:].astype(np.uint8) << 3))
    cells = np.flatnonzero((case != 0) & (case != 15))
    cc = case.ravel()[cells]
    del case, B
    ci, cj = np.divmod(cells, ny - 1)

    def edge_ids(e, sel):
        i, j = ci[sel], cj[sel]
        if e == BOTTOM:
            return np.searchsorted(h_idx, i * ny + j)
        if e == TOP:
            return np.searchsorted(h_idx, i * ny + j + 1)
        if e == LEFT:
            return nh + np.searchsorted(v_idx, i * (ny - 1) + j)
        return nh + np.searchsorted(v_idx, (i + 1) * (ny - 1) + j)

    src, dst = [], []
    saddle = np.isin(cc, _SADDLES)
    center_high = np.zeros(len(cc), dtype=bool)
    if np.any(saddle):
        s = np.flatnonzero(saddle)
        xc = 0.5 * (xs[ci[s]] + xs[ci[s] + 1])
        yc = 0.5 * (ys[cj[s]] + ys[cj[s] + 1])
        center_high[s] = p.values(xc, yc) >= eps
    for case_id in range(1, 15):
        for ch in ((True, False) if case_id in _SADDLES else (True,)):
            sel = cc == case_id
            if case_id in _SADDLES:
                sel &= center_high == ch
            if not np.any(sel):
                continue
            for ea, eb in _TABLE[case_id][ch]:
                src.append(edge_ids(ea, sel))
                dst.append(edge_ids(eb, sel))
    if src:
        src = np.concatenate(src)
        dst = np.concatenate(dst)
    else:
        src = dst = np.zeros(0, dtype=np.int64)
    return ContourSet(w, eps, xy, side, src, dst)


def superlevel_crossings(p, w: Window, eps: float, grid=None):
    """
    Whether ``{V >= eps}`` connects left to right and bottom to top.

    Connectivity matches :func:`trace_level`: grid neighbours along an axis
    are joined, and diagonal neighbours only in saddle cells whose center
    value is at or above ``eps``.  This route never builds contours; by
    planar duality a window has a spanning level line exactly when the two
    answers differ.
    """
    eps = float(eps)
    xs, ys = w.grid()
    G = evaluate_grid(p, w.bounds, w.nx, w.ny) if grid is None else grid
    B = G >= eps
    lab, nlab = ndimage.label(B)
    d5 = B[:-1, :-1] & B[1:, 1:] & ~B[1:, :-1] & ~B[:-1, 1:]
    d10 = B[1:, :-1] & B[:-1, 1:] & ~B[:-1, :-1] & ~B[1:, 1:]
    i5, j5 = np.nonzero(d5)
    i10, j10 = np.nonzero(d10)
    ci = np.concatenate([i5, i10])
    cj = np.concatenate([j5, j10])
    if len(ci):
        high = p.values(0.5 * (xs[ci] + xs[ci + 1]), 0.5 * (ys[cj] + ys[cj + 1])) >= eps
        a = np.concatenate([lab[i5, j5], lab[i10 + 1, j10]])[high]
        b = np.concatenate([lab[i5 + 1, j5 + 1], lab[i10, j10 + 1]])[high]
        g = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(nlab + 1, nlab + 1))
        _, merged = connected_components(g, directed=False)
    else:
        merged = np.arange(nlab + 1)

    def joined(s1, s2):
        l1 = merged[s1[s1 > 0]]
        l2 = merged[s2[s2 > 0]]
        return bool(np.intersect1d(l1, l2).size)

    return joined(lab[0, :], lab[-1, :]), joined(lab[:, 0], lab[:, -1])


def multiscale_trace(p, eps, L_list, resolution_per_unit, center=(0.0, 0.0),
                     node_cap=DEFAULT_NODE_CAP, jobs=1):
    """Trace one level on concentric windows of growing half-size."""
    L_list = [float(L) for L in L_list]
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be strictly increasing")
    if resolution_per_unit < 4:
        raise ValueError("resolution must be at least 4 nodes per unit length")
    windows = [Window.from_resolution(center, L, resolution_per_unit) for L in L_list]
    for w in windows:
        check_node_cap(w, node_cap)
    return [trace_level(p, w, eps, jobs=jobs) for w in windows]


def check_node_cap(w, node_cap=DEFAULT_NODE_CAP):
    if w.nodes > node_cap:
        raise ResourceCapError(f"window of half-size {w.half_size} needs {w.nodes} nodes "
                               f"(cap {int(node_cap)})")


# -- diameters -----------------------------------------------------------------

def point_set_diameter(pts) -> float:
    """Largest pairwise distance, via the convex hull and brute force on its vertices."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 8:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear sets: brute force below
    return _brute_diameter(pts)


def _brute_diameter(pts, block=2048):
    best = 0.0
    for s in range(0, len(pts), block):
        d = pts[s:s + block, None, :] - pts[None, :, :]
        best = max(best, float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d)))))
    return best


def component_diameters(cs: ContourSet) -> list:
    """Diameter of every closed contour, in contour order; open contours are skipped."""
    return [c.diameter() for c in cs.contours if c.closed]


def max_closed_diameter(cs: ContourSet) -> float:
    """Largest closed-contour diameter, pruning small loops by their bounding boxes."""
    pts, starts = cs.closed_groups()
    if not len(starts):
        return 0.0
    lo = np.minimum.reduceat(pts, starts, axis=0)
    hi = np.maximum.reduceat(pts, starts, axis=0)
    ext = hi - lo
    lower = ext.max(axis=1)         # diameter >= widest bbox side
    upper = np.hypot(ext[:, 0], ext[:, 1])
    ends = np.r_[starts[1:], len(pts)]
    best = float(lower.max())
    for k in np.argsort(-upper, kind="stable"):
        if upper[k] <= best:
            break
        best = max(best, point_set_diameter(pts[starts[k]:ends[k]]))
    return best


# -- export --------------------------------------------------------------------

CSV_HEADER = ("contour_id", "point_index", "x", "y", "closed", "level")


def fmt(v) -> str:
    """Text form used in every output file: 12 significant digits."""
    return format(float(v), ".12g")


def contours_to_csv(cs: ContourSet, fh=None):
    """Write ``contour_id,point_index,x,y,closed,level`` rows; returns the text if ``fh`` is None."""
    own = fh is None
    if own:
        fh = io.StringIO()
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for cid, c in enumerate(cs.contours):
        flag = 1 if c.closed else 0
        for k, (x, y) in enumerate(c.points):
            wr.writerow((cid, k, fmt(x), fmt(y), flag, fmt(cs.level)))
    return fh.getvalue() if own else None
