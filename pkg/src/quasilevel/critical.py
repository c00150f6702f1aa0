"""
Finite-window estimates of the energy interval carrying open level lines.

A window of half-size ``L`` has a spanning level line at ``eps`` exactly
when the superlevel set ``{V >= eps}`` crosses the window in one direction
but not the other (planar duality; see
:func:`quasilevel.contour.superlevel_crossings`).  Each phase of the family
therefore moves through three states as ``eps`` grows::

    below  -- the superlevel set crosses both ways
    span   -- it crosses one way only (a spanning line exists)
    above  -- it crosses neither way

The interval endpoints are the thresholds where the first phase leaves
``below`` and where the last phase reaches ``above``.  Both are monotone in
``eps``, so each is found by plain bisection, and a degenerate interval
(a single singular level, as for the square lattice potential whose saddles
all sit at one height) is located like any other.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .contour import (DEFAULT_NODE_CAP, Window, superlevel_crossings, trace_level)
from .errors import BracketInvalid, ResourceCapError
from .potential import evaluate_grid, phase_shift

log = logging.getLogger(__name__)

BELOW, SPAN, ABOVE = "below", "span", "above"
COLLAPSES = "Collapses"
PERSISTENT = "PersistentInterval"
INCONCLUSIVE = "Inconclusive"
CRITERION_VERSION = "nonincreasing-width/1"
MIN_RESOLUTION = 4.0


def crossing_state(cross_x: bool, cross_y: bool) -> str:
    if cross_x and cross_y:
        return BELOW
    if cross_x or cross_y:
        return SPAN
    return ABOVE


# -- phases ----------------------------------------------------------------

def default_phases(p, count: int = 4):
    """
    The zero phase followed by ``count`` Halton points projected onto the
    phase family of ``p``.

    Projections that vanish (a potential whose family is a single member,
    such as any doubly periodic one) are dropped, so the list may be shorter.
    """
    n = p.dim_n
    out = [np.zeros(n)]
    if count <= 0:
        return out
    pts = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    for a in pts:
        q = p.project_to_family(a - 0.5)
        if np.linalg.norm(q) > 1e-9 and not any(np.allclose(q, b, atol=1e-12) for b in out):
            out.append(q)
    return out


def random_phases(p, count: int, seed: int):
    """``count`` uniformly drawn torus shifts projected onto the phase family."""
    rng = np.random.default_rng(seed)
    return [p.project_to_family(rng.random(p.dim_n)) for _ in range(count)]


# -- probing ---------------------------------------------------------------

@dataclass
class SpanProbe:
    eps: float
    L: float
    phases: list
    spanning_any: bool
    spanning_count: int
    states: list = field(default_factory=list)

    @property
    def all_below(self):
        return all(s == BELOW for s in self.states)

    @property
    def all_above(self):
        return all(s == ABOVE for s in self.states)


def fit_resolution(L, resolution, node_cap=DEFAULT_NODE_CAP):
    """
    Window at the requested resolution, halving it while the grid would
    exceed ``node_cap`` (never below 4 nodes per unit).

    Raises
    ------
    ResourceCapError
        Even the coarsest allowed grid is too large.
    """
    res = float(resolution)
    while True:
        w = Window.from_resolution((0.0, 0.0), L, res)
        if w.nodes <= node_cap:
            return w, res
        if res / 2 < MIN_RESOLUTION:
            raise ResourceCapError(f"window L={L:g} exceeds the node cap of {int(node_cap)} "
                                   f"even at {res:g} nodes per unit")
        res /= 2
        log.warning("L=%g: grid over the node cap, resolution halved to %g per unit", L, res)


class ScaleProber:
    """
    Spanning probes at one window size, with grids and results cached.

    Each phase's grid is evaluated once; every probe is memoised by level.
    """

    def __init__(self, p, L, phases, resolution=8.0, center=(0.0, 0.0),
                 node_cap=DEFAULT_NODE_CAP, jobs=1, method="crossings"):
        if not len(phases):
            raise ValueError("at least one phase is required")
        if method not in ("crossings", "contours"):
            raise ValueError("method is 'crossings' or 'contours'")
        w, res = fit_resolution(L, resolution, node_cap)
        self.window = Window.from_resolution(center, L, res)
        self.resolution = res
        self.L = float(L)
        self.phases = [np.asarray(a, dtype=float) for a in phases]
        self.members = [phase_shift(p, a) for a in self.phases]
        self.jobs = max(1, int(jobs))
        self.method = method
        self._grids = [None] * len(self.members)
        self._memo = {}
        self.count = 0

    def _grid(self, k):
        if self._grids[k] is None:
            w = self.window
            self._grids[k] = evaluate_grid(self.members[k], w.bounds, w.nx, w.ny)
        return self._grids[k]

    def _state(self, k, eps):
        G = self._grid(k)
        if self.method == "contours":
            cs = trace_level(self.members[k], self.window, eps, grid=G)
            if cs.spanning:
                return SPAN
            cx, cy = superlevel_crossings(self.members[k], self.window, eps, grid=G)
            return crossing_state(cx, cy)
        return crossing_state(*superlevel_crossings(self.members[k], self.window, eps, grid=G))

    def probe(self, eps) -> SpanProbe:
        eps = float(eps)
        if eps not in self._memo:
            ks = range(len(self.members))
            if self.jobs > 1:
                with ThreadPoolExecutor(self.jobs) as ex:
                    states = list(ex.map(lambda k: self._state(k, eps), ks))
            else:
                states = [self._state(k, eps) for k in ks]
            n = sum(s == SPAN for s in states)
            self._memo[eps] = SpanProbe(eps, self.L, self.phases, n > 0, n, states)
            self.count += 1
        return self._memo[eps]


def probe_spanning(p, eps, L, phases, resolution=8.0, center=(0.0, 0.0),
                   node_cap=DEFAULT_NODE_CAP, jobs=1, method="crossings") -> SpanProbe:
    """
    Does some member of the phase family have a window-spanning level line at ``eps``?

    ``method="contours"`` traces the level lines and reads spanning off the
    contour set; the default decides the same question from superlevel-set
    crossings, which is cheaper and gives identical answers.
    """
    return ScaleProber(p, L, phases, resolution, center, node_cap, jobs, method).probe(eps)


# -- interval --------------------------------------------------------------

@dataclass
class IntervalEstimate:
    """Endpoint estimates with the final bisection brackets of both thresholds."""

    L: float
    eps1: float
    eps2: float
    lower_bracket: tuple
    upper_bracket: tuple
    probes: int
    resolution: float

    def __iter__(self):
        return iter((self.eps1, self.eps2))

    @property
    def width(self):
        return self.eps2 - self.eps1


def estimate_interval(p, L, eps_lo, eps_hi, phases, tol_eps, resolution=8.0,
                      center=(0.0, 0.0), node_cap=DEFAULT_NODE_CAP, jobs=1,
                      prober: ScaleProber | None = None) -> IntervalEstimate:
    """
    Bisect both ends of the spanning interval at window half-size ``L``.

    The lower end is where the first phase stops being ``below``; the upper
    end is where the last phase becomes ``above``.  Each is located to
    within ``tol_eps`` and reported as the midpoint of its final bracket.
    If the two estimates cross (a degenerate interval resolved below the
    tolerance) both are replaced by their mean, so ``eps1 <= eps2``.

    Raises
    ------
    BracketInvalid
        Some phase is not ``below`` at ``eps_lo`` or not ``above`` at
        ``eps_hi``, so the bracket does not enclose the phenomenon.
    """
    if not tol_eps > 0:
        raise ValueError("tol_eps must be positive")
    if not eps_hi > eps_lo:
        raise BracketInvalid(f"empty bracket [{eps_lo}, {eps_hi}]")
    pr = prober or ScaleProber(p, L, phases, resolution, center, node_cap, jobs)
    lo_probe = pr.probe(eps_lo)
    if not lo_probe.all_below:
        raise BracketInvalid(f"L={L:g}: at eps_lo={eps_lo:g} some phase is already "
                             f"past the lower threshold (states {lo_probe.states})")
    hi_probe = pr.probe(eps_hi)
    if not hi_probe.all_above:
        raise BracketInvalid(f"L={L:g}: at eps_hi={eps_hi:g} some phase has not reached "
                             f"the upper threshold (states {hi_probe.states})")
    a, b = float(eps_lo), float(eps_hi)
    while b - a > tol_eps:
        m = 0.5 * (a + b)
        if pr.probe(m).all_below:
            a = m
        else:
            b = m
    lower = (a, b)
    a, b = float(eps_lo), float(eps_hi)
    while b - a > tol_eps:
        m = 0.5 * (a + b)
        if pr.probe(m).all_above:
            b = m
        else:
            a = m
    upper = (a, b)
    e1 = 0.5 * sum(lower)
    e2 = 0.5 * sum(upper)
    if e1 > e2:
        e1 = e2 = 0.5 * (e1 + e2)
    return IntervalEstimate(float(L), e1, e2, lower, upper, pr.count, pr.resolution)


def bisection_budget(eps_lo, eps_hi, tol_eps):
    """Probes one endpoint bisection may spend."""
    return max(0, math.ceil(math.log2((eps_hi - eps_lo) / tol_eps)))


# -- collapse --------------------------------------------------------------

@dataclass
class CriticalReport:
    per_scale: list                 # (L, eps1, eps2)
    eps0_estimate: float
    eps0_uncertainty: float
    collapse_verdict: str
    tol_eps: float
    bracket: tuple
    resolution: float
    phases: list
    strictly_decreasing: bool
    probes: list = field(default_factory=list)
    criterion_version: str = CRITERION_VERSION

    @property
    def widths(self):
        return [e2 - e1 for _, e1, e2 in self.per_scale]

    def to_dict(self):
        return {
            "per_scale": [{"L": L, "eps1": e1, "eps2": e2, "width": e2 - e1}
                          for L, e1, e2 in self.per_scale],
            "eps0_estimate": self.eps0_estimate,
            "eps0_uncertainty": self.eps0_uncertainty,
            "collapse_verdict": self.collapse_verdict,
            "strictly_decreasing": self.strictly_decreasing,
            "tol_eps": self.tol_eps,
            "bracket": list(self.bracket),
            "resolution": self.resolution,
            "phases": [[float(c) for c in a] for a in self.phases],
            "probes": list(self.probes),
            "criterion_version": self.criterion_version,
        }

    def sweep_csv(self, fh=None):
        from .contour import fmt
        own = fh is None
        if own:
            fh = io.StringIO()
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("L", "eps1", "eps2", "width"))
        for L, e1, e2 in self.per_scale:
            wr.writerow((fmt(L), fmt(e1), fmt(e2), fmt(e2 - e1)))
        return fh.getvalue() if own else None


def collapse_verdict(widths, tol_eps):
    """
    Collapses: widths never grow from one scale to the next and the last is
    below ``2 tol_eps``.  PersistentInterval: the last two widths differ by
    less than 10% while both exceed ``10 tol_eps``.  Anything else is
    Inconclusive.
    """
    w = [float(x) for x in widths]
    if all(b <= a for a, b in zip(w, w[1:])) and w[-1] < 2 * tol_eps:
        return COLLAPSES
    a, b = w[-2], w[-1]
    if min(a, b) > 10 * tol_eps and abs(b - a) / max(a, b) < 0.10:
        return PERSISTENT
    return INCONCLUSIVE


def collapse_analysis(p, L_list, bracket, phases=None, tol_eps=0.005, resolution=8.0,
                      center=(0.0, 0.0), node_cap=DEFAULT_NODE_CAP, jobs=1) -> CriticalReport:
    """
    Spanning interval at each window size and a verdict on its collapse.

    ``eps0_estimate`` is the midpoint of the narrowest interval (the larger
    window wins ties) and ``eps0_uncertainty`` its half-width plus
    ``tol_eps``.
    """
    L_list = [float(L) for L in L_list]
    if len(L_list) < 3 or any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must hold at least three increasing scales")
    if phases is None:
        phases = default_phases(p)
    lo, hi = float(bracket[0]), float(bracket[1])
    per, probes, res_used = [], [], []
    for L in L_list:
        est = estimate_interval(p, L, lo, hi, phases, tol_eps, resolution, center, node_cap, jobs)
        per.append((L, est.eps1, est.eps2))
        probes.append(est.probes)
        res_used.append(est.resolution)
    widths = [e2 - e1 for _, e1, e2 in per]
    k = min(range(len(per)), key=lambda i: (widths[i], -i))
    _, e1, e2 = per[k]
    return CriticalReport(
        per_scale=per,
        eps0_estimate=0.5 * (e1 + e2),
        eps0_uncertainty=0.5 * (e2 - e1) + tol_eps,
        collapse_verdict=collapse_verdict(widths, tol_eps),
        tol_eps=float(tol_eps),
        bracket=(lo, hi),
        resolution=min(res_used),
        phases=[np.asarray(a, dtype=float) for a in phases],
        strictly_decreasing=all(b < a for a, b in zip(widths, widths[1:])),
        probes=probes,
    )
