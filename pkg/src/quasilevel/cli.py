"""
Command-line front end.

    quasilevel <subcommand> --config <path> [--jobs N] [--out DIR]
    quasilevel build --star-n 5 --amps 1.0 [--global-phase 0] [--out FILE]

Every run writes its result files plus ``manifest.json`` (config snapshot,
timings and sha256 digests of the results) into the output directory.
Failures print an error JSON on stderr and exit with 2 (config), 3
(resource cap) or 4 (bracket or other precondition).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, dump_config, load_config
from .contour import Window, check_node_cap, contours_to_csv, trace_level
from .critical import collapse_analysis, default_phases, random_phases
from .errors import BracketInvalid, ConfigError, ResourceCapError, ShiftNotFound
from .lattice import Ray, find_integer_shift
from .potential import (DihedralDescriptor, build_star_potential, check_dihedral_symmetry,
                        phase_shift, potential_from_spec, potential_to_spec)
from .svg import render_svg
from .topology import TopologyConfig, classify_lines, measure_D_of_eps

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_PRECONDITION = 0, 2, 3, 4
RNG_NAME = "numpy.random.default_rng (PCG64)"

log = logging.getLogger("quasilevel")


def round12(obj):
    """Floats rounded to 12 significant digits, recursively, for JSON output."""
    if isinstance(obj, float):
        return float(format(obj, ".12g"))
    if isinstance(obj, (np.floating,)):
        return float(format(float(obj), ".12g"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round12(obj.tolist())
    if isinstance(obj, dict):
        return {k: round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round12(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(round12(obj), sort_keys=True, indent=2) + "\n"


class Run:
    """Output bookkeeping for one invocation."""

    def __init__(self, out_dir: Path):
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = {}
        self.timings = {}

    def write(self, name, text):
        path = self.out / name
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def stage(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = round(time.perf_counter() - self.t, 6)
        return _Timer()


# -- pipelines -------------------------------------------------------------

def _phases_for(p, spec, seed):
    if spec == "default":
        return default_phases(p)
    if isinstance(spec, dict):
        return random_phases(p, spec["random"], seed)
    out = []
    for a in spec:
        if len(a) != p.dim_n:
            raise ConfigError(f"phase vectors must have length {p.dim_n}", key="phases")
        out.append(np.asarray(a, dtype=float))
    return out


def run_trace(p, prm, cfg, run, jobs):
    if prm["phase"] is not None:
        if len(prm["phase"]) != p.dim_n:
            raise ConfigError(f"phase must have length {p.dim_n}", key="phase")
        p = phase_shift(p, prm["phase"])
    w = Window.from_resolution(prm["center"], prm["half_size"], prm["resolution"])
    check_node_cap(w)
    with run.stage("trace"):
        cs = trace_level(p, w, prm["eps"], jobs=jobs)
    with run.stage("export"):
        run.write("contours.csv", contours_to_csv(cs))
        sectors = p.symmetry if prm["sectors"] else None
        run.write("contours.svg", render_svg(cs, sectors=sectors, title=f"level {prm['eps']:.12g}"))
        run.write("trace.json", to_json({
            "level": prm["eps"], "window": {"center": list(w.center), "half_size": w.half_size,
                                            "nx": w.nx, "ny": w.ny, "h": w.h},
            "spanning": cs.spanning, "spanning_directions": sorted(cs.spanning_directions),
            "n_components": cs.n_components, "n_open": cs.n_open, "n_closed": cs.n_closed,
        }))


def run_classify(p, prm, cfg, run, jobs):
    tcfg = TopologyConfig.from_dict(prm["thresholds"])
    L0 = prm["L_list"][0]
    w = Window.from_resolution(prm["center"], L0, prm["resolution"])
    for L in prm["L_list"]:
        check_node_cap(Window.from_resolution(prm["center"], L, prm["resolution"]))
    with run.stage("seed"):
        cs = trace_level(p, w, prm["eps"], jobs=jobs)
        seeds = [c for c in cs.contours if c.spanning][:prm["max_lines"]]
    with run.stage("classify"):
        lines = classify_lines(p, seeds, prm["L_list"], prm["resolution"], prm["center"],
                               tcfg, jobs=jobs)
    counts = {}
    for ln in lines:
        counts[ln.verdict] = counts.get(ln.verdict, 0) + 1
    run.write("classify.json", to_json({
        "level": prm["eps"], "seed_scale": L0, "lines": [ln.to_dict() for ln in lines],
        "counts": counts, "thresholds": tcfg.to_dict(),
        "criterion_version": tcfg.criterion_version,
    }))


def run_critical(p, prm, cfg, run, jobs):
    phases = _phases_for(p, prm["phases"], cfg["seed"])
    with run.stage("collapse_analysis"):
        rep = collapse_analysis(p, prm["L_list"], prm["bracket"], phases, prm["tol_eps"],
                                prm["resolution"], tuple(prm["center"]), jobs=jobs)
    run.write("critical.json", to_json(rep.to_dict()))
    run.write("sweep.csv", rep.sweep_csv())


def run_dcurve(p, prm, cfg, run, jobs):
    tcfg = TopologyConfig.from_dict(prm["thresholds"])
    for L in prm["L_list"]:
        check_node_cap(Window.from_resolution(prm["center"], L, prm["resolution"]))
    with run.stage("d_curve"):
        dc = measure_D_of_eps(p, prm["eps_list"], prm["L_list"], prm["resolution"],
                              tuple(prm["center"]), tcfg, jobs=jobs)
    run.write("d_curve.csv", dc.to_csv())
    run.write("d_curve.json", to_json({
        "entries": [{"eps": e, "D": D, "saturated": s, "L_max": L} for e, D, s, L in dc.entries],
        "per_scale": [{"eps": e, "D_by_L": [[L, D] for L, D in dc.per_scale[e]]}
                      for e in prm["eps_list"]],
        "saturation": tcfg.saturation,
    }))


def run_lattice(p, prm, cfg, run, jobs):
    d = np.asarray(prm["direction"], dtype=float)
    if not np.linalg.norm(d) > 0:
        raise ConfigError("direction must be nonzero", key="direction")
    origin = np.zeros(len(d)) if prm["origin"] is None else np.asarray(prm["origin"], dtype=float)
    if origin.shape != d.shape:
        raise ConfigError("origin and direction lengths differ", key="origin")
    ray = Ray.through(origin, d, prm["two_sided"])
    deltas = prm["delta"] if isinstance(prm["delta"], list) else [prm["delta"]]
    results = []
    with run.stage("search"):
        for delta in deltas:
            try:
                s = find_integer_shift(ray, delta, prm["min_dist"], prm["max_steps"])
                results.append(dict(s.to_dict(), delta=delta, found=True))
            except ShiftNotFound as exc:
                results.append({"delta": delta, "found": False, "steps": exc.steps})
    doc = results[0] if not isinstance(prm["delta"], list) else {"results": results}
    run.write("lattice.json", to_json(doc))


def run_symmetry(p, prm, cfg, run, jobs):
    n = prm["n"] if prm["n"] is not None else (p.symmetry.n if p.symmetry else None)
    if n is None:
        raise ConfigError("potential declares no symmetry; give parameters.n", key="n")
    d = DihedralDescriptor(n, tuple(prm["center"]), prm["axis_angle0"])
    with run.stage("check"):
        rep = check_dihedral_symmetry(p, d, prm["samples"], prm["tol"], seed=cfg["seed"])
    run.write("symmetry.json", to_json(dict(rep.to_dict(), n=n, samples=prm["samples"],
                                            tol=prm["tol"])))


PIPELINES = {
    "trace": run_trace,
    "classify": run_classify,
    "critical": run_critical,
    "d-curve": run_dcurve,
    "lattice-approx": run_lattice,
    "symmetry-check": run_symmetry,
}


def run(cfg: dict, out_dir, jobs: int = 1) -> dict:
    """Execute a normalised config; returns the manifest (also written to ``manifest.json``)."""
    started = datetime.now(timezone.utc).isoformat()
    r = Run(Path(out_dir))
    p = potential_from_spec(cfg["potential"])
    PIPELINES[cfg["command"]](p, cfg["parameters"], cfg, r, jobs)
    manifest = {
        "tool": "quasilevel",
        "version": __version__,
        "config": cfg,
        "rng": {"name": RNG_NAME, "seed": cfg["seed"]},
        "jobs": jobs,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "timings": r.timings,
        "outputs": dict(sorted(r.files.items())),
    }
    (r.out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


# -- argument handling -----------------------------------------------------

def _error(kind, message, code, key=None):
    doc = {"error": kind, "message": str(message), "exit_code": code}
    if key is not None:
        doc["key"] = key
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def _parser():
    ap = argparse.ArgumentParser(prog="quasilevel", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--out", default="out")
    b = sub.add_parser("build", help="write a star potential spec")
    b.add_argument("--star-n", type=int, required=True)
    b.add_argument("--amps", type=float, nargs="+", default=[1.0])
    b.add_argument("--global-phase", type=float, default=0.0)
    b.add_argument("--out", default="-")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "build":
            p = build_star_potential(args.star_n, args.amps, args.global_phase)
            text = json.dumps(potential_to_spec(p), sort_keys=True, indent=2) + "\n"
            if args.out == "-":
                sys.stdout.write(text)
            else:
                Path(args.out).write_text(text)
            return EXIT_OK
        cfg = load_config(args.config)
        if cfg["command"] != args.command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}",
                              key="command")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1", key="jobs")
        run(cfg, args.out, args.jobs)
        return EXIT_OK
    except ConfigError as exc:
        return _error("ConfigError", exc, EXIT_CONFIG, exc.key)
    except ResourceCapError as exc:
        return _error("ResourceCapError", exc, EXIT_CAP)
    except BracketInvalid as exc:
        return _error("BracketInvalid", exc, EXIT_PRECONDITION)
    except ValueError as exc:
        return _error("PreconditionError", exc, EXIT_PRECONDITION)


def entry():
    sys.exit(main())


__all__ = ["main", "run", "dump_config"]
