"""
Experiment configuration: parsing, validation and normalisation.

A config is one JSON object::

    {"command": "critical", "potential": {...} or "path/to/spec.json",
     "seed": 0, "parameters": {...}}

Every parameter has a default and a range check; unknown keys anywhere are
rejected with a :class:`ConfigError` that names the key.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import ConfigError
from .potential import load_potential, potential_from_spec, potential_to_spec
from .topology import TopologyConfig

COMMANDS = ("trace", "classify", "critical", "d-curve", "lattice-approx", "symmetry-check")
TOP_KEYS = {"command", "potential", "seed", "parameters"}


def _num(lo=None, hi=None, lo_open=False, integer=False):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key} must be a number", key=key)
        if integer and int(v) != v:
            raise ConfigError(f"{key} must be an integer", key=key)
        v = int(v) if integer else float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{key} must be finite", key=key)
        if lo is not None and (v <= lo if lo_open else v < lo):
            raise ConfigError(f"{key}={v} is below the allowed range", key=key)
        if hi is not None and v > hi:
            raise ConfigError(f"{key}={v} is above the allowed range", key=key)
        return v
    return check


def _vec(length=None, inner=None):
    inner = inner or _num()

    def check(key, v):
        if not isinstance(v, (list, tuple)):
            raise ConfigError(f"{key} must be a list", key=key)
        if length is not None and len(v) != length:
            raise ConfigError(f"{key} must have {length} entries", key=key)
        return [inner(key, x) for x in v]
    return check


def _increasing(inner):
    def check(key, v):
        out = _vec(inner=inner)(key, v)
        if not out or any(b <= a for a, b in zip(out, out[1:])):
            raise ConfigError(f"{key} must be a non-empty increasing list", key=key)
        return out
    return check


def _bool(key, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{key} must be true or false", key=key)
    return v


def _phases(key, v):
    if v == "default":
        return v
    if isinstance(v, dict):
        if set(v) - {"random"}:
            bad = sorted(set(v) - {"random"})[0]
            raise ConfigError(f"unknown key {bad!r} in {key}", key=bad)
        return {"random": _num(1, 1000, integer=True)(key + ".random", v.get("random"))}
    if isinstance(v, list) and v:
        return [_vec()(key, a) for a in v]
    raise ConfigError(f"{key} must be \"default\", a list of vectors or {{\"random\": k}}", key=key)


def _thresholds(key, v):
    if not isinstance(v, dict):
        raise ConfigError(f"{key} must be an object", key=key)
    return TopologyConfig.from_dict(v).to_dict()


def _bracket(key, v):
    lo, hi = _vec(2)(key, v)
    if not hi > lo:
        raise ConfigError(f"{key} must satisfy lo < hi", key=key)
    return [lo, hi]


def _delta(key, v):
    if isinstance(v, list):
        return [_num(0, 0.5, lo_open=True)(key, x) for x in v]
    return _num(0, 0.5, lo_open=True)(key, v)


REQUIRED = object()
_RES = _num(4)
_POS = _num(0, lo_open=True)

SCHEMAS = {
    "trace": {
        "eps": (_num(), REQUIRED),
        "center": (_vec(2), [0.0, 0.0]),
        "half_size": (_POS, REQUIRED),
        "resolution": (_RES, 8.0),
        "sectors": (_bool, False),
        "phase": (_vec(), None),
    },
    "classify": {
        "eps": (_num(), REQUIRED),
        "center": (_vec(2), [0.0, 0.0]),
        "L_list": (_increasing(_POS), REQUIRED),
        "resolution": (_RES, 8.0),
        "max_lines": (_num(1, integer=True), 20),
        "thresholds": (_thresholds, {}),
    },
    "critical": {
        "bracket": (_bracket, REQUIRED),
        "tol_eps": (_POS, 0.005),
        "L_list": (_increasing(_POS), REQUIRED),
        "resolution": (_RES, 8.0),
        "phases": (_phases, "default"),
        "center": (_vec(2), [0.0, 0.0]),
    },
    "d-curve": {
        "eps_list": (_vec(), REQUIRED),
        "L_list": (_increasing(_POS), REQUIRED),
        "resolution": (_RES, 8.0),
        "center": (_vec(2), [0.0, 0.0]),
        "thresholds": (_thresholds, {}),
    },
    "lattice-approx": {
        "origin": (_vec(), None),
        "direction": (_vec(), REQUIRED),
        "two_sided": (_bool, False),
        "delta": (_delta, REQUIRED),
        "min_dist": (_num(0), 0.0),
        "max_steps": (_num(1, 10 ** 9, integer=True), 10 ** 6),
    },
    "symmetry-check": {
        "samples": (_num(1, 10 ** 7, integer=True), 10_000),
        "tol": (_POS, 1e-10),
        "n": (_num(3, integer=True), None),
        "center": (_vec(2), [0.0, 0.0]),
        "axis_angle0": (_num(), 0.0),
    },
}


def parse_config(doc: dict, base_dir=None) -> dict:
    """
    Validate a config document and return it normalised (defaults filled in,
    the potential as an inline spec).
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for k in doc:
        if k not in TOP_KEYS:
            raise ConfigError(f"unknown key {k!r}", key=k)
    cmd = doc.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}", key="command")
    if "potential" not in doc:
        raise ConfigError("missing key 'potential'", key="potential")
    pot = doc["potential"]
    if isinstance(pot, str):
        path = Path(pot)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            pot = potential_to_spec(load_potential(path))
        except OSError as exc:
            raise ConfigError(f"cannot read potential file: {exc}", key="potential") from exc
    elif isinstance(pot, dict):
        pot = potential_to_spec(potential_from_spec(pot))
    else:
        raise ConfigError("potential must be a spec object or a file path", key="potential")
    seed = _num(0, integer=True)("seed", doc.get("seed", 0))
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be an object", key="parameters")
    schema = SCHEMAS[cmd]
    for k in params:
        if k not in schema:
            raise ConfigError(f"unknown key {k!r} for command {cmd}", key=k)
    out = {}
    for k, (check, default) in schema.items():
        if k in params:
            out[k] = check(k, params[k]) if params[k] is not None else None
        elif default is REQUIRED:
            raise ConfigError(f"missing parameter {k!r} for command {cmd}", key=k)
        else:
            out[k] = default
    return {"command": cmd, "potential": pot, "seed": seed, "parameters": out}


def load_config(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", key=None) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", key=None) from exc
    return parse_config(doc, base_dir=path.parent)


def dump_config(cfg: dict) -> str:
    """Canonical text of a normalised config (sorted keys)."""
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"
