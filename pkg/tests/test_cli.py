import hashlib
import json
import re
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from quasilevel.cli import main, run, to_json
from quasilevel.config import dump_config, load_config, parse_config
from quasilevel.contour import FunctionField, Window, trace_level
from quasilevel.errors import ConfigError
from quasilevel.potential import build_star_potential, potential_to_spec, square_potential
from quasilevel.svg import render_svg

SVG = "{http://www.w3.org/2000/svg}"


def write_cfg(tmp_path, command, parameters, potential=None, seed=0, name="cfg.json"):
    doc = {"command": command, "seed": seed, "parameters": parameters,
           "potential": potential or potential_to_spec(build_star_potential(5, [1.0]))}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def assert_manifest(out_dir):
    man = json.loads((out_dir / "manifest.json").read_text())
    files = {p.name for p in out_dir.iterdir()} - {"manifest.json"}
    assert set(man["outputs"]) == files
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((out_dir / name).read_bytes()).hexdigest() == digest
    return man


class TestCommands:
    def test_symmetry_check(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "symmetry-check", {"samples": 2000})
        code, _, err = cli(capsys, "symmetry-check", "--config", cfg, "--out", tmp_path / "o")
        assert code == 0, err
        rep = json.loads((tmp_path / "o" / "symmetry.json").read_text())
        assert rep["pass"] is True and rep["n"] == 5
        man = assert_manifest(tmp_path / "o")
        assert man["rng"]["seed"] == 0 and "PCG64" in man["rng"]["name"]

    def test_trace_square(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "trace", {"eps": 0.0, "half_size": 3.0},
                        potential=potential_to_spec(square_potential(2, 2)))
        code, _, err = cli(capsys, "trace", "--config", cfg, "--out", tmp_path / "o", "--jobs", 2)
        assert code == 0, err
        rows = (tmp_path / "o" / "contours.csv").read_text().splitlines()
        assert rows[0] == "contour_id,point_index,x,y,closed,level"
        xy = np.array([[float(v) for v in r.split(",")[2:4]] for r in rows[1:]])
        s = np.mod(xy[:, 0] + xy[:, 1] + 0.5, 1.0)
        d = np.mod(xy[:, 0] - xy[:, 1] + 0.5, 1.0)
        near = lambda t: np.minimum(t, 1 - t) < 1e-9
        assert np.all(near(s) | near(d))
        ET.fromstring((tmp_path / "o" / "contours.svg").read_bytes())
        assert_manifest(tmp_path / "o")

    def test_classify(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "classify", {"eps": 0.5, "L_list": [5, 10, 20], "max_lines": 3},
                        potential=potential_to_spec(square_potential(1, 2)))
        code, _, err = cli(capsys, "classify", "--config", cfg, "--out", tmp_path / "o")
        assert code == 0, err
        doc = json.loads((tmp_path / "o" / "classify.json").read_text())
        assert doc["counts"] == {"OpenRegular": 3}

    def test_critical(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "critical", {"bracket": [-3, 3], "L_list": [5, 10, 20]},
                        potential=potential_to_spec(square_potential(2, 2)))
        code, _, err = cli(capsys, "critical", "--config", cfg, "--out", tmp_path / "o")
        assert code == 0, err
        doc = json.loads((tmp_path / "o" / "critical.json").read_text())
        assert doc["collapse_verdict"] == "Collapses"
        assert (tmp_path / "o" / "sweep.csv").read_text().startswith("L,eps1,eps2,width\n")
        assert_manifest(tmp_path / "o")

    def test_dcurve(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "d-curve", {"eps_list": [1.0, 2.0], "L_list": [3, 6]},
                        potential=potential_to_spec(square_potential(2, 2)))
        code, _, err = cli(capsys, "d-curve", "--config", cfg, "--out", tmp_path / "o")
        assert code == 0, err
        doc = json.loads((tmp_path / "o" / "d_curve.json").read_text())
        assert [e["saturated"] for e in doc["entries"]] == [True, True]

    def test_lattice(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "lattice-approx",
                        {"direction": [1, 2 ** 0.5, 3 ** 0.5], "delta": [0.2, 0.1], "min_dist": 10})
        code, _, err = cli(capsys, "lattice-approx", "--config", cfg, "--out", tmp_path / "o")
        assert code == 0, err
        doc = json.loads((tmp_path / "o" / "lattice.json").read_text())
        assert [r["found"] for r in doc["results"]] == [True, True]
        assert all(r["dist_to_ray"] < r["delta"] for r in doc["results"])

    def test_build(self, tmp_path, capsys):
        code, out, _ = cli(capsys, "build", "--star-n", 5, "--amps", 1.0)
        assert code == 0
        spec = json.loads(out)
        assert spec == {"kind": "star", "n": 5, "amps": [1.0], "global_phase": 0.0}
        code, _, _ = cli(capsys, "build", "--star-n", 7, "--out", tmp_path / "s.json")
        assert code == 0 and (tmp_path / "s.json").exists()

    def test_entry_point(self, tmp_path):
        cfg = write_cfg(tmp_path, "symmetry-check", {"samples": 100})
        res = subprocess.run([sys.executable, "-m", "quasilevel", "symmetry-check", "--config", str(cfg),
                              "--out", str(tmp_path / "o")], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr


class TestErrors:
    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "trace", {"epss": 0.5, "half_size": 3})
        code, _, err = cli(capsys, "trace", "--config", cfg, "--out", tmp_path / "o")
        assert code == 2
        doc = json.loads(err.strip().splitlines()[-1])
        assert doc == {"error": "ConfigError", "exit_code": 2, "key": "epss", "message": doc["message"]}
        assert "epss" in doc["message"]

    def test_missing_required(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "trace", {"half_size": 3})
        code, _, err = cli(capsys, "trace", "--config", cfg)
        assert code == 2 and json.loads(err)["key"] == "eps"

    def test_command_mismatch(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "trace", {"eps": 0, "half_size": 3})
        code, _, err = cli(capsys, "critical", "--config", cfg)
        assert code == 2 and json.loads(err)["key"] == "command"

    def test_bad_json(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text("{")
        code, _, _ = cli(capsys, "trace", "--config", tmp_path / "bad.json")
        assert code == 2

    def test_resource_cap(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "trace", {"eps": 0.5, "half_size": 10 ** 4})
        code, _, err = cli(capsys, "trace", "--config", cfg, "--out", tmp_path / "o")
        assert code == 3 and json.loads(err)["error"] == "ResourceCapError"

    def test_bracket_invalid(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "critical", {"bracket": [0.5, 3], "L_list": [5, 10, 20]},
                        potential=potential_to_spec(square_potential(2, 2)))
        code, _, err = cli(capsys, "critical", "--config", cfg, "--out", tmp_path / "o")
        assert code == 4 and json.loads(err)["error"] == "BracketInvalid"

    def test_wrong_phase_length(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "trace", {"eps": 0.5, "half_size": 3, "phase": [0, 0]})
        code, _, err = cli(capsys, "trace", "--config", cfg, "--out", tmp_path / "o")
        assert code == 2 and json.loads(err)["key"] == "phase"


class TestConfig:
    def test_round_trip(self, tmp_path):
        path = write_cfg(tmp_path, "critical", {"bracket": [-2, 4], "L_list": [10, 20, 40],
                                                "phases": {"random": 3}})
        cfg = load_config(path)
        again = parse_config(json.loads(dump_config(cfg)))
        assert dump_config(again) == dump_config(cfg)
        assert cfg["parameters"]["tol_eps"] == 0.005 and cfg["parameters"]["resolution"] == 8

    def test_potential_path(self, tmp_path):
        (tmp_path / "pot.json").write_text(json.dumps(potential_to_spec(square_potential(1, 2))))
        path = write_cfg(tmp_path, "trace", {"eps": 0.5, "half_size": 3}, potential="pot.json")
        assert load_config(path)["potential"] == potential_to_spec(square_potential(1, 2))

    @pytest.mark.parametrize("params, key", [
        ({"bracket": [3, -3], "L_list": [1, 2, 3]}, "bracket"),
        ({"bracket": [-3, 3], "L_list": [3, 2, 1]}, "L_list"),
        ({"bracket": [-3, 3], "L_list": [1, 2, 3], "tol_eps": -1}, "tol_eps"),
        ({"bracket": [-3, 3], "L_list": [1, 2, 3], "phases": "some"}, "phases"),
    ])
    def test_range_checks(self, params, key):
        doc = {"command": "critical", "potential": potential_to_spec(square_potential(2, 2)),
               "parameters": params}
        with pytest.raises(ConfigError) as ei:
            parse_config(doc)
        assert ei.value.key == key

    def test_unknown_top_key(self):
        with pytest.raises(ConfigError) as ei:
            parse_config({"command": "trace", "potential": {}, "extra": 1})
        assert ei.value.key == "extra"


class TestReproducibility:
    @pytest.mark.parametrize("command, params", [
        ("trace", {"eps": 1.2, "half_size": 8, "sectors": True}),
        ("critical", {"bracket": [-2, 4], "L_list": [5, 10, 20], "phases": {"random": 2}}),
        ("d-curve", {"eps_list": [1.5, 2.0], "L_list": [5, 10]}),
    ])
    def test_byte_identical(self, tmp_path, command, params):
        cfg = load_config(write_cfg(tmp_path, command, params, seed=17))
        m1 = run(cfg, tmp_path / "a", jobs=1)
        m2 = run(json.loads(json.dumps(m1["config"])), tmp_path / "b", jobs=3)
        assert m1["outputs"] == m2["outputs"]
        for name in m1["outputs"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_twelve_digits(self):
        text = to_json({"x": 1 / 3, "y": [np.float64(2 / 3)], "n": np.int64(4)})
        assert json.loads(text) == {"x": 0.333333333333, "y": [0.666666666667], "n": 4}


class TestSvg:
    def test_empty(self):
        doc = render_svg([])
        root = ET.fromstring(doc)
        assert root.findall(f".//{SVG}path") == []
        assert root.find(f".//{SVG}g[@id='axes']") is not None

    def test_circle(self):
        cs = trace_level(FunctionField(lambda x, y: x * x + y * y), Window((0, 0), 2, 201, 201), 1.0)
        doc = render_svg(list(cs))
        root = ET.fromstring(doc)
        [path] = root.findall(f".//{SVG}path")
        assert path.get("d").endswith("Z") and path.get("class") == "closed"
        # a bare contour list is framed by its own bounding box
        nums = np.array([float(v) for v in re.findall(r"-?[\d.]+(?:e-?\d+)?", path.get("d"))]).reshape(-1, 2)
        W, H = float(root.get("width")), float(root.get("height"))
        assert nums[:, 0].min() == pytest.approx(0, abs=1e-9) and nums[:, 0].max() == pytest.approx(W)
        assert W == pytest.approx(H, rel=1e-3)
        xs = np.concatenate([c.points[:, 0] for c in cs])
        assert xs.min() == pytest.approx(-1, abs=0.01) and xs.max() == pytest.approx(1, abs=0.01)

    def test_star_sectors(self, star5):
        cs = trace_level(star5, Window.from_resolution((0, 0), 10, 8), 0.95)
        root = ET.fromstring(render_svg(cs, sectors=star5.symmetry))
        rays = root.findall(f".//{SVG}g[@id='sectors']/{SVG}line")
        assert len(rays) == 10
        assert len(root.findall(f".//{SVG}path")) == len(cs.contours)
        assert {p.get("class") for p in root.findall(f".//{SVG}path")} == {"open", "closed"}

    def test_deterministic(self, star5):
        cs = trace_level(star5, Window.from_resolution((0, 0), 5, 8), 1.2)
        assert render_svg(cs) == render_svg(cs)
