import json
import os

import numpy as np
import pytest

from polymet.cli import main
from polymet.fieldio import load_field


@pytest.fixture
def run(capsys):
    def _run(*argv):
        rc = main([str(a) for a in argv])
        out = capsys.readouterr()
        return rc, out.out, out.err

    return _run


def test_metric_recipe_and_curvature(run, tmp_path):
    path = tmp_path / "s.pmf"
    assert run("metric", "--recipe", "round_sphere", "--resolution", "256,32", "--out", path)[0] == 0
    g = load_field(str(path))
    assert g.components.shape == (256, 32, 2, 2)
    rc, out, _ = run("curvature", "--metric", path)
    data = json.loads(out)
    assert rc == 0
    assert abs(data["scalar"]["max"] - 2.0) < 1e-4 and abs(data["scalar"]["min"] - 2.0) < 1e-4


def test_suite_command_writes_all_formats(run, tmp_path):
    out = tmp_path / "cone.json"
    rc, text, _ = run("cone", "--set", "cone.pairs=3", "--set", "cone.perturbations=10", "--out", out, "--no-figures",
                      "--timestamp", "T")
    assert rc == 0
    assert "PASS:" in text
    data = json.loads(out.read_text())
    assert data["timestamp"] == "T" and data["overall_pass"]
    rc, csv_text, _ = run("report", "--in", out, "--format", "csv")
    assert rc == 0
    assert len(csv_text.strip().splitlines()) == len(data["checks"]) + 1
    rc, _, _ = run("report", "--in", out, "--format", "text", "--figures", tmp_path / "figs")
    assert rc == 0
    assert (tmp_path / "figs" / "cone_checks.png").exists()


def test_figures_next_to_report(run, tmp_path):
    out = tmp_path / "scales.json"
    rc, _, _ = run("scales", "--set", "scales.fields=4", "--out", out)
    assert rc == 0
    assert (tmp_path / "scales_checks.png").exists()
    assert (tmp_path / "scales_scales_warped_trend.png").exists()


def test_failing_check_exits_one(run, tmp_path):
    rc, text, _ = run("cone", "--set", "cone.pairs=2", "--set", "cone.perturbations=4", "--set", "cone.john_square=1e-300",
                      "--format", "text")
    assert rc == 1
    assert "FAIL" in text


def test_errors_exit_two(run, tmp_path):
    rc, _, err = run("curvature", "--metric", tmp_path / "missing.pmf")
    assert rc == 2 and "polymet: error" in err
    rc, _, err = run("cone", "--set", "cone.width=3")
    assert rc == 2 and "unknown parameter" in err
    rc, _, err = run("index", "callias", "--potential", "sine")
    assert rc == 2


def test_geodesic_csv(run, tmp_path):
    path = tmp_path / "t.pmf"
    run("metric", "--recipe", "flat_torus", "--out", path)
    rc, out, _ = run("geodesic", "--metric", path, "--x", "1,1", "--v", "1,0.5", "--t", "1", "--dt", "0.01")
    rows = out.strip().splitlines()
    assert rc == 0
    assert rows[0] == "t,x0,x1,v0,v1,speed"
    last = np.array([float(v) for v in rows[-1].split(",")])
    assert np.abs(last[:3] - [1.0, 2.0, 1.5]).max() < 1e-12


def test_cone_tools(run, tmp_path):
    samples = tmp_path / "sq.txt"
    samples.write_text("1 1\n1 -1\n")
    rc, out, _ = run("cone", "john", "--samples", samples)
    assert rc == 0 and abs(json.loads(out)["bilipschitz_factor"] - np.sqrt(2)) < 1e-6
    path = tmp_path / "t.pmf"
    run("metric", "--recipe", "flat_torus", "--resolution", "16", "--out", path)
    rc, out, _ = run("cone", "validate", "--metric", path)
    assert rc == 0 and json.loads(out)["valid"]
    rc, out, _ = run("cone", "validate", "--metric", path, "--inertia", "1,1")
    report = json.loads(out)
    assert rc == 1 and not report["valid"] and report["report"][0]["component"] == 1


def test_polymetric_sobolev(run, tmp_path):
    one, two = tmp_path / "one.pmp", tmp_path / "two.pmf"
    run("metric", "--recipe", "flat_torus", "--resolution", "16", "--out", two)
    run("metric", "--recipe", "bumpy_torus", "--resolution", "16", "--out", one)
    rc, out, _ = run("scales", "sobolev", "--G", two, "--H", one, "--k", "1", "--fields", "6")
    data = json.loads(out)
    assert rc == 0
    lo, hi = data["envelope"]
    assert lo <= data["C1"] <= data["C2"] <= hi
    dup = tmp_path / "dup.pmp"
    run("metric", "--recipe", "flat_torus", "--resolution", "16", "--copies", "2", "--out", dup)
    rc, out, _ = run("scales", "sobolev", "--G", two, "--H", dup, "--k", "1", "--fields", "3")
    data = json.loads(out)
    assert data["envelope"] is None
    assert data["C1"] == pytest.approx(np.sqrt(2), rel=1e-12)


def test_index_and_chern_tools(run, tmp_path):
    rc, out, _ = run("index", "callias", "--potential", "minus-tanh", "--N", "600")
    assert rc == 0 and json.loads(out)["index"] == -1
    spec = tmp_path / "fam.ini"
    spec.write_text("[family]\nrecipe = bumpy_torus\nvalues = 0,0.1,0.2\nresolution = 17\nfunctional = euler_integral\n")
    rc, out, _ = run("chern", "family", "--spec", spec)
    assert rc == 0 and json.loads(out)["max_deviation"] < 1e-4
    rc, out, _ = run("index", "family", "--spec", spec)
    assert rc == 0 and json.loads(out)["values"] == [0, 0, 0]
    path = tmp_path / "b.pmf"
    run("metric", "--recipe", "bumpy_torus", "--resolution", "17", "--out", path)
    rc, out, _ = run("index", "derham", "--metric", path)
    assert json.loads(out)["betti"] == [1, 2, 1]


def test_threads_variable(run, monkeypatch):
    monkeypatch.setenv("POLYMET_THREADS", "1")
    rc, out, _ = run("index", "callias", "--N", "400")
    assert rc == 0 and json.loads(out)["index"] == 1
    monkeypatch.setenv("POLYMET_THREADS", "lots")
    assert run("index", "callias", "--N", "400")[0] == 2


def test_run_config_relative_output(run, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "c.cfg").write_text("[run]\nsuite = index\nseed = 42\noutput = out/index.json\n\n[index]\nfamily_size = 2\nsphere_band = 6\n")
    rc, _, _ = run("run", "--config", "c.cfg", "--no-figures")
    assert rc == 0
    assert json.loads((tmp_path / "out" / "index.json").read_text())["overall_pass"]
    assert not os.path.exists(tmp_path / "out" / "index_checks.png")
