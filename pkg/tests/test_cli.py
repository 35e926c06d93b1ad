import csv
import io
import json
import math
import subprocess
import sys

import pytest

from annuli.cli import run


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _json(capsys, *argv):
    code, out, err = _run(capsys, *argv, "--format", "json")
    assert code == 0, err
    return json.loads(out)


EUCLID = ("--metric", "euclidean", "--tau", "0.5", "--sigma", "1")


def test_bound(capsys):
    data = _json(capsys, "bound", *EUCLID)
    assert data["r_star"] == pytest.approx(2 - math.sqrt(3), abs=1e-11)
    assert data["schema_version"] == 1 and data["command"] == "bound"


def test_solve_c_and_profile_dump(capsys, tmp_path):
    dump = tmp_path / "profile.csv"
    data = _json(capsys, "solve-c", "--metric", "inverse_radius", "--tau", "0.5", "--sigma", "1",
                 "--r", "0.25", "--dump-profile", str(dump))
    assert data["c"] == pytest.approx(-0.75, abs=1e-11)
    rows = list(csv.DictReader(dump.open()))
    assert list(rows[0].keys()) == ["s", "phi", "q", "sPhiPrime", "K"]
    # s phi' = 2 everywhere for this power map, so K = 1.25
    assert all(float(r["K"]) == pytest.approx(1.25, rel=1e-9) for r in rows)


def test_map_eval_from_saved_profile(capsys, tmp_path):
    saved = tmp_path / "prof.json"
    code, _, _ = _run(capsys, "solve-c", *EUCLID, "--r", "0.3", "--out", str(saved))
    assert code == 0
    fwd = _json(capsys, "map-eval", "--profile", str(saved), "--at", "0.7,0.5", "--at", "1,0")
    assert fwd["direction"] == "forward"
    assert fwd["points"][1]["modulus"] == pytest.approx(1.0, abs=1e-12)
    w = fwd["points"][0]["modulus"]
    inv = _json(capsys, "map-eval", "--profile", str(saved), "--at", f"{w},0.5", "--inverse")
    assert inv["points"][0]["modulus"] == pytest.approx(0.7, abs=1e-9)
    assert inv["points"][0]["ode_residual"] < 1e-6


def test_distortion_and_energy_agree(capsys):
    common = ("--metric", "hyperbolic_disk", "--tau", "0.5", "--sigma", "0.9", "--r", "0.5")
    K = _json(capsys, "distortion", *common)["K_rho"]
    E = _json(capsys, "energy", *common)["E_rho"]
    assert E == pytest.approx(K, rel=1e-9)
    p = _json(capsys, "distortion", *EUCLID, "--map", "power:2")
    assert p["K_rho"] == pytest.approx(math.pi * 2.5 * 0.75 / 2, rel=1e-10)


def test_report_sweep_csv(capsys):
    code, out, _ = _run(capsys, "report", *EUCLID, "--sweep", "r=0.1:0.5:0.2", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["regime"] for r in rows] == ["fat", "nitsche_range", "nitsche_range"]
    assert float(rows[1]["gap"]) == pytest.approx(0.0, abs=1e-9)


def test_minseq_rows(capsys):
    data = _json(capsys, "minseq", *EUCLID, "--r", "0.1", "--n-list", "10,100")
    assert [r["n"] for r in data["rows"]] == [10, 100]
    assert all(r["K_rho_n"] > data["bound"] for r in data["rows"])


def test_curvature_and_regularity_text(capsys):
    code, out, _ = _run(capsys, "curvature", "--metric", "spherical", "--s", "0.2,1.5", "--format", "text")
    assert code == 0 and "rows:" in out
    data = _json(capsys, "regularity", "--metric", "hyperbolic_disk", "--tau", "0.5", "--sigma", "0.9")
    assert data["is_regular"] is True


@pytest.mark.parametrize("check", ["lepo", "radial-min", "rotation", "fikin"])
def test_verify_checks(capsys, check):
    data = _json(capsys, "verify", check, "--metric", "hyperbolic_disk", "--tau", "0.3", "--sigma", "0.9",
                 "--r", "0.3", "--n-maps", "4")
    assert data["check"] == check
    verdict = {"lepo": "passed", "radial-min": "passed", "rotation": "invariant", "fikin": "holds"}[check]
    assert data[verdict] is True


def test_verify_mesh_small(capsys):
    data = _json(capsys, "verify", "mesh-min", *EUCLID, "--r", "0.3", "--mesh", "32x64", "--iters", "200")
    assert data["monotone"] and data["boundary_error"] < 1e-14


def test_config_merge_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"metric": "euclidean", "tau": 0.5, "sigma": 2.0}))
    a = _json(capsys, "bound", "--config", str(cfg))
    b = _json(capsys, "bound", "--config", str(cfg), "--sigma", "1")
    assert a["sigma"] == 2.0 and b["sigma"] == 1.0
    assert b["r_star"] == pytest.approx(2 - math.sqrt(3), abs=1e-11)


def test_unknown_config_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"metric": "euclidean", "tau": 0.5, "sigma": 1.0, "colour": 1}))
    code, _, err = _run(capsys, "bound", "--config", str(cfg))
    assert code == 1 and "colour" in err


@pytest.mark.parametrize("argv,code", [
    ((), 1),
    (("bound", "--metric", "euclidean"), 1),
    (("bound", "--metric", "euclidean", "--tau", "1", "--sigma", "0.5"), 2),
    (("solve-c", *EUCLID, "--r", "0.1"), 2),
    (("bound", "--metric", "nope", "--tau", "0.5", "--sigma", "1"), 2),
    (("verify", "mesh-min", *EUCLID, "--r", "0.3", "--mesh", "8x8"), 2),
    (("report", *EUCLID, "--sweep", "q=1:2:1"), 1),
    (("bound", *EUCLID, "--max-levels", "4", "--rel-tol", "1e-16", "--abs-tol", "1e-300"), 3),
])
def test_exit_codes(capsys, argv, code):
    assert _run(capsys, *argv)[0] == code


def test_degenerate_bound(capsys):
    data = _json(capsys, "bound", "--metric", "inverse_radius", "--tau", "0.5", "--sigma", "1")
    assert data["degenerate"] is True and data["r_star"] == 0.0


def test_module_entry_point_is_deterministic(tmp_path):
    args = [sys.executable, "-m", "annuli", "solve-c", *EUCLID, "--r", "0.4"]
    outs = [subprocess.run(args, capture_output=True, check=True).stdout for _ in range(2)]
    assert outs[0] == outs[1]
    # r below tau/sigma needs c < 0
    assert json.loads(outs[0])["c"] < 0
