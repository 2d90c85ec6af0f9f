import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pointineq import serialize
from pointineq.cli import main, run_command


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def tri(tmp_path):
    path = tmp_path / "tri.json"
    serialize.write_document(path, {"points": [[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]]})
    return path


def only_run_dir(out: Path, prefix: str) -> Path:
    dirs = [d for d in out.iterdir() if d.name.startswith(prefix)]
    assert len(dirs) == 1
    return dirs[0]


def test_eval_report(tmp_path, tri):
    code, out, _ = run(["eval", "--config", tri, "--u", "1,1,1", "--check", "--out", tmp_path / "runs", "--json"])
    assert code == 0
    rep = json.loads(out)
    assert rep["ratio"] == pytest.approx(2 + np.sqrt(3) / 3, rel=1e-14)
    assert set(rep) >= {"i1", "i2", "ratio", "sup_index", "sup_value"}
    run_dir = only_run_dir(tmp_path / "runs", "eval-none-")
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["command"] == "eval"
    assert (run_dir / manifest["inputs"]["config"]).read_bytes() == tri.read_bytes()


def test_human_summary_and_quiet(tmp_path, tri):
    code, out, _ = run(["eval", "--config", tri, "--u", "1,1,1", "--out", tmp_path])
    assert code == 0 and "ratio" in out and "run directory" in out
    code, out, _ = run(["eval", "--config", tri, "--u", "1,1,1", "--out", tmp_path, "--quiet"])
    assert code == 0 and out == ""


def test_duplicate_points_exit_code(tmp_path):
    path = tmp_path / "dup.json"
    serialize.write_document(path, {"points": [[0.0], [0.0]]})
    code, _, err = run(["eval", "--config", path, "--u", "1,1", "--out", tmp_path])
    assert code == 2
    assert "DUPLICATE_POINTS" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--u", "1,1"],
        ["eval", "--config", "missing.json", "--u", "1,1"],
        ["sign-matrix"],
        ["no-such-command"],
        ["eval", "--config", "x.json", "--u", "a,b"],
    ],
)
def test_usage_errors_exit_2(tmp_path, argv):
    code, _, err = run(argv + ["--out", str(tmp_path)])
    assert code == 2
    assert err


def test_zero_weights_exit_2(tmp_path, tri):
    code, _, err = run(["eval", "--config", tri, "--u", "0,0,0", "--out", tmp_path])
    assert code == 2 and "ZERO_WEIGHTS" in err


def test_sign_matrix(tmp_path):
    code, out, _ = run(["sign-matrix", "-p", "5", "--json", "--out", tmp_path])
    rep = json.loads(out)
    assert code == 0 and rep["det"] == "0" and rep["rank"] == 4


def test_sphere_sigma_angles(tmp_path):
    code, out, _ = run(["sphere-sigma", "--angles", "0,1.5707963267948966,3.141592653589793,4.71238898038469",
                        "--json", "--out", tmp_path])
    rep = json.loads(out)
    assert code == 0
    assert rep["sigma_min"] == pytest.approx(np.sqrt(2) / 2 - 0.25, rel=1e-12)
    assert rep["singular_values"] == sorted(rep["singular_values"], reverse=True)


def test_unsorted_angles_exit_2(tmp_path):
    code, _, err = run(["sphere-sigma", "--angles", "1,0.5,2", "--out", tmp_path])
    assert code == 2 and "ANGLES_NOT_SORTED" in err


def test_kelvin_and_lift_write_configs(tmp_path):
    cfg = tmp_path / "c.json"
    serialize.write_document(cfg, {"points": [[2.0, 0.0], [0.0, 3.0]]})
    code, _, _ = run(["kelvin", "--config", cfg, "--center=0,0", "--out", tmp_path / "r"])
    assert code == 0
    out = json.loads((only_run_dir(tmp_path / "r", "kelvin") / "config.json").read_text())
    np.testing.assert_allclose(out["points"], [[0.5, 0.0], [0.0, 1 / 3]], rtol=1e-15)
    code, _, err = run(["kelvin", "--config", cfg, "--center=2,0", "--out", tmp_path / "r"])
    assert code == 2 and "CENTER_TOO_CLOSE" in err
    code, _, _ = run(["lift", "--config", cfg, "--out", tmp_path / "r"])
    assert code == 0


def test_augmented_evaluate_and_minimize(tmp_path):
    cfg = tmp_path / "c.json"
    serialize.write_document(cfg, {"points": [[0.0], [1.0]]})
    code, out, _ = run(["augmented", "--config", cfg, "--u", "1,1", "--up=-1", "--json", "--out", tmp_path])
    assert code == 0 and json.loads(out)["value"] == pytest.approx(2 / 3, rel=1e-15)
    code, out, _ = run(["augmented", "--config", cfg, "--minimize", "--seed", "1", "--json", "--out", tmp_path])
    assert code == 0 and json.loads(out)["value"] <= 2 / 3


def test_missing_seed_is_drawn_and_reported(tmp_path, tri):
    code, _, err = run(["min-u", "--config", tri, "--restarts", "1", "--iters", "5", "--out", tmp_path])
    assert code == 0
    seed = int(err.split("seed:")[1].split()[0])
    run_dir = only_run_dir(tmp_path, f"min-u-{seed}-")
    assert json.loads((run_dir / "manifest.json").read_text())["seed"] == seed


def test_stress_csv_and_rerun_identical(tmp_path):
    argv = ["stress", "-p", "4", "-m", "1", "--separations", "10,100", "--seed", "3",
            "--restarts", "2", "--iters", "40", "--out", tmp_path / "a"]
    assert run(argv)[0] == 0
    first = only_run_dir(tmp_path / "a", "stress-3-")
    assert (first / "stress.csv").read_text().startswith("separation,min_ratio_estimate\n")
    code, _, _ = run(["rerun", first / "manifest.json", "--out", tmp_path / "b"])
    assert code == 0
    second = only_run_dir(tmp_path / "b", "stress-3-")
    assert second.name == first.name
    for name in ("report.json", "stress.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_estimate_c_artifacts_and_thread_independence(tmp_path):
    base = ["estimate-c", "-p", "3", "-m", "1", "--seed", "5", "--restarts", "2", "--iters", "10", "--inner-iters", "10"]
    assert run(base + ["--workers", "1", "--out", tmp_path / "w1"])[0] == 0
    assert run(base + ["--workers", "4", "--out", tmp_path / "w4"])[0] == 0
    a = only_run_dir(tmp_path / "w1", "estimate-c-5-")
    b = only_run_dir(tmp_path / "w4", "estimate-c-5-")
    for name in ("report.json", "history.csv", "best_config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = json.loads((a / "report.json").read_text())
    assert "exploratory" in rep["label"]


def test_search_sigma_and_min_critical(tmp_path, tri):
    code, out, _ = run(["search-sigma", "-p", "4", "-m", "1", "--seed", "2", "--iters", "30", "--restarts", "1",
                        "--json", "--out", tmp_path])
    assert code == 0 and json.loads(out)["best_value"] > 0
    code, out, _ = run(["min-critical", "--config", tri, "--seed", "2", "--restarts", "2", "--json", "--out", tmp_path])
    assert code == 0 and json.loads(out)["value"] > 0
    code, out, _ = run(["critical-residual", "--config", tri, "--u", "1,0,0", "--json", "--out", tmp_path])
    assert code == 0 and "r1" in json.loads(out)


def test_invalid_dimension_exit_2(tmp_path):
    code, _, err = run(["estimate-c", "-p", "3", "-m", "3", "--seed", "1", "--out", tmp_path])
    assert code == 2 and "INVALID_DIMENSION" in err


def test_main_entry_point(tmp_path, capsys):
    assert main(["sign-matrix", "-p", "2", "--out", str(tmp_path), "--quiet"]) == 0


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pointineq", "sign-matrix", "-p", "4", "--json", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["det"] == "1"
