import json
import subprocess
import sys

import numpy as np
import pytest

from gapflow.cli import DEFAULTS, main, resolve
from gapflow.curves import read_csv


def run(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main([*args, "-o", str(out)])
    return code, out


def test_gap_row_count_and_schema(tmp_path):
    code, out = run(tmp_path, "gap", "--ensemble", "jacobi", "--n", "2", "--a", "0", "--b", "0",
                    "--method", "fredholm", "--s-from", "-0.9", "--s-to", "0.9", "--points", "19")
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 20
    assert lines[0].split(",")[:2] == ["s", "E2"]
    # 17 significant digits, '.' decimal point
    assert len(lines[1].split(",")[1].replace("-", "").replace(".", "").split("e")[0]) >= 17
    meta = json.loads(out.with_name(out.name + ".meta.json").read_text())
    assert meta["meta"]["config"]["order"] == 64 and meta["meta"]["config"]["seed"] == 42


def test_tw_route_agrees_with_fredholm(tmp_path):
    common = ["--ensemble", "jacobi", "--n", "2", "--s-from", "-0.9", "--s-to", "0.9", "--points", "19"]
    c1, f = run(tmp_path, "gap", *common, "--method", "fredholm", name="f.csv")
    c2, t = run(tmp_path, "gap", *common, "--method", "tw-ode", name="t.csv")
    assert c1 == c2 == 0
    e_f, e_t = read_csv(f.read_text())["E2"], read_csv(t.read_text())["E2"]
    assert np.max(np.abs(e_f - e_t)) < 1e-5


@pytest.mark.parametrize(
    "args",
    [
        ["gap", "--n", "0"],
        ["gap", "--ensemble", "laguerre", "--a", "-2"],
        ["gap", "--method", "mc", "--ensemble", "laguerre", "--a", "0.5", "--samples", "100"],
        ["gap", "--points", "0"],
        ["gap", "--bogus"],
        ["gap", "--ensemble", "gaussian", "--method", "painleve", "--row", "3"],
        ["spacing", "--a1", "0", "--a2-from", "-1"],
    ],
)
def test_usage_errors_exit_2(tmp_path, args):
    assert run(tmp_path, *args)[0] == 2


def test_numerical_failure_writes_partial(tmp_path, capsys):
    code, out = run(tmp_path, "gap", "--ensemble", "gaussian", "--n", "3", "--method", "painleve",
                    "--s-from", "-6", "--s-to", "2")
    assert code == 3
    err = capsys.readouterr().err
    assert "rows written" in err
    rows = int(err.split("rows written")[0].split(";")[-1])
    assert rows > 0 and len(out.read_text().splitlines()) == rows + 1


def test_diag_columns(tmp_path):
    code, out = run(tmp_path, "diag", "--ensemble", "jacobi", "--n", "2", "--a", "1", "--b", "0.5",
                    "--s-from", "-0.9", "--s-to", "0.5", "--points", "8")
    assert code == 0
    cols = read_csv(out.read_text())
    assert len(cols) == 8
    assert np.max(np.abs(cols["sigma"] + (2 * 2 + 1 + 0.5) * cols["v"])) < 1e-6


def test_diag_tiny_interval(tmp_path):
    code, out = run(tmp_path, "diag", "--ensemble", "laguerre", "--n", "2", "--a", "1",
                    "--s-from", "1e-6", "--s-to", "2e-6", "--points", "2")
    assert code == 0
    cols = read_csv(out.read_text())
    assert np.max(np.abs([cols["u"], cols["v"], cols["w"]])) < 1e-6


def test_verify_pass_and_report(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "--ensemble", "gaussian", "--n", "2", name="r.json")
    assert code == 0
    stdout = capsys.readouterr().out
    assert "all checks passed" in stdout
    report = json.loads(out.read_text())
    assert report["pass"] is True
    for entry in report["checks"]:
        assert {"name", "max_residual", "tolerance", "pass"} <= set(entry)
    assert len({e["name"] for e in report["checks"]}) == len(report["checks"])


def test_verify_fault_injection(tmp_path):
    code, out = run(tmp_path, "verify", "--ensemble", "gaussian", "--n", "2", "--perturb-sigma", "1e-3",
                    "--no-painleve", name="r.json")
    assert code == 1
    failed = {e["name"] for e in json.loads(out.read_text())["checks"] if not e["pass"]}
    assert "integrals_of_motion" in failed


def test_spacing_routes(tmp_path):
    common = ["--ensemble", "gaussian", "--n", "2", "--a1", "-0.5", "--a2-from", "-0.45",
              "--a2-to", "2.55", "--points", "30"]
    c1, f = run(tmp_path, "spacing", *common, "--method", "fredholm", name="f.csv")
    assert c1 == 0
    p = read_csv(f.read_text())["p"]
    assert np.all(p >= -1e-8)
    c2, m1 = run(tmp_path, "spacing", *common, "--method", "mc", "--seed", "7", name="m1.csv")
    c3, m2 = run(tmp_path, "spacing", *common, "--method", "mc", "--seed", "7", "--workers", "3", name="m2.csv")
    assert c2 == c3 == 0
    assert m1.read_text() == m2.read_text()
    mc = read_csv(m1.read_text())
    assert set(mc) == {"a2", "p", "stderr"}


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# example\nensemble = laguerre\nn = 3\na = 1\npoints = 7\ns_from = 0.5\ns-to = 2\n")
    cmd, resolved = resolve(["gap", "--config", str(cfg), "--points", "5"])
    assert cmd == "gap"
    assert resolved["ensemble"] == "laguerre" and resolved["n"] == 3 and resolved["points"] == 5
    assert resolved["order"] == DEFAULTS["order"]
    code, out = run(tmp_path, "gap", "--config", str(cfg), "--points", "5")
    assert code == 0 and len(out.read_text().splitlines()) == 6
    bad = tmp_path / "bad.cfg"
    bad.write_text("points\n")
    assert run(tmp_path, "gap", "--config", str(bad))[0] == 2


def test_json_output(tmp_path):
    code, out = run(tmp_path, "gap", "--ensemble", "laguerre", "--n", "1", "--a", "0", "--s-from", "0.5",
                    "--s-to", "2", "--points", "4", "--format", "json", name="g.json")
    assert code == 0
    data = json.loads(out.read_text())
    e2 = np.array(data["rows"])[:, data["columns"].index("E2")]
    assert np.allclose(e2, np.exp(-np.linspace(0.5, 2, 4)), atol=1e-12)
    assert data["meta"]["config"]["format"] == "json"


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    res = subprocess.run(
        [sys.executable, "-m", "gapflow", "gap", "--points", "3", "-o", str(out)], capture_output=True, text=True
    )
    assert res.returncode == 0 and res.stdout == ""
    assert len(out.read_text().splitlines()) == 4
