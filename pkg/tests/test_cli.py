import csv
import json
import subprocess
import sys

import pytest

from relkin.cli import RunConfig, main
from relkin.kernels import KernelSpec
from relkin.quadrature import QuadratureSpec


def _load(path):
    d = json.loads(path.read_text())
    d.pop("timestamp")
    return d


def test_run_config_round_trip():
    cfg = RunConfig("representations", KernelSpec("soft", -1.0, 0.3, c_phi=2.0, epsilon=0.2),
                    QuadratureSpec(20, 10, 30, truncation_r=25.0, omega_order=12), "x.json", 7, 2, "json",
                    {"l": "0.0,1.0"})
    back = RunConfig.from_ini(cfg.to_ini())
    assert back == cfg


def test_kernel_keys_a_and_b(tmp_path):
    ini = tmp_path / "k.ini"
    ini.write_text("[kernel]\nb = 1.0\ngamma = 0.4\n")
    out = tmp_path / "eq.json"
    assert main(["equilibrium", "--kernel", str(ini), "--out", str(out)]) == 0
    k = json.loads(out.read_text())["config"]["kernel"]
    assert k["family"] == "soft" and k["rho"] == -1.0 and k["gamma"] == 0.4


def test_invalid_gamma_exits_2(tmp_path, capsys):
    assert main(["coercivity", "--gamma", "1.5", "--out", str(tmp_path / "c.csv")]) == 2
    assert "(0, 1)" in capsys.readouterr().err
    assert not (tmp_path / "c.csv").exists()


def test_unknown_key_exits_2(tmp_path):
    assert main(["equilibrium", "--quad", "radial=3", "--out", str(tmp_path / "e.json")]) == 2


def test_geometry_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["geometry", "--n", "2e4", "--n-frame", "2000", "--n-jacobian", "20", "--seed", "7", "--threads", "1"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    da, db = _load(a), _load(b)
    assert da == db
    assert da["schemaVersion"] == 1 and da["passed"]


def test_literal_jacobian_flag_fails(tmp_path, capsys):
    out = tmp_path / "g.json"
    rc = main(["geometry", "--n", "1000", "--n-frame", "100", "--n-jacobian", "5", "--literal-jacobian", "--out", str(out)])
    assert rc == 1
    assert "jacobian.pq" in json.loads(out.read_text())["failures"]


def test_jacobian_scan_csv(tmp_path):
    out = tmp_path / "jac.csv"
    assert main(["jacobian-scan", "--q", "1,0,0", "--omega", "0,0,1", "--grid", "-1:1:1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["p1", "p2", "p3", "det"] and len(rows) == 27
    side = json.loads(out.with_suffix(".json").read_text())
    assert "minAbsDet" in side["metrics"]


def test_coercivity_csv_columns(tmp_path):
    out = tmp_path / "coer.csv"
    rc = main(["coercivity", "--family", "g1", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["fId", "dirichlet", "nForm", "fractionalSq", "ratio"]
    assert rows[0]["fId"] == "g1"


def test_counterexample_requires_constant_model(tmp_path):
    assert main(["counterexample", "--kernel", "angular_model=canonical", "--out", str(tmp_path / "c.json")]) == 2


def test_save_config_and_reload(tmp_path):
    ini, out = tmp_path / "run.ini", tmp_path / "h.json"
    assert main(["hydrodynamics", "--seed", "3", "--out", str(out), "--save-config", str(ini)]) == 0
    first = _load(out)
    assert main(["hydrodynamics", "--config", str(ini)]) == 0
    assert _load(out) == first


def test_report_aggregates(tmp_path):
    d = tmp_path / "reports"
    assert main(["equilibrium", "--out", str(d / "eq.json")]) == 0
    assert main(["hydrodynamics", "--out", str(d / "hy.json")]) == 0
    assert main(["report", "--all", "--dir", str(d), "--out", str(tmp_path / "sum.json")]) == 0
    s = json.loads((tmp_path / "sum.json").read_text())
    assert {r["suite"] for r in s["reports"]} == {"equilibrium", "hydrodynamics"}


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "relkin.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("geometry", "representations", "conservation", "coercivity", "norms", "jacobian-scan",
                "counterexample", "report"):
        assert sub in r.stdout


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["geometry", "--format", "xml"])
    assert e.value.code == 2


def test_coarse_rule_reports_unconverged(tmp_path, capsys):
    out = tmp_path / "c.json"
    rc = main(["coercivity", "--family", "g1", "--quad", "radial_order=12,sphere_order=6", "--format", "json", "--out", str(out)])
    assert rc == 1
    assert "QuadratureNotConverged" in json.loads(out.read_text())["metrics"]["error"]
