import csv
import json
import math
import subprocess
import sys

import pytest

from critperiods.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path)])


def load(tmp_path, name):
    return json.loads((tmp_path / name).read_text())


def test_analyze_fig4(tmp_path, capsys):
    assert run(tmp_path, "analyze", "--preset", "fig4") == 0
    doc = load(tmp_path, "analyze.json")
    assert [e["h_exact"] for e in doc["ledger"]["entries"]] == ["0/1", "4/3", "64/3", "68/3"]
    assert doc["linearized_period"] == pytest.approx(math.pi / 4)
    manifest = load(tmp_path, "manifest.json")
    assert manifest["exit_code"] == 0 and "numpy" in manifest["versions"]
    assert "total" in manifest["timings_seconds"]


def test_analyze_cusps(tmp_path):
    assert run(tmp_path, "analyze", "--family", "potential", "--betas", "1,2,3") == 0
    kinds = [p["kind"] for p in load(tmp_path, "analyze.json")["singular_points"]]
    assert kinds.count("cusp") == 3


def test_analyze_collision(tmp_path, capsys):
    assert run(tmp_path, "analyze", "--family", "potential", "--betas", "1,-1") == 2
    assert "witness" in capsys.readouterr().err


def test_hypothesis_strict_collision(tmp_path):
    assert run(tmp_path, "verify", "--family", "potential", "--betas", "1,-1") == 2


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["verify", "--bogus"])
    assert info.value.code == 64
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 64
    assert run(tmp_path, "verify", "--family", "potential", "--k", "3", "--betas", "1,2") == 64
    assert run(tmp_path, "verify", "--family", "potential", "--k", "9") == 64
    assert run(tmp_path, "trace", "--family", "potential", "--betas", "1") == 64
    assert run(tmp_path, "analyze", "--family", "potential", "--betas", "0") == 64


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": {"family": "potential-odd", "betas": [1]},
                               "h": 0.05, "n_points": 8}))
    assert run(tmp_path, "trace", "--config", str(cfg)) == 0
    rows = list(csv.reader((tmp_path / "trace.csv").open()))
    assert len(rows) == 10
    assert run(tmp_path, "trace", "--config", str(cfg), "--n-points", "4") == 0
    assert len(list(csv.reader((tmp_path / "trace.csv").open()))) == 6
    assert load(tmp_path, "manifest.json")["config"]["n_points"] == 4
    cfg.write_text(json.dumps({"spec": {"family": "potential-odd"}, "colour": 1}))
    assert run(tmp_path, "trace", "--config", str(cfg)) == 64
    cfg.write_text(json.dumps({"spec": {"family": "potential-odd", "gamma": 1}, "h": 1}))
    assert run(tmp_path, "trace", "--config", str(cfg)) == 64


def test_period_curve_harmonic(tmp_path):
    assert run(tmp_path, "period-curve", "--family", "potential",
               "--h-min", "0.1", "--h-max", "10", "--n", "5") == 0
    rows = list(csv.DictReader((tmp_path / "curve.csv").open()))
    assert len(rows) == 5
    for r in rows:
        assert float(r["T"]) == pytest.approx(2 * math.pi, rel=1e-10)
        assert len(r["T"].replace(".", "").lstrip("0")) >= 16


def test_period_curve_branches(tmp_path):
    assert run(tmp_path, "period-curve", "--family", "potential", "--betas", "1") == 0
    hs = [float(r["h"]) for r in csv.DictReader((tmp_path / "curve.csv").open())]
    assert min(hs) < 1 / 12 < max(hs)


def test_period_curve_quadrature(tmp_path):
    assert run(tmp_path, "period-curve", "--family", "potential", "--betas", "1",
               "--epsilon", "1e-3", "--method", "quadrature") == 0
    methods = {r["method"] for r in csv.DictReader((tmp_path / "curve.csv").open())}
    assert methods == {"quadrature"}


def test_critical_points(tmp_path):
    assert run(tmp_path, "critical-points", "--family", "potential", "--betas", "1",
               "--epsilon", "1e-3") == 0
    pts = load(tmp_path, "critical_points.json")["critical_points"]
    assert [p["kind"] for p in pts] == ["maximum"]


@pytest.mark.parametrize("argv,required", [
    (["--family", "potential", "--k", "2", "--betas", "1,2"], 3),
    (["--family", "separable", "--k", "1", "--alphas", "4", "--betas", "2"], 5),
    (["--family", "separable-even", "--k", "2", "--preset", "example2"], 6),
])
def test_verify(tmp_path, argv, required):
    assert run(tmp_path, "verify", *argv) == 0
    rep = load(tmp_path, "report.json")
    assert rep["pass"] and rep["required"] == required and rep["found"] >= required


def test_verify_bound_not_met(tmp_path):
    # one pass at a large epsilon misses peaks of the k=2 example
    code = run(tmp_path, "verify", "--preset", "example2", "--epsilon-start", "0.5",
               "--max-halvings", "0")
    rep = load(tmp_path, "report.json")
    assert code == (0 if rep["pass"] else 2)


def test_reproduce_example1(tmp_path):
    assert run(tmp_path, "reproduce", "example1", "--k", "1") == 0
    assert load(tmp_path, "certification.json")["distinct"]
    assert load(tmp_path, "report.json")["found"] >= 5


def test_reproduce_example2_vacuous(tmp_path):
    assert run(tmp_path, "reproduce", "example2", "--k", "1") == 0
    rep = load(tmp_path, "report.json")
    assert rep["required"] == 0 and rep["pass"]


def test_reproduce_fig2(tmp_path):
    assert run(tmp_path, "reproduce", "fig2") == 0
    traces = sorted(p.name for p in tmp_path.glob("trace_*.csv"))
    assert traces == [f"trace_{i}.csv" for i in range(4)]


def test_reproduce_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce", "fig4", "--out-dir", str(a)]) == 0
    assert main(["reproduce", "fig4", "--out-dir", str(b)]) == 0
    for name in ("report.json", "ledger.json", "curve.csv", "spec.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "critperiods", "analyze", "--preset",
                          "fig4", "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "68/3" in out.stdout
