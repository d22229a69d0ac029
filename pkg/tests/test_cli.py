import csv
import json

import pytest

from dtmb.cli import EXIT_BOUND, EXIT_SCHEMA, EXIT_USAGE, EXIT_VALUE, main, parse_grid


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def layout_file(tmp_path):
    path = tmp_path / "layout.json"
    assert run("generate", "--variant", "DTMB(2,6)", "--width", 6, "--height", 6, "--boundary", "periodic", "--out", path) == 0
    return path


def test_parse_grid():
    assert parse_grid("0.90:0.999:0.001")[90] == 0.99
    assert len(parse_grid("0.90:0.999:0.001")) == 100
    assert parse_grid("0:50:5", int) == list(range(0, 51, 5))
    assert parse_grid("0.5,0.9") == [0.5, 0.9]


def test_generate_validate_round_trip(tmp_path, layout_file, capsys):
    doc = json.loads(layout_file.read_text())
    assert doc["variant"] == "DTMB(2,6)" and len(doc["cells"]) == 36
    assert (tmp_path / "layout.json.config.json").exists()
    report = tmp_path / "report.json"
    assert run("validate", "--layout", layout_file, "--out", report) == 0
    rep = json.loads(report.read_text())
    assert rep["violations"] == [] and rep["rr"] == "1/3"


def test_inject_and_repair_fault_free(tmp_path, layout_file):
    faults, plan = tmp_path / "faults.json", tmp_path / "plan.json"
    assert run("inject", "--layout", layout_file, "--p", 1.0, "--seed", 3, "--out", faults) == 0
    assert json.loads(faults.read_text())["faulty"] == []
    assert run("repair", "--layout", layout_file, "--faults", faults, "--out", plan) == 0
    assert json.loads(plan.read_text()) == {"verdict": "repairable", "assignment": [], "witness": None}


def test_repair_rejects_foreign_faults(tmp_path, layout_file, capsys):
    other = tmp_path / "other.json"
    run("generate", "--variant", "DTMB(4,4)", "--width", 4, "--height", 4, "--out", other)
    faults = tmp_path / "faults.json"
    run("inject", "--layout", other, "--m", 2, "--seed", 1, "--out", faults)
    capsys.readouterr()
    assert run("repair", "--layout", layout_file, "--faults", faults) == EXIT_SCHEMA
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "schema" and err["exit_code"] == EXIT_SCHEMA


def test_error_codes(tmp_path, layout_file, capsys):
    big = tmp_path / "big.json"
    run("generate", "--variant", "DTMB(2,6)", "--width", 6, "--height", 6, "--out", big)
    assert run("yield-sweep", "--layout", big, "--method", "exact", "--grid", "0.9") == EXIT_BOUND
    assert run("inject", "--layout", layout_file, "--p", 1.5, "--seed", 1) == EXIT_VALUE
    assert run("inject", "--layout", layout_file, "--seed", 1) == EXIT_USAGE
    assert run("generate", "--variant", "DTMB(1,6)", "--width", 6, "--height", 7, "--boundary", "periodic") == EXIT_SCHEMA
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("validate", "--layout", bad) == EXIT_SCHEMA
    with pytest.raises(SystemExit) as exc:
        run("generate", "--bogus")
    assert exc.value.code == EXIT_USAGE


def test_analytic_sweep_beats_baseline(tmp_path):
    red, bare = tmp_path / "red.csv", tmp_path / "bare.csv"
    assert run("yield-sweep", "--analytic", "dtmb16", "--n", 108, "--grid", "0.90:0.999:0.001", "--out", red) == 0
    assert run("yield-sweep", "--analytic", "none", "--n", 108, "--grid", "0.90:0.999:0.001", "--out", bare) == 0
    r = {row["p_or_m"]: float(row["yield"]) for row in read_csv(red)}
    b = {row["p_or_m"]: float(row["yield"]) for row in read_csv(bare)}
    assert b["0.99"] == pytest.approx(0.3378, abs=1e-4)
    assert r["0.99"] > b["0.99"]


def test_config_file_wins_and_is_echoed(tmp_path, layout_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"runs": 40, "grid": "0.8,0.9", "seed": 11}))
    out = tmp_path / "sweep.csv"
    assert run("yield-sweep", "--layout", layout_file, "--runs", 999, "--config", cfg, "--out", out) == 0
    rows = read_csv(out)
    assert [row["runs"] for row in rows] == ["40", "40"]
    echoed = json.loads((tmp_path / "sweep.csv.config.json").read_text())
    assert echoed["runs"] == 40 and echoed["seed"] == 11
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert run("yield-sweep", "--layout", layout_file, "--config", bad) == EXIT_USAGE


def test_seed_from_environment(tmp_path, layout_file, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    monkeypatch.setenv("DTMB_SEED", "17")
    run("inject", "--layout", layout_file, "--p", 0.5, "--out", a)
    run("inject", "--layout", layout_file, "--p", 0.5, "--seed", 17, "--out", b)
    assert a.read_text() == b.read_text()


def test_mfault_and_effective_yield(tmp_path, layout_file):
    curve = tmp_path / "m.csv"
    assert run("mfault-curve", "--layout", layout_file, "--grid", "0:8:2", "--runs", 200, "--seed", 2, "--out", curve) == 0
    ys = [float(r["yield"]) for r in read_csv(curve)]
    assert ys[0] == 1.0 and ys == sorted(ys, reverse=True)
    ey = tmp_path / "ey.json"
    assert run("effective-yield", "--layout", layout_file, "--yield", 0.8, "--out", ey) == 0
    doc = json.loads(ey.read_text())
    assert doc["effective_yield"] == pytest.approx(0.6)
    assert doc["effective_yield_from_rr"] == pytest.approx(0.6, abs=1e-12)
    assert run("effective-yield", "--layout", layout_file, "--p", 0.9, "--runs", 100, "--out", ey) == 0
    assert json.loads(ey.read_text())["runs"] == 100


def test_casestudy_summary_and_plot(tmp_path):
    summary, layout, curve, svg = (tmp_path / n for n in ("s.json", "l.json", "c.csv", "c.svg"))
    assert run("casestudy", "--out", summary, "--layout-out", layout) == 0
    doc = json.loads(summary.read_text())
    assert (doc["n_primary"], doc["n_spare"], doc["n_used"]) == (252, 91, 108)
    assert doc["baseline_yield"] == pytest.approx(0.3378, abs=1e-4)
    # the written layout is accepted unchanged by other commands
    assert run("validate", "--layout", layout) == 0
    assert run("casestudy", "--mfault", "0:20:10", "--runs", 100, "--seed", 1, "--out", curve, "--plot", svg) == 0
    assert len(read_csv(curve)) == 3
    assert svg.read_text().lstrip().startswith("<?xml")
