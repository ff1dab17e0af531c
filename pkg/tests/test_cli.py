import json
import math

import numpy as np
import pytest

from eraser_sim import cli
from eraser_sim.estimate import ExperimentRecord


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_number_and_list():
    assert cli.parse_number("pi/2") == pytest.approx(math.pi / 2)
    assert cli.parse_number("3pi/2") == pytest.approx(1.5 * math.pi)
    assert cli.parse_number("-0.5*pi") == pytest.approx(-0.5 * math.pi)
    assert cli.parse_list("0:1:3") == [0.0, 0.5, 1.0]
    assert cli.parse_list("0, pi") == [0.0, pytest.approx(math.pi)]
    with pytest.raises(ValueError):
        cli.parse_number("two")


def test_simulate_row(capsys, tmp_path):
    out = tmp_path / "grid.csv"
    code, _, _ = run(capsys, "simulate", "--scheme", "anti", "--out", str(out),
                     "--set", "phi1=pi", "--set", "tau=0", "--set", "kc=1")
    assert code == 0
    (row,) = cli.read_rows(str(out), "csv")
    assert row["scheme"] == "anti"
    assert row["P_ee"] == pytest.approx(0.5, abs=1e-12)
    assert row["P_gg"] == pytest.approx(0.5, abs=1e-12)
    assert row["max_abs_diff"] < 1e-9


@pytest.mark.parametrize("form", ["csv", "jsonl"])
def test_output_round_trip(capsys, tmp_path, form):
    out = tmp_path / f"grid.{form}"
    code, _, _ = run(capsys, "simulate", "--format", form, "--out", str(out), "--shots", "100",
                     "--set", "phi1=0:pi:3", "--set", "tau=0.1,0.5", "--set", "kc=0,0.5")
    assert code == 0
    rows = cli.read_rows(str(out), form)
    assert len(rows) == 3 * 2 * 2 * 2
    assert set(rows[0]) == set(cli.CSV_COLUMNS + cli.COUNT_COLUMNS)
    for row in rows:
        assert sum(row[f"n_{o}"] for o in ("ee", "eg", "ge", "gg")) == 100
        total = row["P_ee"] + row["P_eg"] + row["P_ge"] + row["P_gg"]
        assert total == pytest.approx(1, abs=1e-12)


def test_csv_floats_keep_full_precision(capsys, tmp_path):
    out = tmp_path / "g.csv"
    run(capsys, "simulate", "--out", str(out), "--set", "phi1=0.3", "--set", "tau=0.7")
    for row in cli.read_rows(str(out), "csv"):
        assert row["tau"] == 0.7 and row["phi1"] == 0.3


def test_decay_rate_from_tau_sweep(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    run(capsys, "simulate", "--scheme", "anti", "--out", str(out),
        "--set", "phi1=pi", "--set", "tau=0:1:11", "--set", "kc=0.5")
    rows = cli.read_rows(str(out), "csv")
    taus = np.array([r["tau"] for r in rows])
    slope = np.polyfit(taus, np.log([r["P_ee"] for r in rows]), 1)[0]
    assert -slope == pytest.approx(2 * (1 - 0.5), rel=1e-6)


def test_parallel_matches_serial(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--set", "phi1=0:pi:4", "--set", "tau=0:1:3", "--shots", "50"]
    run(capsys, "simulate", "--out", str(a), *args)
    run(capsys, "simulate", "--out", str(b), "--jobs", "4", *args)
    assert a.read_text() == b.read_text()


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nphi1 = pi/2\ntau = 0.5\nkc = 0  # uncorrelated\nscheme = anti\nformat = jsonl\n")
    code, out, _ = run(capsys, "simulate", "--config", str(cfg))
    assert code == 0
    (row,) = [json.loads(line) for line in out.splitlines()]
    assert row["P_ee"] == pytest.approx(0.25 * math.exp(-1), abs=1e-12)


@pytest.mark.parametrize("text, needle", [
    ("phi1 = 0\nbogus = 1\n", ":2: unknown key"),
    ("phi1 = 0\ntau 0.5\n", ":2: expected"),
    ("tau = abc\n", ":1: bad value"),
])
def test_config_errors_report_line(capsys, tmp_path, text, needle):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 2 and needle in err


def test_config_shape_errors(capsys, tmp_path):
    assert run(capsys, "simulate", "--set", "phi1=")[0] == 2
    assert run(capsys, "simulate", "--set", "scheme=both2")[0] == 2
    assert run(capsys, "simulate", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    assert run(capsys, "simulate", "--bogus-flag")[0] == 2


def test_parameter_violations(capsys):
    assert run(capsys, "simulate", "--set", "kc=1.5")[0] == 3
    assert run(capsys, "simulate", "--set", "tau=-1")[0] == 3
    assert run(capsys, "validate", "--set", "kc=1.5")[0] == 3


def test_validate_passes_and_fails(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, text, _ = run(capsys, "validate", "--set", "draws=20", "--out", str(out))
    report = json.loads(text)
    assert code == 0 and report["passed"]
    assert json.loads(out.read_text()) == report
    assert {c["name"] for c in report["checks"]} >= {"cptp_positivity", "expm_vs_rk4"}
    code, text, _ = run(capsys, "validate", "--set", "draws=20", "--set", "tol_expm_vs_rk4=1e-15")
    report = json.loads(text)
    assert code == 1 and not report["passed"]
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert failed == ["expm_vs_rk4"]


def test_estimate_recovers_kc(capsys, tmp_path):
    code, text, _ = run(capsys, "estimate", "--seed", "7", "--shots", "100000",
                        "--set", "kc=0.5", "--out", str(tmp_path / "r.jsonl"))
    res = json.loads(text)
    assert code == 0
    assert abs(res["kc_hat"] - 0.5) <= 3 * res["stderr"]
    assert res["n_records"] == 8
    assert len((tmp_path / "r.jsonl").read_text().splitlines()) == 16


def test_estimate_is_deterministic(capsys, tmp_path):
    outs = []
    for name in ("a", "b"):
        rec, res = tmp_path / f"{name}.jsonl", tmp_path / f"{name}.json"
        assert run(capsys, "estimate", "--seed", "11", "--shots", "20000", "--jobs", "2",
                   "--out", str(rec), "--result", str(res))[0] == 0
        outs.append((rec.read_bytes(), res.read_bytes()))
    assert outs[0] == outs[1]


def test_estimate_refits_record_file(capsys, tmp_path):
    rec = tmp_path / "r.jsonl"
    _, first, _ = run(capsys, "estimate", "--seed", "3", "--shots", "50000", "--out", str(rec))
    code, again, _ = run(capsys, "estimate", "--records", str(rec))
    assert code == 0 and json.loads(again) == json.loads(first)
    records = [ExperimentRecord.from_json(line) for line in rec.read_text().splitlines()]
    assert len({r.seed for r in records}) == len(records) == 16


def test_estimate_bad_record_file(capsys, tmp_path):
    rec = tmp_path / "r.jsonl"
    rec.write_text("{not json\n")
    assert run(capsys, "estimate", "--records", str(rec))[0] == 2


def test_estimate_unidentifiable(capsys):
    assert run(capsys, "estimate", "--set", "phi1=pi/2", "--shots", "1000")[0] == 4
    assert run(capsys, "estimate", "--set", "tau=0", "--shots", "1000")[0] == 4


def test_estimate_flags_uncorrelated_baths(capsys):
    code, text, _ = run(capsys, "estimate", "--set", "kc=0", "--shots", "100000", "--seed", "1")
    res = json.loads(text)
    assert code == 0 and res["boundary_in_interval"]


def test_estimate_joint_method(capsys):
    code, text, _ = run(capsys, "estimate", "--set", "method=joint_lsq", "--set", "phi1=0.3",
                        "--shots", "100000", "--seed", "2")
    res = json.loads(text)
    assert code == 0 and res["method"] == "joint_lsq" and "k_hat" in res
