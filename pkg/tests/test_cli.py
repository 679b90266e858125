import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qmreceiver import infotheory as it
from qmreceiver.circuit import parse_plan
from qmreceiver.cli import SweepSpec, build_sweep, main, parse_config, UsageError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(argv, capsys):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_analytic_ratios(capsys):
    rc, out, _ = run(["analytic", "--nbar", "2e-4", "--L", "8"], capsys)
    assert rc == 0
    rows = {r["quantity"]: r for r in table(out)}
    assert float(rows["rate_ppm"]["ratio"]) == pytest.approx(1.04, abs=0.005)
    assert float(rows["rate_hybrid_optimal"]["ratio"]) == pytest.approx(1.17, abs=0.005)
    assert float(rows["rate_hybrid_optimal"]["asymptotic_ratio"]) == pytest.approx(
        1 + 7 / (np.e * 2**it.BETA * np.log(2) * it.BETA), rel=1e-12)


def test_analytic_two_bins(capsys):
    rc, out, _ = run(["analytic", "--nbar", "2e-4", "--L", "2", "--format", "json"], capsys)
    assert rc == 0
    rows = {r["quantity"]: r for r in json.loads(out)}
    assert rows["rate_hybrid_optimal"]["ratio"] == pytest.approx(1.025, abs=1e-3)


def test_analytic_with_fixed_lambda(capsys):
    rc, out, _ = run(["analytic", "--nbar", "1e-3", "--L", "8", "--lambda", "0.5"], capsys)
    rows = {r["quantity"]: r for r in table(out)}
    assert float(rows["rate_hybrid"]["value"]) == pytest.approx(0.003324924322571406, rel=1e-12)


@pytest.mark.parametrize("argv", [
    ["analytic", "--nbar", "2e-4", "--L", "7"],
    ["analytic", "--nbar", "-1", "--L", "8"],
    ["analytic", "--nbar", "1e-3", "--L", "8", "--lambda", "2"],
])
def test_analytic_errors(argv, capsys):
    rc, _, err = run(argv, capsys)
    assert rc != 0 and "error" in err


def test_default_sweep_grid():
    rows = build_sweep(SweepSpec())
    keys = {(r["scheme"], r["n_bar"], r["L"]) for r in rows}
    for s in ("DIRECT_PPM", "HYBRID"):
        for n in (2e-4, 2e-2):
            for L in (2, 4, 8, 12, 16, 20, 24, 28, 32):
                assert (s, n, L) in keys
    assert len(rows) == 36


def test_sweep_raw_columns(capsys):
    rc, out, _ = run(["sweep", "--raw"], capsys)
    rows = table(out)
    assert rc == 0 and "ratio" not in rows[0] and "exact_rate" in rows[0]


def test_sweep_csv_round_trip(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    rc, _, _ = run(["sweep", "--continuous", "16", "--schemes",
                    "INDIVIDUAL,DIRECT_PPM,HYBRID,HOLEVO,CAPACITY_ASYMPTOTE", "--out", str(path)], capsys)
    assert rc == 0
    rows = table(path.read_text())
    assert {r["kind"] for r in rows} == {"single", "discrete", "continuous"}
    for r in rows:
        ratio = float(r["exact_rate"]) / float(r["individual_rate"])
        assert ratio == pytest.approx(float(r["ratio"]), rel=1e-12, abs=0)
        asym = float(r["asymptotic_rate"]) / float(r["individual_asymptotic"])
        assert asym == pytest.approx(float(r["asymptotic_ratio"]), rel=1e-12, abs=0)


def test_sweep_direct_ratio_saturates():
    rows = build_sweep(SweepSpec(n_bar_values=[2e-2], L_values=[8, 16, 32, 40, 48, 64], schemes=["DIRECT_PPM"]))
    ratios = [r["ratio"] for r in rows]
    k = int(np.argmax(ratios))
    assert 0 < k < len(ratios) - 1


def test_sweep_unwritable(capsys):
    rc, _, err = run(["sweep", "--out", "/nonexistent/dir/x.csv"], capsys)
    assert rc != 0 and "cannot write" in err


def test_sweep_spec_validation():
    with pytest.raises(UsageError):
        SweepSpec(n_bar_values=[])
    with pytest.raises(UsageError):
        SweepSpec(schemes=["MAGIC"])


def test_simulate_sample_config(tmp_path, capsys):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    cfg = str(CONFIGS / "direct_ppm_L8.conf")
    rc, _, err = run(["simulate", "--config", cfg, "--out", str(out1)], capsys)
    assert rc == 0 and "seed = 2015" in err
    run(["simulate", "--config", cfg, "--out", str(out2)], capsys)
    assert out1.read_text() == out2.read_text()
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    rep = json.loads(out1.read_text())
    assert abs(rep["empirical_rate"] - rep["analytic_rate"]) < 3 * rep["empirical_stderr"]


def test_simulate_hybrid_config(capsys):
    rc, out, _ = run(["simulate", "--config", str(CONFIGS / "hybrid_L2.conf"), "--trials", "50000"], capsys)
    rep = json.loads(out)
    assert rc == 0 and rep["scheme"] == "HYBRID" and rep["trials"] == 50000
    assert 0 < rep["lam"] < 1


def test_simulate_flags_only(capsys):
    rc, out, _ = run(["simulate", "--nbar", "0.02", "--L", "8", "--trials", "20000",
                      "--op-transmission", "0.9", "--seed", "3"], capsys)
    rep = json.loads(out)
    assert rc == 0 and rep["transmission"] == pytest.approx(0.9**13)


def test_simulate_zero_trials_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("scheme = DIRECT_PPM\nnbar = 0.1\nL = 8\n\ntrials = 0\n")
    rc, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert rc != 0 and "line 5" in err and "trials" in err


@pytest.mark.parametrize("text, msg", [
    ("nbar 0.1\n", "line 1"),
    ("nbar = 0.1\nfoo = 3\n", "line 2: unknown key"),
    ("nbar = abc\n", "line 1: bad value"),
])
def test_config_parse_errors(text, msg):
    with pytest.raises(UsageError, match=msg):
        parse_config(text)


def test_config_comments_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.conf"
    cfg.write_text("# comment\nnbar = 0.1  # inline\nL = 4\ntrials = 0\n")
    rc, out, _ = run(["simulate", "--config", str(cfg), "--trials", "1000"], capsys)
    assert rc == 0 and json.loads(out)["trials"] == 1000


@pytest.mark.parametrize("L, max_ops", [(2, 1), (8, 28), (12, 66)])
def test_decompose(L, max_ops, capsys):
    rc, out, _ = run(["decompose", "--L", str(L)], capsys)
    assert rc == 0
    body = [l for l in out.splitlines() if not l.startswith("#")]
    plan = parse_plan(body, L)
    assert len(plan.ops) <= max_ops
    err = float(out.splitlines()[-1].split("=")[-1])
    assert err < 1e-10
    if L == 2:
        assert plan.ops[0].power_reflectivity == pytest.approx(0.5)


def test_decompose_unsupported(capsys):
    rc, _, _ = run(["decompose", "--L", "6"], capsys)
    assert rc != 0


def test_dolinar_table(capsys):
    rc, out, _ = run(["dolinar", "--nbar", "0.2", "--trials", "200000", "--slices", "1,10,100,10000"], capsys)
    rows = table(out)
    errs = [float(r["empirical_error"]) for r in rows]
    assert rc == 0 and errs[0] > errs[1] > errs[2]
    eps = float(rows[0]["helstrom_error"])
    assert errs[0] > eps
    assert abs(errs[-1] - eps) < 3 * float(rows[-1]["stderr"])


def test_dolinar_no_signal(capsys):
    rc, out, _ = run(["dolinar", "--nbar", "0", "--trials", "20000"], capsys)
    for r in table(out):
        assert float(r["empirical_error"]) == pytest.approx(0.5, abs=0.015)


def test_hadamard_export_import_validate(tmp_path, capsys):
    path = tmp_path / "h12.txt"
    assert run(["hadamard", "export", "--L", "12", "--out", str(path)], capsys)[0] == 0
    rc, out, _ = run(["hadamard", "validate", str(path)], capsys)
    assert rc == 0 and "order 12" in out
    rc, out, _ = run(["hadamard", "import", str(path)], capsys)
    assert rc == 0 and out == path.read_text()
    bad = tmp_path / "bad.txt"
    bad.write_text("2\n1 1\n1 1\n")
    rc, _, err = run(["hadamard", "validate", str(bad)], capsys)
    assert rc != 0 and "orthogonal" in err
    assert run(["hadamard", "export", "--L", "7"], capsys)[0] != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qmreceiver", "analytic", "--nbar", "1e-3", "--L", "4"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "rate_ppm" in res.stdout
    res = subprocess.run([sys.executable, "-m", "qmreceiver", "analytic", "--nbar", "1e-3", "--L", "7"],
                         capture_output=True, text=True)
    assert res.returncode != 0
