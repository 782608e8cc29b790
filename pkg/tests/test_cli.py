import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dynalg.cli import main
from dynalg.functionals import linear_functional
from dynalg.piecewise import PiecewisePoly
from dynalg.schrodinger_lab import Grid, PropagatorConfig, coherent_state, scattering
from dynalg.suites import Record, Report, Settings, run_suite

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_weyl_passes(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, err = run(capsys, "verify", "weyl", "--seed", 42, "--tol", 1e-8, "--out", out)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["overall"] == "pass"
    assert report["scenario"]["seed"] == 42
    assert "overall\tpass" in err
    names = [r["name"] for r in report["records"]]
    assert names == sorted(names)
    assert all(r["tolerance"] == 1e-8 for r in report["records"] if r["name"] == "weyl.commutators")


def test_printed_convention_fails_residual_phase(capsys):
    code, out, _ = run(capsys, "verify", "weyl", "--seed", 42, "--h-convention", "printed")
    assert code == 1
    records = {r["name"]: r for r in json.loads(out)["records"]}
    assert not records["weyl.residual_phase"]["pass"]
    assert records["weyl.normal_form_vs_allpairs"]["pass"]


def test_missing_config_exits_2(tmp_path, capsys):
    code, _, err = run(capsys, "run", tmp_path / "absent.json")
    assert code == 2
    assert "absent.json" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "moment", "--seed", "-1"],
        ["verify", "moment", "--n", "1000"],
        ["verify", "moment", "--dt", "0"],
        ["verify", "moment", "--tol", "-1"],
    ],
    ids=["seed", "n", "dt", "tol"],
)
def test_bad_arguments_exit_2(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("dynalg: error")


def test_bad_scenario_exits_2(tmp_path, capsys):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"suite": "weyl", "grid": {"n": 3.5}}))
    assert run(capsys, "run", cfg)[0] == 2
    cfg.write_text(json.dumps({"seed": 1}))
    assert run(capsys, "run", cfg)[0] == 2


def test_run_scenario_config(capsys):
    code, out, _ = run(capsys, "run", CONFIGS / "scenario_weyl.json", "--no-timings")
    assert code == 0
    report = json.loads(out)
    assert report["overall"] == "pass" and "timings" not in report


def test_normalize_examples(capsys):
    code, out, _ = run(capsys, "normalize", CONFIGS / "word_empty.json")
    assert code == 0 and json.loads(out) == {"theta": 0.0, "a": [0.0], "b": [0.0]}
    code, out, _ = run(capsys, "normalize", CONFIGS / "word_causal_pair.json")
    got = json.loads(out)
    assert code == 0
    assert got["theta"] == pytest.approx(1.0, abs=1e-12)
    assert got["a"] == pytest.approx([2.0]) and got["b"] == pytest.approx([3.0])
    code, _, err = run(capsys, "normalize", CONFIGS / "word_potential.json")
    assert code == 2 and "linear" in err.lower()


def test_propagate_writes_csv(tmp_path, capsys):
    out = tmp_path / "state.csv"
    code, _, _ = run(capsys, "propagate", CONFIGS / "propagate_linear.json", "--out", out)
    assert code == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    config = json.loads((CONFIGS / "propagate_linear.json").read_text())
    grid = Grid(**config.get("grid", {}))
    st = config.get("state", {})
    psi = coherent_state(grid, st.get("x_mean", 0.0), st.get("p_mean", 0.0), st.get("width", 1.0))
    F = linear_functional(PiecewisePoly.constant(1.0, 0.0, 1.0))
    ref = scattering(psi, F, PropagatorConfig(**config.get("propagator", {})))
    np.testing.assert_allclose(data[:, 1] + 1j * data[:, 2], ref.psi, atol=1e-15)


def test_reports_are_byte_stable(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run(capsys, "verify", "moment", "--seed", 7, "--no-timings", "--out", p)[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_threaded_run_is_tolerance_reproducible():
    settings = Settings(suite="moment", seed=11)
    serial, parallel = run_suite(settings, workers=1), run_suite(settings, workers=3)
    a = {r.name: r for r in serial.records}
    b = {r.name: r for r in parallel.records}
    assert a.keys() == b.keys()
    for name in a:
        assert a[name].passed == b[name].passed
        assert b[name].residual == pytest.approx(a[name].residual, abs=a[name].tolerance)


def test_overall_flag_tracks_records():
    good, bad = Record("a", 1e-13, 1e-12), Record("b", 1.0, 1e-12)
    errored = Record("c", None, 1e-12, "TailOverflow: boom")
    assert Report(Settings(), [good]).passed
    assert not Report(Settings(), [good, bad]).passed
    body = Report(Settings(), [errored, good]).to_json(timings=False)
    assert body["overall"] == "fail"
    assert [r["name"] for r in body["records"]] == ["a", "c"]
    assert body["records"][1]["residual"] is None


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dynalg.cli", "normalize", str(CONFIGS / "word_empty.json")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["theta"] == 0.0


@pytest.mark.parametrize("suite", ["moment", "loop", "causal", "euler_lagrange"])
def test_fast_suites_pass(suite):
    report = run_suite(Settings(suite=suite, seed=3), workers=1)
    failing = [r.name for r in report.records if not r.passed]
    assert report.passed, failing
