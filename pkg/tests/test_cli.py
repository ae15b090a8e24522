import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lctest.cli import iter_values, main

from oracles import brute_force_lcmle_loglik

FIXTURES = Path(__file__).parent / "fixtures"


def run(argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def test_iter_values_skips_comments_and_blanks():
    assert list(iter_values(io.StringIO("# head\n1\n\n 2.5 # note\n-3e1\n"))) == [1.0, 2.5, -30.0]


@pytest.mark.parametrize("text", ["1\nabc\n", "1\nnan\n", "inf\n"])
def test_iter_values_rejects_bad_lines(text):
    with pytest.raises(ValueError, match="line"):
        list(iter_values(io.StringIO(text)))


def test_fit_two_points_is_uniform(monkeypatch):
    code, out = run(["fit"], stdin="0\n1\n", monkeypatch=monkeypatch)
    assert code == 0
    d = json.loads(out)
    assert d["knots"] == [0.0, 1.0]
    assert max(abs(p) for p in d["phi"]) < 1e-12
    assert d["converged"] is True
    assert set(d) == {"knots", "phi", "loglik", "gap", "iterations", "converged"}


def test_fit_matches_golden_and_oracle():
    code, out = run(["fit", str(FIXTURES / "small.txt")])
    assert code == 0
    got = json.loads(out)
    gold = json.loads((FIXTURES / "small_fit.json").read_text())
    assert got["knots"] == gold["knots"]
    np.testing.assert_allclose(got["phi"], gold["phi"], atol=1e-9)
    assert got["loglik"] >= brute_force_lcmle_loglik([0, 1, 2, 5]) - 1e-4


def test_fit_degenerate_exit_code(monkeypatch, capsys):
    code, _ = run(["fit"], stdin="2\n2\n2\n", monkeypatch=monkeypatch)
    assert code == 3
    assert "degenerate" in capsys.readouterr().err


def test_fit_parse_error_exit_code(monkeypatch, capsys):
    code, _ = run(["fit"], stdin="1\n2\nthree\n", monkeypatch=monkeypatch)
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_file_is_usage_error(tmp_path):
    code, _ = run(["fit", str(tmp_path / "nope.txt")])
    assert code == 2


def _parse_test_output(out):
    lines = out.strip().splitlines()
    assert lines[0] == "t,log_R,rejected"
    rows = [ln.split(",") for ln in lines[1:-1]]
    return rows, json.loads(lines[-1])


def test_null_fixture_does_not_reject():
    code, out = run(["test", str(FIXTURES / "null50.txt")])
    assert code == 0
    rows, verdict = _parse_test_output(out)
    assert verdict == {"rejected": False, "tau": None}
    assert [int(r[0]) for r in rows] == [20, 40]
    assert rows[0][1] == "0"


def test_alternative_fixture_rejects_and_stops():
    code, out = run(["test", str(FIXTURES / "bimodal_mu8.txt"), "--alpha", "0.1"])
    assert code == 0
    rows, verdict = _parse_test_output(out)
    assert verdict["rejected"] and verdict["tau"] == int(rows[-1][0])
    assert rows[-1][2] == "true" and all(r[2] == "false" for r in rows[:-1])
    assert float(rows[-1][1]) >= math.log(10)


def test_alpha_one_rejects_at_first_boundary():
    code, out = run(["test", str(FIXTURES / "null50.txt"), "--alpha", "1"])
    _, verdict = _parse_test_output(out)
    assert verdict == {"rejected": True, "tau": 20}


def test_test_is_deterministic():
    a = run(["test", str(FIXTURES / "bimodal_mu8.txt")])
    b = run(["test", str(FIXTURES / "bimodal_mu8.txt")])
    assert a == b


def test_explicit_schedule_and_estimators():
    path = str(FIXTURES / "bimodal_mu8.txt")
    code, out = run(["test", path, "--schedule", "10,30,70", "--estimator", "oracle:8"])
    rows, _ = _parse_test_output(out)
    assert code == 0 and [int(r[0]) for r in rows][:1] == [10]
    for est in ("gmm2", "kde:silverman", "kde:0.5"):
        assert run(["test", path, "--estimator", est])[0] == 0


@pytest.mark.parametrize("argv", [
    ["test", "--interval", "20", "--schedule", "20,40"],
    ["test", "--alpha", "0"],
    ["test", "--alpha", "1.5"],
    ["test", "--estimator", "bogus"],
    ["test", "--schedule", "40,20"],
    ["frobnicate"],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        code = main(argv + [str(FIXTURES / "null50.txt")], out=io.StringIO())
        raise SystemExit(code)
    assert info.value.code == 2


def _write_config(path, **overrides):
    cfg = {"mu_values": [0, 6], "reps": 3, "horizon": 40, "interval": 20,
           "checkpoints": [20, 40], "estimator": {"variant": "KDE"}, **overrides}
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_writes_outputs(tmp_path):
    cfg = _write_config(tmp_path / "cfg.json")
    code, out = run(["simulate", str(cfg), "--out-dir", str(tmp_path / "o1")])
    assert code == 0 and "mu=6" in out
    assert (tmp_path / "o1" / "summary.csv").read_text().startswith("mu,checkpoint,")
    assert (tmp_path / "o1" / "runs.csv").read_text().startswith("mu,rep,seed,tau,final_log_r\n")
    run(["simulate", str(cfg), "--out-dir", str(tmp_path / "o2")])
    for name in ("summary.csv", "runs.csv"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()


def test_simulate_bad_config(tmp_path, capsys):
    cfg = _write_config(tmp_path / "cfg.json", alpha=1.5)
    code, _ = run(["simulate", str(cfg), "--out-dir", str(tmp_path)])
    assert code == 2
    assert "alpha" in capsys.readouterr().err
    assert not (tmp_path / "summary.csv").exists()


def test_console_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "lctest", "fit"], input="0\n1\n2\n",
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["converged"] is True
