import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from oakeshmm import ProbParams, simulate
from oakeshmm.cli import (
    EXIT_INGEST,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_RANK_DEFICIENT,
    RunConfig,
    main,
    run_fit,
)
from oakeshmm.data import read_csv, write_csv
from oakeshmm.errors import IngestError, InputError

ROOT = Path(__file__).resolve().parents[1]
DATA = Path("tests/data")


@pytest.fixture
def in_root(monkeypatch):
    monkeypatch.chdir(ROOT)


def _read(text, **kw):
    return read_csv(io.StringIO(text), **kw)


def test_identical_rows_collapse():
    d = _read("0,1,2\n0,1,2\n0,1,2\n")
    assert d.n_configs == 1 and d.counts.tolist() == [3]
    assert (d.n, d.T, d.c) == (3, 3, 3)


def test_header_and_one_based():
    d = _read("t1,t2\n1,2\n2,2\n", one_based=True)
    assert d.sequences().tolist() == [[0, 1], [1, 1]]
    assert _read("0,1\n", categories=4).c == 4


@pytest.mark.parametrize(
    "text,where",
    [
        ("", None),
        ("t1,t2\n", None),
        ("0,1\n0,1,2\n", "row 2"),
        ("0,1\n0,x\n", "row 2, column 2"),
        ("0,1\n0,\n", "row 2, column 2"),
        ("0,NA\n", "row 1, column 2"),
        ("0,-1\n", "row 1, column 2"),
    ],
)
def test_ingest_errors(text, where):
    with pytest.raises(IngestError) as exc:
        _read(text)
    if where:
        assert where in str(exc.value)


def test_one_based_zero_code_rejected():
    with pytest.raises(IngestError, match="row 1, column 1"):
        _read("0,1\n", one_based=True)
    with pytest.raises(IngestError, match="declared 2"):
        _read("0,2\n", categories=2)


def test_missing_file():
    with pytest.raises(IngestError):
        read_csv("/nonexistent/panel.csv")


def test_write_read_round_trip(tmp_path, p_k2c3):
    d = simulate(p_k2c3, 100, 5, seed=2)
    for one_based in (False, True):
        path = tmp_path / f"d{int(one_based)}.csv"
        write_csv(d, path, one_based=one_based)
        back = read_csv(path, one_based=one_based, categories=3)
        assert back.same_as(d)


def test_golden_report(tmp_path, in_root):
    out = tmp_path / "report.json"
    code = main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "2", "--out", str(out)])
    assert code == EXIT_OK
    assert out.read_bytes() == (DATA / "golden_report_k2.json").read_bytes()


def test_runs_are_byte_identical(tmp_path, in_root):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "2", "--seed", "4", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_report_contents(tmp_path, in_root):
    out = tmp_path / "r.json"
    main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "2", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert rep["model"]["s"] == rep["information"]["s"] == 7
    assert rep["information"]["rank"] == 7 and rep["information"]["identifiable"]
    assert len(rep["standard_errors"]["theta"]) == 7
    assert np.array(rep["standard_errors"]["response"]).shape == (3, 2)
    assert rep["fit"]["converged"] and rep["fit"]["seed"] == 1
    assert rep["bootstrap"] is None
    assert sorted(rep["display_order"]) == [0, 1]


def test_text_format(tmp_path, in_root, capsys):
    out = tmp_path / "r.txt"
    main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "2", "--format", "text", "--out", str(out)])
    text = out.read_text()
    assert "s=7  rank=7" in text and "from 1 s.e." in text
    assert capsys.readouterr().out == text


def test_rank_deficient_exit_code(tmp_path, in_root, capsys):
    out = tmp_path / "r.json"
    code = main(["--data", str(DATA / "fixture_k3_boundary.csv"), "--states", "3", "--out", str(out)])
    assert code == EXIT_RANK_DEFICIENT
    rep = json.loads(out.read_text())
    assert rep["model"]["s"] == 14
    assert rep["information"]["rank"] < 14
    assert rep["information"]["identifiable"] is False
    assert rep["standard_errors"] is None
    assert rep["information"]["null_parameter"].startswith("transition_logit")
    assert "rank" in capsys.readouterr().err


def test_ingest_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n0,1,2\n")
    assert run_fit(RunConfig(data=str(bad), k=2), stdout=io.StringIO()) == EXIT_INGEST
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run_fit(RunConfig(data=str(empty), k=2), stdout=io.StringIO()) == EXIT_INGEST


def test_not_converged_exit_code(tmp_path, in_root):
    out = tmp_path / "r.json"
    code = main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "2", "--max-iter", "3", "--out", str(out)])
    assert code == EXIT_NOT_CONVERGED
    assert json.loads(out.read_text())["fit"]["converged"] is False


def test_usage_errors():
    for argv in (["--states", "2"], ["--data", "x.csv", "--states", "0"], ["--simulate", "--n", "3"],
                 ["--data", "x.csv", "--states", "2", "--bootstrap", "1"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    with pytest.raises(InputError):
        RunConfig(data="x", k=2, tol=0).validate()


def test_single_state_warns(tmp_path, in_root):
    with pytest.warns(UserWarning, match="k=1"):
        code = main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "1", "--out", str(tmp_path / "r.json")])
    assert code == EXIT_OK


def test_simulate_mode(tmp_path, in_root):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--simulate", "--params", str(DATA / "truth_k2.json"), "--n", "200", "--T", "5", "--seed", "1"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes() == (DATA / "fixture_k2.csv").read_bytes()
    assert main(["--simulate", "--params", str(tmp_path / "missing.json"), "--n", "2", "--T", "2"]) == EXIT_INGEST


def test_console_script(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "oakeshmm.cli", "--data", str(ROOT / DATA / "fixture_k2_cli.csv"),
         "--states", "2", "--starts", "2", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "identifiable=True" in proc.stdout


def test_bootstrap_column_close_to_analytic(tmp_path, in_root):
    out = tmp_path / "r.json"
    code = main(["--data", str(DATA / "fixture_k2_cli.csv"), "--states", "2", "--bootstrap", "50", "--out", str(out)])
    assert code == EXIT_OK
    rep = json.loads(out.read_text())
    boot, se = rep["bootstrap"], rep["standard_errors"]
    assert boot["B"] == 50 and boot["failed"] == 0
    for key in ("response", "initial", "transition"):
        b, a = np.array(boot[key]), np.array(se[key])
        assert np.all(np.abs(b - a) <= 0.5 * a), key
