import json
import subprocess
import sys

import pytest
import yaml

from dlsdc.cli import main
from dlsdc.harness.report import RUN_COLUMNS
from dlsdc.optimizer.lpfile import read_lp
from dlsdc.optimizer.solver import solve

from test_harness import MINI


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "mini.yaml"
    path.write_text(yaml.safe_dump(MINI))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate(capsys, config, tmp_path):
    code, out, _ = run(capsys, "simulate", "--config", config, "--policy", "edf", "--seed", 3,
                       "--dc-price", 1, "--out", tmp_path / "sim")
    assert code == 0
    assert json.loads(out)["status"] == "ok"
    lines = (tmp_path / "sim" / "runs.csv").read_text().splitlines()
    assert lines[0].split(",") == list(RUN_COLUMNS) and len(lines) == 2
    assert len((tmp_path / "sim" / "trace.csv").read_text().splitlines()) == 25


def test_sweep_is_byte_stable(capsys, config, tmp_path):
    for name in ("a", "b"):
        code, _, _ = run(capsys, "sweep", "--config", config, "--dc-prices", "0,1,3", "--scenarios", 2,
                         "--out", tmp_path / name)
        assert code == 0
    for f in ("runs.csv", "summary.csv", "gap_vs_price.svg", "peak_vs_price.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_scenario_tools(capsys, config, tmp_path):
    sc = tmp_path / "s.jsonl"
    assert run(capsys, "generate-scenario", "--config", config, "--seed", 4, "--out", sc)[0] == 0
    code, out, _ = run(capsys, "upper-bound", "--config", config, "--scenario", sc, "--dc-price", 1)
    assert code == 0
    ub = json.loads(out)
    assert ub["status"] == "Optimal"
    lp = tmp_path / "s.lp"
    assert run(capsys, "export-lp", "--config", config, "--scenario", sc, "--dc-price", 1, "--out", lp)[0] == 0
    assert solve(read_lp(lp)).objective == pytest.approx(ub["objective"], abs=1e-9)


def test_missing_config_is_reported(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--config", tmp_path / "nope.yaml", "--out", tmp_path / "o")
    assert code == 2
    msg = json.loads(err.strip().splitlines()[-1])
    assert msg["status"] == "error" and msg["type"] == "FileNotFoundError"


def test_bad_config_value_is_reported(capsys, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("horizon:\n  window_size: 5\n")
    code, _, err = run(capsys, "sweep", "--config", path, "--out", tmp_path / "o")
    assert code == 2 and json.loads(err)["type"] == "InvalidInputError"
    assert not (tmp_path / "o").exists()


def test_bad_prices_file_is_reported(capsys, config, tmp_path):
    prices = tmp_path / "p.csv"
    prices.write_text("timestamp,price_dollars_per_mwh\n2019-11-01T00:00,x\n")
    code, _, err = run(capsys, "simulate", "--config", config, "--prices", prices, "--out", tmp_path / "o")
    assert code == 2 and "malformed" in json.loads(err)["message"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dlsdc.cli", "upper-bound", "--scenario", str(tmp_path / "x")],
                          capture_output=True, text=True)
    assert proc.returncode != 0
    assert json.loads(proc.stderr.strip())["status"] == "error"
