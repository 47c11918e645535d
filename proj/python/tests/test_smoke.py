import csv
import io
import json
import os
import pathlib
import subprocess

import pytest

import hetnet

ROOT = pathlib.Path(__file__).resolve().parents[2]
TINY = str(ROOT / "configs" / "tiny.json")
DESK = str(ROOT / "configs" / "desk.json")
CLI = os.environ.get("HETNET_CLI")


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_zipf_popularity():
    d = hetnet.zipf_popularity(2, 1.0)
    assert d == pytest.approx([2 / 3, 1 / 3], rel=1e-15)
    assert sum(hetnet.zipf_popularity(1000, 0.65)) == pytest.approx(1.0, rel=1e-12)


def test_assignment():
    cols, cost = hetnet.solve_assignment([[1, 2], [2, 4]])
    assert cols == [1, 0]
    assert cost == 4
    cols, cost = hetnet.solve_assignment([[3], [1], [2]])
    assert cols == [-1, 0, -1]
    assert cost == 1


def test_config_round_trip_and_errors():
    cfg = hetnet.load_config(TINY)
    assert hetnet.load_config(cfg) == cfg
    bad = json.loads(json.dumps(cfg))
    bad["catalog"]["zipf_alpha"] = -1
    with pytest.raises(hetnet.ConfigError, match="catalog.zipf_alpha"):
        hetnet.load_config(bad)


def test_sweep_csv_shape_and_determinism():
    one = hetnet.run_sweep(TINY, runs=2, threads=1)
    assert one.splitlines()[0] == hetnet.CSV_HEADER
    r = rows(one)
    assert len(r) == 1
    assert int(r[0]["runs"]) == 2
    assert int(r[0]["audit_violations"]) == 0
    assert hetnet.run_sweep(TINY, runs=2, threads=2) == one


def test_cost_grows_with_users():
    text = hetnet.run_sweep(DESK, parameter="users", values=[15, 35], policies=["Ergodic/CO-NOMA"], runs=8)
    means = [float(r["total_mean"]) for r in rows(text)]
    assert means[1] > means[0]


def test_oracle_gap_on_tiny_instances():
    st = hetnet.oracle_gap(TINY, instances=6, levels=8)
    assert st["floor_violations"] == 0
    assert st["audit_violations"] == 0
    assert st["mean_gap"] <= 0.15


@pytest.mark.skipif(not CLI, reason="HETNET_CLI not set")
def test_cli_round_trip(tmp_path):
    ok = subprocess.run([CLI, "validate-config", "-c", TINY], capture_output=True, text=True)
    assert ok.returncode == 0
    bad = json.loads(pathlib.Path(TINY).read_text())
    bad["radio"]["subcarriers"] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    err = subprocess.run([CLI, "validate-config", "-c", str(path)], capture_output=True, text=True)
    assert err.returncode != 0
    assert "radio.subcarriers" in err.stderr
    out = tmp_path / "out.csv"
    run = subprocess.run([CLI, "sweep", "-c", TINY, "--runs", "2", "--threads", "1", "-o", str(out)],
                         capture_output=True, text=True)
    assert run.returncode == 0
    assert out.read_text() == hetnet.run_sweep(TINY, runs=2)
