import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from gfkit.cli import main
from gfkit.config import config_hash, sim_config, to_document
from gfkit.errors import ConfigError
from gfkit.grid import read_csv
from gfkit.steady import uniform_profile

ETA = {
    "kernel": {"type": "uniform"},
    "B": 1.0,
    "grid": {"x_max": 20.0, "n_nodes": 1000},
    "t_end": 2.0,
    "snapshot_every": 0.25,
    "initial": {"scenario": "eta_mode"},
    "track_M": True,
}


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


@pytest.fixture
def runner():
    return CliRunner()


def test_config_parsing():
    config = sim_config(ETA)
    assert config.grid.n_nodes == 1000 and config.dt is None and config.track_M
    assert sim_config(to_document(config)) == config
    auto = sim_config({"kernel": "uniform", "B": 2.0, "t_end": 1.0})
    assert auto.grid.x_max == 10.0 and auto.grid.n_nodes == 4000
    assert config_hash(ETA) == config_hash(dict(reversed(list(ETA.items()))))


@pytest.mark.parametrize(
    "doc",
    [
        {"B": 1.0, "t_end": 1.0},
        {"kernel": "uniform", "t_end": 1.0},
        {"kernel": "uniform", "B": -1.0, "t_end": 1.0},
        {"kernel": "uniform", "B": 1.0},
        {"kernel": {"type": "general_mitosis", "sigma": 2.0}, "B": 1.0, "t_end": 1.0},
        {"kernel": "uniform", "B": 1.0, "t_end": 1.0, "grid": {"x_max": 1.0}},
        {"kernel": "uniform", "B": 1.0, "t_end": 1.0, "tau": {"type": "saturating", "tau0": 1.0, "s": 2.0}},
    ],
)
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        sim_config(doc)


def test_steady_command(runner, tmp_path):
    cfg = write(tmp_path, {"kernel": {"type": "uniform"}, "B": 1.0, "grid": {"x_max": 20.0, "n_nodes": 1000}})
    out = tmp_path / "N.csv"
    res = runner.invoke(main, ["steady", "--config", cfg, "--out", str(out)])
    assert res.exit_code == 0, res.output
    x, N = read_csv(out)
    closed = uniform_profile(x, 1.0)
    assert np.abs(N - closed).max() < 1e-3 * closed.max()
    side = json.loads((tmp_path / "N.json").read_text())
    assert set(side) == {"residual_l1", "iterations", "method"} and side["method"] == "explicit"


def test_steady_command_exit_codes(runner, tmp_path):
    bad = write(tmp_path, "{not json", "bad.json")
    res = runner.invoke(main, ["steady", "--config", bad, "--out", str(tmp_path / "N.csv")])
    assert res.exit_code == 2 and "malformed JSON" in res.output
    slow = write(tmp_path, {"kernel": "equal_mitosis", "B": 1.0, "grid": {"x_max": 20, "n_nodes": 200}, "steady": {"max_steps": 1}})
    res = runner.invoke(main, ["steady", "--config", slow, "--out", str(tmp_path / "N.csv")])
    assert res.exit_code == 3
    odd = write(tmp_path, {"kernel": "equal_mitosis", "B": 1.0, "steady": {"method": "explicit"}})
    assert runner.invoke(main, ["steady", "--config", odd, "--out", str(tmp_path / "N.csv")]).exit_code == 2


def _diagnostics(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data


def test_evolve_command(runner, tmp_path):
    cfg = write(tmp_path, ETA)
    out = tmp_path / "run"
    res = runner.invoke(main, ["evolve", "--config", cfg, "--out-dir", str(out)])
    assert res.exit_code == 0, res.output
    header = (out / "diagnostics.csv").read_text().splitlines()[0]
    assert header == (
        "t,number,mass,l1_dist,log_l1_dist,m_l1,entropy_quadratic,"
        "dissipation_quadratic,bound_value,tail_mass,clipped_mass"
    )
    data = _diagnostics(out / "diagnostics.csv")
    assert np.all(np.diff(data["l1_dist"]) < 0)
    assert (out / "n_0.csv").exists() and (out / "m_1.25.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_hash"] == config_hash(ETA)
    assert all((out / f).exists() for f in manifest["files"])
    assert {"number_conservation", "decay_certificate", "m_decay"} <= set(manifest["summary"])
    assert all(v["passed"] for v in manifest["summary"].values())


def test_evolve_is_deterministic(runner, tmp_path):
    cfg = write(tmp_path, ETA)
    for name in ("a", "b"):
        assert runner.invoke(main, ["evolve", "--config", cfg, "--out-dir", str(tmp_path / name)]).exit_code == 0
    for f in ("diagnostics.csv", "n_2.csv", "m_0.5.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_evolve_single_snapshot(runner, tmp_path):
    cfg = write(tmp_path, {**ETA, "t_end": 0.0})
    res = runner.invoke(main, ["evolve", "--config", cfg, "--out-dir", str(tmp_path / "o")])
    assert res.exit_code == 0
    assert len((tmp_path / "o" / "diagnostics.csv").read_text().splitlines()) == 2


def test_evolve_instability_exit_codes(runner, tmp_path):
    forced = write(tmp_path, {**ETA, "dt": 0.2, "force_dt": True, "t_end": 30.0, "snapshot_every": 1.0, "track_M": False})
    res = runner.invoke(main, ["evolve", "--config", forced, "--out-dir", str(tmp_path / "o")])
    assert res.exit_code == 4
    unforced = write(tmp_path, {**ETA, "dt": 0.2}, "u.json")
    assert runner.invoke(main, ["evolve", "--config", unforced, "--out-dir", str(tmp_path / "o")]).exit_code == 4


def test_evolve_bad_csv_initial(runner, tmp_path):
    cfg = write(tmp_path, {**ETA, "initial": {"scenario": "csv", "path": str(tmp_path / "missing.csv")}})
    assert runner.invoke(main, ["evolve", "--config", cfg, "--out-dir", str(tmp_path / "o")]).exit_code == 2


def test_rate_command(runner, tmp_path):
    cfg = write(tmp_path, ETA)
    runner.invoke(main, ["evolve", "--config", cfg, "--out-dir", str(tmp_path / "o")])
    diag_csv = str(tmp_path / "o" / "diagnostics.csv")
    res = runner.invoke(main, ["rate", "--in", diag_csv, "--column", "l1_dist", "--window", "0.5:2"])
    assert res.exit_code == 0
    fit = json.loads(res.output)
    assert fit["lambda"] == pytest.approx(1.0, rel=0.05)
    assert fit["window"] == [0.5, 2.0]
    assert runner.invoke(main, ["rate", "--in", diag_csv, "--column", "nope"]).exit_code == 2
    assert runner.invoke(main, ["rate", "--in", diag_csv, "--window", "5"]).exit_code == 2
    assert runner.invoke(main, ["rate", "--in", diag_csv, "--window", "10:20"]).exit_code == 2


def test_verify_command(runner, tmp_path):
    res = runner.invoke(main, ["verify", "--check", "kernel_identities", "--check", "property_suites"])
    assert res.exit_code == 0, res.output
    assert "kernel_identities" in res.output and "PASS" in res.output
    assert runner.invoke(main, ["verify", "--check", "bogus"]).exit_code == 2
    cfg = write(tmp_path, {"checks": ["kernel_identities"], "n_nodes": 400})
    res = runner.invoke(main, ["verify", "--config", cfg, "--json"])
    assert res.exit_code == 0 and json.loads(res.output)[0]["passed"]


def test_verify_failure_exit_code(runner, tmp_path):
    # a tiny slack cannot be met by the certificate
    res = runner.invoke(main, ["verify", "--check", "decay_certificate", "--slack", "0.01"])
    assert res.exit_code == 1
    assert "FAIL" in res.output


def test_counterexample_command(runner, tmp_path):
    res = runner.invoke(main, ["counterexample", "--phi", "sin_log2"])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["d2"] < 1e-8 and rep["variance"] > 0.01 and rep["ratio"] < 1e-6
    res = runner.invoke(main, ["counterexample", "--phi", "constant"])
    assert json.loads(res.output)["degenerate"] is True
    cfg = write(tmp_path, {"phi": "nope"})
    assert runner.invoke(main, ["counterexample", "--config", cfg]).exit_code == 2
