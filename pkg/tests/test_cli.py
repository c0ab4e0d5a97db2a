import json

import numpy as np
import pytest
from click.testing import CliRunner

from hamsense.cli import main

PLANTED = """\
schema_version: 1
model: {kind: planted, n_qubits: 2, s: 3, seed: 4}
m_grid: [12]
trials: 2
linearized: true
time_factor: 0.05
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(PLANTED)
    return str(path)


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0 and "version" in res.output


def test_model_stdout(runner, config):
    res = runner.invoke(main, ["model", "--config", config])
    assert res.exit_code == 0
    lines = res.output.strip().splitlines()
    assert lines[0] == "index,pauli,coefficient"
    assert len(lines) == 4


def test_bad_config_exits_one(runner, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("schema_version: 1\ntrials: -1\n")
    res = runner.invoke(main, ["benchmark", "--config", str(path)])
    assert res.exit_code == 1
    assert "line 2" in res.output


def test_simulate_then_estimate(runner, config, tmp_path):
    data = tmp_path / "data"
    res = runner.invoke(main, ["simulate", "--config", config, "--out", str(data)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["estimate", "--in", str(data), "--config", config])
    assert res.exit_code == 0, res.output
    report = json.loads((data / "result.json").read_text())
    assert report["converged"] and report["performance"] > 0.99
    assert np.loadtxt(data / "h_star.csv").shape == (16,)


def test_estimate_not_converged_exits_two(runner, config, tmp_path):
    data = tmp_path / "data"
    runner.invoke(main, ["simulate", "--config", config, "--out", str(data), "--m", "40"])
    # overdetermined and noisy enough that a zero residual bound is infeasible
    pbar = np.loadtxt(data / "pbar.csv")
    np.savetxt(data / "pbar.csv", pbar + 1e-3 * np.random.default_rng(0).standard_normal(pbar.size), fmt="%.17e")
    res = runner.invoke(main, ["estimate", "--in", str(data), "--epsilon", "0"])
    assert res.exit_code == 2


def test_estimate_missing_dir_exits_nonzero(runner, tmp_path):
    res = runner.invoke(main, ["estimate", "--in", str(tmp_path / "missing")])
    assert res.exit_code != 0


def test_benchmark_byte_identical(runner, config, tmp_path):
    for name in ("a", "b"):
        res = runner.invoke(main, ["benchmark", "--config", config, "--seed", "5", "--out", str(tmp_path / name)])
        assert res.exit_code == 0, res.output
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


@pytest.mark.parametrize("command, outputs", [("noise-study", ["noise_summary.csv"]), ("certify", ["increments.csv"])])
def test_harness_commands(runner, config, tmp_path, command, outputs):
    res = runner.invoke(main, [command, "--config", config, "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    for name in outputs:
        assert (tmp_path / name).exists()
