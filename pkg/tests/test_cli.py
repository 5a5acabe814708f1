import csv
import json
import math

import numpy as np
import pytest

from slowfast_burgers.cli import main, sweep_gate
from slowfast_burgers.config import AssumptionError, config_hash, parse_config, resolve
from slowfast_burgers.experiments import ErrorCell, ErrorReport
from slowfast_burgers.spectral import ConfigurationError, build_basis

FAST = ["--set", "simulation.T=0.02", "--set", "simulation.dt=0.001", "--set",
        "simulation.n_modes=8", "--set", "simulation.grid_size=32"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_parse_defaults():
    rc = parse_config(overrides=["simulation.epsilon=0.1"])
    assert rc.cfg.delta == pytest.approx(math.sqrt(0.1), abs=1e-4)
    assert rc.cfg.T == 1.0 and rc.example == "burgers_ou_levy"
    basis = build_basis(32, 128)
    assert np.allclose(basis.to_physical(rc.system.x0)[40:60], 2.0, atol=0.05)
    assert np.allclose(rc.system.y0, basis.constant(1.0))
    assert rc.validation.passed


def test_parse_rejects_epsilon_out_of_range():
    with pytest.raises(ConfigurationError):
        parse_config(overrides=["simulation.epsilon=1.5"])


def test_delta_alignment():
    rc = parse_config(overrides=["simulation.dt=0.01", "simulation.delta=0.05"])
    assert rc.cfg.delta_steps == 5
    with pytest.raises(ConfigurationError):
        parse_config(overrides=["simulation.dt=0.01", "simulation.delta=0.055"])


def test_parse_error_has_line_info(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[simulation]\nepsilon = 0.1\ndt = = 3\n")
    with pytest.raises(ConfigurationError, match="line 3"):
        parse_config(p)


def test_unknown_key_rejected():
    with pytest.raises(ConfigurationError, match="unknown"):
        parse_config(overrides=["simulation.epsilom=0.1"])


def test_config_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('example = "burgers_ou_levy_coupled"\n[simulation]\nepsilon = 0.01\n'
                 '[system]\ncoupling = 0.5\n')
    rc = parse_config(p)
    assert rc.example == "burgers_ou_levy_coupled" and rc.cfg.epsilon == 0.01
    assert np.allclose(rc.system.fbar(np.ones(3)), -1.5)


def test_assumption_failure_names_clause():
    with pytest.raises(AssumptionError, match="A4"):
        parse_config(overrides=["noise.a4_beta=4.0"])
    rc = parse_config(overrides=["noise.a4_beta=4.0"], force=True)
    assert not rc.validation.passed


def test_config_hash_pure():
    assert config_hash(resolve()) == config_hash(resolve())
    assert config_hash(resolve()) != config_hash(resolve({"simulation": {"seed": 1}}))


def test_selfcheck_exit_zero(capsys):
    assert main(["selfcheck"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "selfcheck: PASS" in out


def test_sweep_small_m_warns(tmp_path, capsys):
    rc = main(["sweep", "--out", str(tmp_path), "--mc", "4", "--epsilon", "0.1,0.01", *FAST])
    assert rc == 0
    assert "trend gate skipped" in capsys.readouterr().err
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0][:8] == ["epsilon", "p", "estimate", "stderr", "M_effective", "exclusions",
                           "runtime_s", "config_hash"]
    assert len(rows) == 5
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "ok" and man["seed"] == 2024
    assert rows[1][7] == man["config_hash"]
    assert man["config_hash"] in (tmp_path / "sweep.svg").read_text()
    assert not list(tmp_path.glob("*.partial"))


def test_sweep_csv_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, threads in ((a, "1"), (b, "3")):
        assert main(["sweep", "--out", str(out), "--mc", "5", "--threads", threads, *FAST]) == 0

    def strip(rows):
        i = rows[0].index("runtime_s")
        return [r[:i] + r[i + 1:] for r in rows]

    assert strip(read_csv(a / "sweep.csv")) == strip(read_csv(b / "sweep.csv"))
    assert (a / "sweep.svg").read_bytes() == (b / "sweep.svg").read_bytes()


def test_simulate_outputs(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--dump", *FAST]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert len(rows) == 22 and rows[0][0] == "t" and rows[0][-1] == "config_hash"
    h = json.loads((tmp_path / "manifest.json").read_text())["config_hash"]
    for name in ("trajectory.csv", "averaged.csv", "fast.csv", "trajectory_grid.csv",
                 "noise.csv"):
        assert h in (tmp_path / name).read_text()
    first = tmp_path / "trajectory.csv"
    data = first.read_bytes()
    assert main(["simulate", "--out", str(tmp_path), *FAST]) == 0
    assert first.read_bytes() == data


def test_simulate_blowup_exit_code(tmp_path, capsys):
    rc = main(["simulate", "--out", str(tmp_path), "--seed", "77", "--set", "simulation.dt=0.01",
               "--set", "initial.x0_modes=[100.0]"])
    assert rc == 2
    assert "seed 77" in capsys.readouterr().err
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "blowup"


def test_validation_failure_exit_code(tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--epsilon", "1.5"]) == 1
    assert main(["simulate", "--out", str(tmp_path), "--set", "noise.a4_beta=4.0"]) == 1


def test_drift_command(tmp_path, capsys):
    rc = main(["drift", "--out", str(tmp_path), "--set", "simulation.n_modes=8",
               "--set", "simulation.grid_size=32", "--set", "drift.horizon=30.0",
               "--set", "drift.burn_in=5.0"])
    assert rc == 0
    rows = read_csv(tmp_path / "drift.csv")
    assert rows[0] == ["mode", "estimate", "stderr", "analytic", "config_hash"]
    assert len(rows) == 9
    assert "relative L2 discrepancy" in capsys.readouterr().out


def test_diagnose_command(tmp_path):
    rc = main(["diagnose", "--out", str(tmp_path), "--mc", "3", "--epsilon", "0.1,0.05",
               "--set", "simulation.n_modes=8", "--set", "simulation.grid_size=32",
               "--set", "simulation.T=0.1", "--set", "simulation.dt=0.001",
               "--set", "experiments.increment_dt=0.00025",
               "--set", "experiments.t_fixed=0.05",
               "--set", "experiments.deltas=[0.05, 0.025]",
               "--set", "experiments.aux_epsilon=0.05"])
    assert rc == 0
    for name in ("moments.csv", "increments.csv", "auxiliary.csv"):
        assert (tmp_path / name).exists()


def _report(values):
    cells = [ErrorCell(e, 3.0, v, 0.0, 30, 0, 0.0) for e, v in zip((0.1, 0.01, 0.001), values)]
    return ErrorReport(cells, 30, 1)


def test_sweep_gate_logic():
    assert sweep_gate(_report([1.0, 0.6, 0.3])) == []
    assert sweep_gate(_report([1.0, 1.2, 0.3]))
    assert sweep_gate(_report([1.0, 0.8, 0.6]))
