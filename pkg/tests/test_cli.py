"""End-to-end tests of the command line front end.

Each test drives ``main`` in-process with a config written to a temp
directory, then inspects exit codes and emitted artifacts. CSV headers
are pinned verbatim: downstream plotting depends on them.
"""

import json

import pytest

from dblab.cli import RunConfig, _parse_grid, main

BASE_CONFIG = {
    "agent": {"p_bar": 0.75, "lambda": 0.75, "mu": 1.0, "c": 0.5,
              "B": 5.0, "T": 1.9},
    "model": {"family": "SafeArm", "nu": 1.0, "B_nu": 5.0, "c_nu": 0.5},
}


@pytest.fixture
def config_path(tmp_path):
    def write(name="run.json", **overrides):
        data = {k: dict(v) for k, v in BASE_CONFIG.items()}
        for key, val in overrides.items():
            if isinstance(val, dict) and key in data:
                data[key].update(val)
            else:
                data[key] = val
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return write


def test_solve_writes_schedule_artifact(config_path, tmp_path, capsys):
    rc = main(["solve", "--config", str(config_path()),
               "--out", str(tmp_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "schedule.json").read_text())
    assert payload["structure"] == "THINK_DO"
    assert payload["tau1"] == 0.0
    assert payload["tau2"] == pytest.approx(0.700, abs=1e-3)
    assert payload["tau3"] == pytest.approx(1.200, abs=1e-3)
    assert payload["q_at_switch"] == pytest.approx(0.75, abs=1e-6)
    assert payload["no_shirk_ok"] is True
    th = payload["thresholds"]
    assert th["p_hat"] == pytest.approx(2.0 / 3.0, rel=1e-9)
    assert th["p_tilde"] == pytest.approx(0.8902, abs=1e-3)
    assert th["p_check"] == pytest.approx(0.5008, abs=1e-3)
    assert th["T1"] == pytest.approx(1.200, abs=1e-3)
    inf = payload["infinite_horizon"]
    assert inf["structure"] == "DO_THEN_THINK"
    assert inf["p_hat"] == th["p_hat"]
    assert "THINK_DO" in capsys.readouterr().out


def test_missing_config_exits_1(tmp_path, capsys):
    rc = main(["solve", "--config", str(tmp_path / "absent.json"),
               "--out", str(tmp_path)])
    assert rc == 1
    assert "absent.json" in capsys.readouterr().err


def test_unparseable_config_exits_1(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    rc = main(["solve", "--config", str(path), "--out", str(tmp_path)])
    assert rc == 1
    assert "input error" in capsys.readouterr().err


def test_invalid_agent_exits_2(config_path, tmp_path, capsys):
    bad = config_path(agent={"p_bar": 1.2})
    rc = main(["solve", "--config", str(bad), "--out", str(tmp_path)])
    assert rc == 2
    assert "p_bar" in capsys.readouterr().err

    typo = config_path(name="typo.json", agent={"pbar": 0.75})
    assert main(["solve", "--config", str(typo),
                 "--out", str(tmp_path)]) == 2


def test_solver_failure_exits_3(config_path, tmp_path, capsys):
    # a bisection tolerance this coarse degenerates the feasibility
    # bracket, which the solver reports rather than papering over
    bad = config_path(solver={"tau_tol": 0.05})
    rc = main(["solve", "--config", str(bad), "--out", str(tmp_path)])
    assert rc == 3
    assert "solver failure" in capsys.readouterr().err


def test_unwritable_out_dir_exits_4(config_path, tmp_path, capsys):
    rc = main(["solve", "--config", str(config_path()),
               "--out", str(tmp_path / "missing" / "dir")])
    assert rc == 4
    assert "output error" in capsys.readouterr().err


def test_verify_against_grid_oracle(config_path, tmp_path):
    rc = main(["verify", "--config", str(config_path()),
               "--out", str(tmp_path), "--dt", "1e-3"])
    assert rc == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["pass"] is True
    assert report["kind"] == "reduced"
    assert report["tolerance"] == pytest.approx(5e-3)
    for got, want in zip(report["oracle"], report["solver"]):
        assert got == pytest.approx(want, abs=5e-3)


def test_verify_rejects_coarse_grid(config_path, tmp_path):
    rc = main(["verify", "--config", str(config_path()),
               "--out", str(tmp_path), "--dt", "0.5"])
    assert rc == 2
    rc = main(["verify", "--config", str(config_path(
        oracle={"kind": "nonsense"})), "--out", str(tmp_path)])
    assert rc == 2


def test_sweep_csv_contract(config_path, tmp_path):
    rc = main(["sweep", "--config", str(config_path()),
               "--out", str(tmp_path), "--grid", "0.5:2.0:0.5",
               "--variable", "T"])
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == ("grid_value,tau1,tau2,tau3,structure,p_total,"
                        "p_do_initial,p_think,p_hailmary,"
                        "p_total_backloaded,expected_work")
    assert len(lines) == 5
    first = lines[1].split(",")
    assert first[0] == "0.5" and first[4] == "DO_ONLY"
    # p_total strictly grows with the horizon on this grid
    totals = [float(line.split(",")[5]) for line in lines[1:]]
    assert all(b > a for a, b in zip(totals, totals[1:]))


def test_sweep_needs_variable_and_grid(config_path, tmp_path):
    rc = main(["sweep", "--config", str(config_path()),
               "--out", str(tmp_path), "--grid", "0.5:2.0:0.5"])
    assert rc == 2
    rc = main(["sweep", "--config", str(config_path()),
               "--out", str(tmp_path), "--variable", "T"])
    assert rc == 2


def test_simulate_csv_deterministic(config_path, tmp_path):
    args = ["simulate", "--config", str(config_path()),
            "--out", str(tmp_path), "--reps", "50000", "--seed", "9"]
    assert main(args) == 0
    first = (tmp_path / "simulate.csv").read_bytes()
    assert main(args) == 0
    second = (tmp_path / "simulate.csv").read_bytes()
    assert first == second
    lines = first.decode().splitlines()
    assert lines[0] == "estimate,std_err,reps,seed"
    est, se, reps, seed = lines[1].split(",")
    assert reps == "50000" and seed == "9"
    assert abs(float(est) - 0.6197) <= 4.0 * float(se)


def test_trajectory_csv_contract(config_path, tmp_path):
    rc = main(["trajectory", "--config", str(config_path()),
               "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,p_progress,p_solution,p_neither"
    assert lines[1] == "0,0,0,1"
    assert len(lines) - 1 == 401
    last = lines[-1].split(",")
    assert float(last[0]) == pytest.approx(1.9, rel=1e-9)
    assert float(last[3]) == pytest.approx(0.2756, abs=1e-3)


def test_runconfig_roundtrip(config_path):
    cfg = RunConfig.from_file(config_path(solver={"tau_tol": 1e-9},
                                          sim={"reps": 1000, "seed": 4}))
    once = cfg.to_json()
    assert RunConfig.from_json(once).to_json() == once
    data = json.loads(once)
    assert data["agent"]["lambda"] == 0.75
    assert data["model"]["family"] == "SafeArm"
    assert data["sim"] == {"reps": 1000, "seed": 4}
    with pytest.raises(ValueError):
        RunConfig.from_dict({"agent": BASE_CONFIG["agent"]})


def test_parse_grid():
    assert _parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert _parse_grid("1:1:0.5") == [1.0]
    with pytest.raises(ValueError):
        _parse_grid("0:1")
    with pytest.raises(ValueError):
        _parse_grid("0:1:-0.5")
