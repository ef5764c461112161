import json

import pytest

from wedflow.cli import main
from wedflow.config import RunConfig, build_problem
from wedflow.errors import ConfigInvalid


def _write(tmp_path, data):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_config_round_trip():
    cfg = RunConfig(epsilon=0.05, sweep_lambdas=[1e-2, 1e-3], problem="biharmonic")
    assert RunConfig.parse(cfg.emit()) == cfg


@pytest.mark.parametrize("data, key", [
    ({"epsilon": -1.0}, "epsilon"),
    ({"steps_N": 1}, "steps_N"),
    ({"sweep_epsilons": [0.1, 0.2]}, "sweep_epsilons"),
    ({"not_a_key": 1}, "not_a_key"),
])
def test_invalid_config_names_the_key(data, key):
    with pytest.raises(ConfigInvalid) as exc:
        RunConfig.from_dict(data)
    assert str(exc.value).startswith(key)


def test_every_problem_kind_builds():
    for kind in ("scalar-demo", "parabolic-system", "biharmonic", "custom-quadratic"):
        prob = build_problem(RunConfig(problem=kind, steps_N=10, nodes=9))
        assert prob.time.steps_N == 10


def test_solve_writes_outputs_and_is_reproducible(tmp_path, capsys):
    out = tmp_path / "out"
    path = _write(tmp_path, {"steps_N": 100, "output_dir": str(out)})
    assert main(["solve", "--config", path]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["el_residual"] <= 1e-8
    traj = (out / "trajectory.csv").read_text()
    assert traj.splitlines()[0] == "t,x,u1"
    assert len(traj.splitlines()) == 102
    assert main(["solve", "--config", path]) == 0
    assert (out / "trajectory.csv").read_text() == traj


def test_bad_config_exit_code(tmp_path, capsys):
    path = _write(tmp_path, {"epsilon": -1})
    assert main(["solve", "--config", path]) == ConfigInvalid.exit_code
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == ConfigInvalid.kind and "epsilon" in err["message"]
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == ConfigInvalid.exit_code


def test_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    path = _write(tmp_path, {"steps_N": 100, "output_dir": str(out)})
    assert main(["sweep", "--config", path]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].split(",")[0] == "epsilon" and len(rows) == 5
    assert "sup_error: monotone" in (out / "sweep_summary.txt").read_text()
    assert "wall_ms" not in rows[0]
    assert len(json.loads((out / "sweep_timing.json").read_text())["rows"]) == 4


def test_divergent_sweep_row_does_not_abort(tmp_path, capsys):
    out = tmp_path / "out"
    path = _write(tmp_path, {"f_coefficient": 10, "sweep_epsilons": [1.0, 0.01], "steps_N": 100,
                             "output_dir": str(out)})
    assert main(["sweep", "--config", path]) == 0
    rows = [r.split(",") for r in (out / "sweep.csv").read_text().splitlines()]
    col = rows[0].index("diverged")
    assert rows[1][col] == "true" and rows[2][col] == "false"


def test_accept_list(capsys):
    assert main(["accept", "--list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 11 and lines[0].startswith("criterion  1")
