import numpy as np
import pytest

from wedflow.acceptance import bvp_solution, decreasing
from wedflow.config import scalar_problem
from wedflow.errors import BracketInvalid
from wedflow.fixed_point import FixedPointConfig
from wedflow.sweeps import SweepPlan, causal_limit_sweep, detect_epsilon0, lambda_sweep, thread_count
from wedflow.wed import TimeGrid


def test_plan_validation():
    with pytest.raises(ValueError):
        SweepPlan((0.1, 0.2))
    with pytest.raises(ValueError):
        SweepPlan((0.1, -0.2))
    with pytest.raises(ValueError):
        SweepPlan((0.2, 0.1), lambdas=(1e-3, 1e-2))
    with pytest.raises(ValueError):
        SweepPlan((0.2,), metrics={"nonsense"})


def test_causal_sweep_against_exact():
    prob = scalar_problem(TimeGrid(1.0, 400, 0.2))
    table = causal_limit_sweep(prob, SweepPlan((0.2, 0.1, 0.05, 0.025)),
                               reference=np.exp(-prob.time.times)[:, None])
    errs = table.column("sup_error")
    assert decreasing(errs)
    assert errs[-1] <= 3 * (0.025 + prob.time.tau)
    assert decreasing(table.column("residual"))
    assert "lambda" not in table.to_csv().splitlines()[0]


def test_causal_sweep_against_oracle_default():
    prob = scalar_problem(TimeGrid(1.0, 200, 0.2))
    table = causal_limit_sweep(prob, SweepPlan((0.2, 0.1)))
    assert decreasing(table.column("sup_error"))


def test_bvp_reference_is_discretisation_only():
    errs = []
    for N in (100, 200):
        prob = scalar_problem(TimeGrid(1.0, N, 0.05))
        ref = bvp_solution(0.05, 1.0, prob.time.times)[:, None]
        errs.append(causal_limit_sweep(prob, SweepPlan((0.05,)), reference=ref).rows[0].sup_error)
    assert errs[0] / errs[1] > 3.0


def test_lambda_sweep_increments_shrink():
    prob = scalar_problem(TimeGrid(1.0, 100, 0.05), phi_c=2.0, phi2_c=1.0)
    plan = SweepPlan((0.05,), lambdas=(1e-1, 1e-2, 1e-3))
    table = lambda_sweep(prob, plan, FixedPointConfig(outer_tol=1e-10))
    incs = table.column("increment")[1:]
    assert incs[1] < incs[0]
    assert "lambda" in table.to_csv().splitlines()[0]


def test_lambda_sweep_without_phi2_is_flat():
    prob = scalar_problem(TimeGrid(1.0, 50, 0.05))
    table = lambda_sweep(prob, SweepPlan((0.05,), lambdas=(1e-1, 1e-2, 1e-3)))
    assert np.all(table.column("increment")[1:] == 0.0)


def test_swapped_order_reaches_the_same_final_state():
    prob = scalar_problem(TimeGrid(1.0, 50, 0.1), phi_c=2.0, phi2_c=1.0)
    cfg = FixedPointConfig(outer_tol=1e-10)
    a = lambda_sweep(prob, SweepPlan((0.1, 0.05), lambdas=(1e-1, 1e-2)), cfg)
    b = lambda_sweep(prob, SweepPlan((0.1, 0.05), lambdas=(1e-1, 1e-2), swap_order=True), cfg)
    smallest = np.nanmin(np.concatenate([a.column("increment"), b.column("increment")]))
    assert np.max(np.abs(a.rows[-1].solution - b.rows[-1].solution)) <= 10 * smallest
    assert (a.rows[-1].epsilon, a.rows[-1].lam) == (b.rows[-1].epsilon, b.rows[-1].lam)


def test_divergent_rows_recorded():
    prob = scalar_problem(TimeGrid(1.0, 50, 1.0), f_c=10.0)
    table = causal_limit_sweep(prob, SweepPlan((1.0, 0.01)), reference=np.zeros((51, 1)))
    assert table.rows[0].diverged and not table.rows[1].diverged
    assert table.to_csv().splitlines()[1].split(",")[5] == "true"


def test_csv_is_reproducible_across_thread_counts(monkeypatch):
    prob = scalar_problem(TimeGrid(1.0, 100, 0.2), f_c=0.5)
    plan = SweepPlan((0.2, 0.1, 0.05))
    monkeypatch.setenv("WEDFLOW_THREADS", "1")
    assert thread_count() == 1
    a = causal_limit_sweep(prob, plan).to_csv()
    monkeypatch.setenv("WEDFLOW_THREADS", "3")
    b = causal_limit_sweep(prob, plan).to_csv()
    assert a == b


def test_detect_epsilon0():
    stable = scalar_problem(TimeGrid(1.0, 50, 0.1))
    res = detect_epsilon0(stable, (0.01, 1.0))
    assert not res.found and res.epsilon0 == 1.0
    amplifying = scalar_problem(TimeGrid(1.0, 100, 0.1), f_c=10.0)
    a = detect_epsilon0(amplifying, (0.01, 1.0))
    b = detect_epsilon0(amplifying, (0.005, 0.5))
    assert a.found and b.found and abs(a.epsilon0 / b.epsilon0 - 1) <= 0.1
    with pytest.raises(BracketInvalid):
        detect_epsilon0(amplifying, (0.5, 1.0))
