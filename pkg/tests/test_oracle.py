import numpy as np
import pytest

from wedflow.config import scalar_problem
from wedflow.errors import NewtonFailed
from wedflow.oracle import StepperConfig, dissipation_defects, run, step
from wedflow.pde import ParabolicSystemSpec, assemble_problem
from wedflow.sweeps import sup_v_distance
from wedflow.wed import TimeGrid


def test_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(10, newton_tol=0.0)
    with pytest.raises(ValueError):
        StepperConfig(10, treatment_f="implicit")


def test_stationary_step():
    prob = scalar_problem(TimeGrid(1.0, 10, 0.1), u0=0.0)
    assert step(prob, np.zeros(1), 0.1, StepperConfig(10))[0] == 0.0


def test_quadratic_step_and_run():
    prob = scalar_problem(TimeGrid(1.0, 20, 0.1), u0=1.0)
    tau = 1.0 / 20
    assert step(prob, np.array([0.8]), tau, StepperConfig(20))[0] == pytest.approx(0.8 / (1 + tau), rel=1e-12)
    tr = run(prob, StepperConfig(20))
    assert np.allclose(tr.states[:, 0], (1 + tau) ** -np.arange(21.0), rtol=1e-12)


def test_treatment_of_forcing():
    prob = scalar_problem(TimeGrid(1.0, 4, 0.1), u0=1.0)
    prob.perturbation.forcing = lambda t: np.array([t])
    tau = 0.25
    a = step(prob, np.array([0.0]), 0.5, StepperConfig(4, treatment_f="explicit-lag"))[0]
    b = step(prob, np.array([0.0]), 0.5, StepperConfig(4, treatment_f="frozen-previous"))[0]
    assert a == pytest.approx(tau * 0.5 / (1 + tau)) and b == pytest.approx(tau * 0.25 / (1 + tau))


def heat(N, nodes=65, T=0.1):
    prob = assemble_problem(ParabolicSystemSpec(nodes=nodes), TimeGrid(T, N, 0.1))
    tr = run(prob, StepperConfig(N))
    x = prob.space.active_coordinates
    exact = np.exp(-np.pi ** 2 * tr.grid.times)[:, None] * np.sin(np.pi * x)[None, :]
    return prob, tr, sup_v_distance(prob.space, tr.states, exact)


def test_heat_accuracy_and_first_order():
    _, _, e1 = heat(25, nodes=257)
    _, _, e2 = heat(50, nodes=257)
    _, _, e3 = heat(200)
    assert e3 <= 2e-2
    assert 1.5 <= e1 / e2 <= 3.0


def test_dissipation_and_constants():
    prob, tr, _ = heat(40)
    assert np.all(dissipation_defects(prob, tr) <= 1e-10)
    const = scalar_problem(TimeGrid(1.0, 10, 0.1), u0=0.0)
    assert np.all(run(const, StepperConfig(10)).states == 0.0)


def test_newton_failure():
    prob = scalar_problem(TimeGrid(1.0, 10, 0.1), u0=1.0)
    with pytest.raises(NewtonFailed):
        step(prob, np.array([1.0]), 0.1, StepperConfig(10, newton_tol=1e-30, newton_max_iter=1))
