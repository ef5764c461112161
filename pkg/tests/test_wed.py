import numpy as np
import pytest

from wedflow.acceptance import bvp_solution, random_instance
from wedflow.config import scalar_problem
from wedflow.errors import DomainViolation, MaxIterExceeded
from wedflow.potentials import EnergySplit, Perturbation, Potential, PowerPotential
from wedflow.spaces import DiscreteSpace
from wedflow.wed import (
    TimeGrid,
    Trajectory,
    WedProblem,
    el_residual_rows,
    energy_inequality_slack,
    minimize_wed,
    wed_gradient,
    wed_value,
)


def test_time_grid():
    g = TimeGrid(1.0, 7, 0.1)
    assert abs(g.tau * g.steps_N - 1.0) < 1e-14
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1, 0.1)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 4, 0.0)


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 0.5, 10.0])
def test_node_weights_integrate_the_weight_exactly(eps):
    g = TimeGrid(1.0, 50, eps)
    total = np.sum(g.node_weights() * g.decay)
    assert total == pytest.approx(eps * (1 - np.exp(-1.0 / eps)), rel=1e-12)
    kin = np.sum(g.kinetic_weights() * g.decay[1:])
    assert kin == pytest.approx(eps * (1 - np.exp(-1.0 / eps)), rel=1e-12)


def test_trajectory_constraint():
    g = TimeGrid(1.0, 4, 0.1)
    with pytest.raises(ValueError):
        Trajectory(g, np.ones((5, 1)), np.zeros(1))
    tr = Trajectory.constant(g, [2.0])
    assert np.all(tr.velocities == 0)


@pytest.mark.parametrize("N", [10, 40, 160])
def test_constant_trajectory_value(N):
    eps, T, u0 = 0.1, 1.0, 1.5
    prob = scalar_problem(TimeGrid(T, N, eps), u0=u0)
    exact = 0.5 * u0 ** 2 * eps * (1 - np.exp(-T / eps))
    val = wed_value(prob, Trajectory.constant(prob.time, [u0]))
    assert abs(val - exact) <= 2 / N * exact


def test_zero_value_and_gradient():
    prob = scalar_problem(TimeGrid(1.0, 10, 0.1), u0=0.0)
    tr = Trajectory.constant(prob.time, [0.0])
    assert wed_value(prob, tr) == 0.0
    assert not np.any(wed_gradient(prob, tr))


def test_linearity_in_w(rng):
    prob = scalar_problem(TimeGrid(1.0, 10, 0.2))
    states = np.vstack([[1.0], rng.standard_normal((10, 1))])
    w = rng.standard_normal((10, 1))
    g = prob.time
    B = g.node_weights()[1:] * g.decay[1:]
    diff = wed_value(prob, states, w) - wed_value(prob, states)
    assert diff == pytest.approx(-np.sum(B * w[:, 0] * states[1:, 0]), rel=1e-13)


@pytest.mark.parametrize("p,m", [(1.5, 2.0), (2.0, 3.0), (3.0, 2.0)])
def test_gradient_vs_finite_differences(rng, p, m):
    prob, w, traj = random_instance(rng, p, m)
    g = wed_gradient(prob, traj, w) * prob.space.full_weights
    fd = np.zeros_like(g)
    for n in range(1, traj.shape[0]):
        for j in range(traj.shape[1]):
            h = 1e-6 * max(1.0, abs(traj[n, j]))
            up, dn = traj.copy(), traj.copy()
            up[n, j] += h
            dn[n, j] -= h
            fd[n - 1, j] = (wed_value(prob, up, w) - wed_value(prob, dn, w)) / (2 * h)
    assert np.max(np.abs(fd - g)) <= 1e-6 * np.max(np.abs(g))


def test_rearranged_euler_lagrange_identity(rng):
    """Gradient rows divided by the node weights give the discrete equation."""
    prob = scalar_problem(TimeGrid(1.0, 20, 0.3))
    states = np.vstack([[1.0], rng.standard_normal((20, 1))])
    g = prob.time
    r = el_residual_rows(prob, states)
    xi = np.diff(states, axis=0)[:, 0] / g.tau
    xi_next = np.append(xi[1:], 0.0)
    c = g.epsilon * g.kinetic_weights() / (g.tau * g.node_weights()[1:])
    direct = states[1:, 0] + c * (xi - np.exp(-g.s) * xi_next)
    assert np.allclose(r[:, 0], direct, rtol=1e-12)
    B = g.node_weights()[1:] * g.decay[1:]
    assert np.allclose(wed_gradient(prob, states), B[:, None] * r)


def test_bvp_minimizer(scalar_bvp):
    rep = minimize_wed(scalar_bvp)
    u = rep.minimizer.states[:, 0]
    assert np.max(np.abs(u - bvp_solution(1e-2, 1.0, scalar_bvp.time.times))) <= 5e-4
    assert rep.el_residual <= 1e-8 and rep.final_xi_norm <= 1e-3
    assert rep.functional_value <= wed_value(scalar_bvp, Trajectory.constant(scalar_bvp.time, [1.0]))


def test_bvp_second_order():
    errs = []
    for N in (50, 100, 200):
        prob = scalar_problem(TimeGrid(1.0, N, 0.05))
        u = minimize_wed(prob).minimizer.states[:, 0]
        errs.append(np.max(np.abs(u - bvp_solution(0.05, 1.0, prob.time.times))))
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_stationary_initial_value():
    prob = scalar_problem(TimeGrid(1.0, 20, 0.1), u0=0.0)
    rep = minimize_wed(prob)
    assert rep.iterations == 0 and rep.el_residual <= 1e-8
    assert not np.any(rep.minimizer.states)


def test_uniqueness_from_two_initialisations(rng):
    prob = scalar_problem(TimeGrid(1.0, 50, 0.05))
    tol = 1e-10
    a = minimize_wed(prob, tol=tol, init=np.vstack([[1.0], rng.standard_normal((50, 1))]))
    b = minimize_wed(prob, tol=tol, init=np.vstack([[1.0], 5 * rng.standard_normal((50, 1))]))
    assert np.max(np.abs(a.minimizer.states - b.minimizer.states)) <= 10 * tol


def test_gradient_small_at_minimizer(scalar_bvp):
    rep = minimize_wed(scalar_bvp, tol=1e-10)
    r = el_residual_rows(scalar_bvp, rep.minimizer)
    assert np.max(np.abs(r)) <= 1e-10


def test_natural_final_condition_tightens_with_tol(rng):
    prob, w, _ = random_instance(rng, 2.0, 2.0)
    loose = minimize_wed(prob, w, tol=1e-4)
    tight = minimize_wed(prob, w, tol=1e-10)
    assert tight.final_xi_norm <= loose.final_xi_norm + 1e-12
    assert tight.final_xi_norm <= 1e-8


def test_energy_inequality_on_minimizer(scalar_bvp):
    rep = minimize_wed(scalar_bvp)
    slack, scale = energy_inequality_slack(scalar_bvp, rep.minimizer)
    assert slack >= -10 * scalar_bvp.time.tau * scale


def test_max_iter_exceeded(scalar_bvp):
    with pytest.raises(MaxIterExceeded) as info:
        minimize_wed(scalar_bvp, tol=1e-14, max_iter=0)
    assert info.value.report is not None


class Barrier(Potential):
    """-log(1 - u^2) on (-1, 1), +inf outside."""

    def value(self, u):
        u = np.asarray(u)
        return float("inf") if np.any(np.abs(u) >= 1) else float(-np.sum(self.space.full_weights * np.log(1 - u ** 2)))

    def gradient(self, u):
        return 2 * u / (1 - u ** 2)


def test_domain_violation():
    space = DiscreteSpace.from_weights([1.0])
    grid = TimeGrid(1.0, 4, 0.1)
    prob = WedProblem(grid, PowerPotential(space, 2.0), EnergySplit(Barrier(space)), Perturbation.zero(space),
                      np.array([0.5]))
    with pytest.raises(DomainViolation):
        wed_value(prob, np.array([[0.5], [0.9], [1.2], [0.0], [0.0]]))
    with pytest.raises(DomainViolation):
        WedProblem(grid, PowerPotential(space, 2.0), EnergySplit(Barrier(space)), Perturbation.zero(space),
                   np.array([2.0]))
