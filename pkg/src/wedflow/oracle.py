"""Implicit Euler reference stepper (incremental minimisation).

Each step solves

    dpsi((u - u_prev)/tau) + eta1(u) - A_lam(u) = f(u_prev, t*)

which is the stationarity condition of
tau psi((u - u_prev)/tau) + phi1(u) - phi2_lam(u) - <f(u_prev, t*), u>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NewtonFailed
from .moreau_yosida import moreau_envelope, yosida_gradient, yosida_hessian
from .wed import TimeGrid, Trajectory, WedProblem

TREATMENTS = ("explicit-lag", "frozen-previous")


@dataclass(frozen=True)
class StepperConfig:
    steps_N: int
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    treatment_f: str = "explicit-lag"

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be > 0")
        if self.steps_N < 1:
            raise ValueError("steps_N must be >= 1")
        if self.treatment_f not in TREATMENTS:
            raise ValueError(f"treatment_f must be one of {TREATMENTS}")


def _tau(problem, cfg):
    return problem.time.horizon_T / cfg.steps_N


def _phi2_parts(problem, u):
    phi2 = problem.energy.phi2
    if phi2.is_zero:
        return np.zeros_like(u), None
    return yosida_gradient(phi2, u, problem.yosida), yosida_hessian(phi2, u, problem.yosida)


def step_residual(problem: WedProblem, u, u_prev, force, tau):
    v = (u - u_prev) / tau
    eta2, _ = _phi2_parts(problem, u)
    terms = (problem.psi.gradient(v), problem.energy.phi1.gradient(u), eta2, force)
    scale = max(1.0, max(float(np.max(np.abs(x))) for x in terms))
    return terms[0] + terms[1] - terms[2] - terms[3], scale


def step(problem: WedProblem, u_prev, t, cfg: StepperConfig) -> np.ndarray:
    """Advance from u_prev (at t - tau) to time t."""
    space = problem.space
    tau = _tau(problem, cfg)
    u_prev = space.check(u_prev)
    t_force = t if cfg.treatment_f == "explicit-lag" else t - tau
    force = problem.perturbation.apply(u_prev, t_force)
    w = space.full_weights
    u = u_prev.copy()
    r, scale = step_residual(problem, u, u_prev, force, tau)
    merit = 0.5 * float(np.dot(w, r * r))
    for _ in range(cfg.newton_max_iter):
        if space.dual_norm(r) <= cfg.newton_tol * scale:
            return u
        _, h2 = _phi2_parts(problem, u)
        J = problem.psi.hessian((u - u_prev) / tau) / tau + problem.energy.phi1.hessian(u)
        if h2 is not None:
            J = J - h2
        du = spla.splu(sp.csc_matrix(J)).solve(-r)
        a = 1.0
        while a > 1e-10:
            trial = u + a * du
            r_t, scale_t = step_residual(problem, trial, u_prev, force, tau)
            merit_t = 0.5 * float(np.dot(w, r_t * r_t))
            if np.isfinite(merit_t) and merit_t <= (1 - 1e-4 * a) * merit:
                break
            a *= 0.5
        else:
            raise NewtonFailed(f"line search stalled at residual {space.dual_norm(r):.3e}")
        u, r, scale, merit = trial, r_t, scale_t, merit_t
    if space.dual_norm(r) <= cfg.newton_tol * scale:
        return u
    raise NewtonFailed(f"step residual {space.dual_norm(r):.3e} after {cfg.newton_max_iter} iterations")


def run(problem: WedProblem, cfg: StepperConfig) -> Trajectory:
    if cfg.steps_N < 2:
        raise ValueError("run needs at least 2 steps")
    grid = TimeGrid(problem.time.horizon_T, cfg.steps_N, problem.time.epsilon)
    tau = _tau(problem, cfg)
    states = [problem.u0.copy()]
    for n in range(1, cfg.steps_N + 1):
        states.append(step(problem, states[-1], n * tau, cfg))
    return Trajectory(grid, np.array(states), problem.u0)


def energy(problem: WedProblem, u) -> float:
    """phi1 - phi2_lam (or phi1 - phi2 when phi2 has no envelope)."""
    e = problem.energy.phi1.value(u)
    if not problem.energy.phi2.is_zero:
        e -= moreau_envelope(problem.energy.phi2, u, problem.yosida)
    return e


def dissipation_defects(problem: WedProblem, traj: Trajectory) -> np.ndarray:
    """phi(u^n) + tau psi(v^n) - phi(u^{n-1}) per step; <= 0 for a dissipative run."""
    tau = traj.grid.tau
    e = np.array([energy(problem, u) for u in traj.states])
    psi = np.array([problem.psi.value(v) for v in traj.velocities])
    return e[1:] + tau * psi - e[:-1]
