"""Damped Picard iteration closing the nonpotential term.

Two maps are offered:

* ``S``:       v  ->  u = argmin I_{eps, f(v) + A_lam(v)}
* ``S_tilde``: w  ->  f(argmin I_{eps, w}) + A_lam(argmin I_{eps, w})

Both iterate with damping theta; the distance between successive
trajectories in the discrete L^p(0,T;V) norm decides convergence.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceDetected, MaxOuterIterExceeded
from .moreau_yosida import yosida_gradient
from .spaces import conjugate, time_norm
from .wed import Trajectory, WedProblem, WedReport, minimize_wed

VARIANTS = ("S", "S_tilde")


@dataclass(frozen=True)
class FixedPointConfig:
    variant: str = "S"
    damping_theta: float = 0.5
    outer_tol: float = 1e-7
    outer_max_iter: int = 200
    bound_guard: float = 1e6
    inner_tol: float = 1e-8
    inner_max_iter: int = 100

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not 0.0 < self.damping_theta <= 1.0:
            raise ValueError("damping_theta must lie in (0, 1]")
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be > 0")
        if self.outer_max_iter < 1:
            raise ValueError("outer_max_iter must be >= 1")


@dataclass
class FixedPointReport:
    solution: Trajectory
    iterate_distances: np.ndarray
    bound_history: np.ndarray
    converged: bool
    inner_reports: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def outer_iters(self) -> int:
        return len(self.iterate_distances)

    @property
    def last(self) -> WedReport:
        return self.inner_reports[-1]


def closing_terms(problem: WedProblem, states) -> np.ndarray:
    """w^n = f(u^n, t_n) + A_lam(u^n) for n = 1..N."""
    w = problem.forcing_terms(states)
    phi2 = problem.energy.phi2
    if not phi2.is_zero:
        w = w + np.array([yosida_gradient(phi2, u, problem.yosida) for u in states[1:]])
    return w


def trajectory_bound(problem: WedProblem, states) -> float:
    """Discrete W^{1,p}(0,T;V)-type norm of a trajectory."""
    space, tau = problem.space, problem.time.tau
    p = space.exponent_p
    v = np.diff(states, axis=0) / tau
    return float((time_norm(space, states[1:], tau) ** p + time_norm(space, v, tau) ** p) ** (1.0 / p))


def _is_constant_map(problem):
    return not problem.perturbation.state_dependent and problem.energy.phi2.is_zero


def solve_regularized(problem: WedProblem, cfg: FixedPointConfig = FixedPointConfig(),
                      raise_on_failure=True) -> FixedPointReport:
    t0 = time.perf_counter()
    inner = problem.convex_part()
    space, tau = problem.space, problem.time.tau
    theta = cfg.damping_theta

    def solve(w, init):
        return minimize_wed(inner, w, tol=cfg.inner_tol, max_iter=cfg.inner_max_iter, init=init)

    reports, distances, bounds = [], [], []

    def finish(converged, err=None):
        rep = FixedPointReport(reports[-1].minimizer if reports else Trajectory.constant(problem.time, problem.u0),
                               np.array(distances), np.array(bounds), converged, reports,
                               time.perf_counter() - t0)
        if err is not None and raise_on_failure:
            raise err(_failure_message(err, distances, bounds), report=rep)
        return rep

    if _is_constant_map(problem):
        rep = solve(closing_terms(problem, Trajectory.constant(problem.time, problem.u0).states), None)
        reports.append(rep)
        distances.append(0.0)
        bounds.append(trajectory_bound(problem, rep.minimizer.states))
        return finish(True)

    # iterate on trajectories (S) or on dual forcings (S_tilde)
    prev = Trajectory.constant(problem.time, problem.u0).states
    w = closing_terms(problem, prev)
    v = prev
    init = None
    for _ in range(cfg.outer_max_iter):
        if cfg.variant == "S":
            rep = solve(closing_terms(problem, v), init)
            u = rep.minimizer.states
            v_next = (1 - theta) * v + theta * u
            dist = time_norm(space, (v_next - v)[1:], tau)
            v = v_next
        else:
            rep = solve(w, init)
            u = rep.minimizer.states
            w = (1 - theta) * w + theta * closing_terms(problem, u)
            dist = time_norm(space, (u - prev)[1:], tau)
            prev = u
        reports.append(rep)
        init = rep.minimizer
        distances.append(dist)
        bound = trajectory_bound(problem, u)
        bounds.append(bound)
        if not np.isfinite(bound) or bound > cfg.bound_guard:
            return finish(False, DivergenceDetected)
        if dist <= cfg.outer_tol:
            return finish(True)
    return finish(False, MaxOuterIterExceeded)


def _failure_message(err, distances, bounds):
    if err is DivergenceDetected:
        return f"trajectory bound {bounds[-1]:.3e} left the guard after {len(bounds)} iterations"
    return f"no convergence after {len(distances)} outer iterations (last distance {distances[-1]:.3e})"


def solution_map_continuity_probe(problem: WedProblem, w, dw_scale, seed=0, tol=1e-10) -> float:
    """|u(w + dw) - u(w)|_{L^p(V)} / |dw|_{L^p'(V*)} for a random dw of size dw_scale."""
    if dw_scale == 0:
        return 0.0
    inner = problem.convex_part()
    space, tau = problem.space, problem.time.tau
    w = np.zeros((problem.time.steps_N, space.size)) if w is None else np.asarray(w, dtype=float)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(w.shape)
    q = conjugate(space.exponent_p)
    d *= dw_scale / time_norm(space, d, tau, q)
    u0 = minimize_wed(inner, w, tol=tol).minimizer.states
    u1 = minimize_wed(inner, w + d, tol=tol).minimizer.states
    return time_norm(space, (u1 - u0)[1:], tau) / time_norm(space, d, tau, q)


def gronwall_bound(alpha, B, u, tau) -> bool:
    """Discrete Gronwall check with left-endpoint quadrature.

    If u_n <= alpha_n + tau sum_{k<n} B u_k holds (to slack 10 tau scale),
    returns whether u_n <= alpha_n + tau sum_{k<n} B alpha_k e^{B(t_n - t_k)}
    holds to the same slack.  Returns False when the hypothesis fails.
    """
    alpha = np.asarray(alpha, dtype=float)
    u = np.asarray(u, dtype=float)
    if alpha.shape != u.shape:
        raise ValueError("alpha and u must share the grid")
    t = np.arange(len(u)) * tau
    slack = 10 * tau * max(1.0, np.max(np.abs(u)), np.max(np.abs(alpha)))
    left_u = np.concatenate([[0.0], np.cumsum(u[:-1])]) * tau
    if np.any(u > alpha + B * left_u + slack):
        return False
    bound = alpha.copy()
    for n in range(1, len(u)):
        bound[n] += tau * B * np.sum(alpha[:n] * np.exp(B * (t[n] - t[:n])))
    return bool(np.all(u <= bound + slack))
