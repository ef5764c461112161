"""Discrete weighted energy-dissipation (WED) functional and its minimiser.

A trajectory u^0 = u0, u^1, ..., u^N lives on a uniform grid t_n = n tau.
Velocities are backward differences v^n = (u^n - u^{n-1}) / tau.  The weight
exp(-t/eps) is integrated exactly against the discrete trajectory:

    I(u) = sum_{n=1}^{N} eps * K_n * psi(v^n)
         + sum_{n=0}^{N} B_n * (phi(u^n) - <w^n, u^n>)

with K_n the integral of the weight over interval n (velocities are
piecewise constant) and B_n its integral against the hat function of node n
(states are piecewise linear).  The pairing at n = 0 is dropped since u^0 is
fixed.  Dividing the stationarity condition of row n by B_n gives

    r^n = eta1(u^n) - eta2(u^n) - w^n + c_n (xi^n - e^{-s} xi^{n+1}),

xi^n = dpsi(v^n), xi^{N+1} = 0, s = tau/eps, which is a consistent
discretisation of -eps xi' + xi + eta = w with xi(T) = 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainViolation, LineSearchFailed, MaxIterExceeded
from .moreau_yosida import YosidaConfig, moreau_envelope, yosida_gradient, yosida_hessian
from .potentials import EnergySplit, Perturbation, Potential, ZeroPotential


def _expm1_ratio(s):
    """(e^s - 1 - s)/s and (e^-s - 1 + s)/s, accurate for small s."""
    if s < 1e-4:
        a = s / 2 + s * s / 6 + s ** 3 / 24
        b = s / 2 - s * s / 6 + s ** 3 / 24
        return a, b
    return (np.expm1(s) - s) / s, (np.expm1(-s) + s) / s


@dataclass(frozen=True)
class TimeGrid:
    horizon_T: float
    steps_N: int
    epsilon: float

    def __post_init__(self):
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be > 0")
        if int(self.steps_N) != self.steps_N or self.steps_N < 2:
            raise ValueError("steps_N must be an integer >= 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    @property
    def tau(self) -> float:
        return self.horizon_T / self.steps_N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps_N + 1) * self.tau

    @property
    def s(self) -> float:
        return self.tau / self.epsilon

    @property
    def decay(self) -> np.ndarray:
        """exp(-t_n/eps) for n = 0..N."""
        return np.exp(-self.times / self.epsilon)

    def kinetic_weights(self) -> np.ndarray:
        """K_n / exp(-t_n/eps) for n = 1..N (constant in n)."""
        return np.full(self.steps_N, self.epsilon * np.expm1(self.s))

    def node_weights(self) -> np.ndarray:
        """B_n / exp(-t_n/eps) for n = 0..N."""
        left, right = _expm1_ratio(self.s)
        b = np.full(self.steps_N + 1, self.epsilon * (left + right))
        b[0] = self.epsilon * right
        b[-1] = self.epsilon * left
        return b

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=float(epsilon))


@dataclass
class Trajectory:
    grid: TimeGrid
    states: np.ndarray
    u0_fixed: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.u0_fixed = np.asarray(self.u0_fixed, dtype=float)
        if self.states.shape[0] != self.grid.steps_N + 1:
            raise ValueError("trajectory needs N+1 states")
        if not np.array_equal(self.states[0], self.u0_fixed):
            raise ValueError("first state must equal the fixed initial value")

    @classmethod
    def constant(cls, grid, u0):
        u0 = np.asarray(u0, dtype=float)
        return cls(grid, np.tile(u0, (grid.steps_N + 1, 1)), u0)

    @classmethod
    def from_unknowns(cls, grid, u0, unknowns):
        u0 = np.asarray(u0, dtype=float)
        return cls(grid, np.vstack([u0[None, :], unknowns]), u0)

    @property
    def velocities(self) -> np.ndarray:
        return np.diff(self.states, axis=0) / self.grid.tau


@dataclass
class WedProblem:
    time: TimeGrid
    psi: Potential
    energy: EnergySplit
    perturbation: Perturbation
    u0: np.ndarray
    yosida: Optional[YosidaConfig] = None

    def __post_init__(self):
        self.u0 = self.space.check(self.u0).copy()
        if not np.isfinite(self.energy.phi1.value(self.u0)):
            raise DomainViolation("initial value outside the domain of phi1")
        if not self.energy.phi2.is_zero and self.yosida is None:
            raise ValueError("a nonzero phi2 needs a Yosida configuration")

    @property
    def space(self):
        return self.psi.space

    def with_epsilon(self, epsilon):
        return replace(self, time=self.time.with_epsilon(epsilon))

    def with_lambda(self, lam):
        cfg = self.yosida or YosidaConfig(lam, exponent_p=self.space.exponent_p)
        return replace(self, yosida=replace(cfg, lam=float(lam)))

    def convex_part(self):
        """Same data with phi2 removed (phi2 is then fed through w)."""
        energy = EnergySplit(self.energy.phi1, ZeroPotential(self.space), 0.0, dict(self.energy.info))
        return replace(self, energy=energy)

    def forcing_terms(self, states) -> np.ndarray:
        """f(u^n, t_n) for n = 1..N, one row per interval."""
        t = self.time.times
        return np.array([self.perturbation.apply(states[n], t[n]) for n in range(1, len(states))])


@dataclass
class WedReport:
    minimizer: Trajectory
    functional_value: float
    el_residual: float
    final_xi_norm: float
    iterations: int
    terminal_xi: float = 0.0
    wall_time: float = 0.0
    history: list = field(default_factory=list)


# -- row-wise evaluation ------------------------------------------------------


def _rows_gradient(pot, U):
    if pot.is_zero:
        return np.zeros_like(U)
    if pot.separable:
        return pot.derivative(U)
    return np.array([pot.gradient(u) for u in U])


def _rows_value(pot, U):
    if pot.is_zero:
        return np.zeros(len(U))
    if pot.separable:
        return pot.density(U) @ pot.space.full_weights
    return np.array([pot.value(u) for u in U])


def _rows_hessian(pot, U):
    """Per-row Hessians: an (N, size) diagonal array when separable, else a list."""
    if pot.is_zero:
        return np.zeros_like(U)
    if pot.separable:
        return pot.second_derivative(U)
    return [pot.hessian(u) for u in U]


def _check_w(problem, w):
    N, size = problem.time.steps_N, problem.space.size
    if w is None:
        return np.zeros((N, size))
    w = np.asarray(w, dtype=float)
    if w.shape != (N, size):
        raise ValueError(f"w must have shape {(N, size)}, got {w.shape}")
    return w


def _states(problem, traj):
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if not np.array_equal(states[0], problem.u0):
        raise ValueError("trajectory does not start at u0")
    return states


def wed_value(problem: WedProblem, traj, w=None) -> float:
    states = _states(problem, traj)
    w = _check_w(problem, w)
    grid = problem.time
    E = grid.decay
    v = np.diff(states, axis=0) / grid.tau
    phi1 = _rows_value(problem.energy.phi1, states)
    if not np.all(np.isfinite(phi1)):
        raise DomainViolation("phi1 is infinite along the trajectory")
    bulk = phi1.copy()
    if not problem.energy.phi2.is_zero:
        bulk -= np.array([moreau_envelope(problem.energy.phi2, u, problem.yosida) for u in states])
    pair = np.einsum("ij,ij->i", w * problem.space.full_weights, states[1:])
    bulk[1:] -= pair
    kin = grid.epsilon * grid.kinetic_weights() * E[1:] * _rows_value(problem.psi, v)
    return float(np.sum(kin) + np.sum(grid.node_weights() * E * bulk))


def _el_parts(problem, states, w):
    """Scaled residual rows r^n (n=1..N) and the pieces the Jacobian needs."""
    grid = problem.time
    tau, s = grid.tau, grid.s
    U = states[1:]
    v = np.diff(states, axis=0) / tau
    xi = _rows_gradient(problem.psi, v)
    kin = grid.epsilon * grid.kinetic_weights()
    c = kin / (tau * grid.node_weights()[1:])
    xi_next = np.vstack([xi[1:], np.zeros((1, xi.shape[1]))])
    eta1 = _rows_gradient(problem.energy.phi1, U)
    r = eta1 - w + c[:, None] * (xi - np.exp(-s) * xi_next)
    eta2 = None
    if not problem.energy.phi2.is_zero:
        eta2 = np.array([yosida_gradient(problem.energy.phi2, u, problem.yosida) for u in U])
        r -= eta2
    scale = max(np.max(np.abs(eta1)), np.max(np.abs(w)), np.max(np.abs(c[:, None] * xi)), 1.0)
    return r, v, c, scale


def el_residual_rows(problem, traj, w=None) -> np.ndarray:
    """Discrete Euler-Lagrange residual, one dual density per n = 1..N."""
    return _el_parts(problem, _states(problem, traj), _check_w(problem, w))[0]


def wed_gradient(problem: WedProblem, traj, w=None) -> np.ndarray:
    """dI/du^n for n = 1..N as dual densities (weights live in the pairing)."""
    states = _states(problem, traj)
    if not np.all(np.isfinite(_rows_value(problem.energy.phi1, states))):
        raise DomainViolation("phi1 is infinite along the trajectory")
    r = el_residual_rows(problem, states, w)
    B = problem.time.node_weights()[1:] * problem.time.decay[1:]
    return B[:, None] * r


def _jacobian(problem, states, v, c):
    grid = problem.time
    N, size = grid.steps_N, problem.space.size
    U = states[1:]
    es = np.exp(-grid.s)
    hpsi = _rows_hessian(problem.psi, v)
    h1 = _rows_hessian(problem.energy.phi1, U)
    phi2 = problem.energy.phi2
    h2 = None if phi2.is_zero else [yosida_hessian(phi2, u, problem.yosida) for u in U]

    rows, cols, vals = [], [], []

    def put(block, bi, bj, factor=1.0):
        if isinstance(block, np.ndarray) and block.ndim == 1:
            idx = np.arange(size)
            rows.append(bi * size + idx)
            cols.append(bj * size + idx)
            vals.append(factor * block)
        else:
            b = block.tocoo()
            rows.append(bi * size + b.row)
            cols.append(bj * size + b.col)
            vals.append(factor * b.data)

    for n in range(N):
        cn = c[n] / grid.tau
        put(h1[n], n, n)
        if h2 is not None:
            put(h2[n], n, n, -1.0)
        put(hpsi[n], n, n, cn)
        if n + 1 < N:
            put(hpsi[n + 1], n, n, cn * es)
            put(hpsi[n + 1], n, n + 1, -cn * es)
        if n > 0:
            put(hpsi[n], n, n - 1, -cn)
    J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N * size, N * size))
    return J.tocsc()


def _max_dual_norm(space, rows):
    q = space.exponent_p_conj
    return float(np.max((np.abs(rows) ** q @ space.full_weights) ** (1.0 / q)))


def minimize_wed(problem: WedProblem, w=None, tol=1e-8, max_iter=100, init=None) -> WedReport:
    """Newton's method on the scaled Euler-Lagrange system.

    The Jacobian is block tridiagonal in time and is factorised directly; a
    backtracking search on the residual merit function globalises the step.
    Convergence means max_n |r^n|_{p'} <= tol * max(1, scale) where scale is
    the largest term in the residual (relevant for stiff energies).
    """
    t0 = time.perf_counter()
    w = _check_w(problem, w)
    grid, space = problem.time, problem.space
    if init is None:
        states = Trajectory.constant(grid, problem.u0).states
    else:
        states = np.array(init.states if isinstance(init, Trajectory) else init, dtype=float)
        states[0] = problem.u0
    weights = space.full_weights

    def evaluate(st):
        r, v, c, scale = _el_parts(problem, st, w)
        merit = 0.5 * float(np.sum(r * r @ weights))
        return r, v, c, scale, merit

    r, v, c, scale, merit = evaluate(states)
    history = []
    it = 0
    while True:
        res = _max_dual_norm(space, r)
        history.append(res)
        if res <= tol * scale:
            break
        if it >= max_iter:
            raise MaxIterExceeded(f"WED residual {res:.3e} after {it} Newton steps",
                                  report=_report(problem, states, w, res, it, t0, history, r, c))
        J = _jacobian(problem, states, v, c)
        try:
            step = spla.splu(J).solve(-r.ravel()).reshape(r.shape)
        except RuntimeError as exc:
            raise LineSearchFailed(f"singular Newton system: {exc}") from exc
        t = 1.0
        while True:
            trial = states.copy()
            trial[1:] += t * step
            try:
                r_t, v_t, c_t, scale_t, merit_t = evaluate(trial)
                ok = np.isfinite(merit_t) and merit_t <= (1.0 - 1e-4 * t) * merit
            except (DomainViolation, FloatingPointError):
                ok = False
            if ok:
                break
            t *= 0.5
            if t < 1e-10:
                # roundoff floor: accept if already near tolerance
                if res <= 100 * tol * scale:
                    return _report(problem, states, w, res, it, t0, history, r, c)
                raise LineSearchFailed(f"no descent along the Newton direction (residual {res:.3e})",
                                       report=_report(problem, states, w, res, it, t0, history, r, c))
        states, r, v, c, scale, merit = trial, r_t, v_t, c_t, scale_t, merit_t
        it += 1
    return _report(problem, states, w, res, it, t0, history, r, c)


def _report(problem, states, w, res, it, t0, history, r, c):
    grid, space = problem.time, problem.space
    traj = Trajectory(grid, states, problem.u0)
    # costate that would be needed after T to balance the last row
    implied = np.exp(grid.s) * r[-1] / c[-1]
    last_xi = problem.psi.gradient(traj.velocities[-1])
    return WedReport(
        minimizer=traj,
        functional_value=wed_value(problem, traj, w),
        el_residual=float(res),
        final_xi_norm=space.dual_norm(implied),
        iterations=int(it),
        terminal_xi=space.dual_norm(last_xi),
        wall_time=time.perf_counter() - t0,
        history=list(history),
    )


def energy_inequality_slack(problem: WedProblem, traj) -> tuple:
    """Slack of the discrete energy inequality and the data scale.

    Returns (rhs - lhs, scale) for

        sum tau <xi^n, v^n> <= eps psi(0) - phi1(u^N) + phi1(u^0)
                               + phi2(u^N) - phi2(u^0) + sum tau <f(u^n), v^n>

    with phi2 replaced by its Moreau envelope when a Yosida config is set.
    """
    grid, space = problem.time, problem.space
    states = _states(problem, traj)
    tau = grid.tau
    v = np.diff(states, axis=0) / tau
    xi = _rows_gradient(problem.psi, v)
    fw = space.full_weights
    lhs = tau * float(np.sum(np.einsum("ij,ij->i", xi * fw, v)))
    f = problem.forcing_terms(states)
    work = tau * float(np.sum(np.einsum("ij,ij->i", f * fw, v)))
    phi1 = problem.energy.phi1
    e1 = phi1.value(states[0]) - phi1.value(states[-1])
    e2 = 0.0
    if not problem.energy.phi2.is_zero:
        phi2, cfg = problem.energy.phi2, problem.yosida
        e2 = moreau_envelope(phi2, states[-1], cfg) - moreau_envelope(phi2, states[0], cfg)
    psi0 = problem.psi.value(space.zeros())
    rhs = grid.epsilon * psi0 + e1 + e2 + work
    scale = max(1.0, abs(phi1.value(states[0])), abs(lhs), abs(work), abs(e2))
    return rhs - lhs, scale
