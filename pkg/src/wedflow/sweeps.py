"""Parameter sweeps over epsilon and lambda, and empirical epsilon_0 detection."""

from __future__ import annotations

import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BracketInvalid, DivergenceDetected, MaxOuterIterExceeded
from .fixed_point import FixedPointConfig, solve_regularized
from .oracle import StepperConfig, run as run_oracle
from .spaces import conjugate, time_norm
from .wed import WedProblem, energy_inequality_slack

METRICS = ("sup_V_error_vs_oracle", "el_residual_unregularized", "energy_inequality_slack")
UNSTABLE = (DivergenceDetected, MaxOuterIterExceeded)


def _strictly_decreasing(values, name):
    a = np.asarray(values, dtype=float)
    if a.ndim != 1 or np.any(a <= 0) or np.any(np.diff(a) >= 0):
        raise ValueError(f"{name} must be positive and strictly decreasing")
    return tuple(float(x) for x in a)


@dataclass(frozen=True)
class SweepPlan:
    epsilons: tuple
    lambdas: tuple = ()
    metrics: frozenset = frozenset(METRICS)
    epsilon0_bisection: bool = False
    swap_order: bool = False

    def __post_init__(self):
        object.__setattr__(self, "epsilons", _strictly_decreasing(self.epsilons, "epsilons"))
        if len(self.epsilons) == 0:
            raise ValueError("epsilons must not be empty")
        lams = _strictly_decreasing(self.lambdas, "lambdas") if len(self.lambdas) else ()
        object.__setattr__(self, "lambdas", lams)
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")
        object.__setattr__(self, "metrics", frozenset(self.metrics))


@dataclass
class SweepRow:
    epsilon: float
    lam: Optional[float] = None
    sup_error: float = math.nan
    residual: float = math.nan
    energy_slack: float = math.nan
    energy_scale: float = math.nan
    outer_iters: int = 0
    diverged: bool = False
    increment: float = math.nan
    wall_ms: float = 0.0
    error_kind: str = ""
    solution: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass
class SweepTable:
    rows: list
    has_lambda: bool = False

    def columns(self):
        cols = ["epsilon"] + (["lambda"] if self.has_lambda else [])
        return cols + ["sup_error", "residual", "energy_slack", "outer_iters", "diverged", "increment"]

    def to_csv(self, path=None) -> str:
        """CSV with shortest round-trip floats; wall time is kept out for reproducibility."""
        buf = io.StringIO()
        buf.write(",".join(self.columns()) + "\n")
        for r in self.rows:
            vals = [repr(r.epsilon)] + ([repr(r.lam)] if self.has_lambda else [])
            vals += [repr(float(r.sup_error)), repr(float(r.residual)), repr(float(r.energy_slack)),
                     str(int(r.outer_iters)), "true" if r.diverged else "false", repr(float(r.increment))]
            buf.write(",".join(vals) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def by_key(self):
        return {(r.epsilon, r.lam): r for r in self.rows}


def thread_count():
    env = os.environ.get("WEDFLOW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_rows(fn, items, threads=None):
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def sup_v_distance(space, a, b) -> float:
    d = np.asarray(a) - np.asarray(b)
    return float(max(space.norm(r) for r in d))


def unregularized_residual(problem: WedProblem, states) -> float:
    """|xi^n + eta1^n - eta2^n - f(u^n)| in the discrete L^{p'}(0,T;V*) norm."""
    space, tau = problem.space, problem.time.tau
    v = np.diff(states, axis=0) / tau
    f = problem.forcing_terms(states)
    rows = []
    for n in range(1, len(states)):
        u = states[n]
        r = problem.psi.gradient(v[n - 1]) + problem.energy.phi1.gradient(u) - f[n - 1]
        if not problem.energy.phi2.is_zero:
            r = r - problem.energy.phi2.gradient(u)
        rows.append(r)
    return time_norm(space, np.array(rows), tau, conjugate(space.exponent_p))


def _solve_row(problem, eps, lam, cfg, reference, metrics):
    t0 = time.perf_counter()
    prob = problem.with_epsilon(eps)
    if lam is not None:
        prob = prob.with_lambda(lam)
    row = SweepRow(epsilon=eps, lam=lam)
    try:
        rep = solve_regularized(prob, cfg)
    except UNSTABLE as exc:
        row.diverged = True
        row.error_kind = exc.kind
        if exc.report is not None:
            row.outer_iters = exc.report.outer_iters
        row.wall_ms = 1e3 * (time.perf_counter() - t0)
        return row
    states = rep.solution.states
    row.solution = states
    row.outer_iters = rep.outer_iters
    if reference is not None and "sup_V_error_vs_oracle" in metrics:
        row.sup_error = sup_v_distance(prob.space, states, reference)
    if "el_residual_unregularized" in metrics:
        row.residual = unregularized_residual(prob, states)
    if "energy_inequality_slack" in metrics:
        row.energy_slack, row.energy_scale = energy_inequality_slack(prob, rep.solution)
    row.wall_ms = 1e3 * (time.perf_counter() - t0)
    return row


def _fill_increments(space, rows):
    prev = None
    for r in rows:
        if r.solution is not None and prev is not None and prev.solution is not None:
            r.increment = sup_v_distance(space, r.solution, prev.solution)
        prev = r


def reference_trajectory(problem: WedProblem, oracle_cfg: Optional[StepperConfig] = None):
    cfg = oracle_cfg or StepperConfig(problem.time.steps_N)
    if cfg.steps_N != problem.time.steps_N:
        raise ValueError("the oracle must run on the same time grid as the WED solves")
    return run_oracle(problem, cfg).states


def causal_limit_sweep(problem: WedProblem, plan: SweepPlan, fp_cfg: FixedPointConfig = FixedPointConfig(),
                       reference=None, oracle_cfg=None, threads=None) -> SweepTable:
    """One row per epsilon (times lambda when given), compared to a reference.

    The reference defaults to the implicit Euler oracle on the same grid; an
    exact solution sampled at the grid times may be passed instead.
    """
    if reference is None and "sup_V_error_vs_oracle" in plan.metrics:
        reference = reference_trajectory(problem, oracle_cfg)
    lams = plan.lambdas or (None,)
    keys = [(e, l) for l in lams for e in plan.epsilons]
    rows = _map_rows(lambda k: _solve_row(problem, k[0], k[1], fp_cfg, reference, plan.metrics), keys, threads)
    for lam in lams:
        _fill_increments(problem.space, [r for r in rows if r.lam == lam])
    return SweepTable(rows, has_lambda=bool(plan.lambdas))


def lambda_sweep(problem: WedProblem, plan: SweepPlan, fp_cfg: FixedPointConfig = FixedPointConfig(),
                 reference=None, threads=None) -> SweepTable:
    """Nested sweep: lambda inside epsilon, or epsilon inside lambda when swapped.

    ``increment`` is the sup-in-time V distance to the previous solution of
    the inner sweep (the Cauchy increment).
    """
    if not plan.lambdas:
        raise ValueError("lambda_sweep needs a non-empty lambda list")
    metrics = plan.metrics - {"sup_V_error_vs_oracle"} if reference is None else plan.metrics
    if plan.swap_order:
        groups = [[(e, l) for e in plan.epsilons] for l in plan.lambdas]
    else:
        groups = [[(e, l) for l in plan.lambdas] for e in plan.epsilons]
    keys = [k for g in groups for k in g]
    solved = _map_rows(lambda k: _solve_row(problem, k[0], k[1], fp_cfg, reference, metrics), keys, threads)
    lookup = dict(zip(keys, solved))
    rows = []
    for g in groups:
        inner = [lookup[k] for k in g]
        _fill_increments(problem.space, inner)
        rows.extend(inner)
    return SweepTable(rows, has_lambda=True)


@dataclass
class Epsilon0Result:
    epsilon0: float
    found: bool
    evaluations: list


def detect_epsilon0(problem: WedProblem, bracket, fp_cfg: FixedPointConfig = FixedPointConfig(),
                    rel_tol=0.1) -> Epsilon0Result:
    """Geometric bisection on epsilon between a stable and an unstable value."""
    lo, hi = sorted(float(b) for b in bracket)
    if not lo > 0:
        raise BracketInvalid("bracket endpoints must be positive")
    evaluations = []

    def stable(eps):
        try:
            solve_regularized(problem.with_epsilon(eps), fp_cfg)
            ok = True
        except UNSTABLE:
            ok = False
        evaluations.append((eps, ok))
        return ok

    s_lo, s_hi = stable(lo), stable(hi)
    if s_lo and s_hi:
        return Epsilon0Result(hi, False, evaluations)
    if not s_lo and not s_hi:
        raise BracketInvalid(f"both endpoints {lo:g} and {hi:g} are unstable")
    if not s_lo:
        raise BracketInvalid("the smaller epsilon is unstable while the larger one is stable")
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return Epsilon0Result(math.sqrt(lo * hi), True, evaluations)
