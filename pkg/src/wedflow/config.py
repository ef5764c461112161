"""Flat-key run configuration (JSON) and problem construction from it."""

from __future__ import annotations

import json
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigInvalid
from .fixed_point import FixedPointConfig
from .moreau_yosida import YosidaConfig
from .pde import BiharmonicSpec, ParabolicSystemSpec, assemble_problem
from .potentials import EnergySplit, Perturbation, PowerPotential, ZeroPotential, make_perturbation_coupling
from .spaces import DiscreteSpace
from .sweeps import SweepPlan
from .wed import TimeGrid, WedProblem


def _decreasing(v, name):
    if any(x <= 0 for x in v) or any(b >= a for a, b in zip(v, v[1:])):
        raise ValueError(f"{name} must be positive and strictly decreasing")
    return v


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: Literal["scalar-demo", "parabolic-system", "biharmonic", "custom-quadratic"] = "scalar-demo"
    horizon_T: float = Field(1.0, gt=0)
    steps_N: int = Field(400, ge=2)
    epsilon: float = Field(0.01, gt=0)

    # scalar problems: psi = a_psi v^2/2, phi = a_phi u^2/2 - a_phi2 u^2/2, f = c u
    u0_value: float = 1.0
    psi_coefficient: float = Field(1.0, gt=0)
    phi_coefficient: float = Field(1.0, gt=0)
    phi2_coefficient: float = Field(0.0, ge=0)
    f_coefficient: float = 0.0

    # parabolic system
    nodes: int = Field(33, ge=2)
    components_k: Literal[1, 2] = 1
    exponent_p: float = Field(2.0, gt=1)
    exponent_m: float = Field(2.0, gt=1)
    bc: Literal["dirichlet", "neumann"] = "dirichlet"
    coeff_a: Union[float, List[float]] = 1.0
    a_bounds: Tuple[float, float] = (1.0, 1.0)
    coupling: Literal["none", "linear", "rotation"] = "none"
    coupling_strength: float = 1.0
    u0_profile: Literal["sine", "cosine-shift"] = "sine"
    wiring: Literal["nonconvex-split", "nonpotential-shift"] = "nonconvex-split"
    yosida_lambda: float = Field(1e-2, gt=0)

    # biharmonic
    beta: float = 0.5

    # solvers
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(100, ge=1)
    variant: Literal["S", "S_tilde"] = "S"
    damping_theta: float = Field(0.5, gt=0, le=1)
    outer_tol: float = Field(1e-7, gt=0)
    outer_max_iter: int = Field(200, ge=1)
    bound_guard: float = Field(1e6, gt=0)

    # sweeps
    sweep_kind: Literal["causal", "lambda"] = "causal"
    sweep_epsilons: List[float] = [0.2, 0.1, 0.05, 0.025]
    sweep_lambdas: List[float] = []
    sweep_reference: Literal["oracle", "exact"] = "oracle"
    swap_order: bool = False

    # acceptance suite
    bvp_steps: int = Field(400, ge=2)

    output_dir: str = "wedflow_out"
    seed: int = 0

    @field_validator("sweep_epsilons")
    @classmethod
    def _eps_decreasing(cls, v):
        if not v:
            raise ValueError("sweep_epsilons must not be empty")
        return _decreasing(v, "sweep_epsilons")

    @field_validator("sweep_lambdas")
    @classmethod
    def _lam_decreasing(cls, v):
        return _decreasing(v, "sweep_lambdas")

    def emit(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            err = exc.errors()[0]
            key = ".".join(str(x) for x in err["loc"]) or "config"
            raise ConfigInvalid(f"{key}: {err['msg']}") from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.parse(fh.read())

    # -- derived objects ------------------------------------------------------

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.horizon_T, self.steps_N, self.epsilon)

    def fixed_point(self) -> FixedPointConfig:
        return FixedPointConfig(self.variant, self.damping_theta, self.outer_tol, self.outer_max_iter,
                                self.bound_guard, self.tol, self.max_iter)

    def sweep_plan(self) -> SweepPlan:
        return SweepPlan(tuple(self.sweep_epsilons), tuple(self.sweep_lambdas), swap_order=self.swap_order)


def _coupling(cfg: RunConfig):
    c = cfg.coupling_strength
    if cfg.coupling == "none":
        return None
    if cfg.coupling == "linear":
        return lambda u: c * u
    if cfg.components_k != 2:
        raise ConfigInvalid("coupling: rotation needs components_k = 2")
    return lambda u: c * np.array([u[1], -u[0]])


def _profiles(cfg: RunConfig):
    if cfg.u0_profile == "sine":
        first = lambda x: np.sin(np.pi * x)
    else:
        first = lambda x: np.cos(np.pi * x) + 0.5
    return [first, lambda x: 0.3 * np.sin(np.pi * x)][: cfg.components_k]


def parabolic_spec(cfg: RunConfig) -> ParabolicSystemSpec:
    return ParabolicSystemSpec(nodes=cfg.nodes, components_k=cfg.components_k, exponent_p=cfg.exponent_p,
                               coeff_a=np.asarray(cfg.coeff_a, dtype=float), a_bounds=tuple(cfg.a_bounds),
                               exponent_m=cfg.exponent_m, coupling_g=_coupling(cfg), bc=cfg.bc,
                               u0=_profiles(cfg), yosida_lambda=cfg.yosida_lambda)


def scalar_problem(time: TimeGrid, psi_c=1.0, phi_c=1.0, phi2_c=0.0, f_c=0.0, u0=1.0, lam=1e-2) -> WedProblem:
    space = DiscreteSpace.from_weights([1.0])
    phi2 = PowerPotential(space, 2.0, phi2_c) if phi2_c else ZeroPotential(space)
    f = make_perturbation_coupling(space, g=lambda u: f_c * u) if f_c else Perturbation.zero(space)
    yos = YosidaConfig(lam) if phi2_c else None
    return WedProblem(time, PowerPotential(space, 2.0, psi_c), EnergySplit(PowerPotential(space, 2.0, phi_c), phi2),
                      f, np.array([u0], dtype=float), yos)


def build_problem(cfg: RunConfig) -> WedProblem:
    time = cfg.time_grid()
    if cfg.problem == "scalar-demo":
        return scalar_problem(time, f_c=cfg.f_coefficient, u0=cfg.u0_value)
    if cfg.problem == "custom-quadratic":
        return scalar_problem(time, cfg.psi_coefficient, cfg.phi_coefficient, cfg.phi2_coefficient,
                              cfg.f_coefficient, cfg.u0_value, cfg.yosida_lambda)
    if cfg.problem == "biharmonic":
        return assemble_problem(BiharmonicSpec(nodes=cfg.nodes, beta=cfg.beta), time)
    return assemble_problem(parabolic_spec(cfg), time, cfg.wiring)


def exact_solution(cfg: RunConfig) -> Optional[np.ndarray]:
    """Causal closed form sampled on the grid, when one is known."""
    t = cfg.time_grid().times
    if cfg.problem in ("scalar-demo", "custom-quadratic"):
        rate = (cfg.phi_coefficient - cfg.phi2_coefficient - cfg.f_coefficient) / cfg.psi_coefficient
        if cfg.problem == "scalar-demo":
            rate = 1.0 - cfg.f_coefficient
        return (cfg.u0_value * np.exp(-rate * t))[:, None]
    if (cfg.problem == "parabolic-system" and cfg.bc == "dirichlet" and cfg.components_k == 1
            and cfg.coupling == "none" and cfg.exponent_m == 2 and cfg.exponent_p == 2
            and cfg.u0_profile == "sine" and np.all(np.asarray(cfg.coeff_a) == 1.0)):
        x = DiscreteSpace.uniform(cfg.nodes, dirichlet=True).active_coordinates
        return np.exp(-np.pi ** 2 * t)[:, None] * np.sin(np.pi * x)[None, :]
    return None
