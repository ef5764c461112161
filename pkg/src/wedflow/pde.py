"""Finite-difference energies for the two shipped PDE families.

* A system of k doubly-nonlinear parabolic equations
  alpha_i(d_t u_i) - div(a_i |grad u_i|^{m-2} grad u_i) = g_i(u),
  with Neumann or Dirichlet boundary conditions.
* The clamped biharmonic equation d_t u + Delta^2 u = beta . grad u.

Energies are assembled on cells (forward differences) so that each one is a
genuine convex discrete functional; its gradient is the divergence-form
stencil and natural boundary conditions come for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BadBounds, ExponentMismatch, GridTooSmall
from .moreau_yosida import YosidaConfig
from .potentials import (
    EnergySplit,
    Perturbation,
    Potential,
    PowerPotential,
    ZeroPotential,
    make_general_dissipation,
    make_p_power_dissipation,
    make_perturbation_coupling,
    make_transport_perturbation,
)
from .spaces import DiscreteSpace, duality_map
from .wed import TimeGrid, WedProblem

WIRINGS = ("nonconvex-split", "nonpotential-shift")
_HESS_FLOOR = 1e-8


def _extension_matrix(space):
    """Sparse map from active values of one component to the full grid."""
    act = space.active
    return sp.csr_matrix((np.ones(len(act)), (act, np.arange(len(act)))), shape=(space.nodes, len(act)))


def _forward_difference(space):
    h = space.cell_sizes()
    M = space.nodes
    D = sp.diags([-1.0 / h, 1.0 / h], [0, 1], shape=(M - 1, M))
    return (D @ _extension_matrix(space)).tocsr()


class MLaplacianEnergy(Potential):
    """(1/m) sum_i sum_cells h a_i |D u_i|^m, a_i averaged onto cells."""

    def __init__(self, space: DiscreteSpace, coeff, m: float):
        super().__init__(space)
        coeff = np.asarray(coeff, dtype=float).reshape(space.components, space.nodes)
        self.cell_coeff = 0.5 * (coeff[:, 1:] + coeff[:, :-1])
        self.m = float(m)
        self.h = space.cell_sizes()
        D = _forward_difference(space)
        self.D = sp.block_diag([D] * space.components, format="csr")
        self._c = (self.h * self.cell_coeff).ravel()

    def _du(self, u):
        return self.D @ self.space.check(u)

    def value(self, u):
        return float(np.dot(self._c, np.abs(self._du(u)) ** self.m) / self.m)

    def gradient(self, u):
        flux = self._c * duality_map(self._du(u), self.m)
        return (self.D.T @ flux) / self.space.full_weights

    def hessian(self, u):
        a = np.abs(self._du(u))
        if self.m < 2:
            a = np.maximum(a, _HESS_FLOOR)
        k = self._c * (self.m - 1.0) * a ** (self.m - 2.0)
        K = self.D.T @ sp.diags(k) @ self.D
        return (sp.diags(1.0 / self.space.full_weights) @ K).tocsr()

    def stiffness(self):
        """Assembled D^T diag(h a) D, the m = 2 operator as a matrix."""
        return (self.D.T @ sp.diags(self._c) @ self.D).tocsr()


class QuadraticEnergy(Potential):
    """1/2 u^T K u with K symmetric positive semidefinite."""

    def __init__(self, space, K):
        super().__init__(space)
        self.K = sp.csr_matrix(K)

    def value(self, u):
        u = self.space.check(u)
        return 0.5 * float(u @ (self.K @ u))

    def gradient(self, u):
        return (self.K @ self.space.check(u)) / self.space.full_weights

    def hessian(self, u):
        return (sp.diags(1.0 / self.space.full_weights) @ self.K).tocsr()


def clamped_second_difference(space: DiscreteSpace):
    """3-point second difference on all nodes with a clamped boundary.

    The boundary values are eliminated (u = 0) and the ghost value beyond each
    end mirrors the first interior value (zero normal derivative).
    """
    if space.nodes < 5:
        raise GridTooSmall(f"biharmonic stencil needs at least 5 nodes, got {space.nodes}")
    h = space.cell_sizes()[0]
    M = space.nodes
    L = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(M, M)).tolil()
    L[0, 1] = 2.0
    L[M - 1, M - 2] = 2.0
    return (L.tocsr() / h ** 2) @ _extension_matrix(space)


@dataclass
class ParabolicSystemSpec:
    nodes: int = 33
    components_k: int = 1
    alpha: Optional[Sequence[Callable]] = None
    primitive: Optional[Sequence[Callable]] = None
    dalpha: Optional[Sequence[Callable]] = None
    exponent_p: float = 2.0
    coeff_a: Optional[np.ndarray] = None
    a_bounds: tuple = (1.0, 1.0)
    exponent_m: float = 2.0
    coupling_g: Optional[Callable] = None
    bc: str = "dirichlet"
    u0: Sequence = field(default_factory=lambda: [lambda x: np.sin(np.pi * x)])
    yosida_lambda: float = 1e-2

    def __post_init__(self):
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError("bc must be 'dirichlet' or 'neumann'")
        if self.components_k < 1:
            raise ValueError("components_k must be >= 1")

    def space(self) -> DiscreteSpace:
        return DiscreteSpace.uniform(self.nodes, self.exponent_p, self.exponent_m,
                                     dirichlet=self.bc == "dirichlet", components=self.components_k)

    def coefficients(self) -> np.ndarray:
        k, M = self.components_k, self.nodes
        if self.coeff_a is None:
            return np.full((k, M), float(self.a_bounds[0]))
        return np.broadcast_to(np.asarray(self.coeff_a, dtype=float), (k, M)).copy()


@dataclass
class BiharmonicSpec:
    nodes: int = 65
    beta: object = 0.5
    u0: Callable = lambda x: np.sin(np.pi * x) ** 2

    def space(self) -> DiscreteSpace:
        if self.nodes < 5:
            raise GridTooSmall(f"biharmonic problems need at least 5 nodes, got {self.nodes}")
        return DiscreteSpace.uniform(self.nodes, 2.0, 2.0, dirichlet=True)


def _check_bounds(spec):
    lo, hi = spec.a_bounds
    a = spec.coefficients()
    if not 0 < lo <= hi:
        raise BadBounds(f"coefficient bounds must satisfy 0 < a1 <= a2, got {spec.a_bounds}")
    if np.any(a < lo) or np.any(a > hi):
        raise BadBounds(f"coefficients range over [{a.min():.4g}, {a.max():.4g}], outside {spec.a_bounds}")
    return a


def m_laplacian_energy(spec: ParabolicSystemSpec, wiring="nonconvex-split") -> EnergySplit:
    """phi1 = m-Dirichlet energy (+ |u|^m/m under Neumann); phi2 per wiring."""
    if wiring not in WIRINGS:
        raise ValueError(f"wiring must be one of {WIRINGS}")
    space = spec.space()
    a = _check_bounds(spec)
    lap = MLaplacianEnergy(space, a, spec.exponent_m)
    if spec.bc == "dirichlet":
        return EnergySplit(lap, ZeroPotential(space), info={"bc": "dirichlet"})
    lower = PowerPotential(space, spec.exponent_m)
    phi2 = PowerPotential(space, spec.exponent_m) if wiring == "nonconvex-split" else ZeroPotential(space)
    # phi2 = phi1's lower-order part, so the domination constant is exactly 1
    return EnergySplit(lap + lower, phi2, kappa=0.0, info={"bc": "neumann", "wiring": wiring})


def biharmonic_energy(spec: BiharmonicSpec) -> EnergySplit:
    space = spec.space()
    L = clamped_second_difference(space)
    w = np.full(space.nodes, space.cell_sizes()[0])
    w[[0, -1]] *= 0.5
    K = (L.T @ sp.diags(w) @ L).tocsr()
    return EnergySplit(QuadraticEnergy(space, K), ZeroPotential(space), info={"bc": "clamped"})


def _dissipation(spec, space):
    if spec.alpha is None:
        return make_p_power_dissipation(space, spec.exponent_p)
    return make_general_dissipation(space, list(spec.alpha), list(spec.primitive), spec.exponent_p,
                                    None if spec.dalpha is None else list(spec.dalpha))


def assemble_problem(spec, time: TimeGrid, wiring="nonconvex-split") -> WedProblem:
    if isinstance(spec, BiharmonicSpec):
        space = spec.space()
        return WedProblem(time, make_p_power_dissipation(space, 2.0), biharmonic_energy(spec),
                          make_transport_perturbation(space, spec.beta), space.interpolate(spec.u0))
    if wiring not in WIRINGS:
        raise ValueError(f"wiring must be one of {WIRINGS}")
    neumann = spec.bc == "neumann"
    if neumann and wiring == "nonpotential-shift" and spec.exponent_p < spec.exponent_m:
        raise ExponentMismatch(f"shifted Neumann wiring needs m <= p, got m={spec.exponent_m}, p={spec.exponent_p}")
    space = spec.space()
    energy = m_laplacian_energy(spec, wiring)
    shift = spec.exponent_m if neumann and wiring == "nonpotential-shift" else None
    perturbation = make_perturbation_coupling(space, spec.coupling_g, lower_order_m=shift)
    yosida = None
    if not energy.phi2.is_zero:
        yosida = YosidaConfig(spec.yosida_lambda, exponent_p=spec.exponent_p)
    u0 = space.interpolate(list(spec.u0))
    return WedProblem(time, _dissipation(spec, space), energy, perturbation, u0, yosida)


def poincare_constant(space: DiscreteSpace, samples) -> float:
    """Fitted C in |u|_m^m <= C |Du|_m^m over Dirichlet sample fields."""
    m = space.exponent_m
    lap = MLaplacianEnergy(space, np.ones((space.components, space.nodes)), m)
    return float(max(space.norm(u, m) ** m / (m * lap.value(u)) for u in samples))
