"""Convex potentials, energy splits and nonpotential perturbations.

A :class:`Potential` exposes ``value`` (a float, possibly ``inf``),
``gradient`` (a nodal density, i.e. an element of V*) and ``hessian`` (the
Jacobian of ``gradient`` as a sparse matrix acting on nodal values).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .errors import BadExponent, GridTooSmall, MonotonicityViolation, NonSeparable
from .spaces import DiscreteSpace, conjugate, duality_map

# Floor for |s| in second derivatives of |s|^p when p < 2.
_HESS_FLOOR = 1e-8


class Potential:
    separable = False

    def __init__(self, space: DiscreteSpace):
        self.space = space

    def value(self, u) -> float:
        raise NotImplementedError

    def gradient(self, u) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, u):
        """Jacobian of :meth:`gradient`; dense forward differences by default."""
        u = np.asarray(u, dtype=float)
        g0 = self.gradient(u)
        cols = []
        for j in range(u.size):
            step = 1e-7 * max(1.0, abs(u[j]))
            e = u.copy()
            e[j] += step
            cols.append((self.gradient(e) - g0) / step)
        return sp.csr_matrix(np.column_stack(cols))

    def in_domain(self, u) -> bool:
        return bool(np.isfinite(self.value(u)))

    @property
    def is_zero(self) -> bool:
        return False

    def __add__(self, other):
        return SumPotential(self.space, [self, other])


class ZeroPotential(Potential):
    separable = True

    def value(self, u):
        return 0.0

    def gradient(self, u):
        return np.zeros(self.space.size)

    def hessian(self, u):
        return sp.csr_matrix((self.space.size, self.space.size))

    def density(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    derivative = density
    second_derivative = density

    @property
    def is_zero(self):
        return True


class SeparablePotential(Potential):
    """value(u) = sum_j w_j A(u_j), gradient(u)_j = alpha(u_j).

    ``density``, ``derivative`` and ``second_derivative`` may be single
    vectorised callables or one per component.
    """

    separable = True

    def __init__(self, space, density, derivative, second_derivative=None):
        super().__init__(space)
        k = space.components
        self._A = self._per_component(density, k)
        self._a = self._per_component(derivative, k)
        self._da = None if second_derivative is None else self._per_component(second_derivative, k)

    @staticmethod
    def _per_component(fn, k):
        fns = list(fn) if isinstance(fn, (list, tuple)) else [fn] * k
        if len(fns) != k:
            raise ValueError(f"expected {k} component functions, got {len(fns)}")
        return fns

    def _blockwise(self, fns, u):
        u = np.asarray(u, dtype=float)
        n = self.space.n_active
        flat = u.reshape(-1, self.space.size)
        out = np.empty_like(flat)
        for i, f in enumerate(fns):
            out[:, i * n:(i + 1) * n] = f(flat[:, i * n:(i + 1) * n])
        return out.reshape(u.shape)

    # Scalar pieces, applied nodewise to arrays whose trailing axis is a field.
    def density(self, u):
        return self._blockwise(self._A, u)

    def derivative(self, u):
        return self._blockwise(self._a, u)

    def second_derivative(self, u):
        if self._da is not None:
            return self._blockwise(self._da, u)
        u = np.asarray(u, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self.derivative(u + h) - self.derivative(u - h)) / (2 * h)

    def value(self, u):
        return float(np.dot(self.space.full_weights, self.density(self.space.check(u))))

    def gradient(self, u):
        return self.derivative(self.space.check(u))

    def hessian(self, u):
        return sp.diags(self.second_derivative(self.space.check(u)), format="csr")


class PowerPotential(SeparablePotential):
    """(1/p) |u|_p^p, whose gradient is the p-modulus duality mapping."""

    def __init__(self, space, p, scale=1.0):
        if not p > 1.0:
            raise BadExponent(f"exponent must be > 1, got {p}")
        self.p = float(p)
        self.scale = float(scale)
        super().__init__(space, self._dens, self._deriv, self._second)

    def _dens(self, s):
        return self.scale * np.abs(s) ** self.p / self.p

    def _deriv(self, s):
        return self.scale * duality_map(s, self.p)

    def _second(self, s):
        a = np.abs(s)
        if self.p < 2.0:
            a = np.maximum(a, _HESS_FLOOR)
        return self.scale * (self.p - 1.0) * a ** (self.p - 2.0)


class SumPotential(Potential):
    def __init__(self, space, parts):
        super().__init__(space)
        self.parts = [q for q in parts if not q.is_zero]

    @property
    def separable(self):
        return all(q.separable for q in self.parts)

    @property
    def is_zero(self):
        return not self.parts

    def value(self, u):
        return float(sum(q.value(u) for q in self.parts))

    def gradient(self, u):
        out = np.zeros(self.space.size)
        for q in self.parts:
            out += q.gradient(u)
        return out

    def hessian(self, u):
        out = sp.csr_matrix((self.space.size, self.space.size))
        for q in self.parts:
            out = out + q.hessian(u)
        return out.tocsr()

    def density(self, s):
        return sum(q.density(s) for q in self.parts)

    def derivative(self, s):
        return sum(q.derivative(s) for q in self.parts)

    def second_derivative(self, s):
        return sum(q.second_derivative(s) for q in self.parts)


def make_p_power_dissipation(space: DiscreteSpace, p: float) -> PowerPotential:
    """psi(u) = (1/p)|u|_p^p."""
    if not p > 1.0:
        raise BadExponent(f"dissipation exponent must be > 1, got {p}")
    return PowerPotential(space, p)


def make_general_dissipation(space, alpha, primitive, p, dalpha=None, sample_range=10.0):
    """psi(u) = sum_j w_j A(u_j) for a continuous nondecreasing alpha with A' = alpha.

    ``p`` is the declared growth exponent; alpha is sampled on
    [-sample_range, sample_range] to reject decreasing graphs.
    """
    if not p > 1.0:
        raise BadExponent(f"growth exponent must be > 1, got {p}")
    s = np.linspace(-sample_range, sample_range, 4001)
    for a in (alpha if isinstance(alpha, (list, tuple)) else [alpha]):
        drop = -np.min(np.diff(np.asarray(a(s), dtype=float)))
        if drop > 1e-12:
            raise MonotonicityViolation(f"alpha decreases by {drop:.3e} on the sample grid")
    pot = SeparablePotential(space, primitive, alpha, dalpha)
    pot.p = float(p)
    return pot


def gradient_inverse(psi: SeparablePotential, xi, xtol=1e-14) -> np.ndarray:
    """Nodewise s with alpha(s) = xi (alpha strictly increasing)."""
    if not psi.separable:
        raise NonSeparable("gradient inverse needs a separable potential")
    xi = np.asarray(xi, dtype=float)
    n = psi.space.n_active
    out = np.empty_like(xi)
    for j in range(xi.size):
        comp = j // n

        def g(s, j=j, comp=comp):
            return float(psi._a[comp](np.array([s]))[0]) - xi[j]

        lo, hi = -1.0, 1.0
        while g(lo) > 0:
            lo *= 2.0
        while g(hi) < 0:
            hi *= 2.0
        out[j] = brentq(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return out


def fenchel_conjugate_value(psi, xi, solver_tol=1e-12) -> float:
    """psi*(xi) = sup_w <xi, w> - psi(w), computed node by node.

    Each nodal problem sup_s (s xi_j - A(s)) is concave; its maximiser solves
    alpha(s) = xi_j and is found by bracketed root finding.
    """
    if not psi.separable:
        raise NonSeparable("Fenchel conjugate is only computed for separable potentials")
    xi = psi.space.check(xi)
    if psi.is_zero:
        return 0.0 if not np.any(xi) else float("inf")
    s = gradient_inverse(psi, xi, xtol=solver_tol)
    return float(np.dot(psi.space.full_weights, s * xi - psi.density(s)))


# -- perturbations ------------------------------------------------------------


@dataclass
class Perturbation:
    """Nonpotential term f: field (and time) -> dual density.

    ``growth`` is 'V' when f is controlled by the V-norm and 'X' when it
    needs the energy space (transport terms).  ``state_dependent`` is False
    when f ignores its argument, which makes the fixed-point map constant.
    """

    space: DiscreteSpace
    fn: Callable
    growth: str = "V"
    state_dependent: bool = True
    forcing: Optional[Callable] = None

    def apply(self, u, t=0.0) -> np.ndarray:
        out = np.asarray(self.fn(self.space.check(u)), dtype=float)
        if self.forcing is not None:
            out = out + np.asarray(self.forcing(t), dtype=float)
        return out

    @property
    def is_zero(self) -> bool:
        return not self.state_dependent and self.forcing is None

    def __add__(self, other):
        growth = "X" if "X" in (self.growth, other.growth) else "V"
        forcings = [q.forcing for q in (self, other) if q.forcing is not None]

        def fn(u):
            return self.fn(u) + other.fn(u)

        forcing = None
        if forcings:
            def forcing(t):
                return sum(g(t) for g in forcings)
        return Perturbation(self.space, fn, growth,
                            self.state_dependent or other.state_dependent, forcing)

    @classmethod
    def zero(cls, space):
        return cls(space, lambda u: np.zeros(space.size), "V", state_dependent=False)


def make_perturbation_coupling(space, g=None, lower_order_m=None, forcing=None) -> Perturbation:
    """Nodewise coupling f(u) = g(u_1, ..., u_k) [+ |u|^(m-2) u].

    ``g`` maps an array of shape (k, n) to the same shape.  The optional
    lower-order term is the Neumann shift that moves |u|^m/m from the energy
    into the perturbation.
    """
    def fn(u):
        parts = space.split(u)
        out = np.zeros_like(parts)
        if g is not None:
            out += np.asarray(g(parts), dtype=float).reshape(parts.shape)
        if lower_order_m is not None:
            out += duality_map(parts, lower_order_m)
        return out.ravel()

    dependent = g is not None or lower_order_m is not None
    return Perturbation(space, fn, "V", dependent, forcing)


def make_transport_perturbation(space, beta) -> Perturbation:
    """f(u) = beta * du/dx by centred differences (one-sided at the boundary)."""
    if space.nodes < 3:
        raise GridTooSmall(f"transport term needs at least 3 nodes, got {space.nodes}")
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (space.nodes,)).copy()
    x = space.coordinates

    def fn(u):
        full = space.extend(u)
        du = np.gradient(full, x, axis=1, edge_order=1)
        return space.restrict(beta * du)

    return Perturbation(space, fn, "X", bool(np.any(beta)))


# -- energy split -------------------------------------------------------------


@dataclass
class EnergySplit:
    """phi = phi1 - phi2 with phi1, phi2 convex and phi2 dominated by phi1."""

    phi1: Potential
    phi2: Potential = None
    kappa: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.phi2 is None:
            self.phi2 = ZeroPotential(self.phi1.space)
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError("kappa must lie in [0, 1)")

    @property
    def convex(self) -> bool:
        return self.phi2.is_zero

    def value(self, u) -> float:
        return self.phi1.value(u) - self.phi2.value(u)

    def domination_constant(self, samples) -> float:
        """Fitted C in phi2 <= kappa*phi1 + C(|u|_V^p + 1) over ``samples``."""
        space = self.phi1.space
        worst = 0.0
        for u in samples:
            excess = self.phi2.value(u) - self.kappa * self.phi1.value(u)
            worst = max(worst, excess / (space.norm(u) ** space.exponent_p + 1.0))
        if not np.isfinite(worst):
            warnings.warn("phi2 is not dominated by phi1 on the sampled fields")
        return float(worst)


# -- sampled diagnostics ------------------------------------------------------


def convexity_defect(pot: Potential, pairs, thetas=(0.25, 0.5, 0.75)) -> float:
    """Largest value(θu+(1-θ)v) - θvalue(u) - (1-θ)value(v) over the samples."""
    worst = -np.inf
    for u, v in pairs:
        for th in thetas:
            d = pot.value(th * u + (1 - th) * v) - th * pot.value(u) - (1 - th) * pot.value(v)
            worst = max(worst, d)
    return float(worst)


def subgradient_defect(pot: Potential, pairs) -> float:
    """Largest value(u) + <gradient(u), v-u> - value(v) over the samples."""
    worst = -np.inf
    for u, v in pairs:
        d = pot.value(u) + pot.space.pairing(pot.gradient(u), v - u) - pot.value(v)
        worst = max(worst, d)
    return float(worst)


def growth_ratio(pot: Potential, samples) -> float:
    """Observed sup of |gradient(u)|_{p'}^{p'} / (|u|_p^p + 1)."""
    space = pot.space
    p = space.exponent_p
    q = conjugate(p)
    return float(max(space.dual_norm(pot.gradient(u)) ** q / (space.norm(u) ** p + 1.0)
                     for u in samples))
