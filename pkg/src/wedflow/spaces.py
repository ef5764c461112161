"""Discrete Lebesgue and Sobolev spaces on 1-D grids.

Fields are plain numpy arrays of nodal values.  Dual fields (elements of
V*) are stored as nodal *densities*: the quadrature weights live in the
pairing, so ``pairing(xi, u) = sum_j w_j xi_j u_j``.  With that convention the
p-modulus duality mapping is a pointwise map.

Stacked k-component fields are flattened component-major; norms of stacked
fields sum the per-component p-th powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadExponent, GridTooSmall


def conjugate(p: float) -> float:
    """Hölder conjugate p/(p-1)."""
    if not p > 1.0:
        raise BadExponent(f"exponent must be > 1, got {p}")
    return p / (p - 1.0)


def duality_map(u, exponent: float) -> np.ndarray:
    """p-modulus duality mapping |u|^(p-2) u, evaluated nodewise.

    The value at u_j = 0 is 0 (continuous extension, valid for p > 1).
    """
    if not exponent > 1.0:
        raise BadExponent(f"exponent must be > 1, got {exponent}")
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    out = np.zeros_like(u)
    nz = a > 0
    out[nz] = a[nz] ** (exponent - 2.0) * u[nz]
    return out


def trapezoid_weights(coordinates) -> np.ndarray:
    x = np.asarray(coordinates, dtype=float)
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Grid, quadrature weights and exponents of V = L^p and X = W^{1,m}.

    ``weights`` refer to the *active* nodes only.  With ``dirichlet=True`` the
    two boundary nodes are eliminated (their value is zero) and the active
    nodes are the interior ones.
    """

    coordinates: np.ndarray
    weights: np.ndarray
    exponent_p: float = 2.0
    exponent_m: float = 2.0
    dirichlet: bool = False
    components: int = 1

    def __post_init__(self):
        x = np.asarray(self.coordinates, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "coordinates", x)
        object.__setattr__(self, "weights", w)
        conjugate(self.exponent_p)
        conjugate(self.exponent_m)
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        if len(w) != len(self.active):
            raise ValueError("weights do not match the number of active nodes")
        if self.components < 1:
            raise ValueError("components must be >= 1")

    @classmethod
    def uniform(cls, nodes, exponent_p=2.0, exponent_m=2.0, dirichlet=False, components=1):
        """Uniform grid on [0, 1] with trapezoid weights."""
        if nodes < 2 or (dirichlet and nodes < 3):
            raise GridTooSmall(f"need at least {3 if dirichlet else 2} nodes, got {nodes}")
        x = np.linspace(0.0, 1.0, nodes)
        w = trapezoid_weights(x)
        if dirichlet:
            w = w[1:-1]
        return cls(x, w, exponent_p, exponent_m, dirichlet, components)

    @classmethod
    def from_weights(cls, weights, exponent_p=2.0, exponent_m=2.0):
        """Space with caller-supplied weights on unit-spaced coordinates."""
        w = np.asarray(weights, dtype=float)
        return cls(np.arange(len(w), dtype=float), w, exponent_p, exponent_m)

    # -- layout -------------------------------------------------------------

    @property
    def nodes(self) -> int:
        return len(self.coordinates)

    @property
    def active(self) -> np.ndarray:
        if self.dirichlet:
            return np.arange(1, self.nodes - 1)
        return np.arange(self.nodes)

    @property
    def n_active(self) -> int:
        return len(self.active)

    @property
    def size(self) -> int:
        return self.components * self.n_active

    @property
    def full_weights(self) -> np.ndarray:
        return np.tile(self.weights, self.components)

    @property
    def active_coordinates(self) -> np.ndarray:
        return self.coordinates[self.active]

    @property
    def exponent_p_conj(self) -> float:
        return conjugate(self.exponent_p)

    @property
    def exponent_m_conj(self) -> float:
        return conjugate(self.exponent_m)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise ValueError(f"field of shape {u.shape} does not live on a space of size {self.size}")
        return u

    def split(self, u) -> np.ndarray:
        """View a flat field as (components, n_active)."""
        return np.asarray(u, dtype=float).reshape(self.components, self.n_active)

    def extend(self, u) -> np.ndarray:
        """Nodal values on the full grid, shape (components, nodes)."""
        parts = self.split(u)
        if not self.dirichlet:
            return parts.copy()
        full = np.zeros((self.components, self.nodes))
        full[:, 1:-1] = parts
        return full

    def restrict(self, full) -> np.ndarray:
        """Inverse of :meth:`extend` (boundary values are dropped)."""
        full = np.asarray(full, dtype=float).reshape(self.components, self.nodes)
        return full[:, self.active].ravel()

    def interpolate(self, fn) -> np.ndarray:
        """Sample ``fn(x)`` (or one function per component) at active nodes."""
        fns = fn if isinstance(fn, (list, tuple)) else [fn] * self.components
        x = self.active_coordinates
        return np.concatenate([np.broadcast_to(np.asarray(f(x), dtype=float), x.shape) for f in fns])

    # -- norms and pairings -------------------------------------------------

    def pairing(self, xi, u) -> float:
        return float(np.dot(self.full_weights * np.asarray(xi, dtype=float), np.asarray(u, dtype=float)))

    def norm(self, u, p=None) -> float:
        """Weighted p-norm (sum_j w_j |u_j|^p)^(1/p); p defaults to exponent_p."""
        p = self.exponent_p if p is None else p
        s = np.dot(self.full_weights, np.abs(np.asarray(u, dtype=float)) ** p)
        return float(s ** (1.0 / p))

    def dual_norm(self, xi, p=None) -> float:
        """Norm in V* of a density: the p'-norm with the same weights."""
        p = self.exponent_p if p is None else p
        return self.norm(xi, conjugate(p))

    def cell_sizes(self) -> np.ndarray:
        return np.diff(self.coordinates)

    def cell_gradient(self, u) -> np.ndarray:
        """Forward differences on cells, shape (components, nodes - 1)."""
        if self.nodes < 2:
            raise GridTooSmall("need at least 2 nodes for a gradient")
        return np.diff(self.extend(u), axis=1) / self.cell_sizes()

    def sobolev_norm(self, u, m=None) -> float:
        """(|u|_m^m + |Du|_m^m)^(1/m) with cell-measure weights for Du."""
        m = self.exponent_m if m is None else m
        if self.nodes < 2:
            raise GridTooSmall("need at least 2 nodes for the W^{1,m} norm")
        du = self.cell_gradient(u)
        grad_part = float(np.sum(self.cell_sizes() * np.abs(du) ** m))
        return (self.norm(u, m) ** m + grad_part) ** (1.0 / m)


def time_norm(space: DiscreteSpace, states, tau: float, p=None) -> float:
    """Discrete L^p(0,T;V) norm of a stack of fields (one row per step)."""
    p = space.exponent_p if p is None else p
    states = np.atleast_2d(states)
    s = tau * float(np.sum(np.abs(states) ** p @ space.full_weights))
    return s ** (1.0 / p)
