"""Resolvent, Yosida approximation and Moreau envelope w.r.t. the p-modulus
duality mapping F = d(|.|^p / p).

    J u      = argmin_v  (lam/p) |(u - v)/lam|_p^p + phi(v)
    A_lam(u) = F((u - J u) / lam)
    phi_lam  = (lam/p) |(u - J u)/lam|_p^p + phi(J u)

``phi(0)`` must be finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InnerSolveFailed
from .spaces import duality_map

_FLOOR = 1e-12


@dataclass(frozen=True)
class YosidaConfig:
    lam: float
    exponent_p: float = 2.0
    inner_tol: float = 1e-10
    inner_max_iter: int = 100

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be > 0")
        if not self.exponent_p > 1:
            raise ValueError("exponent_p must be > 1")


def _dF(d, p):
    a = np.abs(d)
    if p < 2.0:
        a = np.maximum(a, _FLOOR)
    return (p - 1.0) * a ** (p - 2.0)


def _optimality(phi, u, v, cfg):
    grad = phi.derivative(v) if phi.separable else phi.gradient(v)
    return duality_map((v - u) / cfg.lam, cfg.exponent_p) + grad


def _separable_resolvent(phi, u, cfg):
    """Safeguarded Newton with bisection, vectorised over nodes."""
    lam, p = cfg.lam, cfg.exponent_p
    a_u = phi.derivative(u)
    # F(d) = -alpha(u) at |d| = |alpha(u)|^(1/(p-1)) brackets the root
    reach = lam * np.abs(a_u) ** (1.0 / (p - 1.0))
    lo = np.where(a_u > 0, u - reach, u)
    hi = np.where(a_u > 0, u, u + reach)
    v = u.copy()
    node_tol = 0.5 * cfg.inner_tol
    prev = np.full(u.shape, np.inf)
    for _ in range(cfg.inner_max_iter):
        h = _optimality(phi, u, v, cfg)
        done = (np.abs(h) <= node_tol) | (hi - lo <= 4 * np.spacing(np.maximum(np.abs(lo), np.abs(hi))))
        if np.all(done):
            break
        hi = np.where(h > 0, v, hi)
        lo = np.where(h < 0, v, lo)
        dh = _dF((v - u) / lam, p) / lam + phi.second_derivative(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            vn = v - h / dh
        # bisect where Newton leaves the bracket or stops halving |h|
        slow = np.abs(h) > 0.5 * prev
        prev = np.abs(h)
        bad = ~np.isfinite(vn) | (vn <= lo) | (vn >= hi) | slow
        vn = np.where(bad, 0.5 * (lo + hi), vn)
        v = np.where(done, v, vn)
    # attainable residual when the bracket has collapsed to rounding level
    dh = _dF((v - u) / lam, p) / lam + phi.second_derivative(v)
    return v, 4 * np.abs(dh) * np.spacing(np.abs(v))


def _descent_resolvent(phi, u, cfg):
    """Damped Newton on the strongly coercive resolvent objective."""
    space = phi.space
    lam, p = cfg.lam, cfg.exponent_p

    def objective(v):
        return lam / p * space.norm((u - v) / lam, p) ** p + phi.value(v)

    v = u.copy()
    for _ in range(cfg.inner_max_iter):
        h = _optimality(phi, u, v, cfg)
        if space.dual_norm(h, p) <= cfg.inner_tol:
            break
        H = sp.diags(_dF((v - u) / lam, p) / lam) + phi.hessian(v)
        dv = spla.spsolve(H.tocsc(), -h)
        g0 = objective(v)
        slope = space.pairing(h, dv)
        t = 1.0
        while objective(v + t * dv) > g0 + 1e-4 * t * slope and t > 1e-12:
            t *= 0.5
        v = v + t * dv
    return v


def resolvent(phi, u, cfg: YosidaConfig) -> np.ndarray:
    u = phi.space.check(u)
    if phi.is_zero:
        return u.copy()
    floor = 0.0
    if phi.separable:
        v, rounding = _separable_resolvent(phi, u, cfg)
        floor = phi.space.dual_norm(rounding, cfg.exponent_p)
    else:
        v = _descent_resolvent(phi, u, cfg)
    res = phi.space.dual_norm(_optimality(phi, u, v, cfg), cfg.exponent_p)
    scale = max(1.0, phi.space.dual_norm(duality_map((v - u) / cfg.lam, cfg.exponent_p), cfg.exponent_p))
    if not res <= cfg.inner_tol * scale + floor:
        raise InnerSolveFailed(f"resolvent residual {res:.3e} above {cfg.inner_tol:.1e}")
    return v


def yosida_gradient(phi, u, cfg: YosidaConfig) -> np.ndarray:
    """A_lam(u) = F((u - J u)/lam); the gradient of the Moreau envelope."""
    if phi.is_zero:
        return np.zeros(phi.space.size)
    v = resolvent(phi, u, cfg)
    return duality_map((np.asarray(u, dtype=float) - v) / cfg.lam, cfg.exponent_p)


def moreau_envelope(phi, u, cfg: YosidaConfig) -> float:
    if phi.is_zero:
        return 0.0
    u = phi.space.check(u)
    v = resolvent(phi, u, cfg)
    p = cfg.exponent_p
    return cfg.lam / p * phi.space.norm((u - v) / cfg.lam, p) ** p + phi.value(v)


def yosida_hessian(phi, u, cfg: YosidaConfig):
    """Jacobian of :func:`yosida_gradient` as a sparse matrix.

    From F((v-u)/lam) + alpha(v) = 0: dA/du = (c^-1 + H^-1)^-1 with
    c = F'(d)/lam and H the Hessian of phi at v = J u.
    """
    space = phi.space
    if phi.is_zero:
        return sp.csr_matrix((space.size, space.size))
    u = space.check(u)
    v = resolvent(phi, u, cfg)
    c = _dF((u - v) / cfg.lam, cfg.exponent_p) / cfg.lam
    if phi.separable:
        a = phi.second_derivative(v)
        return sp.diags(c * a / (c + a + 1e-300), format="csr")
    H = phi.hessian(v).toarray()
    C = np.diag(c)
    # c - c (c + H)^-1 c
    return sp.csr_matrix(C - C @ np.linalg.solve(C + H, C))
