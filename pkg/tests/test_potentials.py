import numpy as np
import pytest

from wedflow.errors import BadExponent, GridTooSmall, MonotonicityViolation, NonSeparable
from wedflow.pde import MLaplacianEnergy
from wedflow.potentials import (
    EnergySplit,
    Perturbation,
    PowerPotential,
    ZeroPotential,
    convexity_defect,
    fenchel_conjugate_value,
    gradient_inverse,
    growth_ratio,
    make_general_dissipation,
    make_p_power_dissipation,
    make_perturbation_coupling,
    make_transport_perturbation,
    subgradient_defect,
)
from wedflow.spaces import DiscreteSpace, conjugate


def fd_gradient(pot, u, h=1e-6):
    w = pot.space.full_weights
    g = np.zeros_like(u)
    for j in range(u.size):
        e = np.zeros_like(u)
        e[j] = h
        g[j] = (pot.value(u + e) - pot.value(u - e)) / (2 * h) / w[j]
    return g


def test_power_dissipation_examples(rng):
    s = DiscreteSpace.uniform(11)
    psi = make_p_power_dissipation(s, 2)
    assert psi.value(np.ones(11)) == pytest.approx(0.5)
    assert psi.value(np.zeros(11)) == 0.0 and not np.any(psi.gradient(np.zeros(11)))
    assert psi.separable
    for p in (1.5, 2.0, 3.0):
        psi = make_p_power_dissipation(DiscreteSpace.uniform(11, p), p)
        u = rng.standard_normal(11) + 2.0
        g = psi.gradient(u)
        assert np.max(np.abs(fd_gradient(psi, u) - g)) <= 1e-6 * np.max(np.abs(g))
    with pytest.raises(BadExponent):
        make_p_power_dissipation(s, 1.0)


def test_general_dissipation_examples():
    one = DiscreteSpace.from_weights([1.0])
    lin = make_general_dissipation(one, lambda s: s, lambda s: s ** 2 / 2, 2)
    ref = make_p_power_dissipation(one, 2)
    assert lin.value([1.3]) == pytest.approx(ref.value([1.3]))
    cub = make_general_dissipation(one, lambda s: s + s ** 3, lambda s: s ** 2 / 2 + s ** 4 / 4, 4)
    assert cub.value([1.0]) == pytest.approx(0.75) and cub.gradient([1.0])[0] == pytest.approx(2.0)
    p3 = make_general_dissipation(one, lambda s: np.abs(s) * s, lambda s: np.abs(s) ** 3 / 3, 3)
    assert p3.value([2.0]) == pytest.approx(8 / 3) and p3.gradient([2.0])[0] == pytest.approx(4.0)


def test_general_dissipation_rejects_decreasing():
    with pytest.raises(MonotonicityViolation):
        make_general_dissipation(DiscreteSpace.uniform(3), lambda s: -s, lambda s: -s ** 2 / 2, 2)


def test_fenchel_conjugate(rng):
    for p in (1.5, 2.0, 3.0):
        s = DiscreteSpace.uniform(9, p)
        psi = make_p_power_dissipation(s, p)
        xi = rng.standard_normal(9)
        q = conjugate(p)
        assert fenchel_conjugate_value(psi, xi) == pytest.approx(s.dual_norm(xi) ** q / q, abs=1e-8)
        w = gradient_inverse(psi, xi)
        assert abs(psi.value(w) + fenchel_conjugate_value(psi, xi) - s.pairing(xi, w)) <= 1e-8
    s = DiscreteSpace.uniform(5)
    assert fenchel_conjugate_value(make_p_power_dissipation(s, 2), np.zeros(5)) == 0.0
    with pytest.raises(NonSeparable):
        fenchel_conjugate_value(MLaplacianEnergy(s, np.ones(5), 2.0), np.zeros(5))


def test_convexity_and_subgradient_sampling(rng):
    s = DiscreteSpace.uniform(8, 3.0, 3.0)
    pots = [PowerPotential(s, 1.5), PowerPotential(s, 3.0),
            MLaplacianEnergy(s, rng.uniform(1, 2, 8), 3.0) + PowerPotential(s, 3.0)]
    pairs = [tuple(rng.standard_normal((2, 8))) for _ in range(30)]
    for pot in pots:
        assert convexity_defect(pot, pairs) <= 1e-10
        assert subgradient_defect(pot, pairs) <= 1e-10


def test_growth_ratio_bounded(rng):
    s = DiscreteSpace.uniform(8, 3.0)
    psi = make_p_power_dissipation(s, 3.0)
    samples = [rng.standard_normal(8) * 10 ** rng.uniform(-2, 2) for _ in range(1000)]
    assert np.isfinite(growth_ratio(psi, samples)) and growth_ratio(psi, samples) <= 1.0 + 1e-12


def test_perturbation_coupling_examples():
    s1 = DiscreteSpace.uniform(4)
    zero = make_perturbation_coupling(s1)
    assert zero.is_zero and not np.any(zero.apply(np.ones(4)))
    lin = make_perturbation_coupling(s1, g=lambda u: 3.0 * u)
    assert np.allclose(lin.apply(np.arange(4.0)), 3.0 * np.arange(4.0))
    s2 = DiscreteSpace.uniform(3, components=2)
    rot = make_perturbation_coupling(s2, g=lambda u: np.array([u[1], -u[0]]))
    f = s2.split(rot.apply(np.concatenate([np.ones(3), np.zeros(3)])))
    assert np.allclose(f[0], 0.0) and np.allclose(f[1], -1.0)
    shifted = make_perturbation_coupling(s1, lower_order_m=3.0)
    assert np.allclose(shifted.apply(np.array([2.0, -1, 0, 1])), [4.0, -1, 0, 1])


def test_transport_examples():
    s = DiscreteSpace.uniform(11)
    tr = make_transport_perturbation(s, 1.0)
    assert np.allclose(tr.apply(np.full(11, 3.0)), 0.0)
    assert np.allclose(tr.apply(s.coordinates), 1.0)
    assert not np.any(make_transport_perturbation(s, 0.0).apply(s.coordinates))
    assert tr.growth == "X"
    with pytest.raises(GridTooSmall):
        make_transport_perturbation(DiscreteSpace.uniform(2), 1.0)


def test_perturbation_sum_and_forcing():
    s = DiscreteSpace.uniform(3)
    f = make_perturbation_coupling(s, g=lambda u: u, forcing=lambda t: np.full(3, t))
    g = Perturbation.zero(s) + f
    assert np.allclose(g.apply(np.ones(3), 2.0), 3.0)


def test_energy_split():
    s = DiscreteSpace.uniform(5)
    split = EnergySplit(PowerPotential(s, 2.0, 2.0), PowerPotential(s, 2.0), kappa=0.5)
    assert not split.convex
    assert split.value(np.ones(5)) == pytest.approx(0.5)
    assert split.domination_constant([np.ones(5), np.zeros(5)]) <= 0.0
    assert EnergySplit(PowerPotential(s, 2.0)).convex
    with pytest.raises(ValueError):
        EnergySplit(PowerPotential(s, 2.0), kappa=1.0)


def test_zero_potential():
    z = ZeroPotential(DiscreteSpace.uniform(3))
    assert z.is_zero and z.value(np.ones(3)) == 0.0 and z.hessian(np.ones(3)).nnz == 0
