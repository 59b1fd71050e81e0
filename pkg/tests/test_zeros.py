"""
Test zero finding and equidistribution distances.
"""
import math

import numpy as np
import pytest

from bergman.bergman_space import build_basis, rotated
from bergman.ensembles import Ensemble, random_unitary, sample
from bergman.quadrature import level_quadrature
from bergman.weights import (
    FubiniStudy,
    ScaledFS,
    WeightSequence,
    custom_weight,
    effective_weight,
)
from bergman.zeros import (
    DegenerateSample,
    DimensionMismatch,
    GridFunction,
    RandomSection,
    UnsupportedWeight,
    ZeroSet,
    ZerosException,
    angular_ks_statistic,
    assemble_section,
    expectation_potential,
    find_zeros,
    potential_l1_distance,
    radial_cdf_distance,
    radial_cdf_profile,
    root_residual,
    zero_radii,
)

RNG_SEED = 20240503
EULER_GAMMA = 0.5772156649015329


def _basis(weight, p):
    ws = WeightSequence(weight)
    w = effective_weight(ws, p)
    return build_basis(ws, p, level_quadrature(p, center=w.center, breaks=w.breaks))


def _section(b, rng):
    return assemble_section(b, sample(Ensemble("gaussian"), b.d_p, rng))


def test_known_roots():
    """Roots of (z - 1)(z - 2)(z + i) are recovered."""
    b = _basis(FubiniStudy(), 3)
    roots = np.array([1.0, 2.0, -1.0j])
    c = np.poly(roots)[::-1]
    a = c * np.exp(b.log_norms) / np.diag(b.scaled_coeffs)
    s = assemble_section(b, a)
    np.testing.assert_allclose(s.monomial_coeffs, c, atol=1.0e-12)
    zs = find_zeros(s)
    assert zs.multiplicity_at_infinity == 0
    found = sorted(zs.finite_zeros, key=lambda z: (z.real, z.imag))
    expected = sorted(roots, key=lambda z: (z.real, z.imag))
    np.testing.assert_allclose(found, expected, atol=1.0e-10)
    assert root_residual(s, zs) < 1.0e-12


@pytest.mark.order(index=300)
@pytest.mark.parametrize("p", [1, 10, 30, 100])
def test_zero_count(p):
    """Finite zeros plus multiplicity at infinity sum up to p."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(FubiniStudy(), p)
    s = _section(b, rng)
    zs = find_zeros(s)
    assert zs.n_finite + zs.multiplicity_at_infinity == p
    assert zs.multiplicity_at_infinity == 0
    assert root_residual(s, zs) < 1.0e-8


def test_zeros_at_infinity():
    """Dropping the top coefficient moves a zero to infinity."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(FubiniStudy(), 5)
    a = sample(Ensemble("gaussian"), b.d_p, rng)
    a[-1] = 0.0
    zs = find_zeros(assemble_section(b, a))
    assert zs.multiplicity_at_infinity == 1
    assert zs.infinity_fraction == pytest.approx(0.2)


def test_scaled_fs_infinity():
    """With α = 1/2 about half of the zeros sit at infinity."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(ScaledFS(0.5), 10)
    zs = find_zeros(_section(b, rng))
    assert zs.n_finite == 5
    assert zs.multiplicity_at_infinity == 5


def test_polish_full_polynomial():
    """Zeros are polished against the coefficients dropped below tol."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(FubiniStudy(), 8)
    a = sample(Ensemble("gaussian"), b.d_p, rng)
    a[-1] = 1.0e-14 * np.max(np.abs(a))
    s = assemble_section(b, a)
    zs = find_zeros(s)
    assert zs.multiplicity_at_infinity == 1
    assert root_residual(s, zs, full=True) < 1.0e-10
    assert root_residual(s, zs) < 1.0e-10


def test_conjugation_equivariance():
    """Conjugating the coefficients of a real basis conjugates the zeros."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(FubiniStudy(), 15)
    np.testing.assert_allclose(b.scaled_coeffs.imag, 0.0, atol=1.0e-12)
    a = sample(Ensemble("gaussian"), b.d_p, rng)
    zs = find_zeros(assemble_section(b, a))
    conj = find_zeros(assemble_section(b, np.conj(a)))
    assert conj.n_finite == zs.n_finite
    gaps = np.abs(np.conj(zs.finite_zeros)[:, None] - conj.finite_zeros[None, :])
    scale = np.maximum(1.0, np.abs(conj.finite_zeros))
    assert np.max(np.min(gaps / scale[None, :], axis=1)) < 1.0e-8


def test_zeros_at_center():
    """Vanishing low coefficients give exact zeros at the center."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(FubiniStudy(), 6)
    a = sample(Ensemble("gaussian"), b.d_p, rng)
    a[:2] = 0.0
    s = assemble_section(b, a)
    zs = find_zeros(s)
    assert np.sum(zs.finite_zeros == 0) == 2
    assert zs.n_finite == 6
    assert root_residual(s, zs) < 1.0e-8


def test_heavy_tail_log_scale():
    """Zero sets do not depend on the log scale factor."""
    rng = np.random.default_rng(RNG_SEED)
    b = _basis(FubiniStudy(), 12)
    a = sample(Ensemble("gaussian"), b.d_p, rng)
    plain = find_zeros(assemble_section(b, a))
    scaled = find_zeros(assemble_section(b, a, log_scale=500.0))
    np.testing.assert_array_equal(plain.finite_zeros, scaled.finite_zeros)


def test_section_errors():
    b = _basis(FubiniStudy(), 4)
    with pytest.raises(DimensionMismatch):
        assemble_section(b, np.ones(3))
    zero = assemble_section(b, np.zeros(5))
    assert zero.degenerate
    with pytest.raises(DegenerateSample):
        find_zeros(zero)
    with pytest.raises(DegenerateSample):
        potential_l1_distance(zero, WeightSequence(FubiniStudy()), level_quadrature(4))
    with pytest.raises(ZerosException):
        ZeroSet([1.0], 0, 2)


def test_radial_cdf():
    """Sup distance between the zero counting and curvature radial CDFs."""
    w = effective_weight(WeightSequence(FubiniStudy()), 4)
    zs = ZeroSet([0.5, -0.5, 2.0j, -2.0j], 0, 4)
    radii, delta = radial_cdf_profile(zs, w, [0.5, 1.0, 2.0])
    np.testing.assert_array_equal(radii, [0.0, 0.5, 1.0, 2.0, np.inf])
    np.testing.assert_allclose(delta, [0.0, 0.3, 0.0, 0.2, 0.0], atol=1.0e-12)
    assert radial_cdf_distance(zs, w, [0.5, 1.0, 2.0]) == pytest.approx(0.3)
    # the weight sequence resolves Φ_p at the level of the zero set
    assert radial_cdf_distance(
        zs, WeightSequence(FubiniStudy()), [0.5, 1.0, 2.0]
    ) == pytest.approx(0.3)
    # Zeros at infinity are missing from the last bucket
    at_inf = ZeroSet([0.5, -0.5], 2, 4)
    _radii, delta = radial_cdf_profile(at_inf, w, [1.0])
    assert delta[-1] == pytest.approx(-0.5)
    two_center = effective_weight(WeightSequence(custom_weight("two_center")), 4)
    with pytest.raises(UnsupportedWeight):
        radial_cdf_distance(zs, two_center, [1.0])


def test_potential_distance():
    """Normalized potentials of random sections are close to Φ_p/p."""
    rng = np.random.default_rng(RNG_SEED)
    ws = WeightSequence(FubiniStudy())
    b = _basis(FubiniStudy(), 50)
    d = potential_l1_distance(_section(b, rng), ws, level_quadrature(50))
    assert 0.0 < d < 0.1


@pytest.mark.order(index=310)
def test_basis_independence():
    """A unitary change of orthonormal basis leaves the distance law unchanged."""
    rng = np.random.default_rng(RNG_SEED)
    ws = WeightSequence(FubiniStudy())
    b = _basis(FubiniStudy(), 20)
    br = rotated(b, random_unitary(b.d_p, rng))
    r_grid = np.tan(np.linspace(0.02, 1.55, 60))

    def distances(basis):
        return np.array(
            [
                radial_cdf_distance(find_zeros(_section(basis, rng)), ws, r_grid)
                for _i in range(200)
            ]
        )

    plain, turned = distances(b), distances(br)
    stderr = math.sqrt(plain.var(ddof=1) / len(plain) + turned.var(ddof=1) / len(turned))
    assert abs(plain.mean() - turned.mean()) <= 3.0 * stderr


@pytest.mark.order(index=311)
def test_potential_distance_decreases():
    """Median potential distances decrease with the level."""
    rng = np.random.default_rng(RNG_SEED)
    ws = WeightSequence(FubiniStudy())
    medians = []
    for p in (10, 40, 120):
        b = _basis(FubiniStudy(), p)
        q = level_quadrature(p)
        medians.append(
            float(np.median([potential_l1_distance(_section(b, rng), ws, q) for _i in range(20)]))
        )
    assert medians[0] > medians[1] > medians[2]


def test_angular_ks():
    """Roots of unity are angularly equidistributed."""
    zs = ZeroSet(np.exp(2j * math.pi * np.arange(8) / 8), 0, 8)
    assert angular_ks_statistic(zs) <= 1.0 / 8.0 + 1.0e-12
    assert angular_ks_statistic(ZeroSet([], 3, 3)) == 1.0
    shifted = ZeroSet(1.0 + np.exp(2j * math.pi * np.arange(8) / 8), 0, 8, center=1.0)
    assert angular_ks_statistic(shifted) <= 1.0 / 8.0 + 1.0e-12


def test_zero_radii():
    zs = ZeroSet([1.0j, 2.0], 1, 3)
    np.testing.assert_array_equal(zero_radii(zs), [1.0, 2.0, np.inf])


def test_grid_function():
    f = GridFunction(np.array([0.0, 1.0j]), np.array([0.25, 0.75]), np.array([-2.0, 1.0]))
    assert f.l1_norm() == pytest.approx(1.25)
    assert f.value_at(0.9j) == 1.0


def test_expectation_potential():
    """E log|⟨a, u⟩| = -γ/2 for Gaussian coefficients."""
    rng = np.random.default_rng(RNG_SEED)
    p = 10
    b = _basis(FubiniStudy(), p)
    q = level_quadrature(p)
    f = expectation_potential(b, Ensemble("gaussian"), 200, q, rng)
    assert float(np.sum(f.weights * f.values)) == pytest.approx(
        -EULER_GAMMA / (2.0 * p), abs=0.015
    )
    with pytest.raises(ValueError):
        expectation_potential(b, Ensemble("gaussian"), 0, q, rng)


def test_random_section_immutable():
    b = _basis(FubiniStudy(), 3)
    s = RandomSection(b, np.ones(4))
    with pytest.raises(ValueError):
        s.coeffs[0] = 2.0
