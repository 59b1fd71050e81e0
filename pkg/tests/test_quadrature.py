"""
Test quadrature rules against ω_FS.
"""
import math

import numpy as np
import pytest
from scipy.special import beta

from bergman.quadrature import (
    Quadrature,
    adapted_quadrature,
    distance_quadrature,
    endpoint_exponent,
    independent_quadrature,
    level_quadrature,
)


def test_total_mass():
    """Rules integrate 1 to 1, centered or not."""
    for q in (
        Quadrature(20, 8),
        Quadrature(40, 64, center=1.0 + 1.0j),
        Quadrature(30, 16, breaks=(1.0,)),
    ):
        assert float(np.sum(q.weights)) == pytest.approx(1.0, abs=1.0e-10)


def test_beta_moments():
    """Gauss-Legendre in t is exact on |z|^2k/(1+|z|²)^p."""
    p = 30
    q = Quadrature(p, 4)
    r2 = np.abs(q.nodes) ** 2
    for k in (0, 7, 30):
        value = q.integrate(r2 ** k / (1.0 + r2) ** p)
        assert value.real == pytest.approx(beta(k + 1, p - k + 1), rel=1.0e-12)


def test_jacobi_moments():
    """With β = -1/2 the rule is exact on |z|^2k/(1+|z|²)^(p+1/2), k ≤ p + 1."""
    p = 12
    q = Quadrature(p + 2, 4, endpoint_exponent=-0.5)
    plain = Quadrature(p + 2, 4)
    for k in (0, 5, p, p + 1):
        expected = beta(k + 1, p - k + 1.5)
        r2 = np.abs(q.nodes) ** 2
        value = q.integrate(r2 ** k / (1.0 + r2) ** (p + 0.5))
        assert value.real == pytest.approx(expected, rel=1.0e-12)
    r2 = np.abs(plain.nodes) ** 2
    value = plain.integrate(r2 ** (p + 1) / (1.0 + r2) ** (p + 0.5))
    assert abs(value.real - beta(p + 2, 0.5)) > 1.0e-6


def test_endpoint_exponent():
    assert endpoint_exponent(25.0) == 0.0
    assert endpoint_exponent(12.5) == pytest.approx(-0.5)
    assert endpoint_exponent(3.0 - 1.0e-9) == 0.0
    assert endpoint_exponent(0.3 * 17) == pytest.approx(-0.9)
    q = level_quadrature(10)
    assert adapted_quadrature(q, 10.0) is q
    adapted = adapted_quadrature(q, 5.5)
    assert adapted.endpoint_exponent == pytest.approx(-0.5)
    assert (adapted.n_radial, adapted.n_angular) == (q.n_radial, q.n_angular)
    assert adapted.key != q.key
    assert independent_quadrature(adapted).endpoint_exponent == adapted.endpoint_exponent


def test_centered_rule():
    """A centered rule integrates the same functions."""
    f = lambda z: 1.0 / (1.0 + np.abs(z - 0.5) ** 2)  # noqa: E731
    plain = Quadrature(80, 96)
    centered = Quadrature(80, 96, center=0.5)
    assert plain.integrate(f(plain.nodes)).real == pytest.approx(
        centered.integrate(f(centered.nodes)).real, rel=1.0e-8
    )
    np.testing.assert_allclose(centered.offsets, centered.nodes - 0.5)


def test_breaks():
    """Composite rules place a subinterval boundary at each break."""
    q = Quadrature(10, 1, breaks=(1.0,))
    r = q.radial_nodes[:, 0]
    assert len(r) == 20
    assert np.sum(r < 1.0) == 10
    assert q.radial_nodes[:, 1].sum() == pytest.approx(1.0)
    # Mass of the unit disk is 1/2
    assert q.radial_nodes[r < 1.0, 1].sum() == pytest.approx(0.5)


def test_node_counts():
    """Node counts grow linearly in p."""
    q = level_quadrature(10, radial_factor=1.0, radial_base=5, angular_factor=2.0, angular_base=3)
    assert q.n_radial == 15
    assert q.n_angular == 23
    assert len(q.nodes) == 15 * 23


def test_independent_rule():
    """The independent rule shares no node with the original one."""
    q = level_quadrature(8)
    fine = independent_quadrature(q)
    assert fine.n_radial > q.n_radial
    gap = np.min(np.abs(fine.nodes[:, None] - q.nodes[None, :]))
    assert gap > 0.0


def test_keys():
    """Keys identify the rule."""
    assert Quadrature(10, 10).key == Quadrature(10, 10).key
    assert Quadrature(10, 10).key != Quadrature(10, 10, center=1.0).key
    assert distance_quadrature().key != distance_quadrature(50).key


def test_invalid_rule():
    with pytest.raises(ValueError):
        Quadrature(0, 4)
    with pytest.raises(ValueError):
        Quadrature(4, 4, endpoint_exponent=-1.0)


def test_node_spacing():
    """Spacing is positive at every node."""
    q = Quadrature(12, 16)
    spacing = q.node_spacing()
    assert spacing.shape == q.nodes.shape
    assert np.all(spacing > 0.0)
    assert np.all(np.isfinite(spacing))
    assert math.isclose(float(np.sum(q.weights)), 1.0, rel_tol=1.0e-12)
