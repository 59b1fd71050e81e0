"""
Test each operation of weights module.
"""
import math

import numpy as np
import pytest

from bergman.weights import (
    CombinedWeight,
    CustomWeight,
    FubiniStudy,
    InvalidConfiguration,
    OutOfGridError,
    ScaledFS,
    TranslatedFS,
    UnsupportedOperation,
    WeightSequence,
    curvature_radial_mass,
    custom_weight,
    effective_weight,
    eval_weight,
    half_log1p_abs2,
    numerical_curvature_density,
    total_mass,
)

GRID = np.array([0.0, 0.3 + 0.1j, -1.0, 1.5j, 2.0 - 1.0j, -0.7 - 0.2j])


def test_fs_values():
    """Check closed form values of φ_FS."""
    fs = FubiniStudy()
    assert eval_weight(fs, 0.0) == 0.0
    assert eval_weight(fs, 1.0) == pytest.approx(0.5 * math.log(2.0))
    assert eval_weight(fs, 1j) == pytest.approx(0.5 * math.log(2.0))


def test_half_log_no_overflow():
    """Large points give finite values."""
    v = half_log1p_abs2(np.array([1.0e200, 1.0e-200]))
    assert np.all(np.isfinite(v))
    assert v[0] == pytest.approx(200.0 * math.log(10.0))
    assert v[1] == 0.0


def test_out_of_grid():
    """Non finite points are rejected."""
    with pytest.raises(OutOfGridError):
        eval_weight(FubiniStudy(), np.array([np.nan]))
    with pytest.raises(OutOfGridError):
        eval_weight(TranslatedFS(1.0), np.inf)


@pytest.mark.parametrize(
    "weight", [FubiniStudy(), ScaledFS(0.5), TranslatedFS(1.0 + 0.5j)]
)
def test_lelong_bound(weight):
    """φ - log⁺|z| never exceeds the Lelong constant."""
    r = np.exp(np.linspace(-5.0, 5.0, 201))
    z = (r[:, None] * np.exp(1j * np.linspace(0.0, 2.0 * math.pi, 64))[None, :]).ravel()
    z = z + weight.center
    excess = weight.eval(z) - np.log(np.maximum(1.0, np.abs(z)))
    assert np.max(excess) <= weight.lelong_constant + 1.0e-12


def test_fs_lelong_attained():
    """The FS constant is attained at |z| = 1."""
    fs = FubiniStudy()
    assert fs.eval(1.0) - 0.0 == pytest.approx(fs.lelong_constant)


def test_curvature_densities():
    """Closed form densities match the finite difference Laplacian."""
    for weight in (
        FubiniStudy(),
        ScaledFS(0.5),
        TranslatedFS(1.0),
        custom_weight("quartic"),
        custom_weight("two_center"),
    ):
        exact = weight.curvature_density(GRID[1:])
        approx = numerical_curvature_density(weight, GRID[1:], 1.0e-4)
        np.testing.assert_allclose(approx, exact, rtol=1.0e-4, atol=1.0e-6)


def test_strict_positivity():
    """Densities stay above the strict positivity bound."""
    r = np.exp(np.linspace(-4.0, 4.0, 81))
    z = (r[:, None] * np.exp(1j * np.linspace(0.0, 2.0 * math.pi, 32))[None, :]).ravel()
    for weight in (TranslatedFS(1.0), TranslatedFS(-2.0j), custom_weight("two_center")):
        assert np.min(weight.curvature_density(z)) >= weight.strict_positivity * (
            1.0 - 1.0e-9
        )


def test_radial_mass():
    """Radial masses of built-in weights."""
    fs = FubiniStudy()
    assert curvature_radial_mass(fs, 1.0) == pytest.approx(0.5)
    assert curvature_radial_mass(fs, np.inf) == pytest.approx(1.0)
    assert curvature_radial_mass(ScaledFS(0.5), 1.0) == pytest.approx(0.25)
    # Mass about the center of a translated weight
    assert curvature_radial_mass(TranslatedFS(2.0), 1.0) == pytest.approx(0.5)
    log_max = custom_weight("log_max")
    assert curvature_radial_mass(log_max, 0.5) == 0.0
    assert curvature_radial_mass(log_max, 2.0) == 1.0
    assert curvature_radial_mass(custom_weight("quartic"), 1.0) == pytest.approx(0.5)


def test_radial_mass_errors():
    """Non radial weights and negative radii are rejected."""
    with pytest.raises(UnsupportedOperation):
        curvature_radial_mass(custom_weight("two_center"), 1.0)
    with pytest.raises(InvalidConfiguration):
        curvature_radial_mass(FubiniStudy(), -1.0)


def test_total_mass():
    """Total masses, closed form and finite difference."""
    assert total_mass(FubiniStudy()) == 1.0
    assert total_mass(ScaledFS(0.25)) == 0.25
    fs_like = CustomWeight("fs_like", half_log1p_abs2)
    assert total_mass(fs_like) == pytest.approx(1.0, rel=1.0e-6)
    assert fs_like.radial_mass(1.0) == pytest.approx(0.5, rel=1.0e-6)
    assert not fs_like.has_curvature_density


def test_invalid_weights():
    """Out of range parameters."""
    with pytest.raises(InvalidConfiguration):
        ScaledFS(0.0)
    with pytest.raises(InvalidConfiguration):
        ScaledFS(1.5)
    with pytest.raises(InvalidConfiguration):
        custom_weight("nope")
    with pytest.raises(InvalidConfiguration):
        CombinedWeight(((-1.0, FubiniStudy()),))


def test_combined_weight():
    """Equal terms merge, radial only with a common center."""
    w = CombinedWeight(((3.0, FubiniStudy()), (2.0, FubiniStudy())))
    assert w.terms[0][0] == 5.0
    assert w.is_radial
    assert w.total_mass == 5.0
    assert w.strict_positivity == 5.0
    mixed = CombinedWeight(((1.0, FubiniStudy()), (1.0, TranslatedFS(1.0))))
    assert not mixed.is_radial
    with pytest.raises(UnsupportedOperation):
        mixed.radial_mass(1.0)


def test_effective_weight():
    """Φ_p = (p - n_p)·φ + n_p·φ_FS keeps the base center."""
    ws = WeightSequence(TranslatedFS(1.0), {10: 2})
    w = effective_weight(ws, 10)
    assert w.center == 1.0
    assert w.total_mass == pytest.approx(10.0)
    z = np.array([0.5, 2.0j])
    np.testing.assert_allclose(
        w.eval(z), 8.0 * TranslatedFS(1.0).eval(z) + 2.0 * FubiniStudy().eval(z)
    )
    with pytest.raises(InvalidConfiguration):
        effective_weight(ws, 0)
    with pytest.raises(InvalidConfiguration):
        effective_weight(ws, 20)


def test_weight_sequence_rules():
    """Regularizer rules and trend check."""
    grid = [16, 64, 256]
    ws = WeightSequence.from_rule(FubiniStudy(), grid, mode="power", exponent=0.5)
    assert [ws.n_p(p) for p in grid] == [4, 8, 16]
    assert ws.regularized
    assert ws.check_trend()
    flat = WeightSequence.from_rule(
        FubiniStudy(), grid, mode="explicit", counts=[4, 4, 4]
    )
    assert not flat.check_trend()
    assert WeightSequence.from_rule(FubiniStudy(), grid).n_p(64) == 0
    with pytest.raises(InvalidConfiguration):
        WeightSequence.from_rule(FubiniStudy(), grid, mode="explicit", counts=[1])
    with pytest.raises(InvalidConfiguration):
        WeightSequence.from_rule(FubiniStudy(), grid, mode="power", exponent=1.5)
    with pytest.raises(InvalidConfiguration):
        WeightSequence(FubiniStudy(), {4: 5})
