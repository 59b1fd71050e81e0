"""
Test coefficient ensembles and their moment checks.
"""
import math

import numpy as np
import pytest
from scipy.special import beta, digamma
from scipy.stats import kstest

from bergman.ensembles import (
    Ensemble,
    EnsembleKind,
    UnsupportedRange,
    gamma_nu,
    lemma_moment_constant,
    moderate_exponential_moment,
    moment_B,
    random_unitary,
    sample,
    sample_many,
    tail_exponent_fit,
    tail_smallball_check,
    trial_rng,
)

RNG_SEED = 20240502
EULER_GAMMA = 0.5772156649015329


def _e1(k):
    u = np.zeros(k, dtype=complex)
    u[0] = 1.0
    return u


def test_heavy_tail_validation():
    """ρ ≤ 1 and density bounds below the exact one are rejected."""
    with pytest.raises(UnsupportedRange):
        Ensemble(EnsembleKind.HEAVY_TAIL_IID, rho=1.0)
    with pytest.raises(UnsupportedRange):
        Ensemble(EnsembleKind.HEAVY_TAIL_IID)
    with pytest.raises(UnsupportedRange):
        Ensemble(EnsembleKind.HEAVY_TAIL_IID, rho=3.0, density_bound=1.0e-3)
    e = Ensemble("heavy_tail_iid", rho=3.0)
    assert e.density_bound == pytest.approx(3.0 / (2.0 * math.pi * math.e ** 2))
    assert e.label == "heavy_tail_iid(rho=3.0)"
    assert e.nu_range == (1.0, 3.0)
    assert e.admits_nu(2.5)
    assert not e.admits_nu(3.0)
    assert not e.dimension_free


def test_ensemble_properties():
    gaussian = Ensemble(EnsembleKind.GAUSSIAN)
    assert gaussian == Ensemble("gaussian")
    assert len({gaussian, Ensemble("gaussian"), Ensemble("sphere")}) == 2
    assert gaussian.dimension_free
    assert gaussian.density_bound == pytest.approx(1.0 / math.pi)
    assert Ensemble("sphere_moderate").is_unit_norm
    assert not Ensemble("fs_volume").is_unit_norm
    assert Ensemble("fs_volume").admits_nu(20.0)


@pytest.mark.parametrize("kind", list(EnsembleKind), ids=lambda k: k.value)
def test_sample_shapes(kind):
    """Samples have the requested shape, projective ones top modulus 1."""
    e = Ensemble(kind, rho=2.0) if kind == EnsembleKind.HEAVY_TAIL_IID else Ensemble(kind)
    rng = np.random.default_rng(RNG_SEED)
    a = sample(e, 7, rng)
    assert a.shape == (7,)
    many = sample_many(e, 5, 40, rng, projective=True)
    assert many.shape == (40, 5)
    assert np.all(np.isfinite(many))
    np.testing.assert_allclose(np.max(np.abs(many), axis=1), 1.0)
    if e.is_unit_norm:
        np.testing.assert_allclose(np.linalg.norm(sample_many(e, 5, 40, rng), axis=1), 1.0)
    with pytest.raises(UnsupportedRange):
        e.log_polar(0, 3, rng)


def test_gamma_closed_forms():
    """log|a|² is logistic for FSVolume and log of an exponential for Gaussian."""
    assert gamma_nu(EnsembleKind.FS_VOLUME, 2.0) == pytest.approx(
        math.pi ** 2 / 12.0, rel=1.0e-8
    )
    assert gamma_nu(EnsembleKind.GAUSSIAN, 2.0) == pytest.approx(
        (EULER_GAMMA ** 2 + math.pi ** 2 / 6.0) / 4.0, rel=1.0e-8
    )
    with pytest.raises(UnsupportedRange):
        gamma_nu(EnsembleKind.GAUSSIAN, 0.5)
    with pytest.raises(UnsupportedRange):
        gamma_nu(EnsembleKind.SPHERE, 2.0)


@pytest.mark.order(index=200)
@pytest.mark.parametrize("kind", [EnsembleKind.GAUSSIAN, EnsembleKind.FS_VOLUME])
@pytest.mark.parametrize("nu", [1.0, 3.0])
def test_moment_matches_gamma(kind, nu):
    """Monte Carlo condition (B) moments agree with Γ_ν for any unit u."""
    rng = np.random.default_rng(RNG_SEED)
    u = np.ones(6, dtype=complex) / math.sqrt(6.0)
    est, err = moment_B(Ensemble(kind), u, nu, 40000, rng, chunk=10000)
    assert abs(est - gamma_nu(kind, nu)) < 5.0 * err


def test_moment_errors():
    rng = np.random.default_rng(RNG_SEED)
    e = Ensemble("gaussian")
    with pytest.raises(UnsupportedRange):
        moment_B(e, np.ones(3), 1.0, 1000, rng)
    with pytest.raises(UnsupportedRange):
        moment_B(e, _e1(3), 1.0, 999, rng)


def test_small_ball():
    """Gaussian small ball probability 1 - exp(-e^{-2R})."""
    rng = np.random.default_rng(RNG_SEED)
    table = tail_smallball_check(Ensemble("gaussian"), 4, [0.5, 1.0], 20000, rng)
    for r, tail, small in table:
        assert small == pytest.approx(1.0 - math.exp(-math.exp(-2.0 * r)), abs=0.015)
        assert 0.0 <= tail <= 1.0
    with pytest.raises(UnsupportedRange):
        tail_smallball_check(Ensemble("gaussian"), 4, [], 10, rng)


def test_heavy_tail_exponent():
    """log‖a‖ tails of HeavyTailIID decay like R^{-ρ}."""
    rng = np.random.default_rng(RNG_SEED)
    e = Ensemble("heavy_tail_iid", rho=2.0)
    table = tail_smallball_check(e, 3, [2.0, 4.0, 8.0], 40000, rng)
    c_prime, rho = tail_exponent_fit(table)
    assert rho == pytest.approx(2.0, abs=0.4)
    assert c_prime > 0.0


def test_fs_volume_radial_law():
    """For k = 1 the FSVolume modulus has radial CDF r²/(1 + r²)."""
    rng = np.random.default_rng(RNG_SEED)
    a = sample_many(Ensemble("fs_volume"), 1, 100000, rng)[:, 0]
    stat = kstest(np.abs(a), lambda r: r ** 2 / (1.0 + r ** 2)).statistic
    assert stat < 0.01


@pytest.mark.order(index=201)
def test_heavy_tail_pareto_bound():
    """HeavyTailIID(ρ=3) tails stay below 1.1·R^{-3}, unit vectors have none."""
    rng = np.random.default_rng(RNG_SEED)
    e = Ensemble("heavy_tail_iid", rho=3.0)
    table = tail_smallball_check(e, 1, [1.0, 2.0, 4.0, 8.0], 1000000, rng)
    for r, tail, small in table:
        assert tail <= 1.1 * r ** -3.0
        # log|a| = Y ≥ 1 in dimension one
        assert small == 0.0
    for _r, tail, _small in tail_smallball_check(Ensemble("sphere"), 4, [1.0, 2.0], 1000, rng):
        assert tail == 0.0
    for _r, tail, _small in tail_smallball_check(Ensemble("gaussian"), 2, [5.0], 100000, rng):
        assert tail == 0.0


@pytest.mark.order(index=202)
@pytest.mark.parametrize("kind", [EnsembleKind.GAUSSIAN, EnsembleKind.FS_VOLUME])
def test_moment_unitary_invariance(kind):
    """Moments along two unit vectors of the same dimension agree."""
    rng = np.random.default_rng(RNG_SEED)
    k = 6
    v = sample(Ensemble("sphere"), k, rng)
    first, first_err = moment_B(Ensemble(kind), _e1(k), 1.0, 40000, rng)
    other, other_err = moment_B(Ensemble(kind), v, 1.0, 40000, rng)
    assert abs(first - other) <= 3.0 * math.hypot(first_err, other_err)


@pytest.mark.order(index=203)
def test_iid_moment_scaling():
    """Flat direction moments of HeavyTailIID grow like k^{ν/ρ}."""
    rng = np.random.default_rng(RNG_SEED)
    e = Ensemble("heavy_tail_iid", rho=3.0)
    ks = np.array([4, 16, 64, 256])
    estimates = np.array(
        [moment_B(e, np.ones(k) / math.sqrt(k), 1.0, 20000, rng)[0] for k in ks]
    )
    ratios = estimates / ks ** (1.0 / 3.0)
    assert np.max(ratios) <= 2.0 * np.min(ratios)
    slope = np.polyfit(np.log(ks), np.log(estimates), 1)[0]
    assert 0.0 < slope < 1.0 / 3.0 + 0.15


@pytest.mark.order(index=204)
def test_sphere_log_growth():
    """For unit vectors E|log|a_1|| = (ψ(k) + γ)/2, below log k."""
    rng = np.random.default_rng(RNG_SEED)
    for k in (4, 16, 64, 256):
        est, err = moment_B(Ensemble("sphere"), _e1(k), 1.0, 20000, rng)
        assert abs(est - 0.5 * (digamma(k) + EULER_GAMMA)) < 5.0 * err
        assert est <= math.log(k)


def test_tail_exponent_fit():
    """Exact power laws are recovered, the fit bounds every row."""
    table = [(r, 0.5 * r ** -3.0, 0.0) for r in (1.0, 2.0, 4.0, 8.0)]
    c_prime, rho = tail_exponent_fit(table)
    assert c_prime == pytest.approx(0.5)
    assert rho == pytest.approx(3.0)
    assert tail_exponent_fit([(1.0, 0.1, 0.0), (2.0, 0.0, 0.0)]) == (0.0, math.inf)


def test_lemma_constant():
    assert lemma_moment_constant(1.0, 3.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(UnsupportedRange):
        lemma_moment_constant(1.0, 3.0, 3.0)


def test_moderate_exponential_moment():
    """For unit vectors |a_1|² ~ Beta(1, k-1)."""
    k = 4
    alpha = 0.5
    rng = np.random.default_rng(RNG_SEED)
    est, err, bound = moderate_exponential_moment(
        Ensemble("sphere_moderate"), k, alpha, 40000, rng
    )
    expected = (k - 1) * beta(1.0 - alpha / 2.0, k - 1)
    assert est == pytest.approx(expected, rel=0.03)
    assert err > 0.0
    assert bound == pytest.approx(est / (alpha * math.e))
    with pytest.raises(UnsupportedRange):
        moderate_exponential_moment(Ensemble("sphere"), k, 0.0, 10, rng)


def test_random_unitary():
    rng = np.random.default_rng(RNG_SEED)
    for k in (1, 5):
        u = random_unitary(k, rng)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(k), atol=1.0e-12)


def test_trial_rng():
    """Streams depend on the seed chain only."""
    a = trial_rng(7, 50, 0, 3).random(4)
    b = trial_rng(7, 50, 0, 3).random(4)
    c = trial_rng(7, 50, 0, 4).random(4)
    d = trial_rng(8, 50, 0, 3).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)
