"""Random sections, their zero sets on ℙ¹ and equidistribution distances.

A section of level p is f = Σ a_j s_j, a polynomial of degree ≤ p in
w = z - center. Its zero divisor on ℙ¹ has total mass p: the finite roots
plus a multiplicity p - deg f at infinity.

Roots are computed on the norm-scaled coefficients: the coefficient of
w^k/n_k decides the degree drop, then the variable is rescaled so that the
extreme coefficients have equal modulus before the balanced companion
matrix is formed.

"""
import logging
import math
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigvals, matrix_balance
from scipy.stats import kstest

from . import _
from .bergman_space import BergmanBasis, log_section_norm
from .ensembles import Ensemble
from .quadrature import Quadrature
from .weights import Weight, WeightSequence, effective_weight

logger = logging.getLogger("zeros_lab.zeros")


class ZerosException(Exception):
    """An exception occurred while handling zeros."""


class DimensionMismatch(ZerosException):
    """Coefficient vector length differs from d_p."""


class DegenerateSample(ZerosException):
    """Zero polynomial, no zero set."""


class UnsupportedWeight(ZerosException):
    """Operation not supported for this weight."""


class RandomSection:
    """Section f = Σ a_j s_j of a basis, immutable.

    The coefficients may be given up to a factor e^{log_scale}, which keeps
    heavy tailed samples finite. Zero sets do not depend on the factor.
    """

    def __init__(self, basis: BergmanBasis, coeffs, log_scale: float = 0.0) -> None:
        self._basis = basis
        self._log_scale = float(log_scale)
        self._coeffs = np.array(coeffs, dtype=complex)
        scaled = np.zeros(basis.p + 1, dtype=complex)
        scaled[: basis.d_p] = self._coeffs @ basis.scaled_coeffs
        self._scaled = scaled
        self._coeffs.setflags(write=False)
        self._scaled.setflags(write=False)

    @property
    def p(self) -> int:
        return self._basis.p

    @property
    def basis(self) -> BergmanBasis:
        return self._basis

    @property
    def log_scale(self) -> float:
        return self._log_scale

    @property
    def center(self) -> complex:
        return self._basis.center

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def scaled_monomial_coeffs(self) -> np.ndarray:
        """Return c̃, coefficients against w^k/n_k, padded up to degree p."""
        return self._scaled

    @property
    def monomial_coeffs(self) -> np.ndarray:
        """Return the coefficients of f in powers of z - center, up to degree p."""
        out = np.zeros(self.p + 1, dtype=complex)
        d = self._basis.d_p
        with np.errstate(over="ignore"):
            out[:d] = self._scaled[:d] * np.exp(-self._basis.log_norms)
        return out

    @property
    def degenerate(self) -> bool:
        return not np.any(self._scaled != 0)

    def log_monomial_coeffs(self):
        """Return (log |c_k|, arg c_k) for the raw coefficients, k = 0..p."""
        d = self._basis.d_p
        logmod = np.full(self.p + 1, -np.inf)
        with np.errstate(divide="ignore"):
            logmod[:d] = np.log(np.abs(self._scaled[:d])) - self._basis.log_norms
        return logmod, np.angle(self._scaled)


class ZeroSet:
    """Zero divisor of a section on ℙ¹ = ℂ ∪ {∞}."""

    def __init__(self, finite_zeros, multiplicity_at_infinity: int, p: int, center=0j):
        self._finite = np.array(finite_zeros, dtype=complex)
        self._inf = int(multiplicity_at_infinity)
        self._p = int(p)
        self._center = complex(center)
        if len(self._finite) + self._inf != self._p:
            raise ZerosException(
                _("Zero count {} + {} differs from p={}").format(
                    len(self._finite), self._inf, self._p
                )
            )
        self._finite.setflags(write=False)

    def __repr__(self) -> str:
        return "<ZeroSet p={} finite={} inf={}>".format(self._p, self.n_finite, self._inf)

    @property
    def finite_zeros(self) -> np.ndarray:
        return self._finite

    @property
    def multiplicity_at_infinity(self) -> int:
        return self._inf

    @property
    def n_finite(self) -> int:
        return len(self._finite)

    @property
    def p(self) -> int:
        return self._p

    @property
    def center(self) -> complex:
        return self._center

    @property
    def infinity_fraction(self) -> float:
        return self._inf / self._p


class GridFunction:
    """Function sampled on quadrature nodes."""

    def __init__(self, nodes, weights, values) -> None:
        self.nodes = np.asarray(nodes)
        self.weights = np.asarray(weights)
        self.values = np.asarray(values)

    def l1_norm(self) -> float:
        return float(np.sum(self.weights * np.abs(self.values)))

    def value_at(self, z: complex) -> float:
        """Return the value at the node closest to z."""
        return float(self.values[int(np.argmin(np.abs(self.nodes - z)))])


# ----------
# Operations
# ----------
def assemble_section(b: BergmanBasis, a, log_scale: float = 0.0) -> RandomSection:
    """Return the section e^{log_scale}·Σ a_j s_j."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (b.d_p,):
        logger.error(_("Coefficient vector of length %s, d_p=%s"), a.shape, b.d_p)
        raise DimensionMismatch(_("Coefficient vector length differs from d_p"))
    s = RandomSection(b, a, log_scale)
    if s.degenerate:
        logger.warning(_("Zero coefficient vector, degenerate section"))
    return s


def _horner(coeffs, x):
    """Return (f(x), f'(x)) for coefficients in increasing degree."""
    f = np.zeros_like(x)
    df = np.zeros_like(x)
    for c in coeffs[::-1]:
        df = df * x + f
        f = f * x + c
    return f, df


def _newton_step(coeffs, x):
    """Return f(x)/f'(x) and log|f(x)|, using the reversed polynomial for |x| > 1."""
    n = len(coeffs) - 1
    inside = np.abs(x) <= 1.0
    xs = np.where(inside, x, 1.0)
    f, df = _horner(coeffs, xs)
    v = np.where(inside, 1.0, 1.0 / np.where(inside, 1.0, x))
    g, dg = _horner(coeffs[::-1], v)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(inside, f / df, x * g / (n * g - v * dg))
        log_abs = np.where(
            inside, np.log(np.abs(f)), n * np.log(np.abs(x)) + np.log(np.abs(g))
        )
    return step, log_abs


def _scaled_polynomial(s: RandomSection, tol: float, full: bool = False):
    """Return (low, m, log λ, e) with f(center + λx) ∝ x^low·Σ e_k x^k.

    m is the degree after dropping coefficients below tol relative to the
    largest norm-scaled coefficient, low the number of exact roots at the
    center. With full, e keeps every nonzero coefficient above m while λ
    stays the one of the truncated polynomial.
    """
    scaled = np.abs(s.scaled_monomial_coeffs)
    top = np.max(scaled)
    if top == 0.0:
        logger.warning(_("Zero polynomial, sample discarded"))
        raise DegenerateSample(_("Zero polynomial"))
    m = int(np.nonzero(scaled > tol * top)[0][-1])
    low = int(np.nonzero(scaled)[0][0])
    logmod, arg = s.log_monomial_coeffs()
    log_lambda = (logmod[low] - logmod[m]) / (m - low) if m > low else 0.0
    top_k = int(np.nonzero(scaled)[0][-1]) if full else m
    k = np.arange(top_k - low + 1)
    e_log = logmod[low : top_k + 1] + k * log_lambda
    e_log = e_log - np.max(e_log)
    with np.errstate(under="ignore"):
        e = np.exp(e_log) * np.exp(1j * arg[low : top_k + 1])
    return low, m, log_lambda, e


def find_zeros(s: RandomSection, tol: float = 1.0e-12) -> ZeroSet:
    """Return the zero set of s on ℙ¹.

    Raises
    ------
    DegenerateSample
        If s is the zero polynomial.
    """
    low, m, log_lambda, e = _scaled_polynomial(s, tol)
    n = m - low
    roots = np.zeros(0, dtype=complex)
    if n > 0:
        comp = np.zeros((n, n), dtype=complex)
        comp[1:, :-1] = np.eye(n - 1)
        comp[:, -1] = -e[:-1] / e[-1]
        balanced, _t = matrix_balance(comp, permute=False)
        x = eigvals(balanced)
        # polish against every coefficient, not only the retained ones
        _low, _m, _l, e_full = _scaled_polynomial(s, tol, full=True)
        step, before = _newton_step(e_full, x)
        polished = x - step
        _s, after = _newton_step(e_full, polished)
        better = np.isfinite(polished) & (after < before)
        x = np.where(better, polished, x)
        roots = s.center + math.exp(log_lambda) * x
    finite = np.concatenate((np.full(low, s.center, dtype=complex), roots))
    return ZeroSet(finite, s.p - m, s.p, center=s.center)


def root_residual(
    s: RandomSection, zeros: ZeroSet, tol: float = 1.0e-12, full: bool = False
) -> float:
    """Return max over finite zeros of |f/f'| relative to max(1, |z|).

    With full, f keeps the coefficients find_zeros drops below tol.
    """
    if zeros.n_finite == 0:
        return 0.0
    low, _m, log_lambda, e = _scaled_polynomial(s, tol, full=full)
    lam = math.exp(log_lambda)
    z = zeros.finite_zeros
    w = (z - s.center) / lam
    at_center = w == 0
    if low > 0 or len(e) == 1:
        w = w[~at_center]
        z = z[~at_center]
    if len(w) == 0:
        return 0.0
    step, _log = _newton_step(e, w)
    return float(np.max(lam * np.abs(step) / np.maximum(1.0, np.abs(z))))


def _curvature_weight(w: Union[Weight, WeightSequence], p: int) -> Weight:
    if isinstance(w, WeightSequence):
        return effective_weight(w, p)
    return w


def radial_cdf_profile(
    zs: ZeroSet, w: Union[Weight, WeightSequence], r_grid: Sequence[float]
):
    """Return (radii, signed discrepancies) including the r=0 and r=∞ buckets.

    The discrepancy at r is (1/p)·#{|z - center| ≤ r} - mass_Φ(r)/p. w is
    either the effective weight Φ_p itself or the weight sequence, in which
    case Φ_p is taken at p = zs.p. Zeros at infinity belong to no disk.
    """
    w = _curvature_weight(w, zs.p)
    if not w.is_radial:
        logger.error(_("Radial CDF distance requested for non radial weight %s"), w.key)
        raise UnsupportedWeight(_("Weight is not radial, use potential_l1_distance"))
    radii = np.concatenate(([0.0], np.sort(np.asarray(r_grid, dtype=float)), [np.inf]))
    dist = np.sort(np.abs(zs.finite_zeros - w.center))
    counts = np.searchsorted(dist, radii, side="right")
    expected = np.asarray(w.radial_mass(radii), dtype=float)
    return radii, counts / zs.p - expected / zs.p


def radial_cdf_distance(
    zs: ZeroSet, w: Union[Weight, WeightSequence], r_grid: Sequence[float]
) -> float:
    """Return the sup distance between zero and curvature radial CDFs.

    w is Φ_p or the weight sequence, see radial_cdf_profile.
    """
    _radii, delta = radial_cdf_profile(zs, w, r_grid)
    return float(np.max(np.abs(delta)))


def _shift_nonfinite(values_fn, nodes, spacing):
    """Evaluate values_fn, moving nodes where it is not finite by half a spacing."""
    values = values_fn(nodes)
    bad = ~np.isfinite(values)
    if np.any(bad):
        logger.debug(_("Shifting %s quadrature nodes away from zeros"), int(np.sum(bad)))
        values = np.array(values)
        values[bad] = values_fn(nodes[bad] + 0.5 * spacing[bad])
    return values


def potential_l1_distance(s: RandomSection, ws: WeightSequence, q: Quadrature) -> float:
    """Return ∫ |(1/p)·log|f(z)| - Φ_p(z)/p| ω_FS on the rule q."""
    if s.degenerate:
        raise DegenerateSample(_("Zero polynomial"))
    b = s.basis
    target = effective_weight(ws, s.p)

    def integrand(z):
        log_f = log_section_norm(b, s.coeffs, z) + s.log_scale + b.weight_total.eval(z)
        return (log_f - target.eval(z)) / s.p

    values = _shift_nonfinite(integrand, q.nodes, q.node_spacing())
    return float(np.sum(q.weights * np.abs(values)))


def angular_ks_statistic(zs: ZeroSet, center: Optional[complex] = None) -> float:
    """Return the KS distance between arg(z - center) and the uniform law.

    Without finite zeros the statistic is 1 and a warning is logged.
    """
    if zs.n_finite == 0:
        logger.warning(_("No finite zero, angular KS statistic set to 1"))
        return 1.0
    c = zs.center if center is None else complex(center)
    angles = np.mod(np.angle(zs.finite_zeros - c), 2.0 * math.pi) / (2.0 * math.pi)
    return float(kstest(angles, "uniform").statistic)


def normalized_log_potential(b: BergmanBasis, a, nodes, log_scale: float = 0.0):
    """Return (1/A_p)·log(|s(z)|_{h_p}/√P_p(z)) for s = Σ a_j s_j.

    log_scale is added to log|s|, for coefficient vectors given up to a
    factor e^{log_scale}.
    """
    nodes = np.asarray(nodes, dtype=complex)
    _m, v = b.scaled_values(nodes)
    with np.errstate(divide="ignore"):
        values = (
            np.log(np.abs(v @ np.asarray(a, dtype=complex)))
            + log_scale
            - 0.5 * np.log(np.sum(np.abs(v) ** 2, axis=1))
        )
    return values / b.weight_total.total_mass


def expectation_potential(
    b: BergmanBasis,
    e: Ensemble,
    trials: int,
    q: Quadrature,
    rng: np.random.Generator,
) -> GridFunction:
    """Return the trial average of normalized_log_potential on the nodes of q."""
    if trials < 1:
        raise ValueError(_("trials must be positive"))
    spacing = q.node_spacing()
    acc = np.zeros(len(q.nodes))
    for _t in range(trials):
        logmod, arg = e.log_polar(b.d_p, 1, rng)
        top = float(np.max(logmod))
        a = np.exp(logmod[0] - top) * np.exp(1j * arg[0])
        acc += _shift_nonfinite(
            lambda z: normalized_log_potential(b, a, z, log_scale=top), q.nodes, spacing
        )
    return GridFunction(q.nodes, q.weights, acc / trials)


def zero_radii(zs: ZeroSet) -> np.ndarray:
    """Return |z - center| for finite zeros, ∞ repeated for zeros at infinity."""
    return np.concatenate(
        (np.abs(zs.finite_zeros - zs.center), np.full(zs.multiplicity_at_infinity, np.inf))
    )
