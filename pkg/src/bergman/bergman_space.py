"""Weighted L² spaces of polynomials and their Bergman kernels.

The space of level p is the set of polynomials of degree ≤ p, seen as
sections of O(p), with inner product ⟨f, g⟩ = ∫ f·ḡ·e^{-2Φ_p} ω_FS where Φ_p
is the effective weight. Its orthonormal basis is built by Cholesky
factorization of the Gram matrix of the retained monomials.

Monomials are taken in powers of w = z - center, center being the center of
the weight, and pre-scaled by their quadrature norms n_k. A basis therefore
stores the log norms log n_k and the scaled lower triangular matrix B̃ with

    s_j(z) = Σ_k B̃_jk·w^k/n_k

Every kernel quantity is evaluated in log space: at each point z, with
u_k = k·log w - log n_k - Φ_p(z) and m = max_k Re u_k, one has
s_j(z)·e^{-Φ_p(z)} = e^m·v_j(z) where v_j = Σ_k B̃_jk·e^{u_k - m} is of
order one.

Methods

- build_basis                - Build the orthonormal basis of level p
- bergman_function           - P_p(z) = Σ|s_j(z)|²·e^{-2Φ_p(z)}
- bergman_kernel_norm        - |P_p(z, w)|²_{h_p}
- fs_potential               - ½·log Σ|s_j(z)|²
- extremal_check             - Variational characterization of P_p
- trace_identity             - ∫ P_p ω_FS
- orthonormality_residual    - ‖B̃ G̃′ B̃ᴴ - I‖∞ on an independent rule
- rotated                    - Basis U·B for a unitary U

"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.special import logsumexp

from . import _
from .quadrature import Quadrature, adapted_quadrature, independent_quadrature
from .weights import Weight, WeightSequence, effective_weight

logger = logging.getLogger("zeros_lab.bergman_space")

# Monomials whose quadrature norm exceeds this value are dropped
NORM_OVERFLOW = 1.0e300
# Gram matrices with a larger condition number are rejected
CONDITION_MAX = 1.0e12
# Points evaluated together, bounding memory use
CHUNK_SIZE = 4096


class BergmanSpaceException(Exception):
    """An exception occurred while building a Bergman space."""


class QuadratureResolutionError(BergmanSpaceException):
    """Gram matrix numerically singular, quadrature too coarse."""


class EmptyBasisError(BergmanSpaceException):
    """No monomial retained, weight and p mismatch."""


class BergmanBasis:
    """Orthonormal basis of the level p space. Immutable once built."""

    def __init__(
        self,
        p: int,
        weight_total: Weight,
        log_norms,
        scaled_coeffs,
        dropped_monomials: Sequence[int],
        center: complex = 0j,
        quadrature_key: str = "",
        gram_scaled=None,
    ) -> None:
        self._p = int(p)
        self._weight = weight_total
        self._log_norms = np.array(log_norms, dtype=float)
        self._coeffs = np.array(scaled_coeffs, dtype=complex)
        self._dropped = tuple(int(k) for k in dropped_monomials)
        self._center = complex(center)
        self._quadrature_key = quadrature_key
        if gram_scaled is None:
            inv = np.linalg.inv(self._coeffs)
            gram_scaled = inv @ inv.conj().T
        self._gram_scaled = np.array(gram_scaled, dtype=complex)
        for a in (self._log_norms, self._coeffs, self._gram_scaled):
            a.setflags(write=False)

    def __repr__(self) -> str:
        return "<BergmanBasis p={} d_p={} weight={}>".format(
            self._p, self.d_p, self._weight.key
        )

    @property
    def p(self) -> int:
        return self._p

    @property
    def weight_total(self) -> Weight:
        """Return the effective weight Φ_p."""
        return self._weight

    @property
    def d_p(self) -> int:
        return len(self._log_norms)

    @property
    def center(self) -> complex:
        """Return the expansion center, monomials are powers of z - center."""
        return self._center

    @property
    def log_norms(self) -> np.ndarray:
        return self._log_norms

    @property
    def scaled_coeffs(self) -> np.ndarray:
        """Return B̃, coefficients against the scaled monomials w^k/n_k."""
        return self._coeffs

    @property
    def basis_monomial_coeffs(self) -> np.ndarray:
        """Return B, with s_j(z) = Σ_k B_jk·(z - center)^k."""
        return self._coeffs * np.exp(-self._log_norms)[None, :]

    @property
    def gram_scaled(self) -> np.ndarray:
        """Return G̃, the Gram matrix of the scaled monomials."""
        return self._gram_scaled

    @property
    def gram(self) -> np.ndarray:
        """Return G_jk = ∫ w^j·w̄^k·e^{-2Φ_p} ω_FS on the retained monomials."""
        n = np.exp(self._log_norms)
        return n[:, None] * self._gram_scaled * n[None, :]

    @property
    def dropped_monomials(self) -> Tuple[int, ...]:
        return self._dropped

    @property
    def quadrature_key(self) -> str:
        return self._quadrature_key

    @property
    def is_diagonal(self) -> bool:
        return bool(np.count_nonzero(self._coeffs - np.diag(np.diag(self._coeffs))) == 0)

    def scaled_terms(self, z):
        """Return (m, V) with V_ik = e^{u_k(z_i) - m_i}, for 1-d array z."""
        z = np.asarray(z, dtype=complex)
        w = z - self._center
        k = np.arange(self.d_p)
        with np.errstate(divide="ignore", invalid="ignore"):
            logw = np.log(w)
        u = k[None, :] * logw[:, None]
        u[:, 0] = 0.0
        # w = 0: only the constant term survives
        u = np.where(np.isnan(u) | np.isneginf(u.real), -np.inf, u)
        u = u - self._log_norms[None, :] - self._weight.eval(z)[:, None]
        m = np.max(u.real, axis=1)
        return m, np.exp(u - m[:, None])

    def scaled_values(self, z):
        """Return (m, v) with s_j(z_i)·e^{-Φ_p(z_i)} = e^{m_i}·v_ij."""
        m, terms = self.scaled_terms(z)
        return m, terms @ self._coeffs.T


def _chunks(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    for start in range(0, len(z), CHUNK_SIZE):
        yield z[start : start + CHUNK_SIZE]


def _log_monomial_norms(weight: Weight, q: Quadrature, kmax: int, radial: bool):
    """Return log n_k for k = 0..kmax."""
    k = np.arange(kmax + 1)
    if radial:
        r, wt = q.radial_nodes[:, 0], q.radial_nodes[:, 1]
        log_terms = (
            np.log(wt)[:, None]
            + 2.0 * k[None, :] * np.log(r)[:, None]
            - 2.0 * weight.eval(r + q.center)[:, None]
        )
        return 0.5 * logsumexp(log_terms, axis=0)
    acc = np.full(kmax + 1, -np.inf)
    for start in range(0, len(q.nodes), CHUNK_SIZE):
        sl = slice(start, start + CHUNK_SIZE)
        log_terms = (
            np.log(q.weights[sl])[:, None]
            + 2.0 * k[None, :] * np.log(np.abs(q.offsets[sl]))[:, None]
            - 2.0 * weight.eval(q.nodes[sl])[:, None]
        )
        acc = np.logaddexp(acc, logsumexp(log_terms, axis=0))
    return 0.5 * acc


def _scaled_gram(weight: Weight, q: Quadrature, log_norms, center: complex):
    """Return G̃_jk = Σ_i w_i·φ_j(z_i)·conj φ_k(z_i), φ_k = w^k·e^{-Φ}/n_k."""
    d = len(log_norms)
    k = np.arange(d)
    gram = np.zeros((d, d), dtype=complex)
    for start in range(0, len(q.nodes), CHUNK_SIZE):
        sl = slice(start, start + CHUNK_SIZE)
        nodes = q.nodes[sl]
        logw = np.log(nodes - center)
        a = np.exp(
            0.5 * np.log(q.weights[sl])[:, None]
            + k[None, :] * logw[:, None]
            - log_norms[None, :]
            - weight.eval(nodes)[:, None]
        )
        gram += a.T @ a.conj()
    return gram


def build_basis(
    ws: WeightSequence, p: int, q: Quadrature, residual_tolerance: Optional[float] = None
) -> BergmanBasis:
    """Build the orthonormal basis of the level p space.

    The rule is first adapted to the endpoint exponent of Φ_p, so that a
    non integer total mass keeps the Gram integrands exact.

    Parameters
    ----------
    ws : WeightSequence
        Base weight and regularizer.
    p : int
        Tensor power.
    q : Quadrature
        Rule resolving e^{-2Φ_p}, normally centered at the weight center.
    residual_tolerance : float, optional
        When set, the orthonormality residual on an independent finer rule
        must not exceed it.

    Returns
    -------
    BergmanBasis
        Basis with d_p = number of retained monomials.

    Raises
    ------
    EmptyBasisError
        If no monomial is square integrable.
    QuadratureResolutionError
        If the Gram matrix is numerically singular, or the residual exceeds
        residual_tolerance.
    """
    weight = effective_weight(ws, p)
    q = adapted_quadrature(q, weight.total_mass)
    center = q.center
    radial = weight.is_radial and weight.center == 0 and center == 0
    log_norms = _log_monomial_norms(weight, q, p, radial)
    growth = weight.total_mass + 1.0
    retained = []  # type: List[int]
    for j in range(p + 1):
        if j < growth - 1.0e-6 and log_norms[j] < math.log(NORM_OVERFLOW):
            retained.append(j)
        else:
            break
    dropped = list(range(len(retained), p + 1))
    if not retained:
        logger.error(_("No square integrable monomial for weight %s, p=%s"), weight.key, p)
        raise EmptyBasisError(_("Empty retained monomial set"))
    if dropped:
        logger.debug(_("Level %s: dropped monomials %s..%s"), p, dropped[0], dropped[-1])
    log_norms = log_norms[: len(retained)]
    d_p = len(retained)

    if radial:
        gram = np.eye(d_p, dtype=complex)
        coeffs = np.eye(d_p, dtype=complex)
    else:
        gram = _scaled_gram(weight, q, log_norms, center)
        gram = 0.5 * (gram + gram.conj().T)
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > CONDITION_MAX:
            logger.error(
                _("Gram matrix condition number %s above %s, p=%s"), cond, CONDITION_MAX, p
            )
            raise QuadratureResolutionError(_("Gram matrix numerically singular"))
        try:
            chol = cholesky(gram, lower=True)
        except LinAlgError as exc:
            logger.error(_("Cholesky factorization failed, p=%s"), p)
            raise QuadratureResolutionError(_("Gram matrix not positive definite")) from exc
        coeffs = solve_triangular(chol, np.eye(d_p), lower=True)
    logger.debug(_("Basis built for %s, p=%s, d_p=%s"), weight.key, p, d_p)
    basis = BergmanBasis(
        p,
        weight,
        log_norms,
        coeffs,
        dropped,
        center=center,
        quadrature_key=q.key,
        gram_scaled=gram,
    )
    if residual_tolerance is not None:
        residual = orthonormality_residual(basis, independent_quadrature(q))
        if residual > residual_tolerance:
            logger.error(
                _("Orthonormality residual %s above %s, p=%s"), residual, residual_tolerance, p
            )
            raise QuadratureResolutionError(_("Basis not orthonormal on an independent rule"))
    return basis


def rotated(b: BergmanBasis, u) -> BergmanBasis:
    """Return the orthonormal basis (U·s)_j for a unitary d_p × d_p matrix U."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (b.d_p, b.d_p):
        raise ValueError(_("Unitary matrix has wrong shape"))
    return BergmanBasis(
        b.p,
        b.weight_total,
        b.log_norms,
        u @ b.scaled_coeffs,
        b.dropped_monomials,
        center=b.center,
        quadrature_key=b.quadrature_key,
        gram_scaled=b.gram_scaled,
    )


# --------------------
# Kernel evaluations
# --------------------
def log_bergman_function(b: BergmanBasis, z):
    """Return log P_p(z)."""
    shape = np.shape(z)
    out = []
    for chunk in _chunks(z):
        m, v = b.scaled_values(chunk)
        with np.errstate(divide="ignore"):
            out.append(2.0 * m + np.log(np.sum(np.abs(v) ** 2, axis=1)))
    res = np.concatenate(out).reshape(shape)
    return float(res) if res.ndim == 0 else res


def bergman_function(b: BergmanBasis, z):
    """Return P_p(z) = Σ_j |s_j(z)|²·e^{-2Φ_p(z)}."""
    return np.exp(log_bergman_function(b, z))


def log_bergman_kernel_norm(b: BergmanBasis, z, w):
    """Return log |P_p(z, w)|²_{h_p}, for arrays z and w of equal shape."""
    z, w = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
    shape = z.shape
    zf, wf = z.ravel(), w.ravel()
    out = []
    for start in range(0, len(zf), CHUNK_SIZE):
        mz, vz = b.scaled_values(zf[start : start + CHUNK_SIZE])
        mw, vw = b.scaled_values(wf[start : start + CHUNK_SIZE])
        with np.errstate(divide="ignore"):
            out.append(
                2.0 * (mz + mw) + 2.0 * np.log(np.abs(np.sum(vz * vw.conj(), axis=1)))
            )
    res = np.concatenate(out).reshape(shape) if out else np.zeros(shape)
    return float(res) if res.ndim == 0 else res


def bergman_kernel_norm(b: BergmanBasis, z, w):
    """Return |Σ_j s_j(z)·conj s_j(w)|²·e^{-2Φ_p(z) - 2Φ_p(w)}."""
    return np.exp(log_bergman_kernel_norm(b, z, w))


def fs_potential(b: BergmanBasis, z):
    """Return ½·log Σ_j |s_j(z)|², equal to Φ_p(z) + ½·log P_p(z).

    Points where every basis element vanishes are base locus points: the
    value is -inf and a warning is logged.
    """
    shape = np.shape(z)
    out = []
    for chunk in _chunks(z):
        m, v = b.scaled_values(chunk)
        total = np.sum(np.abs(v) ** 2, axis=1)
        if np.any(total == 0.0):
            logger.warning(
                _("Base locus point met in FS potential, %s points"),
                int(np.sum(total == 0.0)),
            )
        with np.errstate(divide="ignore"):
            out.append(m + b.weight_total.eval(chunk) + 0.5 * np.log(total))
    res = np.concatenate(out).reshape(shape)
    return float(res) if res.ndim == 0 else res


def log_section_norm(b: BergmanBasis, a, z):
    """Return log |Σ_j a_j·s_j(z)|_{h_p}, -inf at the zeros of the section."""
    a = np.asarray(a, dtype=complex)
    shape = np.shape(z)
    out = []
    for chunk in _chunks(z):
        m, v = b.scaled_values(chunk)
        with np.errstate(divide="ignore"):
            out.append(m + np.log(np.abs(v @ a)))
    res = np.concatenate(out).reshape(shape)
    return float(res) if res.ndim == 0 else res


def extremizer(b: BergmanBasis, z: complex) -> np.ndarray:
    """Return the unit vector a maximizing |Σ a_j s_j(z)|_{h_p}, a ∝ conj s(z)."""
    _m, v = b.scaled_values(np.array([z]))
    v = v[0]
    return v.conj() / np.linalg.norm(v)


def extremal_check(
    b: BergmanBasis,
    z: complex,
    trials: int,
    rng: np.random.Generator,
    include_extremizer: bool = False,
    tolerance: float = 1.0e-8,
) -> float:
    """Return max over random unit a of |Σ a_j s_j(z)|²_{h_p}/P_p(z).

    The ratio never exceeds 1. The extremizer is always evaluated and a
    warning is logged when its ratio differs from 1 by more than tolerance.
    """
    if trials < 1:
        raise ValueError(_("trials must be positive"))
    _m, v = b.scaled_values(np.array([z], dtype=complex))
    v = v[0]
    norm2 = float(np.sum(np.abs(v) ** 2))
    a = rng.standard_normal((trials, b.d_p)) + 1j * rng.standard_normal((trials, b.d_p))
    a /= np.linalg.norm(a, axis=1)[:, None]
    ratios = np.abs(a @ v) ** 2 / norm2
    best = extremizer(b, z)
    extremal_ratio = float(np.abs(best @ v) ** 2 / norm2)
    if abs(extremal_ratio - 1.0) > tolerance:
        logger.warning(_("Extremizer ratio %s differs from 1 at z=%s"), extremal_ratio, z)
    result = float(np.max(ratios))
    if include_extremizer:
        result = max(result, extremal_ratio)
    return result


def trace_identity(b: BergmanBasis, q: Quadrature) -> float:
    """Return ∫ P_p ω_FS, which equals d_p."""
    q = adapted_quadrature(q, b.weight_total.total_mass)
    return float(np.real(q.integrate(bergman_function(b, q.nodes))))


def orthonormality_residual(b: BergmanBasis, q_fine: Quadrature) -> float:
    """Return max |B̃·G̃′·B̃ᴴ - I| with G̃′ recomputed on q_fine."""
    q_fine = adapted_quadrature(q_fine, b.weight_total.total_mass)
    gram = _scaled_gram(b.weight_total, q_fine, b.log_norms, b.center)
    delta = b.scaled_coeffs @ gram @ b.scaled_coeffs.conj().T - np.eye(b.d_p)
    return float(np.max(np.abs(delta)))


def curvature_ratio_error(b: BergmanBasis, z) -> float:
    """Return max over z of |P_p(z)/ρ_p(z) - 1|, ρ_p the curvature density of Φ_p."""
    density = b.weight_total.curvature_density(np.asarray(z, dtype=complex))
    return float(np.max(np.abs(bergman_function(b, z) / density - 1.0)))
