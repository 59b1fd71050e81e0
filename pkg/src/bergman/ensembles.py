"""Coefficient measures for random sections and their moment conditions.

Every sampler is a pure function of (parameters, generator state). Samples
are drawn internally in log polar form (log modulus, argument), so that
heavy tailed coefficients whose modulus overflows a double can still be
used, once normalized, by the zero pipeline.

Condition (B) at level p asks for ∫ |log|⟨a, u⟩||^ν dσ_p(a) ≤ C_p for every
unit vector u. moment_B estimates this integral by Monte Carlo.

"""
import logging
import math
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.stats import unitary_group

from . import _

logger = logging.getLogger("zeros_lab.ensembles")

NU_MAX = 20.0
# Fraction of rejected samples tolerated by moment_B
REJECTION_MAX = 1.0e-3


class EnsembleException(Exception):
    """An exception occurred while handling an ensemble."""


class UnsupportedRange(EnsembleException):
    """Parameter outside of the supported range."""


class DegenerateEnsemble(EnsembleException):
    """Too many degenerate samples."""


class EnsembleKind(Enum):
    GAUSSIAN = "gaussian"
    FS_VOLUME = "fs_volume"
    SPHERE = "sphere"
    HEAVY_TAIL_IID = "heavy_tail_iid"
    SPHERE_MODERATE = "sphere_moderate"


class Ensemble:
    """Tagged coefficient measure.

    HeavyTailIID entries have uniform argument and modulus exp(Y), with
    P(Y > R) = min(1, R^{-ρ}). Their planar density is bounded by
    ρ/(2π·e²); a configured bound M below this value is rejected.
    """

    def __init__(
        self,
        kind: EnsembleKind,
        rho: Optional[float] = None,
        density_bound: Optional[float] = None,
    ) -> None:
        self._kind = EnsembleKind(kind)
        self._rho = None  # type: Optional[float]
        self._density_bound = None  # type: Optional[float]
        if self._kind == EnsembleKind.HEAVY_TAIL_IID:
            if rho is None or rho <= 1.0:
                logger.error(_("HeavyTailIID needs rho > 1, got %s"), rho)
                raise UnsupportedRange(_("rho must be larger than 1"))
            self._rho = float(rho)
            exact = self._rho / (2.0 * math.pi * math.e ** 2)
            if density_bound is not None and density_bound < exact:
                logger.error(
                    _("Density bound %s below the exact bound %s"), density_bound, exact
                )
                raise UnsupportedRange(_("density bound too small"))
            self._density_bound = exact if density_bound is None else float(density_bound)
        elif self._kind == EnsembleKind.GAUSSIAN:
            self._density_bound = 1.0 / math.pi

    def __repr__(self) -> str:
        return "<Ensemble {}>".format(self.label)

    def __eq__(self, other) -> bool:
        return isinstance(other, Ensemble) and self.label == other.label

    def __hash__(self) -> int:
        return hash(self.label)

    @property
    def kind(self) -> EnsembleKind:
        return self._kind

    @property
    def rho(self) -> Optional[float]:
        return self._rho

    @property
    def density_bound(self) -> Optional[float]:
        return self._density_bound

    @property
    def label(self) -> str:
        if self._kind == EnsembleKind.HEAVY_TAIL_IID:
            return "{}(rho={!r})".format(self._kind.value, self._rho)
        return self._kind.value

    @property
    def dimension_free(self) -> bool:
        """Return True when the moment constant C_p does not depend on p."""
        return self._kind in (EnsembleKind.GAUSSIAN, EnsembleKind.FS_VOLUME)

    @property
    def nu_range(self) -> Tuple[float, float]:
        """Return (lower, upper) admissible ν, upper bound excluded."""
        if self._kind == EnsembleKind.HEAVY_TAIL_IID:
            return (1.0, self._rho)
        return (1.0, math.inf)

    def admits_nu(self, nu: float) -> bool:
        low, high = self.nu_range
        return low <= nu < high

    @property
    def is_unit_norm(self) -> bool:
        return self._kind in (EnsembleKind.SPHERE, EnsembleKind.SPHERE_MODERATE)

    def log_polar(self, k: int, n: int, rng: np.random.Generator):
        """Return (log modulus, argument) arrays of shape (n, k)."""
        if k < 1 or n < 1:
            raise UnsupportedRange(_("Sample dimensions must be positive"))
        if self._kind == EnsembleKind.HEAVY_TAIL_IID:
            u = 1.0 - rng.random((n, k))  # in (0, 1]
            y = u ** (-1.0 / self._rho)
            theta = rng.uniform(0.0, 2.0 * math.pi, (n, k))
            return y, theta
        if self._kind == EnsembleKind.FS_VOLUME:
            g = _complex_normal(rng, (n, k + 1))
            bad = g[:, 0] == 0
            while np.any(bad):
                logger.debug(_("FSVolume resampling %s rows with g_0 = 0"), int(np.sum(bad)))
                g[bad] = _complex_normal(rng, (int(np.sum(bad)), k + 1))
                bad = g[:, 0] == 0
            a = g[:, 1:] / g[:, :1]
        else:
            a = _complex_normal(rng, (n, k))
            if self.is_unit_norm:
                a = a / np.linalg.norm(a, axis=1)[:, None]
        with np.errstate(divide="ignore"):
            return np.log(np.abs(a)), np.angle(a)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normals, real and imaginary parts N(0, ½)."""
    return math.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _from_log_polar(logmod, arg, projective: bool):
    if projective:
        top = np.max(logmod, axis=-1, keepdims=True)
        logmod = logmod - np.where(np.isfinite(top), top, 0.0)
    with np.errstate(over="ignore"):
        return np.exp(logmod) * np.exp(1j * arg)


def _log_abs_inner(logmod, arg, u) -> np.ndarray:
    """Return log|⟨a, u⟩| = log|Σ a_j·conj u_j| per row, in log space."""
    top = np.max(logmod, axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    scaled = np.exp(logmod - top[:, None]) * np.exp(1j * arg)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(scaled @ np.conj(u))) + top


def _log_norm(logmod) -> np.ndarray:
    top = np.max(logmod, axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    return top + 0.5 * np.log(np.sum(np.exp(2.0 * (logmod - top[:, None])), axis=1))


# ----------
# Operations
# ----------
def sample(e: Ensemble, k: int, rng: np.random.Generator, projective: bool = False):
    """Return a complex vector of length k drawn from e.

    With ``projective`` the vector is divided by its largest modulus, which
    keeps HeavyTailIID samples finite and leaves zero sets unchanged.
    """
    logmod, arg = e.log_polar(k, 1, rng)
    return _from_log_polar(logmod, arg, projective)[0]


def sample_many(e: Ensemble, k: int, n: int, rng: np.random.Generator, projective=False):
    """Return n samples of length k as an (n, k) array."""
    logmod, arg = e.log_polar(k, n, rng)
    return _from_log_polar(logmod, arg, projective)


def gamma_nu(kind: EnsembleKind, nu: float) -> float:
    """Return Γ_ν, the exact condition (B) constant of Gaussian and FSVolume.

    Gaussian: 2∫ r·|log r|^ν·e^{-r²} dr; FSVolume: 2∫ r·|log r|^ν/(1+r²)² dr,
    both over (0, ∞) and split at the kink r = 1.
    """
    kind = EnsembleKind(kind)
    if not 1.0 <= nu <= NU_MAX:
        logger.error(_("nu=%s outside of [1, %s]"), nu, NU_MAX)
        raise UnsupportedRange(_("nu outside of supported range"))
    if kind == EnsembleKind.GAUSSIAN:

        def density(r):
            return 2.0 * r * math.exp(-r * r)

    elif kind == EnsembleKind.FS_VOLUME:

        def density(r):
            return 2.0 * r / (1.0 + r * r) ** 2

    else:
        raise UnsupportedRange(_("No closed form constant for {}").format(kind.value))

    def integrand(r):
        return abs(math.log(r)) ** nu * density(r) if r > 0 else 0.0

    inner, _err = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1.0e-11, limit=200)
    outer, _err = quad(integrand, 1.0, math.inf, epsabs=0.0, epsrel=1.0e-11, limit=200)
    return inner + outer


def moment_B(
    e: Ensemble,
    u,
    nu: float,
    trials: int,
    rng: np.random.Generator,
    chunk: int = 100000,
) -> Tuple[float, float]:
    """Return Monte Carlo (estimate, stderr) of ∫ |log|⟨a, u⟩||^ν dσ(a).

    Samples with ⟨a, u⟩ = 0 are rejected and counted.

    Raises
    ------
    DegenerateEnsemble
        If more than 0.1% of the samples are rejected.
    """
    u = np.asarray(u, dtype=complex)
    if abs(np.linalg.norm(u) - 1.0) > 1.0e-10:
        raise UnsupportedRange(_("u must be a unit vector"))
    if trials < 1000:
        raise UnsupportedRange(_("moment_B needs at least 1000 trials"))
    k = len(u)
    total, total2, count, rejected = 0.0, 0.0, 0, 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        logmod, arg = e.log_polar(k, n, rng)
        log_inner = _log_abs_inner(logmod, arg, u)
        ok = np.isfinite(log_inner)
        rejected += int(n - np.sum(ok))
        values = np.abs(log_inner[ok]) ** nu
        total += float(np.sum(values))
        total2 += float(np.sum(values * values))
        count += int(np.sum(ok))
        done += n
    if rejected > REJECTION_MAX * trials:
        logger.error(_("%s rejected samples out of %s for %s"), rejected, trials, e.label)
        raise DegenerateEnsemble(_("Too many zero inner products"))
    if rejected:
        logger.warning(_("%s samples rejected for %s"), rejected, e.label)
    mean = total / count
    var = max(total2 / count - mean * mean, 0.0)
    return mean, math.sqrt(var / count)


def tail_smallball_check(
    e: Ensemble,
    k: int,
    R_grid: Sequence[float],
    trials: int,
    rng: np.random.Generator,
    u=None,
) -> List[Tuple[float, float, float]]:
    """Return rows (R, σ(log‖a‖ > R), σ(log|⟨a, u⟩| < -R)).

    u defaults to the first coordinate vector.
    """
    if not R_grid:
        raise UnsupportedRange(_("R grid is empty"))
    if u is None:
        u = np.zeros(k, dtype=complex)
        u[0] = 1.0
    logmod, arg = e.log_polar(k, trials, rng)
    log_norm = _log_norm(logmod)
    log_inner = _log_abs_inner(logmod, arg, np.asarray(u, dtype=complex))
    return [
        (float(r), float(np.mean(log_norm > r)), float(np.mean(log_inner < -r)))
        for r in R_grid
    ]


def tail_exponent_fit(table: Sequence[Tuple[float, float, float]]) -> Tuple[float, float]:
    """Fit max(tail, small ball) ≤ C′·R^{-ρ} by least squares in log-log.

    Returns (C′, ρ); (0, inf) when fewer than two rows have positive
    probability, i.e. no polynomial tail is visible.
    """
    rows = [(r, max(t, s)) for r, t, s in table if max(t, s) > 0 and r > 0]
    if len(rows) < 2:
        return 0.0, math.inf
    x = np.log([r for r, _p in rows])
    y = np.log([p for _r, p in rows])
    slope, intercept = np.polyfit(x, y, 1)
    # Shift the intercept so that the fitted law bounds every row
    intercept += float(np.max(y - (slope * x + intercept)))
    return float(math.exp(intercept)), float(-slope)


def lemma_moment_constant(c_prime: float, rho: float, nu: float) -> float:
    """Return the condition (B) constant 1 + 2ν·C′/(ρ - ν), for ν < ρ."""
    if not nu < rho:
        raise UnsupportedRange(_("nu must be smaller than rho"))
    return 1.0 + 2.0 * nu * c_prime / (rho - nu)


def moderate_exponential_moment(
    e: Ensemble,
    k: int,
    alpha: float,
    trials: int,
    rng: np.random.Generator,
    nu: float = 1.0,
    u=None,
) -> Tuple[float, float, float]:
    """Estimate ∫ e^{α·|log|⟨a, u⟩||} dσ(a) for unit norm ensembles.

    Returns (estimate, stderr, bound), where bound = (ν/(α·e))^ν·estimate
    is the condition (B) moment bound implied by the exponential moment.
    """
    if alpha <= 0:
        raise UnsupportedRange(_("alpha must be positive"))
    if u is None:
        u = np.zeros(k, dtype=complex)
        u[0] = 1.0
    logmod, arg = e.log_polar(k, trials, rng)
    log_inner = _log_abs_inner(logmod, arg, np.asarray(u, dtype=complex))
    log_inner = log_inner[np.isfinite(log_inner)]
    values = np.exp(alpha * np.abs(log_inner))
    est = float(np.mean(values))
    err = float(np.std(values) / math.sqrt(len(values)))
    c_prime = (nu / (alpha * math.e)) ** nu
    return est, err, c_prime * est


def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    """Return a Haar distributed k × k unitary matrix."""
    if k == 1:
        return np.array([[np.exp(2j * math.pi * rng.random())]])
    return unitary_group.rvs(k, random_state=rng)


def trial_rng(master_seed: int, *chain: int) -> np.random.Generator:
    """Return the generator of one trial, derived from the master seed.

    The chain (e.g. p, ensemble index, trial index) is used as spawn key,
    so streams do not depend on the order in which trials run.
    """
    return np.random.default_rng(
        np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(c) for c in chain))
    )
