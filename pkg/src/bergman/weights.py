"""Lelong class weights on the affine chart of the projective line.

A weight φ is a plurisubharmonic function on ℂ of logarithmic growth. It
defines a singular metric h on O(1), and p·φ (or a regularized blend) is the
weight Φ_p of the metric h_p on O(p) with respect to the standard frame.

Normalization: ω_FS has total mass 1 on ℙ¹, i.e. density
(1/π)(1+|z|²)^{-2} against Lebesgue measure, and dd^c = (1/2π)Δ. The
curvature density of a weight against ω_FS is therefore ½·Δφ·(1+|z|²)².

Classes

- Weight              - Base class, immutable
- FubiniStudy         - φ = ½·log(1+|z|²)
- ScaledFS            - α·φ_FS, 0 < α ≤ 1
- TranslatedFS        - φ_FS(z - c)
- CustomWeight        - Named entry of CUSTOM_WEIGHTS
- CombinedWeight      - Positive combination Σ c_i·φ_i (effective weights)
- WeightSequence      - Base weight plus regularizer counts n_p

Operations

- eval_weight, curvature_radial_mass, effective_weight,
  numerical_curvature_density, total_mass

"""
import logging
import math
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _

logger = logging.getLogger("zeros_lab.weights")

# Radius used to read the total mass of weights without a closed form
_MASS_RADIUS = 1.0e6


class WeightException(Exception):
    """An exception occurred while handling a weight."""


class OutOfGridError(WeightException):
    """Point outside the floating point range."""


class UnsupportedOperation(WeightException):
    """Operation not supported for this weight."""


class InvalidConfiguration(WeightException):
    """Incorrect weight or regularizer parameters."""


class WeightKind(Enum):
    FUBINI_STUDY = "fubini_study"
    SCALED_FS = "scaled_fs"
    TRANSLATED_FS = "translated_fs"
    CUSTOM = "custom"


def _as_points(z):
    """Return z as complex array, raising OutOfGridError on non finite input."""
    pts = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(pts)):
        logger.error(_("Non finite point passed to weight evaluation"))
        raise OutOfGridError(_("Point outside the floating point range"))
    return pts


def half_log1p_abs2(z):
    """Return ½·log(1+|z|²) without overflow for large |z|."""
    r = np.abs(np.asarray(z, dtype=complex))
    with np.errstate(divide="ignore"):
        small = 0.5 * np.log1p(r * r)
        inv = np.where(r > 1.0, 1.0 / np.where(r > 1.0, r, 1.0), 0.0)
        large = np.log(np.where(r > 1.0, r, 1.0)) + 0.5 * np.log1p(inv * inv)
    return np.where(r > 1.0, large, small)


def fs_density_ratio(z, c: complex):
    """Return ((1+|z|²)/(1+|z-c|²))², density of dd^c φ_FS(· - c) against ω_FS."""
    return np.exp(4.0 * (half_log1p_abs2(z) - half_log1p_abs2(np.asarray(z) - c)))


class Weight:
    """Top class, not for direct use.

    A weight is immutable after construction and safe to share across
    worker processes, as long as its callables are module level functions.
    """

    kind = WeightKind.CUSTOM

    def __init__(
        self,
        center: complex = 0j,
        is_radial: bool = True,
        lelong_constant: float = 0.0,
        strict_positivity: float = 0.0,
        breaks: Sequence[float] = (),
        fd_step: float = 1.0e-4,
    ) -> None:
        self._center = complex(center)
        self._is_radial = bool(is_radial)
        self._lelong_constant = float(lelong_constant)
        self._strict_positivity = float(strict_positivity)
        self._breaks = tuple(sorted(float(b) for b in breaks))
        self._fd_step = float(fd_step)

    def __repr__(self) -> str:
        return "<{} {}>".format(type(self).__name__, self.key)

    @property
    def center(self) -> complex:
        """Return rotation center (radial weights) or expansion center."""
        return self._center

    @property
    def is_radial(self) -> bool:
        """Return True when φ depends only on |z - center|."""
        return self._is_radial

    @property
    def lelong_constant(self) -> float:
        """Return C_φ with φ(z) ≤ log⁺|z| + C_φ."""
        return self._lelong_constant

    @property
    def strict_positivity(self) -> float:
        """Return ε with dd^cφ ≥ ε·ω_FS (0 if unknown)."""
        return self._strict_positivity

    @property
    def breaks(self) -> Tuple[float, ...]:
        """Return radii, about the center, where the weight is not smooth."""
        return self._breaks

    @property
    def fd_step(self) -> float:
        """Return finite difference step used when no closed form exists."""
        return self._fd_step

    @property
    def key(self) -> str:
        """Return a string identifying the weight, used for cache keys."""
        raise NotImplementedError

    @property
    def has_curvature_density(self) -> bool:
        """Return True when a closed form curvature density is available."""
        return True

    def eval(self, z):
        """Return φ(z), for scalar or array input."""
        raise NotImplementedError

    def curvature_density(self, z):
        """Return the density of dd^cφ against ω_FS.

        Falls back to the finite difference Laplacian for weights without
        a closed form.
        """
        return numerical_curvature_density(self, z, self._fd_step)

    def radial_mass(self, r):
        """Return the dd^cφ-mass of the disk {|z - center| ≤ r}."""
        if not self._is_radial:
            logger.error(_("Radial mass requested for non radial weight %s"), self.key)
            raise UnsupportedOperation(_("Weight is not radial"))
        r = np.asarray(r, dtype=float)
        finite = np.isfinite(r)
        rr = np.where(finite, r, 1.0)
        h = self._fd_step * np.maximum(1.0, rr)
        deriv = (
            self.eval(self._center + rr + h) - self.eval(self._center + rr - h)
        ) / (2.0 * h)
        mass = np.where(rr > 0.0, rr * deriv, 0.0)
        return np.where(finite, mass, self.total_mass)

    @property
    def total_mass(self) -> float:
        """Return the total dd^cφ-mass on ℂ."""
        c = self._center
        h = self._fd_step * _MASS_RADIUS
        deriv = (
            self.eval(c + _MASS_RADIUS + h) - self.eval(c + _MASS_RADIUS - h)
        ) / (2.0 * h)
        return float(_MASS_RADIUS * deriv)


class FubiniStudy(Weight):
    """φ_FS(z) = ½·log(1+|z|²), the weight of h_FS on O(1)."""

    kind = WeightKind.FUBINI_STUDY

    def __init__(self) -> None:
        super().__init__(
            center=0j,
            is_radial=True,
            lelong_constant=0.5 * math.log(2.0),
            strict_positivity=1.0,
        )

    @property
    def key(self) -> str:
        return "fubini_study"

    def eval(self, z):
        return half_log1p_abs2(_as_points(z))

    def curvature_density(self, z):
        return np.ones(np.shape(z))

    def radial_mass(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 - 1.0 / (1.0 + r * r)

    @property
    def total_mass(self) -> float:
        return 1.0


class ScaledFS(Weight):
    """α·φ_FS, 0 < α ≤ 1.

    With α < 1 the top monomials are not square integrable, the space
    loses dimension and the curvature current puts mass 1 - α at infinity.
    """

    kind = WeightKind.SCALED_FS

    def __init__(self, alpha: float) -> None:
        if not 0.0 < alpha <= 1.0:
            logger.error(_("ScaledFS alpha must be in (0, 1], got %s"), alpha)
            raise InvalidConfiguration(_("alpha must be in (0, 1]"))
        self._alpha = float(alpha)
        super().__init__(
            center=0j,
            is_radial=True,
            lelong_constant=alpha * 0.5 * math.log(2.0),
            strict_positivity=alpha,
        )

    @property
    def alpha(self) -> float:
        return self._alpha

    @property
    def key(self) -> str:
        return "scaled_fs(alpha={!r})".format(self._alpha)

    def eval(self, z):
        return self._alpha * half_log1p_abs2(_as_points(z))

    def curvature_density(self, z):
        return np.full(np.shape(z), self._alpha)

    def radial_mass(self, r):
        r = np.asarray(r, dtype=float)
        return self._alpha * (1.0 - 1.0 / (1.0 + r * r))

    @property
    def total_mass(self) -> float:
        return self._alpha


class TranslatedFS(Weight):
    """φ_FS(z - c), radial about c."""

    kind = WeightKind.TRANSLATED_FS

    def __init__(self, c: complex) -> None:
        c = complex(c)
        # dd^cφ/ω_FS = |Z|⁴/|MZ|⁴ with M = [[1, 0], [-c, 1]], bounded below
        # by 1/λ² where λ is the top eigenvalue of MᴴM (det MᴴM = 1)
        a = abs(c) ** 2
        lam = (2.0 + a + math.sqrt((2.0 + a) ** 2 - 4.0)) / 2.0
        super().__init__(
            center=c,
            is_radial=True,
            lelong_constant=0.5 * math.log(1.0 + (1.0 + abs(c)) ** 2),
            strict_positivity=1.0 / (lam * lam),
        )

    @property
    def key(self) -> str:
        return "translated_fs(c={!r})".format(self._center)

    def eval(self, z):
        return half_log1p_abs2(_as_points(z) - self._center)

    def curvature_density(self, z):
        return fs_density_ratio(_as_points(z), self._center)

    def radial_mass(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 - 1.0 / (1.0 + r * r)

    @property
    def total_mass(self) -> float:
        return 1.0


class CustomWeight(Weight):
    """Weight from the compiled-in registry CUSTOM_WEIGHTS.

    Only ``evaluator`` is mandatory. Without ``density`` the curvature is
    obtained by a 5-point finite difference Laplacian with step ``fd_step``;
    without ``mass`` the radial mass is r·φ'(r) by centered difference.
    """

    def __init__(
        self,
        name: str,
        evaluator: Callable,
        density: Optional[Callable] = None,
        mass: Optional[Callable] = None,
        total: Optional[float] = None,
        **kwargs,
    ) -> None:
        self._name = name
        self._evaluator = evaluator
        self._density = density
        self._mass = mass
        self._total = total
        super().__init__(**kwargs)

    @property
    def name(self) -> str:
        return self._name

    @property
    def key(self) -> str:
        return "custom({},h={!r})".format(self._name, self._fd_step)

    @property
    def has_curvature_density(self) -> bool:
        return self._density is not None

    def eval(self, z):
        return self._evaluator(_as_points(z))

    def curvature_density(self, z):
        if self._density is None:
            return super().curvature_density(z)
        return self._density(_as_points(z))

    def radial_mass(self, r):
        if self._mass is None or not self._is_radial:
            return super().radial_mass(r)
        return self._mass(np.asarray(r, dtype=float))

    @property
    def total_mass(self) -> float:
        if self._total is None:
            return super().total_mass
        return self._total


class CombinedWeight(Weight):
    """Positive combination Σ c_i·φ_i of weights, kind Custom.

    Terms with identical keys are merged, so that p·φ_FS blended with
    n·φ_FS is again a multiple of φ_FS.
    """

    def __init__(
        self, terms: Sequence[Tuple[float, Weight]], center: Optional[complex] = None
    ) -> None:
        merged = {}  # type: Dict[str, Tuple[float, Weight]]
        for coef, weight in terms:
            if coef < 0:
                raise InvalidConfiguration(_("Negative coefficient in weight blend"))
            if coef == 0:
                continue
            if weight.key in merged:
                merged[weight.key] = (merged[weight.key][0] + coef, weight)
            else:
                merged[weight.key] = (float(coef), weight)
        if not merged:
            raise InvalidConfiguration(_("Empty weight blend"))
        self._terms = tuple(merged[k] for k in sorted(merged))
        centers = {w.center for _c, w in self._terms}
        radial = all(w.is_radial for _c, w in self._terms) and len(centers) == 1
        breaks = set()
        for _c, w in self._terms:
            breaks.update(w.breaks)
        super().__init__(
            center=(
                max(self._terms, key=lambda t: t[0])[1].center if center is None else center
            ),
            is_radial=radial,
            lelong_constant=sum(c * w.lelong_constant for c, w in self._terms),
            strict_positivity=sum(c * w.strict_positivity for c, w in self._terms),
            breaks=tuple(breaks) if radial else (),
            fd_step=min(w.fd_step for _c, w in self._terms),
        )

    @property
    def terms(self) -> Tuple[Tuple[float, Weight], ...]:
        return self._terms

    @property
    def key(self) -> str:
        return "combo[" + "+".join(
            "{!r}*{}".format(c, w.key) for c, w in self._terms
        ) + "]"

    @property
    def has_curvature_density(self) -> bool:
        return all(w.has_curvature_density for _c, w in self._terms)

    def eval(self, z):
        return sum(c * w.eval(z) for c, w in self._terms)

    def curvature_density(self, z):
        return sum(c * w.curvature_density(z) for c, w in self._terms)

    def radial_mass(self, r):
        if not self._is_radial:
            logger.error(_("Radial mass requested for non radial weight %s"), self.key)
            raise UnsupportedOperation(_("Weight is not radial"))
        return sum(c * w.radial_mass(r) for c, w in self._terms)

    @property
    def total_mass(self) -> float:
        return float(sum(c * w.total_mass for c, w in self._terms))


# ------------------------------
# Custom weights compiled in
# ------------------------------
def _log_max_eval(z):
    return np.log(np.maximum(1.0, np.abs(z)))


def _log_max_mass(r):
    return np.where(r >= 1.0, 1.0, 0.0)


def _quartic_eval(z):
    r = np.abs(z)
    rs = np.where(r > 1.0, r, 1.0)
    inv = np.where(r > 1.0, 1.0 / rs, 0.0)
    return np.where(
        r > 1.0, np.log(rs) + 0.25 * np.log1p(inv ** 4), 0.25 * np.log1p(r ** 4)
    )


def _quartic_density(z):
    r2 = np.abs(z) ** 2
    return 2.0 * r2 * (1.0 + r2) ** 2 / (1.0 + r2 * r2) ** 2


def _quartic_mass(r):
    with np.errstate(invalid="ignore"):
        r4 = r ** 4
        return np.where(np.isfinite(r4), r4 / (1.0 + r4), 1.0)


def _two_center_eval(z):
    return 0.5 * half_log1p_abs2(z - 1.0) + 0.5 * half_log1p_abs2(z + 1.0)


def _two_center_density(z):
    return 0.5 * fs_density_ratio(z, 1.0) + 0.5 * fs_density_ratio(z, -1.0)


def _log_max(fd_step: float = 1.0e-4) -> CustomWeight:
    return CustomWeight(
        "log_max",
        _log_max_eval,
        mass=_log_max_mass,
        total=1.0,
        center=0j,
        is_radial=True,
        lelong_constant=0.0,
        strict_positivity=0.0,
        breaks=(1.0,),
        fd_step=fd_step,
    )


def _quartic(fd_step: float = 1.0e-4) -> CustomWeight:
    return CustomWeight(
        "quartic",
        _quartic_eval,
        density=_quartic_density,
        mass=_quartic_mass,
        total=1.0,
        center=0j,
        is_radial=True,
        lelong_constant=0.25 * math.log(2.0),
        strict_positivity=0.0,
        fd_step=fd_step,
    )


def _two_center(fd_step: float = 1.0e-4) -> CustomWeight:
    return CustomWeight(
        "two_center",
        _two_center_eval,
        density=_two_center_density,
        total=1.0,
        center=0j,
        is_radial=False,
        lelong_constant=0.5 * math.log(5.0),
        strict_positivity=TranslatedFS(1.0).strict_positivity,
        fd_step=fd_step,
    )


CUSTOM_WEIGHTS = {
    "log_max": _log_max,
    "quartic": _quartic,
    "two_center": _two_center,
}  # type: Dict[str, Callable[..., CustomWeight]]


def custom_weight(name: str, fd_step: float = 1.0e-4) -> CustomWeight:
    """Return the registry weight called name."""
    if name not in CUSTOM_WEIGHTS:
        logger.error(_("Unknown custom weight %s"), name)
        raise InvalidConfiguration(_("Unknown custom weight {}").format(name))
    return CUSTOM_WEIGHTS[name](fd_step)


class WeightSequence:
    """Base weight φ with regularizer counts n_p.

    The effective weight at level p is (p - n_p)·φ + n_p·φ_FS, i.e. the
    weight of h_p = h^{p-n_p} ⊗ h_FS^{n_p}. An empty count map means
    n_p ≡ 0 for every p.
    """

    def __init__(self, base: Weight, regularizer_counts: Optional[Mapping[int, int]] = None):
        self._base = base
        self._counts = dict(regularizer_counts or {})
        for p, n_p in self._counts.items():
            if not 0 <= n_p <= p:
                logger.error(_("Regularizer count n_p=%s invalid for p=%s"), n_p, p)
                raise InvalidConfiguration(_("n_p must satisfy 0 <= n_p <= p"))

    @classmethod
    def from_rule(
        cls,
        base: Weight,
        p_grid: Sequence[int],
        mode: str = "none",
        coefficient: float = 1.0,
        exponent: float = 0.5,
        counts: Optional[Sequence[int]] = None,
    ) -> "WeightSequence":
        """Build the counts n_p on p_grid from a regularizer rule.

        Parameters
        ----------
        mode : str
            "none" (n_p = 0), "power" (n_p = floor(coefficient·p^exponent))
            or "explicit" (counts listed in grid order).
        """
        if mode == "none":
            return cls(base)
        if mode == "power":
            if not 0.0 < exponent < 1.0:
                raise InvalidConfiguration(_("Regularizer exponent must be in (0, 1)"))
            n = {p: min(p, int(math.floor(coefficient * p ** exponent))) for p in p_grid}
        elif mode == "explicit":
            if counts is None or len(counts) != len(p_grid):
                raise InvalidConfiguration(_("One regularizer count per p is required"))
            n = dict(zip(p_grid, counts))
        else:
            raise InvalidConfiguration(_("Unknown regularizer mode {}").format(mode))
        seq = cls(base, n)
        seq.check_trend()
        return seq

    @property
    def base(self) -> Weight:
        return self._base

    @property
    def regularizer_counts(self) -> Dict[int, int]:
        return dict(self._counts)

    @property
    def regularized(self) -> bool:
        return any(n > 0 for n in self._counts.values())

    def n_p(self, p: int) -> int:
        """Return the regularizer count at level p."""
        if not self._counts:
            return 0
        if p not in self._counts:
            logger.error(_("p=%s is not in the configured grid"), p)
            raise InvalidConfiguration(_("p is not in the configured grid"))
        return self._counts[p]

    def check_trend(self) -> bool:
        """Check n_p increasing and n_p/p decreasing along the grid."""
        grid = sorted(self._counts)
        ok = all(
            self._counts[a] < self._counts[b]
            and self._counts[a] / a > self._counts[b] / b
            for a, b in zip(grid, grid[1:])
        )
        if self.regularized and not ok:
            logger.warning(
                _("Regularizer counts %s do not show n_p growing with n_p/p decreasing"),
                self._counts,
            )
        return ok


# ----------
# Operations
# ----------
def eval_weight(w: Weight, z):
    """Return φ(z)."""
    return w.eval(z)


def curvature_radial_mass(w: Weight, r):
    """Return the dd^cφ-mass of the disk of radius r about the center.

    The mass of ω_FS on ℙ¹ is 1, so for Lelong class weights the result is
    in [0, 1], and equals r·φ'(r) for radial φ.
    """
    if not w.is_radial:
        logger.error(_("Radial mass requested for non radial weight %s"), w.key)
        raise UnsupportedOperation(_("Weight is not radial"))
    if np.any(np.asarray(r) < 0):
        raise InvalidConfiguration(_("Radius must be nonnegative"))
    return w.radial_mass(r)


def total_mass(w: Weight) -> float:
    """Return the total curvature mass of w on ℂ."""
    return w.total_mass


def effective_weight(ws: WeightSequence, p: int) -> Weight:
    """Return the weight Φ_p = (p - n_p)·φ + n_p·φ_FS."""
    if p < 1:
        raise InvalidConfiguration(_("p must be a positive integer"))
    n_p = ws.n_p(p)
    if n_p > p:
        raise InvalidConfiguration(_("n_p must satisfy n_p <= p"))
    return CombinedWeight(
        ((p - n_p, ws.base), (n_p, FubiniStudy())), center=ws.base.center
    )


def numerical_curvature_density(w: Weight, z, h: float = 1.0e-4):
    """Return ½·Δ_h φ(z)·(1+|z|²)², the 5-point Laplacian density against ω_FS."""
    z = _as_points(z)
    lap = (
        w.eval(z + h) + w.eval(z - h) + w.eval(z + 1j * h) + w.eval(z - 1j * h)
        - 4.0 * w.eval(z)
    ) / (h * h)
    return 0.5 * lap * np.exp(4.0 * half_log1p_abs2(z))
