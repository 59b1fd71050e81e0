"""Tensor quadrature rules integrating against ω_FS on ℂ.

The radius is mapped through r = tan θ and t = sin²θ = r²/(1+r²), under
which the radial marginal of ω_FS is uniform on [0, 1). Gauss-Legendre in t
is then exact on the Fubini-Study Gram integrands t^j·(1-t)^(p-j), and the
angle uses a uniform (trapezoid) rule. Rules are composite, split at the
break radii of the weight.

A weight of non integer total mass A gives integrands t^j·(1-t)^(A-j),
singular at t = 1. The last panel then uses Gauss-Jacobi with the endpoint
factor (1-t)^β, β = frac(A) - 1, which restores exactness.

A rule may be centered at c: its nodes are c + w, where (w) is the rule
above, and its weights carry the density ratio ρ_FS(c + w)/ρ_FS(w), so that
Σ weights·f(nodes) still approximates ∫ f ω_FS.

"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import _
from .weights import fs_density_ratio

logger = logging.getLogger("zeros_lab.quadrature")

# Total masses closer than this to an integer are treated as integers
MASS_ROUNDING = 1.0e-6


class Quadrature:
    """Discrete rule integrating against ω_FS.

    Attributes are read only numpy arrays. ``radial_nodes`` is the (n, 2)
    array of (r, weight) pairs of the radial marginal about the center,
    used by the diagonal shortcut of radial weights.
    """

    def __init__(
        self,
        n_radial: int,
        n_angular: int,
        center: complex = 0j,
        breaks: Sequence[float] = (),
        angular_offset: float = 0.5,
        tolerance: float = 1.0e-10,
        endpoint_exponent: float = 0.0,
    ) -> None:
        if n_radial < 1 or n_angular < 1:
            raise ValueError(_("Quadrature needs at least one node per direction"))
        if not -1.0 < endpoint_exponent <= 0.0:
            raise ValueError(_("Endpoint exponent must lie in (-1, 0]"))
        self._endpoint_exponent = float(endpoint_exponent)
        self._n_radial = int(n_radial)
        self._n_angular = int(n_angular)
        self._center = complex(center)
        self._breaks = tuple(sorted(b for b in breaks if 0.0 < b < math.inf))
        self._angular_offset = float(angular_offset)
        self._tolerance = float(tolerance)

        t, wt = self._radial_rule()
        r = np.sqrt(t / (1.0 - t))
        theta = 2.0 * math.pi * (np.arange(n_angular) + angular_offset) / n_angular
        w = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
        weights = (wt[:, None] * np.full(n_angular, 1.0 / n_angular)[None, :]).ravel()
        if self._center != 0:
            weights = weights * fs_density_ratio(w, -self._center)
        self._offsets = w
        self._nodes = w + self._center
        self._weights = weights
        self._radial_nodes = np.column_stack((r, wt))
        self._nodes.setflags(write=False)
        self._weights.setflags(write=False)
        self._radial_nodes.setflags(write=False)

        beta = self._endpoint_exponent
        if beta == 0.0:
            total = float(np.sum(weights))
            expected = 1.0
        else:
            # exact for (1-t)^β, not for 1
            total = float(np.sum(wt * (1.0 - t) ** beta))
            expected = 1.0 / (1.0 + beta)
        if abs(total - expected) > tolerance:
            logger.warning(
                _("Quadrature total mass %s differs from %s by more than %s"),
                total,
                expected,
                tolerance,
            )
        logger.debug(
            _("Quadrature built: %s radial x %s angular nodes, center %s"),
            len(t),
            n_angular,
            self._center,
        )

    def _radial_rule(self):
        """Composite Gauss rule in t on [0, 1), split at the breaks.

        Panels are Gauss-Legendre, except the last one when an endpoint
        exponent β is set: Gauss-Jacobi nodes for (1-t)^β, with the weights
        divided by (1-t)^β so that the rule still approximates ∫ f dt.
        """
        x, wx = roots_legendre(self._n_radial)
        cuts = [0.0] + [b * b / (1.0 + b * b) for b in self._breaks] + [1.0]
        ts, ws = [], []
        for a, b in zip(cuts[:-2], cuts[1:-1]):
            ts.append(0.5 * (b - a) * x + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * wx)
        a, beta = cuts[-2], self._endpoint_exponent
        if beta == 0.0:
            ts.append(0.5 * (1.0 - a) * x + 0.5 * (1.0 + a))
            ws.append(0.5 * (1.0 - a) * wx)
        else:
            xj, wj = roots_jacobi(self._n_radial, beta, 0.0)
            t = 0.5 * (1.0 - a) * xj + 0.5 * (1.0 + a)
            ts.append(t)
            ws.append(0.5 * (1.0 - a) * wj / (1.0 - t) ** beta)
        return np.concatenate(ts), np.concatenate(ws)

    def __repr__(self) -> str:
        return "<Quadrature {}>".format(self.key)

    @property
    def key(self) -> str:
        """Return a string describing the rule, used for cache keys."""
        return "fsq(nr={},na={},c={!r},breaks={},off={!r},beta={!r})".format(
            self._n_radial,
            self._n_angular,
            self._center,
            ",".join(repr(b) for b in self._breaks),
            self._angular_offset,
            self._endpoint_exponent,
        )

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def offsets(self) -> np.ndarray:
        """Return nodes minus center."""
        return self._offsets

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def radial_nodes(self) -> np.ndarray:
        return self._radial_nodes

    @property
    def center(self) -> complex:
        return self._center

    @property
    def tolerance(self) -> float:
        return self._tolerance

    @property
    def n_radial(self) -> int:
        return self._n_radial

    @property
    def n_angular(self) -> int:
        return self._n_angular

    @property
    def breaks(self):
        return self._breaks

    @property
    def angular_offset(self) -> float:
        return self._angular_offset

    @property
    def endpoint_exponent(self) -> float:
        """Return β, the rule being exact on (1-t)^β·polynomials near t = 1."""
        return self._endpoint_exponent

    def integrate(self, values) -> complex:
        """Return Σ weights·values for values sampled at the nodes."""
        return np.sum(self._weights * np.asarray(values))

    def node_spacing(self) -> np.ndarray:
        """Return, per node, the local spacing of the tensor grid."""
        r = np.abs(self._offsets)
        dr = np.gradient(np.sort(self._radial_nodes[:, 0]))
        local_dr = np.interp(r, np.sort(self._radial_nodes[:, 0]), dr)
        return np.maximum(local_dr, 2.0 * math.pi * r / self._n_angular)


def level_quadrature(
    p: int,
    center: complex = 0j,
    breaks: Sequence[float] = (),
    radial_factor: float = 1.0,
    radial_base: int = 40,
    angular_factor: float = 2.0,
    angular_base: int = 32,
    angular_offset: float = 0.5,
    endpoint_exponent: float = 0.0,
) -> Quadrature:
    """Return the rule adapted to level p, node counts growing linearly in p."""
    n_radial = int(math.ceil(radial_factor * p)) + radial_base
    n_angular = int(math.ceil(angular_factor * p)) + angular_base
    return Quadrature(
        n_radial,
        n_angular,
        center=center,
        breaks=breaks,
        angular_offset=angular_offset,
        endpoint_exponent=endpoint_exponent,
    )


def independent_quadrature(q: Quadrature, extra: int = 7) -> Quadrature:
    """Return a finer rule sharing no node with q, for residual checks."""
    return Quadrature(
        q.n_radial + extra,
        max(q.n_angular, 2) + extra,
        center=q.center,
        breaks=q.breaks,
        angular_offset=0.25,
        endpoint_exponent=q.endpoint_exponent,
    )


def endpoint_exponent(total_mass: float) -> float:
    """Return frac(total_mass) - 1, or 0 for an integer mass."""
    frac = total_mass - math.floor(total_mass)
    if frac < MASS_ROUNDING or frac > 1.0 - MASS_ROUNDING:
        return 0.0
    return frac - 1.0


def adapted_quadrature(q: Quadrature, total_mass: float) -> Quadrature:
    """Return q, rebuilt with the endpoint exponent of a weight of this mass."""
    beta = endpoint_exponent(total_mass)
    if beta == q.endpoint_exponent:
        return q
    logger.debug(_("Quadrature %s adapted to endpoint exponent %s"), q.key, beta)
    return Quadrature(
        q.n_radial,
        q.n_angular,
        center=q.center,
        breaks=q.breaks,
        angular_offset=q.angular_offset,
        tolerance=q.tolerance,
        endpoint_exponent=beta,
    )


def distance_quadrature(
    n_radial: int = 48, n_angular: int = 64, center: Optional[complex] = None
) -> Quadrature:
    """Return the fixed size rule used by potential distances."""
    return Quadrature(n_radial, n_angular, center=center or 0j)
