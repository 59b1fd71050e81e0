"""Per-trial pipeline: sample, assemble, find zeros, measure distances.

A trial is identified by its seed chain (master_seed, p, ensemble index,
trial index). Workers are stateless apart from a per-process memo of built
bases, so records do not depend on the number of workers nor on the order
in which batches run.

"""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from bergman.bergman_space import BergmanBasis
from bergman.ensembles import Ensemble, trial_rng
from bergman.quadrature import (
    Quadrature,
    distance_quadrature,
    endpoint_exponent,
    level_quadrature,
)
from bergman.weights import WeightSequence, effective_weight
from bergman.zeros import (
    DegenerateSample,
    angular_ks_statistic,
    assemble_section,
    find_zeros,
    potential_l1_distance,
    radial_cdf_distance,
    root_residual,
    zero_radii,
)

from . import _
from .basis_cache import BasisCache
from .store_file import StoreFile

logger = logging.getLogger("zeros_lab.trials")

# Bases already built in this process
_BASES = {}  # type: Dict[Tuple[str, int, str], BergmanBasis]


class TrialContext:
    """Everything a worker needs to run trials, picklable."""

    def __init__(
        self,
        ws: WeightSequence,
        ensembles: Sequence[Ensemble],
        master_seed: int,
        quadrature: Dict[str, Any],
        distance_nodes: Tuple[int, int],
        r_grid: Sequence[float],
        zero_tolerance: float = 1.0e-12,
        cache_dir: Optional[str] = None,
        zeros_dir: Optional[str] = None,
    ) -> None:
        self.ws = ws
        self.ensembles = list(ensembles)
        self.master_seed = int(master_seed)
        self.quadrature = dict(quadrature)
        self.distance_nodes = tuple(distance_nodes)
        self.r_grid = list(r_grid)
        self.zero_tolerance = zero_tolerance
        self.cache_dir = cache_dir
        self.zeros_dir = zeros_dir

    def quadrature_for(self, p: int) -> Quadrature:
        """Return the basis quadrature of level p, centered at the weight center."""
        weight = effective_weight(self.ws, p)
        return level_quadrature(
            p,
            center=weight.center,
            breaks=weight.breaks,
            endpoint_exponent=endpoint_exponent(weight.total_mass),
            **self.quadrature
        )

    def distance_quadrature(self) -> Quadrature:
        return distance_quadrature(*self.distance_nodes)

    def basis(self, p: int) -> BergmanBasis:
        """Return the level p basis, from memo, cache or a fresh build."""
        q = self.quadrature_for(p)
        key = (effective_weight(self.ws, p).key, p, q.key)
        if key not in _BASES:
            _BASES[key] = BasisCache(self.cache_dir).get_or_build(self.ws, p, q)
        return _BASES[key]


def run_trial(ctx: TrialContext, p: int, ens_idx: int, trial: int) -> Dict[str, Any]:
    """Run one trial and return its record."""
    basis = ctx.basis(p)
    ensemble = ctx.ensembles[ens_idx]
    chain = [ctx.master_seed, p, ens_idx, trial]
    rng = trial_rng(ctx.master_seed, p, ens_idx, trial)
    logmod, arg = ensemble.log_polar(basis.d_p, 1, rng)
    top = float(np.max(logmod))
    coeffs = np.exp(logmod[0] - top) * np.exp(1j * arg[0])
    record = {
        "p": p,
        "ensemble": ensemble.label,
        "ensemble_index": ens_idx,
        "seed": ctx.master_seed,
        "trial": trial,
        "seed_chain": chain,
        "status": "ok",
        "n_finite_zeros": None,
        "inf_mult": None,
        "radial_cdf_dist": None,
        "potential_l1": None,
        "angular_ks": None,
        "root_residual": None,
    }  # type: Dict[str, Any]
    section = assemble_section(basis, coeffs, log_scale=top)
    try:
        zs = find_zeros(section, ctx.zero_tolerance)
    except DegenerateSample:
        logger.warning(_("Degenerate sample discarded, seed chain %s"), chain)
        record["status"] = "degenerate"
        return record
    weight = basis.weight_total
    record["n_finite_zeros"] = zs.n_finite
    record["inf_mult"] = zs.multiplicity_at_infinity
    if weight.is_radial:
        record["radial_cdf_dist"] = radial_cdf_distance(zs, weight, ctx.r_grid)
    record["potential_l1"] = potential_l1_distance(
        section, ctx.ws, ctx.distance_quadrature()
    )
    record["angular_ks"] = angular_ks_statistic(zs)
    record["root_residual"] = root_residual(section, zs, ctx.zero_tolerance)
    record["zero_radii"] = [float(r) for r in zero_radii(zs)]
    if ctx.zeros_dir is not None:
        StoreFile(ctx.zeros_dir).store_zeros(ensemble.label, p, trial, zs)
    return record


def run_batch(
    ctx: TrialContext, p: int, ens_idx: int, trials: Sequence[int]
) -> List[Dict[str, Any]]:
    """Run a batch of trials of one (p, ensemble) cell, job function."""
    logger.debug(_("Running trials %s..%s, p=%s, ensemble %s"), trials[0], trials[-1], p, ens_idx)
    return [run_trial(ctx, p, ens_idx, t) for t in trials]
