"""Experiments run over the (weight, p, ensemble) grid.

Each experiment kind is a subclass of Experiment, registered in
EXPERIMENT_DEFS under its command name:

- equidist         - Equidistribution of zeros, distances along p_grid
- universality     - Pairwise comparison of ensembles
- bergman-diag     - Bergman function against the curvature density
- bergman-decay    - Off-diagonal decay of the normalized Bergman kernel
- moments          - Moment condition constants of the ensembles

Every experiment returns a report dictionary, also written to report.json,
and a list of verdicts. Pass/fail thresholds are calibrated for desk scale
runs and recorded in the report metadata.

"""
import logging
import math
from datetime import datetime, timezone
from itertools import combinations
from time import perf_counter
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import ks_2samp

from bergman.bergman_space import (
    BergmanBasis,
    BergmanSpaceException,
    build_basis,
    curvature_ratio_error,
    log_bergman_kernel_norm,
    orthonormality_residual,
    trace_identity,
)
from bergman.ensembles import (
    Ensemble,
    EnsembleKind,
    gamma_nu,
    lemma_moment_constant,
    moderate_exponential_moment,
    moment_B,
    tail_exponent_fit,
    tail_smallball_check,
    trial_rng,
)
from bergman.quadrature import independent_quadrature
from bergman.weights import FubiniStudy, WeightException, effective_weight

from . import _, __version__
from .jobs import Jobs
from .labconf import LabConf
from .store_file import StoreFile
from .trials import TrialContext, run_batch, run_trial

logger = logging.getLogger("zeros_lab.experiments")

# Stream ids, first element of seed chains not attached to a trial
BOOTSTRAP_STREAM = 1 << 40
DECAY_STREAM = (1 << 40) + 1
MOMENT_STREAM = (1 << 40) + 2
TAIL_STREAM = (1 << 40) + 3

# Directions u of the moment tables, the index enters the seed chain
U_KINDS = ("e1", "uniform", "flat")
INFINITY_TOLERANCE = 0.05
TRACE_TOLERANCE = 1.0e-6
FS_EXACT_TOLERANCE = 1.0e-6
GAMMA_STDERR = 3.0
SLOW_MODE_RHO = 2.0


class ExperimentException(Exception):
    """An exception occurred while running an experiment."""


class UnsupportedExperiment(ExperimentException):
    """Experiment not available for this weight or configuration."""


def quantiles(values: Sequence[Optional[float]]) -> Dict[str, Any]:
    """Return count, mean and 10/50/90 quantiles, ignoring missing values."""
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if len(v) == 0:
        return {"n": 0, "mean": None, "q10": None, "median": None, "q90": None}
    q10, med, q90 = np.quantile(v, [0.1, 0.5, 0.9])
    return {
        "n": int(len(v)),
        "mean": float(np.mean(v)),
        "q10": float(q10),
        "median": float(med),
        "q90": float(q90),
    }


def decreasing(values: Sequence[float], strict: bool = True, slack: float = 0.0) -> bool:
    """Return True if values decrease, vacuously for fewer than two values."""
    if strict:
        return all(b < a + slack for a, b in zip(values, values[1:]))
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def within_margin(value: float, target: float, margin: float) -> bool:
    """Return True when |value - target| ≤ margin."""
    return abs(value - target) <= margin


def eval_grid(center: complex, radius: float, n: int) -> np.ndarray:
    """Return n deterministic points filling the disk |z - center| ≤ radius."""
    i = np.arange(n)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    return center + radius * np.sqrt((i + 0.5) / n) * np.exp(1j * golden * i)


def chordal_distance(z, w):
    """Return the chordal distance |z - w|/√((1+|z|²)(1+|w|²))."""
    return np.abs(z - w) / np.sqrt((1.0 + np.abs(z) ** 2) * (1.0 + np.abs(w) ** 2))


def quantile_fit(x, y, tau: float) -> Tuple[float, float]:
    """Fit the upper envelope y ≈ b - T·x by linear quantile regression.

    Returns (b, T), minimizing Σ τ·u⁺ + (1-τ)·u⁻ with y - b + T·x = u⁺ - u⁻.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 2:
        raise ExperimentException(_("Quantile fit needs at least two points"))
    cost = np.concatenate(([0.0, 0.0], np.full(n, tau), np.full(n, 1.0 - tau)))
    eye = sparse.identity(n, format="csr")
    a_eq = sparse.hstack(
        [sparse.csr_matrix(np.column_stack((np.ones(n), -x))), eye, -eye], format="csr"
    )
    bounds = [(None, None), (None, None)] + [(0.0, None)] * (2 * n)
    res = linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        logger.error(_("Quantile regression failed: %s"), res.message)
        raise ExperimentException(_("Quantile regression failed"))
    return float(res.x[0]), float(res.x[1])


def moment_cell(
    ensemble: Ensemble,
    ens_idx: int,
    nu: float,
    nu_idx: int,
    k: int,
    u_kind: str,
    trials: int,
    master_seed: int,
    chunk: int,
) -> Dict[str, Any]:
    """Estimate one moment table entry, job function."""
    chain = (MOMENT_STREAM, ens_idx, nu_idx, k, U_KINDS.index(u_kind))
    rng = trial_rng(master_seed, *chain)
    u = np.zeros(k, dtype=complex)
    if u_kind == "e1":
        u[0] = 1.0
    elif u_kind == "flat":
        u[:] = 1.0 / math.sqrt(k)
    else:
        g = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        u = g / np.linalg.norm(g)
    est, err = moment_B(ensemble, u, nu, trials, rng, chunk=chunk)
    return {
        "kind": ensemble.label,
        "ensemble_index": ens_idx,
        "k": k,
        "nu": nu,
        "u": u_kind,
        "estimate": est,
        "stderr": err,
        "trials": trials,
        "seed": ":".join(str(c) for c in (master_seed,) + chain),
    }


class Experiment:
    """Top class, not for direct use.
    Provides job execution, cell bookkeeping and report assembly."""

    name = ""

    def __init__(
        self, config: LabConf, store: StoreFile, workers: Optional[int] = None
    ) -> None:
        self._config = config
        self._store = store
        self._workers = config.workers if workers is None else workers
        self._ws = config.weight.build_sequence(config.p_grid)
        self._ensembles = [e.build() for e in config.ensembles]
        analysis = config.analysis
        self._context = TrialContext(
            self._ws,
            self._ensembles,
            config.master_seed,
            config.quadrature.as_dict(),
            (config.quadrature.distance_radial, config.quadrature.distance_angular),
            analysis.r_grid,
            zero_tolerance=analysis.zero_tolerance,
            cache_dir=config.cache_dir,
            zeros_dir=config.output_dir if analysis.dump_zeros else None,
        )
        self._rows = []  # type: List[Dict[str, Any]]
        self._fits = {}  # type: Dict[str, Any]
        self._verdicts = []  # type: List[Dict[str, Any]]
        self._incomplete = {}  # type: Dict[int, str]
        self._thresholds = {}  # type: Dict[str, Any]

    @property
    def version(self):
        """Return version."""
        return __version__

    @property
    def verdicts(self) -> List[Dict[str, Any]]:
        return self._verdicts

    @property
    def passed(self) -> bool:
        """Return True if every verdict passed."""
        return all(v["passed"] for v in self._verdicts)

    @property
    def context(self) -> TrialContext:
        return self._context

    # ----------------
    # Internal methods
    # ----------------
    def _verdict(self, name: str, passed: bool, **details) -> None:
        passed = bool(passed)
        if passed:
            logger.info(_("Verdict %s passed"), name)
        else:
            logger.warning(_("Verdict %s failed: %s"), name, details)
        self._verdicts.append({"name": name, "passed": passed, "details": details})

    def _basis(self, p: int) -> Optional[BergmanBasis]:
        """Return the level p basis, or None and mark p incomplete."""
        try:
            return self._context.basis(p)
        except (BergmanSpaceException, WeightException) as exc:
            logger.error(_("Basis build failed for p=%s: %s"), p, exc)
            self._incomplete[p] = "basis build failure: {}".format(exc)
            return None

    def _complete_grid(self) -> List[int]:
        """Return the p values whose basis could be built."""
        return [p for p in self._config.p_grid if self._basis(p) is not None]

    def _execute(self, jobs: Sequence[Tuple[str, Callable, tuple]]) -> Dict[str, Any]:
        """Run (job_id, function, args) jobs, in process or on the worker pool."""
        if self._workers <= 1 or len(jobs) <= 1:
            return {job_id: fn(*args) for job_id, fn, args in jobs}
        with Jobs(nb_executors=self._workers) as pool:
            pool.start(paused=True)
            for job_id, fn, args in jobs:
                pool.add_job_once(job_id, fn, args=args)
            pool.resume()
            results = pool.wait([j[0] for j in jobs])
            pool.shutdown()
        return results

    def run_trials(self, grid: Sequence[int]) -> List[Dict[str, Any]]:
        """Run every trial of the (p, ensemble) cells of grid, sorted records."""
        batch = max(1, self._config.tuning_batch_size)
        jobs = []
        for p in grid:
            for e in range(len(self._ensembles)):
                for start in range(0, self._config.trials, batch):
                    trials = list(range(start, min(start + batch, self._config.trials)))
                    jobs.append(
                        (
                            "trials_p{}_e{}_t{}".format(p, e, start),
                            run_batch,
                            (self._context, p, e, trials),
                        )
                    )
        logger.info(_("Running %s trial batches on %s workers"), len(jobs), self._workers)
        results = self._execute(jobs)
        records = [r for batch_records in results.values() for r in batch_records]
        records.sort(key=lambda r: (r["p"], r["ensemble_index"], r["trial"]))
        return records

    def trial_rows(self, records: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """Return one summary row per (p, ensemble) cell."""
        rows = []
        for p in self._config.p_grid:
            expected = 1.0 - effective_weight(self._ws, p).total_mass / p
            for e, ensemble in enumerate(self._ensembles):
                row = {
                    "p": p,
                    "ensemble": ensemble.label,
                    "ensemble_index": e,
                    "seed_chain": [self._config.master_seed, p, e],
                }  # type: Dict[str, Any]
                if p in self._incomplete:
                    row.update({"status": "incomplete", "reason": self._incomplete[p]})
                    rows.append(row)
                    continue
                cell = [r for r in records if r["p"] == p and r["ensemble_index"] == e]
                ok = [r for r in cell if r["status"] == "ok"]
                row.update(
                    {
                        "status": "complete",
                        "d_p": self._context.basis(p).d_p,
                        "trials": len(cell),
                        "degenerate": len(cell) - len(ok),
                        "radial_cdf_dist": quantiles([r["radial_cdf_dist"] for r in ok]),
                        "potential_l1": quantiles([r["potential_l1"] for r in ok]),
                        "angular_ks": quantiles([r["angular_ks"] for r in ok]),
                        "infinity_fraction": quantiles([r["inf_mult"] / p for r in ok]),
                        "expected_infinity_fraction": expected,
                        "root_residual_max": max(
                            (r["root_residual"] for r in ok), default=None
                        ),
                    }
                )
                rows.append(row)
        return rows

    def _medians(self, rows, e: int, metric: str) -> List[Tuple[int, float]]:
        return [
            (r["p"], r[metric]["median"])
            for r in rows
            if r["ensemble_index"] == e
            and r["status"] == "complete"
            and r[metric]["median"] is not None
        ]

    def report(self, started: str, runtime: float) -> Dict[str, Any]:
        """Return the experiment report."""
        return {
            "experiment": self.name,
            "version": __version__,
            "master_seed": self._config.master_seed,
            "weight": self._ws.base.key,
            "config": self._config.as_dict(),
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "runtime": runtime,
            "rows": self._rows,
            "fits": self._fits,
            "incomplete": {str(p): r for p, r in self._incomplete.items()},
            "verdicts": self._verdicts,
            "passed": self.passed,
            "metadata": {
                "thresholds": self._thresholds,
                "calibration": "desk scale thresholds, no fixed p error bars",
            },
        }

    # ---------------
    # Generic methods
    # ---------------
    def execute(self) -> None:  # pragma: no cover
        raise NotImplementedError

    def run(self) -> Dict[str, Any]:
        """Run the experiment, store and return its report."""
        logger.info(_("Starting experiment %s, master seed %s"), self.name, self._config.master_seed)
        started = datetime.now(timezone.utc).isoformat()
        t0 = perf_counter()
        self.execute()
        report = self.report(started, perf_counter() - t0)
        self._store.store_report(report)
        logger.info(
            _("Experiment %s finished in %.1f s, passed=%s"),
            self.name,
            report["runtime"],
            report["passed"],
        )
        return report


class Equidistribution(Experiment):
    """Distances between zero measures and the curvature, along p_grid."""

    name = "equidist"

    def execute(self) -> None:
        analysis = self._config.analysis
        self._thresholds = {
            "radial_max": analysis.radial_max,
            "potential_max": analysis.potential_max,
            "infinity_tolerance": INFINITY_TOLERANCE,
        }
        grid = self._complete_grid()
        records = self.run_trials(grid)
        self._store.store_trials(records)
        self._rows = self.trial_rows(records)
        metrics = ["potential_l1"]
        if self._ws.base.is_radial:
            metrics.insert(0, "radial_cdf_dist")
        limits = {"radial_cdf_dist": analysis.radial_max, "potential_l1": analysis.potential_max}
        for e, ensemble in enumerate(self._ensembles):
            for metric in metrics:
                medians = self._medians(self._rows, e, metric)
                self._verdict(
                    "{}_decreasing[{}]".format(metric, ensemble.label),
                    len(medians) > 0 and decreasing([m for _p, m in medians]),
                    medians=medians,
                )
                if medians:
                    self._verdict(
                        "{}_threshold[{}]".format(metric, ensemble.label),
                        medians[-1][1] < limits[metric],
                        p=medians[-1][0],
                        median=medians[-1][1],
                        limit=limits[metric],
                    )
            last = [
                r
                for r in self._rows
                if r["ensemble_index"] == e and r["status"] == "complete"
            ]
            if last and last[-1]["infinity_fraction"]["mean"] is not None:
                row = last[-1]
                gap = abs(row["infinity_fraction"]["mean"] - row["expected_infinity_fraction"])
                self._verdict(
                    "infinity_mass[{}]".format(ensemble.label),
                    gap <= INFINITY_TOLERANCE,
                    p=row["p"],
                    mean=row["infinity_fraction"]["mean"],
                    expected=row["expected_infinity_fraction"],
                )


class Universality(Experiment):
    """Pairwise comparison of distance distributions across ensembles."""

    name = "universality"

    def _slow_mode(self, ensemble: Ensemble) -> bool:
        return ensemble.kind == EnsembleKind.HEAVY_TAIL_IID and ensemble.rho <= SLOW_MODE_RHO

    def _spread(self, values: np.ndarray, p: int) -> float:
        """Return the bootstrap standard deviation of the median of values."""
        rng = trial_rng(self._config.master_seed, BOOTSTRAP_STREAM, p)
        n = len(values)
        idx = rng.integers(0, n, size=(self._config.analysis.bootstrap, n))
        return float(np.std(np.median(values[idx], axis=1), ddof=1))

    def execute(self) -> None:
        if len(self._ensembles) < 2:
            logger.error(_("Universality needs at least two ensembles"))
            raise UnsupportedExperiment(_("At least two ensembles are required"))
        analysis = self._config.analysis
        metric = "radial_cdf_dist" if self._ws.base.is_radial else "potential_l1"
        grid = self._complete_grid()
        records = self.run_trials(grid)
        self._store.store_trials(records)
        self._rows = self.trial_rows(records)
        reference = next(
            (
                i
                for i, e in enumerate(self._ensembles)
                if e.kind == EnsembleKind.GAUSSIAN
            ),
            0,
        )
        pairs = []
        tolerances = {}
        for p in grid:
            values = {}
            radii = {}
            for e in range(len(self._ensembles)):
                cell = [
                    r
                    for r in records
                    if r["p"] == p and r["ensemble_index"] == e and r["status"] == "ok"
                ]
                values[e] = np.array([r[metric] for r in cell], dtype=float)
                radii[e] = np.arctan(
                    np.concatenate([np.asarray(r["zero_radii"], dtype=float) for r in cell])
                    if cell
                    else np.zeros(0)
                )
            if analysis.universality_tolerance is not None:
                tolerance = analysis.universality_tolerance
            elif len(values[reference]) > 1:
                tolerance = 3.0 * self._spread(values[reference], p)
            else:
                tolerance = 0.0
            tolerances[p] = tolerance
            for a, b in combinations(range(len(self._ensembles)), 2):
                if len(values[a]) == 0 or len(values[b]) == 0:
                    continue
                ks = ks_2samp(radii[a], radii[b])
                pairs.append(
                    {
                        "p": p,
                        "pair": [self._ensembles[a].label, self._ensembles[b].label],
                        "indices": [a, b],
                        "median_difference": abs(
                            float(np.median(values[a])) - float(np.median(values[b]))
                        ),
                        "ks_statistic": float(ks.statistic),
                        "ks_pvalue": float(ks.pvalue),
                        "slow_mode": self._slow_mode(self._ensembles[a])
                        or self._slow_mode(self._ensembles[b]),
                        "tolerance": tolerance,
                    }
                )
        self._fits = {
            "metric": metric,
            "reference": self._ensembles[reference].label,
            "tolerances": {str(p): t for p, t in tolerances.items()},
            "pairs": pairs,
        }
        self._thresholds = {"tolerance": tolerances, "slow_mode_rho": SLOW_MODE_RHO}
        if not grid:
            self._verdict("universality", False, reason="no complete p")
            return
        top = grid[-1]
        checked = [c for c in pairs if c["p"] == top and not c["slow_mode"]]
        flagged = [c["pair"] for c in pairs if c["p"] == top and c["slow_mode"]]
        if flagged:
            logger.warning(_("Slow mode pairs excluded from verdict: %s"), flagged)
        self._verdict(
            "universality",
            all(c["median_difference"] <= c["tolerance"] for c in checked),
            p=top,
            tolerance=tolerances[top],
            worst=max((c["median_difference"] for c in checked), default=None),
            slow_mode=flagged,
        )


class BergmanDiagonal(Experiment):
    """Bergman function against the curvature density of Φ_p."""

    name = "bergman-diag"

    def execute(self) -> None:
        analysis = self._config.analysis
        base = self._ws.base
        if not base.has_curvature_density:
            logger.error(_("Weight %s has no curvature density"), base.key)
            raise UnsupportedExperiment(_("Curvature density not available"))
        exact = isinstance(base, FubiniStudy) and not self._ws.regularized
        grid = eval_grid(base.center, analysis.eval_radius, analysis.eval_points)
        errors = []
        for p in self._config.p_grid:
            b = self._basis(p)
            if b is None:
                self._rows.append(
                    {"p": p, "status": "incomplete", "reason": self._incomplete[p]}
                )
                continue
            q = self._context.quadrature_for(p)
            fine = independent_quadrature(q)
            error = curvature_ratio_error(b, grid)
            try:
                fine_error = curvature_ratio_error(build_basis(self._ws, p, fine), grid)
            except BergmanSpaceException as exc:
                logger.warning(_("Fine resolution basis failed for p=%s: %s"), p, exc)
                fine_error = None
            trace = trace_identity(b, q)
            row = {
                "p": p,
                "status": "complete",
                "d_p": b.d_p,
                "ratio_error": error,
                "resolution_delta": None if fine_error is None else abs(error - fine_error),
                "trace": trace,
                "trace_error": abs(trace - b.d_p),
                "orthonormality_residual": orthonormality_residual(b, fine),
                "eval_points": len(grid),
                "eval_radius": analysis.eval_radius,
            }
            if exact:
                row["exact_error"] = 1.0 / p
            self._rows.append(row)
            errors.append((p, error))
        self._thresholds = {
            "trace_tolerance": TRACE_TOLERANCE,
            "fs_exact_tolerance": FS_EXACT_TOLERANCE,
        }
        self._fits = {"ratio_errors": errors}
        complete = [r for r in self._rows if r["status"] == "complete"]
        self._verdict(
            "ratio_error_nonincreasing",
            len(errors) > 0 and decreasing([e for _p, e in errors], strict=False, slack=1.0e-12),
            errors=errors,
        )
        self._verdict(
            "trace_identity",
            all(r["trace_error"] <= TRACE_TOLERANCE for r in complete),
            worst=max((r["trace_error"] for r in complete), default=None),
        )
        if exact:
            self._verdict(
                "fs_exact_discrepancy",
                all(
                    abs(r["ratio_error"] - r["exact_error"]) <= FS_EXACT_TOLERANCE
                    for r in complete
                ),
            )


class BergmanDecay(Experiment):
    """Upper envelope of the normalized kernel against the chordal distance."""

    name = "bergman-decay"

    def _pairs(self, p: int, a_p: float):
        """Return sampled pairs (z, w) with normalized distance x ≤ x_max."""
        analysis = self._config.analysis
        rng = trial_rng(self._config.master_seed, DECAY_STREAM, p)
        n = analysis.decay_pairs
        c = self._ws.base.center
        r = analysis.eval_radius
        z = c + r * np.sqrt(rng.random(n)) * np.exp(2j * math.pi * rng.random(n))
        x = analysis.decay_x_max * rng.random(n)
        w = z + x * (1.0 + np.abs(z) ** 2) / math.sqrt(a_p) * np.exp(
            2j * math.pi * rng.random(n)
        )
        xs = math.sqrt(a_p) * chordal_distance(z, w)
        keep = xs <= analysis.decay_x_max
        return z[keep], w[keep], xs[keep]

    def execute(self) -> None:
        analysis = self._config.analysis
        base = self._ws.base
        if base.strict_positivity <= 0.0 or not base.has_curvature_density:
            logger.error(_("Weight %s is not strictly positive"), base.key)
            raise UnsupportedExperiment(_("Strict positivity is required"))
        xs_all, ys_all = [], []
        per_p = []
        for p in self._config.p_grid:
            b = self._basis(p)
            if b is None:
                self._rows.append(
                    {"p": p, "status": "incomplete", "reason": self._incomplete[p]}
                )
                continue
            weight = effective_weight(self._ws, p)
            a_p = weight.strict_positivity
            z, w, x = self._pairs(p, a_p)
            y = (
                log_bergman_kernel_norm(b, z, w)
                - np.log(weight.curvature_density(z))
                - np.log(weight.curvature_density(w))
            )
            log_c, t = quantile_fit(x, y, analysis.decay_quantile)
            per_p.append((p, t))
            xs_all.append(x)
            ys_all.append(y)
            self._rows.append(
                {
                    "p": p,
                    "status": "complete",
                    "a_p": a_p,
                    "pairs": int(len(x)),
                    "rate": t,
                    "log_prefactor": log_c,
                    "max_log_kernel": float(np.max(y)),
                }
            )
        self._thresholds = {
            "quantile": analysis.decay_quantile,
            "x_max": analysis.decay_x_max,
            "t_min": analysis.decay_t_min,
            "t_spread": analysis.decay_t_spread,
            "log_margin": analysis.decay_log_margin,
        }
        if not per_p:
            self._verdict("decay_rate", False, reason="no complete p")
            return
        _log_c, rate = quantile_fit(
            np.concatenate(xs_all), np.concatenate(ys_all), analysis.decay_quantile
        )
        rates = [t for _p, t in per_p]
        spread = (max(rates) - min(rates)) / abs(rate) if rate != 0 else math.inf
        self._fits = {"rate": rate, "rates": per_p, "spread": spread}
        self._verdict("decay_rate", rate >= analysis.decay_t_min, rate=rate)
        self._verdict("decay_rate_stable", spread <= analysis.decay_t_spread, spread=spread)
        self._certify(per_p, xs_all, ys_all)

    def _certify(self, per_p, xs_all, ys_all) -> None:
        """Calibrate (C, T) on the lower half of the levels, check the others.

        T is the upper quantile rate of the calibration pairs and log C their
        maximum of y + T·x plus the configured margin. The bound must then
        hold at every pair of the held out levels.
        """
        analysis = self._config.analysis
        if len(per_p) < 2:
            self._verdict("decay_certified", False, reason="needs two complete levels")
            return
        n_cal = (len(per_p) + 1) // 2
        x_cal = np.concatenate(xs_all[:n_cal])
        y_cal = np.concatenate(ys_all[:n_cal])
        _log_c, rate = quantile_fit(x_cal, y_cal, analysis.decay_quantile)
        log_c = float(np.max(y_cal + rate * x_cal)) + analysis.decay_log_margin
        excess = max(
            float(np.max(y + rate * x)) - log_c for x, y in zip(xs_all[n_cal:], ys_all[n_cal:])
        )
        self._fits.update(
            {
                "certified_rate": rate,
                "prefactor": math.exp(log_c),
                "log_prefactor": log_c,
                "calibration_p": [p for p, _t in per_p[:n_cal]],
                "held_out_p": [p for p, _t in per_p[n_cal:]],
                "held_out_excess": excess,
            }
        )
        self._verdict(
            "decay_certified",
            rate > 0.0 and excess <= 0.0,
            prefactor=math.exp(log_c),
            rate=rate,
            excess=excess,
        )


class MomentCertify(Experiment):
    """Moment condition constants across the dimensions k = d_p."""

    name = "moments"

    def _dimensions(self) -> Dict[int, int]:
        """Return d_p for each p whose basis could be built."""
        return {p: self._basis(p).d_p for p in self._complete_grid()}

    def execute(self) -> None:
        moments = self._config.moments
        seed = self._config.master_seed
        dims = self._dimensions()
        ks = sorted(set(moments.k_grid or []) | set(dims.values()))
        jobs = []
        for e, ensemble in enumerate(self._ensembles):
            u_kinds = ["flat"]
            if ensemble.kind in (EnsembleKind.GAUSSIAN, EnsembleKind.FS_VOLUME):
                u_kinds = ["e1", "uniform"]
            elif ensemble.is_unit_norm:
                u_kinds = ["e1"]
            for i, nu in enumerate(moments.nu):
                if not ensemble.admits_nu(nu):
                    logger.warning(_("nu=%s skipped for %s"), nu, ensemble.label)
                    continue
                for k in ks:
                    for u_kind in u_kinds:
                        jobs.append(
                            (
                                "moment_e{}_n{}_k{}_{}".format(e, i, k, u_kind),
                                moment_cell,
                                (
                                    ensemble,
                                    e,
                                    nu,
                                    i,
                                    k,
                                    u_kind,
                                    moments.trials,
                                    seed,
                                    self._config.tuning_chunk_size,
                                ),
                            )
                        )
        results = self._execute(jobs)
        rows = sorted(
            results.values(),
            key=lambda r: (r["ensemble_index"], r["nu"], r["k"], r["u"]),
        )
        self._store.store_moments(rows)
        self._rows = rows
        self._thresholds = {
            "gamma_stderr": GAMMA_STDERR,
            "exponent_margin": self._config.analysis.exponent_margin,
        }
        fits = {}
        for e, ensemble in enumerate(self._ensembles):
            mine = [r for r in rows if r["ensemble_index"] == e]
            fit = {"hypothesis": self._hypothesis(mine, dims)}  # type: Dict[str, Any]
            if ensemble.kind in (EnsembleKind.GAUSSIAN, EnsembleKind.FS_VOLUME):
                fit.update(self._check_gamma(ensemble, mine))
            elif ensemble.is_unit_norm:
                fit.update(self._check_sphere(ensemble, e, mine, ks))
            else:
                fit.update(self._check_heavy_tail(ensemble, e, mine, ks))
            fits[ensemble.label] = fit
        self._fits = fits

    def _hypothesis(self, rows, dims: Dict[int, int]) -> Dict[str, Any]:
        """Return C_p·A_p^-ν with partial sums and (log d_p)/A_p along the grid."""
        out = {}
        for nu in sorted({r["nu"] for r in rows}):
            series = []
            partial = 0.0
            for p, d_p in sorted(dims.items()):
                a_p = effective_weight(self._ws, p).total_mass
                c_p = max(r["estimate"] for r in rows if r["nu"] == nu and r["k"] == d_p)
                term = c_p * a_p ** (-nu)
                partial += term
                series.append(
                    {
                        "p": p,
                        "d_p": d_p,
                        "C_p": c_p,
                        "term": term,
                        "partial_sum": partial,
                        "log_d_over_A": math.log(d_p) / a_p,
                    }
                )
            out[str(nu)] = series
        return out

    def _check_gamma(self, ensemble: Ensemble, rows) -> Dict[str, Any]:
        misses = []
        for r in rows:
            exact = gamma_nu(ensemble.kind, r["nu"])
            r["gamma_nu"] = exact
            if abs(r["estimate"] - exact) > GAMMA_STDERR * r["stderr"]:
                misses.append((r["k"], r["nu"], r["u"]))
        self._verdict("gamma_match[{}]".format(ensemble.label), not misses, misses=misses)
        return {"gamma_nu": {str(nu): gamma_nu(ensemble.kind, nu) for nu in {r["nu"] for r in rows}}}

    def _check_sphere(self, ensemble: Ensemble, e: int, rows, ks) -> Dict[str, Any]:
        out = {}
        for nu in sorted({r["nu"] for r in rows}):
            ratios = [
                (r["k"], r["estimate"] / math.log(r["k"]) ** nu)
                for r in rows
                if r["nu"] == nu and r["k"] >= 2
            ]
            if not ratios:
                continue
            envelope = max(c for _k, c in ratios)
            exponential = []
            for k in ks:
                rng = trial_rng(self._config.master_seed, TAIL_STREAM, e, k)
                est, err, bound = moderate_exponential_moment(
                    ensemble, k, 1.0, self._config.moments.trials, rng, nu=nu
                )
                exponential.append({"k": k, "estimate": est, "stderr": err, "bound": bound})
            self._verdict(
                "log_k_envelope[{}, nu={}]".format(ensemble.label, nu),
                ratios[-1][1] <= ratios[0][1],
                ratios=ratios,
                envelope=envelope,
            )
            out[str(nu)] = {"envelope": envelope, "ratios": ratios, "exponential": exponential}
        return {"log_k": out}

    def _check_heavy_tail(self, ensemble: Ensemble, e: int, rows, ks) -> Dict[str, Any]:
        moments = self._config.moments
        rng = trial_rng(self._config.master_seed, TAIL_STREAM, e)
        table = tail_smallball_check(ensemble, max(ks), moments.r_grid, moments.trials, rng)
        c_prime, rho_fit = tail_exponent_fit(table)
        out = {"tail_table": table, "c_prime": c_prime, "rho_fit": rho_fit}  # type: Dict[str, Any]
        margin = self._config.analysis.exponent_margin
        for nu in sorted({r["nu"] for r in rows}):
            pts = [(r["k"], r["estimate"]) for r in rows if r["nu"] == nu]
            entry = {
                "lemma_constant": lemma_moment_constant(c_prime, rho_fit, nu)
                if nu < rho_fit
                else None,
                "bound_exponent": nu / ensemble.rho,
            }  # type: Dict[str, Any]
            if len(pts) >= 2:
                slope = float(
                    np.polyfit(np.log([k for k, _v in pts]), np.log([v for _k, v in pts]), 1)[0]
                )
                entry["exponent"] = slope
                self._verdict(
                    "k_exponent[{}, nu={}]".format(ensemble.label, nu),
                    within_margin(slope, nu / ensemble.rho, margin),
                    exponent=slope,
                    bound=nu / ensemble.rho,
                )
            out[str(nu)] = entry
        return out


EXPERIMENT_DEFS = {
    "equidist": Equidistribution,
    "universality": Universality,
    "bergman-diag": BergmanDiagonal,
    "bergman-decay": BergmanDecay,
    "moments": MomentCertify,
}


def replay_trial(
    config: LabConf, p: int, ensemble: int, trial: int, store: StoreFile
) -> Dict[str, Any]:
    """Rerun a single trial from its seed chain and store its zeros."""
    if p not in config.p_grid:
        raise UnsupportedExperiment(_("p is not in the configured grid"))
    if not 0 <= ensemble < len(config.ensembles):
        raise UnsupportedExperiment(_("Ensemble index out of range"))
    exp = Experiment(config, store, workers=1)
    ctx = exp.context
    ctx.zeros_dir = str(store.output_dir)
    record = run_trial(ctx, p, ensemble, trial)
    logger.info(_("Replayed trial %s"), record["seed_chain"])
    return record
