"""Expose experiment configuration parameters as properties.

Parameters are defined in a YAML file, created using --init option and then
customized by the user. Each time the application is run, this file is read
and the parameters are available as properties of LabConf and of its
section objects (WeightConf, RegularizerConf, EnsembleConf, QuadratureConf,
AnalysisConf, MomentsConf).

"""
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional as Opt

import psutil
from strictyaml import (
    Bool,
    Enum,
    Float,
    Int,
    Map,
    Optional,
    Seq,
    Str,
    YAMLError,
    YAMLValidationError,
    load,
)

from bergman.ensembles import Ensemble, EnsembleKind
from bergman.weights import (
    FubiniStudy,
    ScaledFS,
    TranslatedFS,
    Weight,
    WeightSequence,
    custom_weight,
)

from . import _, __version__

logger = logging.getLogger("zeros_lab.labconf")


class LabConfException(Exception):
    """An exception occurred while loading parameters."""


class MissingConfigurationFile(LabConfException):
    """Configuration file not found."""


class IncorrectParameter(LabConfException):
    """Incorrect or missing parameter."""


_ConfType = Dict[str, Any]

EXPERIMENTS = ["equidist", "universality", "bergman-diag", "bergman-decay", "moments"]

# Optional sections: key -> (default, validator), None meaning no default
_MOMENTS = {
    "nu": ([1.0], Seq(Float())),
    "k_grid": (None, Seq(Int())),
    "trials": (100000, Int()),
    "r_grid": ([1.0, 2.0, 4.0, 8.0], Seq(Float())),
}
_QUADRATURE = {
    "radial_factor": (1.0, Float()),
    "radial_base": (40, Int()),
    "angular_factor": (2.0, Float()),
    "angular_base": (32, Int()),
    "distance_radial": (48, Int()),
    "distance_angular": (64, Int()),
}
_ANALYSIS = {
    "r_min": (1.0e-3, Float()),
    "r_max": (1.0e3, Float()),
    "r_points": (200, Int()),
    "zero_tolerance": (1.0e-12, Float()),
    "eval_radius": (3.0, Float()),
    "eval_points": (1000, Int()),
    "decay_quantile": (0.99, Float()),
    "decay_pairs": (1000, Int()),
    "decay_x_max": (2.0, Float()),
    "decay_t_min": (0.5, Float()),
    "decay_t_spread": (0.2, Float()),
    "decay_log_margin": (0.25, Float()),
    "universality_tolerance": (None, Float()),
    "bootstrap": (200, Int()),
    "radial_max": (0.1, Float()),
    "potential_max": (0.1, Float()),
    "exponent_margin": (0.15, Float()),
    "dump_zeros": (False, Bool()),
}
_TUNING = {
    "chunk_size": (100000, Int()),
    "batch_size": (10, Int()),
}


def _optional_map(spec: Dict[str, Any]) -> Map:
    return Map(
        {
            (Optional(k) if d is None else Optional(k, default=d)): v
            for k, (d, v) in spec.items()
        }
    )


# Define strictyaml schema
_ConfSchema = Map(
    {
        "main": Map(
            {
                "experiment": Enum(EXPERIMENTS),
                "master_seed": Int(),
                Optional("trials", default=100): Int(),
                Optional("workers", default=1): Int(),
                Optional("output_dir", default="zeros_lab_out"): Str(),
                Optional("cache_dir"): Str(),
            }
        ),
        "weight": Map(
            {
                "kind": Enum(["fubini_study", "scaled_fs", "translated_fs", "custom"]),
                Optional("alpha", default=1.0): Float(),
                Optional("center_re", default=0.0): Float(),
                Optional("center_im", default=0.0): Float(),
                Optional("name"): Str(),
                Optional("fd_step", default=1.0e-4): Float(),
            }
        ),
        Optional("regularizer"): Map(
            {
                "mode": Enum(["none", "power", "explicit"]),
                Optional("coefficient", default=1.0): Float(),
                Optional("exponent", default=0.5): Float(),
                Optional("counts"): Seq(Int()),
            }
        ),
        "p_grid": Seq(Int()),
        "ensembles": Seq(
            Map(
                {
                    "kind": Enum([k.value for k in EnsembleKind]),
                    Optional("rho"): Float(),
                    Optional("density_bound"): Float(),
                }
            )
        ),
        Optional("moments"): _optional_map(_MOMENTS),
        Optional("quadrature"): _optional_map(_QUADRATURE),
        Optional("analysis"): _optional_map(_ANALYSIS),
        Optional("tuning"): _optional_map(_TUNING),
    }
)


def _section(config: _ConfType, name: str, spec: Dict[str, Any]) -> _ConfType:
    """Return a section merged over its defaults."""
    values = {k: d for k, (d, _v) in spec.items() if d is not None}
    values.update(config.get(name, {}))
    return values


class WeightConf:
    """Expose weight and regularizer configuration as properties."""

    def __init__(self, config: _ConfType) -> None:
        self._kind = config["weight"]["kind"]  # type: str
        self._alpha = config["weight"].get("alpha", 1.0)  # type: float
        self._center = complex(
            config["weight"].get("center_re", 0.0), config["weight"].get("center_im", 0.0)
        )  # type: complex
        self._name = config["weight"].get("name")  # type: Opt[str]
        self._fd_step = config["weight"].get("fd_step", 1.0e-4)  # type: float
        if self._kind == "custom" and self._name is None:
            logger.error(_("weight:name must be defined for custom weights"))
            raise IncorrectParameter(_("weight:name must be defined"))

        self._mode = "none"  # type: str
        self._coefficient = 1.0  # type: float
        self._exponent = 0.5  # type: float
        self._counts = None  # type: Opt[List[int]]
        if "regularizer" in config:
            self._mode = config["regularizer"]["mode"]
            self._coefficient = config["regularizer"].get("coefficient", 1.0)
            self._exponent = config["regularizer"].get("exponent", 0.5)
            self._counts = config["regularizer"].get("counts")

    @property
    def kind(self) -> str:
        """Return weight kind."""
        return self._kind

    @property
    def alpha(self) -> float:
        """Return ScaledFS factor."""
        return self._alpha

    @property
    def center(self) -> complex:
        """Return TranslatedFS center."""
        return self._center

    @property
    def name(self) -> Opt[str]:
        """Return custom weight registry name."""
        return self._name

    @property
    def fd_step(self) -> float:
        """Return finite difference step for custom weights."""
        return self._fd_step

    @property
    def regularizer_mode(self) -> str:
        return self._mode

    @property
    def regularizer_coefficient(self) -> float:
        return self._coefficient

    @property
    def regularizer_exponent(self) -> float:
        return self._exponent

    @property
    def regularizer_counts(self) -> Opt[List[int]]:
        return self._counts

    def build(self) -> Weight:
        """Return the configured base weight."""
        if self._kind == "fubini_study":
            return FubiniStudy()
        if self._kind == "scaled_fs":
            return ScaledFS(self._alpha)
        if self._kind == "translated_fs":
            return TranslatedFS(self._center)
        return custom_weight(str(self._name), self._fd_step)

    def build_sequence(self, p_grid: List[int]) -> WeightSequence:
        """Return the configured weight sequence on p_grid."""
        return WeightSequence.from_rule(
            self.build(),
            p_grid,
            mode=self._mode,
            coefficient=self._coefficient,
            exponent=self._exponent,
            counts=self._counts,
        )


class EnsembleConf:
    """Expose one ensemble configuration as properties."""

    def __init__(self, config: _ConfType) -> None:
        self._kind = config["kind"]  # type: str
        self._rho = config.get("rho")  # type: Opt[float]
        self._density_bound = config.get("density_bound")  # type: Opt[float]
        if self._kind == EnsembleKind.HEAVY_TAIL_IID.value and self._rho is None:
            logger.error(_("ensembles:rho must be defined for heavy_tail_iid"))
            raise IncorrectParameter(_("ensembles:rho must be defined"))

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def rho(self) -> Opt[float]:
        return self._rho

    @property
    def density_bound(self) -> Opt[float]:
        return self._density_bound

    def build(self) -> Ensemble:
        """Return the configured ensemble."""
        return Ensemble(EnsembleKind(self._kind), self._rho, self._density_bound)


class QuadratureConf:
    """Expose quadrature configuration as properties."""

    def __init__(self, config: _ConfType) -> None:
        section = _section(config, "quadrature", _QUADRATURE)
        self._radial_factor = section["radial_factor"]  # type: float
        self._radial_base = section["radial_base"]  # type: int
        self._angular_factor = section["angular_factor"]  # type: float
        self._angular_base = section["angular_base"]  # type: int
        self._distance_radial = section["distance_radial"]  # type: int
        self._distance_angular = section["distance_angular"]  # type: int

    @property
    def radial_factor(self) -> float:
        """Return radial nodes per unit of p."""
        return self._radial_factor

    @property
    def radial_base(self) -> int:
        """Return radial nodes added to radial_factor·p."""
        return self._radial_base

    @property
    def angular_factor(self) -> float:
        """Return angular nodes per unit of p."""
        return self._angular_factor

    @property
    def angular_base(self) -> int:
        """Return angular nodes added to angular_factor·p."""
        return self._angular_base

    @property
    def distance_radial(self) -> int:
        """Return radial nodes of the distance quadrature."""
        return self._distance_radial

    @property
    def distance_angular(self) -> int:
        """Return angular nodes of the distance quadrature."""
        return self._distance_angular

    def as_dict(self) -> Dict[str, Any]:
        return {
            "radial_factor": self._radial_factor,
            "radial_base": self._radial_base,
            "angular_factor": self._angular_factor,
            "angular_base": self._angular_base,
        }


class AnalysisConf:
    """Expose analysis parameters and verdict thresholds as properties."""

    def __init__(self, config: _ConfType) -> None:
        section = _section(config, "analysis", _ANALYSIS)
        self._values = dict(section)  # type: Dict[str, Any]
        if not 0.0 < self._values["r_min"] < self._values["r_max"]:
            logger.error(_("analysis:r_min must be positive and below r_max"))
            raise IncorrectParameter(_("analysis:r_min must be below r_max"))
        if not 0.5 < self._values["decay_quantile"] < 1.0:
            logger.error(_("analysis:decay_quantile must be in (0.5, 1)"))
            raise IncorrectParameter(_("analysis:decay_quantile out of range"))

    @property
    def r_grid(self) -> List[float]:
        """Return log spaced radii used by radial CDF distances."""
        lo, hi, n = self._values["r_min"], self._values["r_max"], self._values["r_points"]
        step = (math.log(hi) - math.log(lo)) / max(n - 1, 1)
        return [math.exp(math.log(lo) + i * step) for i in range(n)]

    @property
    def zero_tolerance(self) -> float:
        return self._values["zero_tolerance"]

    @property
    def eval_radius(self) -> float:
        return self._values["eval_radius"]

    @property
    def eval_points(self) -> int:
        return self._values["eval_points"]

    @property
    def decay_quantile(self) -> float:
        return self._values["decay_quantile"]

    @property
    def decay_pairs(self) -> int:
        return self._values["decay_pairs"]

    @property
    def decay_x_max(self) -> float:
        return self._values["decay_x_max"]

    @property
    def decay_t_min(self) -> float:
        return self._values["decay_t_min"]

    @property
    def decay_t_spread(self) -> float:
        return self._values["decay_t_spread"]

    @property
    def decay_log_margin(self) -> float:
        """Return the margin added to log C before checking held out levels."""
        return self._values["decay_log_margin"]

    @property
    def universality_tolerance(self) -> Opt[float]:
        return self._values.get("universality_tolerance")

    @property
    def bootstrap(self) -> int:
        return self._values["bootstrap"]

    @property
    def radial_max(self) -> float:
        return self._values["radial_max"]

    @property
    def potential_max(self) -> float:
        return self._values["potential_max"]

    @property
    def exponent_margin(self) -> float:
        return self._values["exponent_margin"]

    @property
    def dump_zeros(self) -> bool:
        return self._values["dump_zeros"]

    def as_dict(self) -> Dict[str, Any]:
        return dict(self._values)


class MomentsConf:
    """Expose moment certification parameters as properties."""

    def __init__(self, config: _ConfType) -> None:
        section = _section(config, "moments", _MOMENTS)
        self._nu = list(section["nu"])  # type: List[float]
        self._k_grid = section.get("k_grid")  # type: Opt[List[int]]
        self._trials = section["trials"]  # type: int
        self._r_grid = list(section["r_grid"])  # type: List[float]
        if any(nu < 1.0 for nu in self._nu):
            logger.error(_("moments:nu values must be at least 1"))
            raise IncorrectParameter(_("moments:nu below 1"))

    @property
    def nu(self) -> List[float]:
        return self._nu

    @property
    def k_grid(self) -> Opt[List[int]]:
        """Return dimensions k, None meaning d_p along the p grid."""
        return self._k_grid

    @property
    def trials(self) -> int:
        return self._trials

    @property
    def r_grid(self) -> List[float]:
        return self._r_grid


class LabConf:
    """Read config file and expose experiment configuration."""

    def __init__(self, file: str) -> None:
        p = Path(file).expanduser()
        if not p.is_absolute() and not p.is_file():
            p = Path.home() / file
        if not p.is_file():
            logger.critical(_("File %s does not exist"), str(p))
            raise MissingConfigurationFile(str(p))

        yaml_text = p.read_text()
        try:
            logger.info(_("Loading YAML configuration %s"), file)
            self._config = load(yaml_text, _ConfSchema).data
        except YAMLValidationError:
            logger.critical(_("Incorrect content in YAML configuration %s"), file)
            logger.critical(_("%s"), sys.exc_info()[1])
            raise
        except YAMLError:  # pragma: no cover
            logger.critical(_("Error while reading YAML configuration %s"), file)
            raise
        self._file = str(p)

        main = self._config["main"]
        self._experiment = main["experiment"]  # type: str
        self._master_seed = main["master_seed"]  # type: int
        self._trials = main.get("trials", 100)  # type: int
        self._workers = main.get("workers", 1)  # type: int
        self._output_dir = main.get("output_dir", "zeros_lab_out")  # type: str
        self._cache_dir = main.get("cache_dir")  # type: Opt[str]
        self._p_grid = list(self._config["p_grid"])  # type: List[int]

        if self._master_seed < 0 or self._master_seed >= 2 ** 64:
            logger.error(_("main:master_seed must be a 64 bits unsigned integer"))
            raise IncorrectParameter(_("main:master_seed out of range"))
        if self._trials < 1:
            logger.error(_("main:trials must be at least 1"))
            raise IncorrectParameter(_("main:trials must be at least 1"))
        if not self._p_grid or any(p < 1 for p in self._p_grid):
            logger.error(_("p_grid must contain positive integers"))
            raise IncorrectParameter(_("p_grid must contain positive integers"))
        if any(a >= b for a, b in zip(self._p_grid, self._p_grid[1:])):
            logger.error(_("p_grid must be strictly increasing"))
            raise IncorrectParameter(_("p_grid must be strictly increasing"))

        self._weight = WeightConf(self._config)
        self._ensembles = [EnsembleConf(e) for e in self._config["ensembles"]]
        self._quadrature = QuadratureConf(self._config)
        self._analysis = AnalysisConf(self._config)
        self._moments = MomentsConf(self._config)
        tuning = _section(self._config, "tuning", _TUNING)
        self._chunk_size = tuning["chunk_size"]  # type: int
        self._batch_size = tuning["batch_size"]  # type: int

    def override(
        self,
        seed: Opt[int] = None,
        workers: Opt[int] = None,
        output_dir: Opt[str] = None,
        cache_dir: Opt[str] = None,
    ) -> None:
        """Apply command line overrides."""
        if seed is not None:
            self._master_seed = seed
        if workers is not None:
            self._workers = workers
        if output_dir is not None:
            self._output_dir = output_dir
        if cache_dir is not None:
            self._cache_dir = cache_dir

    @property
    def version(self) -> str:
        """Return version."""
        return __version__

    @property
    def file(self) -> str:
        return self._file

    @property
    def experiment(self) -> str:
        """Return experiment kind."""
        return self._experiment

    @property
    def master_seed(self) -> int:
        """Return master seed, root of every trial seed."""
        return self._master_seed

    @property
    def trials(self) -> int:
        """Return number of trials per (p, ensemble) cell."""
        return self._trials

    @property
    def workers(self) -> int:
        """Return number of worker processes, 0 meaning one per physical core."""
        if self._workers <= 0:
            return psutil.cpu_count(logical=False) or 1
        return self._workers

    @property
    def output_dir(self) -> str:
        return self._output_dir

    @property
    def cache_dir(self) -> Opt[str]:
        return self._cache_dir

    @property
    def p_grid(self) -> List[int]:
        return self._p_grid

    @property
    def weight(self) -> WeightConf:
        return self._weight

    @property
    def ensembles(self) -> List[EnsembleConf]:
        return self._ensembles

    @property
    def quadrature(self) -> QuadratureConf:
        return self._quadrature

    @property
    def analysis(self) -> AnalysisConf:
        return self._analysis

    @property
    def moments(self) -> MomentsConf:
        return self._moments

    @property
    def tuning_chunk_size(self) -> int:
        """Return tuning parameter."""
        return self._chunk_size

    @property
    def tuning_batch_size(self) -> int:
        """Return tuning parameter."""
        return self._batch_size

    def as_dict(self) -> Dict[str, Any]:
        """Return the effective configuration, overrides included."""
        config = dict(self._config)
        config["main"] = dict(config["main"])
        config["main"].update(
            {
                "master_seed": self._master_seed,
                "workers": self._workers,
                "output_dir": self._output_dir,
            }
        )
        if self._cache_dir is not None:
            config["main"]["cache_dir"] = self._cache_dir
        return config
