#!/usr/bin/env python3
"""
Program running zeros and Bergman kernel experiments

"""
import argparse
import logging
import shutil
import sys
from importlib import resources
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path

import yappi
from strictyaml import YAMLError
from tabulate import tabulate

from bergman.bergman_space import BergmanSpaceException
from bergman.ensembles import EnsembleException
from bergman.weights import WeightException
from bergman.zeros import ZerosException

from . import _, __version__
from .basis_cache import BasisCacheException
from .experiments import EXPERIMENT_DEFS, ExperimentException, replay_trial
from .jobs import JobsException
from .labconf import LabConf, LabConfException
from .store_file import StoreFile, StoreFileException

logger = logging.getLogger("zeros_lab")

EXIT_PASSED = 0
EXIT_ERROR = 1
EXIT_FAILED = 2

_ERRORS = (
    LabConfException,
    YAMLError,
    ExperimentException,
    BergmanSpaceException,
    EnsembleException,
    WeightException,
    ZerosException,
    BasisCacheException,
    JobsException,
    StoreFileException,
    OSError,
)


def arguments(args):
    """Define and parse command arguments.

    Args:
        args ([str]): command line parameters as list of strings

    Returns:
        :obj:`argparse.Namespace`: command line parameters namespace
    """
    # Options shared by every subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=_("Configuration file name"), required=True)
    common.add_argument("--seed", help=_("Override master seed"), type=int)
    common.add_argument("--workers", help=_("Override number of workers"), type=int)
    common.add_argument("--out", help=_("Override output directory"))
    common.add_argument("--cache", help=_("Basis cache directory"))

    parser = argparse.ArgumentParser(
        description="Script that runs random zeros and Bergman kernel experiments"
        + " and writes machine readable reports."
    )
    parser.add_argument(
        "--version",
        help=_("Print version number"),
        action="version",
        version="%(prog)s {version}".format(version=__version__),
    )
    out_group = parser.add_mutually_exclusive_group()
    out_group.add_argument(
        "--verbose", help=_("Increase output verbosity"), action="store_true"
    )
    out_group.add_argument(
        "--quiet", help=_("Reduce output verbosity"), action="store_true"
    )
    parser.add_argument(
        "--init", help=_("Initialize the YAML configuration file"), metavar="FILE"
    )
    parser.add_argument(
        "--profile", help=_("Gather and print profiling times"), action="store_true"
    )
    subparsers = parser.add_subparsers(dest="command")
    for name, experiment in EXPERIMENT_DEFS.items():
        subparsers.add_parser(name, parents=[common], help=experiment.__doc__)
    replay = subparsers.add_parser(
        "replay", parents=[common], help=_("Replay a single trial from its seed chain")
    )
    replay.add_argument("--p", help=_("Level p"), type=int, required=True)
    replay.add_argument("--ensemble", help=_("Ensemble index"), type=int, required=True)
    replay.add_argument("--trial", help=_("Trial index"), type=int, required=True)

    return parser.parse_args(args)


def init(file: str):
    """Copy template YAML file to file, relative to home directory."""
    yaml_dst = Path(file).expanduser()
    if not yaml_dst.is_absolute():
        yaml_dst = Path.home() / file
    with resources.as_file(
        resources.files("zeros_lab") / "data" / "lab_template.yaml"
    ) as yaml_src:
        logger.info(_("Creating YAML configuration file %s, from %s"), yaml_dst, yaml_src)
        shutil.copyfile(str(yaml_src), str(yaml_dst))
    logger.info(_("Please edit %s before running the script"), yaml_dst)


def summary(report) -> str:
    """Return the report rows and verdicts as console tables."""
    table = []
    for row in report["rows"]:
        line = {}
        for key, value in row.items():
            if isinstance(value, dict):
                if "median" in value:
                    line[key] = value["median"]
            elif not isinstance(value, list):
                line[key] = value
        table.append(line)
    verdicts = [[v["name"], v["passed"]] for v in report["verdicts"]]
    return (
        tabulate(table, headers="keys", tablefmt="psql")
        + "\n"
        + tabulate(verdicts, headers=["verdict", "passed"], tablefmt="psql")
    )


def run_command(args) -> int:
    """Run the experiment or replay selected by args, return exit code."""
    cfg = LabConf(args.config)
    cfg.override(
        seed=args.seed, workers=args.workers, output_dir=args.out, cache_dir=args.cache
    )
    with StoreFile(cfg.output_dir) as store:
        if args.command == "replay":
            record = replay_trial(cfg, args.p, args.ensemble, args.trial, store)
            record.pop("zero_radii", None)
            print(tabulate(sorted(record.items()), tablefmt="psql"))
            return EXIT_PASSED
        if args.command != cfg.experiment:
            logger.warning(
                _("Running %s, configuration file declares %s"),
                args.command,
                cfg.experiment,
            )
        experiment = EXPERIMENT_DEFS[args.command](cfg, store)
        report = experiment.run()
    print(summary(report))
    return EXIT_PASSED if report["passed"] else EXIT_FAILED


def main(args):
    """Main entry point allowing external calls

    Args:
      args ([str]): command line parameter list

    Returns:
      int: exit code, 0 if all verdicts passed, 2 on verdict failure, 1 on error
    """
    # Create $HOME/tmp directory if it does not exist
    (Path.home() / "tmp").mkdir(exist_ok=True)

    # create file handler which logs even debug messages
    fh = TimedRotatingFileHandler(
        str(Path.home()) + "/tmp/zeros_lab.log",
        when="midnight",
        interval=1,
        backupCount=100,
    )
    # create console handler with a higher log level
    ch = logging.StreamHandler()
    # create formatter and add it to the handlers
    formatter = logging.Formatter(
        "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
    )
    fh.setFormatter(formatter)
    ch.setFormatter(formatter)
    # add the handlers to the logger
    logger.handlers.clear()
    logger.addHandler(fh)
    logger.addHandler(ch)

    # Get command line arguments
    args = arguments(args)

    # Start profiling if required
    if args.profile:
        yappi.start()
        logger.info(_("Started yappi"))

    # Define verbosity
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    elif args.quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)

    logger.info(_("%s, version %s"), sys.argv[0], __version__)
    logger.info(_("Arguments: %s"), sys.argv[1:])

    code = EXIT_PASSED
    if args.init:
        logger.info(_("Creating YAML configuration file"))
        init(args.init)
    elif args.command is None:
        logger.critical(_("No command given, see --help"))
        code = EXIT_ERROR
    else:
        try:
            code = run_command(args)
        except _ERRORS as exc:
            logger.critical(_("Execution error: %s"), exc)
            code = EXIT_ERROR

    # Stop and output profiling if required
    if args.profile:
        logger.info(_("Printing yappi results"))
        yappi.stop()
        yappi.get_func_stats().print_all()
        yappi.get_thread_stats().print_all()

    return code


def run():
    """Entry point for console_scripts"""
    sys.exit(main(sys.argv[1:]))


# Main wrapper
if __name__ == "__main__":
    run()
