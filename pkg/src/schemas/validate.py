#!/usr/bin/env python3
"""
Validate experiment output files against JSON schemas.
Generate property reports from schema.

"""
import argparse
import json
import logging
import pprint
import sys
from importlib import resources
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Any, Dict

from jsonschema.exceptions import ValidationError
from jsonschema.validators import validator_for

from . import _, __version__

logger = logging.getLogger("zeros_lab.validate")

# Schema name -> output file validated by it
SCHEMA_FILES = {"report": "report.json", "trial": "trials.jsonl"}


def arguments(args):
    """Define and parse command arguments.

    Args:
        args ([str]): command line parameters as list of strings

    Returns:
        :obj:`argparse.Namespace`: command line parameters namespace
    """
    # Get options
    parser = argparse.ArgumentParser(
        description="JSON schemas validation and reporting."
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
        "--report",
        help=_("Report of the properties in the schemas"),
        action="store_true",
    )
    parser.add_argument("output_dir", help=_("Experiment output directory"), nargs="?")

    return parser.parse_args(args)


def load_schema(schema: str) -> Dict[str, Any]:
    """Return the named schema, checked against its meta schema."""
    text = (resources.files(__package__) / (schema + ".json")).read_text()
    schema_js = json.loads(text)
    validator_for(schema_js).check_schema(schema_js)
    return schema_js


def validate_output(output_dir: str) -> int:
    """Validate report.json and trials.jsonl in output_dir.

    Returns
    -------
    int
        Number of invalid documents.
    """
    errors = 0
    for schema, name in SCHEMA_FILES.items():
        schema_js = load_schema(schema)
        instance = validator_for(schema_js)(schema_js)
        file = Path(output_dir).expanduser() / name
        if not file.is_file():
            logger.info(_("No %s file in %s"), name, output_dir)
            continue
        logger.info(_("Validating %s with schema %s"), file, schema)
        with file.open() as f:
            lines = f.readlines() if name.endswith(".jsonl") else [f.read()]
        for nb, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                instance.validate(json.loads(line))
            except (ValidationError, ValueError) as exc:
                logger.error(_("%s, document %s is not valid: %s"), file, nb, exc)
                errors += 1
        logger.debug(_("%s documents checked in %s"), len(lines), file)
    return errors


def report() -> None:
    """Print of list of titled properties in the schemas."""
    pp = pprint.PrettyPrinter(indent=2)
    for schema in SCHEMA_FILES:
        schema_js = load_schema(schema)
        logger.info(_("Properties of schema %s"), schema)
        for props in schema_js.get("properties", {}).values():
            if "title" in props:
                pp.pprint(props)
        for defs in schema_js.get("definitions", {}).values():
            for props in defs.get("properties", {}).values():
                if "title" in props:
                    pp.pprint(props)


def main(args):
    """Main entry point allowing external calls

    Args:
      args ([str]): command line parameter list

    Returns:
      int: exit code, 1 if any document is invalid
    """
    # Create $HOME/tmp directory if it does not exist
    (Path.home() / "tmp").mkdir(exist_ok=True)

    # create file handler which logs even debug messages
    fh = TimedRotatingFileHandler(
        str(Path.home()) + "/tmp/zeros_lab_validate.log",
        when="midnight",
        interval=1,
        backupCount=100,
    )
    # create console handler with a higher log level
    ch = logging.StreamHandler()
    # create formatter and add it to the handlers
    formatter = logging.Formatter(
        "%(asctime)s - %(levelname)s - %(module)s:%(funcName)s - %(message)s"
    )
    fh.setFormatter(formatter)
    ch.setFormatter(formatter)
    # add the handlers to the logger
    logger.handlers.clear()
    logger.addHandler(fh)
    logger.addHandler(ch)

    # Get command line arguments
    args = arguments(args)

    # Define verbosity
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    elif args.quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)

    logger.info(_("%s, version %s"), sys.argv[0], __version__)
    logger.info(_("Arguments: %s"), sys.argv[1:])

    # Schema reporting
    if args.report:
        logger.info(_("Reporting on schemas"))
        report()

    if args.output_dir is None:
        return 0
    if not Path(args.output_dir).expanduser().is_dir():
        logger.critical(_("Directory %s does not exist"), args.output_dir)
        return 1
    errors = validate_output(args.output_dir)
    if errors:
        logger.error(_("%s invalid documents"), errors)
        return 1
    logger.info(_("All documents are valid"))
    return 0


def run():
    """Entry point for console_scripts"""
    sys.exit(main(sys.argv[1:]))


# Main wrapper
if __name__ == "__main__":
    run()
