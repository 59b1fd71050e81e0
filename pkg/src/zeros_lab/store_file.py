"""Methods to store experiment results to files.


Methods

- store_report      - Write report.json
- store_trials      - Write per-trial records as JSON lines
- store_zeros       - Write one zero set as CSV
- store_moments     - Write moment tables as CSV

"""
import csv
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List

from bergman.zeros import ZeroSet

from . import __version__, _

logger = logging.getLogger("zeros_lab.store_file")

MOMENT_COLUMNS = ["kind", "k", "nu", "estimate", "stderr", "trials", "seed"]
# Record keys kept in memory only
_PRIVATE_KEYS = ("zero_radii",)


class StoreFileException(Exception):
    """An exception occurred while storing results."""


def clean(value: Any) -> Any:
    """Return value with numpy scalars converted and non finite floats as None."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def label_dir(label: str) -> str:
    """Return a directory name for an ensemble label."""
    return re.sub(r"[^A-Za-z0-9._=-]", "_", label).strip("_")


class StoreFile:
    """Provides store to file methods, under an output directory."""

    def __init__(self, output_dir: str):
        self._dir = Path(output_dir).expanduser()

    def __enter__(self):
        logger.debug(_("Entry into StoreFile"))
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        logger.debug(_("Exit from StoreFile"))

    @property
    def version(self):
        """Return version."""
        return __version__

    @property
    def output_dir(self) -> Path:
        return self._dir

    def _mkdir(self, path: Path) -> Path:
        if not path.is_dir():
            try:
                path.mkdir(parents=True, exist_ok=True)
            except OSError:
                logger.error(_("Creation of the directory %s failed"), path)
                raise
            else:
                logger.info(_("Successfully created the directory %s"), path)
        return path

    # ---------------
    # Generic methods
    # ---------------
    def store_report(self, report: Dict[str, Any]) -> Path:
        """Write report to report.json.

        Parameters
        ----------
        report : dict
            Experiment report.

        Returns
        -------
        Path
            File written.
        """
        file = self._mkdir(self._dir) / "report.json"
        text = json.dumps(clean(report), sort_keys=True, indent=4, separators=(",", ": "))
        logger.debug(_("Storing report to %s"), file)
        file.write_text(text + "\n")
        return file

    def store_trials(self, records: Iterable[Dict[str, Any]]) -> Path:
        """Write one JSON line per trial record to trials.jsonl."""
        file = self._mkdir(self._dir) / "trials.jsonl"
        count = 0
        with file.open("w") as f:
            for record in records:
                public = {k: v for k, v in record.items() if k not in _PRIVATE_KEYS}
                f.write(json.dumps(clean(public), sort_keys=True) + "\n")
                count += 1
        logger.debug(_("Stored %d trial records to %s"), count, file)
        return file

    def store_zeros(self, label: str, p: int, trial: int, zs: ZeroSet) -> Path:
        """Write the zero set as CSV, header re,im and a trailing inf line."""
        name = label_dir(label)
        if not name:
            logger.error(_("Ensemble label %s gives an empty directory name"), label)
            raise StoreFileException(_("Invalid ensemble label {}").format(label))
        path = self._mkdir(self._dir / "zeros" / name)
        file = path / "zeros_p{}_t{}.csv".format(p, trial)
        with file.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["re", "im"])
            for z in zs.finite_zeros:
                writer.writerow([repr(float(z.real)), repr(float(z.imag))])
            writer.writerow(["inf", zs.multiplicity_at_infinity])
        return file

    def store_moments(self, rows: List[Dict[str, Any]]) -> Path:
        """Write moment table rows to moments.csv."""
        file = self._mkdir(self._dir) / "moments.csv"
        with file.open("w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=MOMENT_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        logger.debug(_("Stored %d moment rows to %s"), len(rows), file)
        return file


def read_zeros(file: Path):
    """Return (finite zeros, multiplicity at infinity) from a zero CSV file."""
    finite = []
    inf_mult = 0
    with Path(file).open(newline="") as f:
        reader = csv.reader(f)
        next(reader)
        for re_, im_ in reader:
            if re_ == "inf":
                inf_mult = int(im_)
            else:
                finite.append(complex(float(re_), float(im_)))
    return finite, inf_mult
