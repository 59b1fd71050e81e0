"""
Test each method of store_file module.
"""
import csv
import json
import logging
import math

import numpy as np
import pytest

from bergman.zeros import ZeroSet
from zeros_lab.store_file import (
    MOMENT_COLUMNS,
    StoreFile,
    StoreFileException,
    clean,
    label_dir,
    read_zeros,
)


@pytest.fixture
def store(tmp_path):
    with StoreFile(str(tmp_path / "out")) as s:
        yield s


def test_version(store):
    """Check if version is defined."""
    logging.debug("package version: %s", store.version)
    assert store.version


def test_clean():
    """numpy scalars are converted, non finite floats become None."""
    value = {
        1: np.float64(0.5),
        "a": [np.int64(3), math.inf, (np.nan, "x")],
        "b": np.bool_(True),
    }
    assert clean(value) == {"1": 0.5, "a": [3, None, [None, "x"]], "b": True}
    assert isinstance(clean(np.int64(3)), int)


def test_label_dir():
    assert label_dir("heavy_tail_iid(rho=3.0)") == "heavy_tail_iid_rho=3.0"
    assert label_dir("gaussian") == "gaussian"


def test_store_report(store):
    """Report is written as sorted, indented JSON."""
    file = store.store_report({"passed": True, "rows": [{"d": math.nan}], "a": 1})
    assert file == store.output_dir / "report.json"
    text = file.read_text()
    assert text.index('"a"') < text.index('"passed"')
    assert json.loads(text) == {"a": 1, "passed": True, "rows": [{"d": None}]}


def test_store_trials(store):
    """One JSON line per record, in-memory keys dropped."""
    records = [
        {"p": 10, "trial": t, "d_p": np.int64(11), "zero_radii": [1.0]} for t in range(3)
    ]
    file = store.store_trials(records)
    lines = file.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert first == {"p": 10, "trial": 0, "d_p": 11}


def test_store_zeros(store):
    """Zeros are written exactly and read back."""
    finite = [1.0 / 3.0 + 0.1j, -2.5e-17 - 1.0e10j]
    zs = ZeroSet(finite, 2, 4)
    file = store.store_zeros("heavy_tail_iid(rho=3.0)", 4, 7, zs)
    assert file == store.output_dir / "zeros" / "heavy_tail_iid_rho=3.0" / "zeros_p4_t7.csv"
    lines = file.read_text().splitlines()
    assert lines[0] == "re,im"
    assert lines[-1] == "inf,2"
    read, inf_mult = read_zeros(file)
    assert read == finite
    assert inf_mult == 2
    with pytest.raises(StoreFileException):
        store.store_zeros("()", 4, 7, zs)


def test_store_moments(store):
    rows = [
        {"kind": "gaussian", "k": 8, "nu": 1.0, "estimate": 0.7, "stderr": 0.01,
         "trials": 1000, "seed": 3, "u": "e1"},
    ]
    file = store.store_moments(rows)
    with file.open(newline="") as f:
        reader = csv.DictReader(f)
        assert reader.fieldnames == MOMENT_COLUMNS
        read = list(reader)
    assert len(read) == 1
    assert read[0]["kind"] == "gaussian"
    assert float(read[0]["estimate"]) == 0.7
