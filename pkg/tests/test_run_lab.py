"""
Test run_lab main.
"""
import json
from unittest.mock import patch

import pytest

from zeros_lab import run_lab

LAB_CONFIG = """
main:
    experiment: {experiment}
    master_seed: 7
    trials: 2
weight:
    kind: fubini_study
p_grid:
    - 4
    - 8
ensembles:
    - kind: gaussian
quadrature:
    radial_base: 20
    angular_base: 16
    distance_radial: 16
    distance_angular: 16
analysis:
    r_points: 20
    eval_points: 100
    potential_max: {potential_max}
"""


@pytest.fixture
def lab_file(tmp_path):
    def _write(experiment="equidist", potential_max=1.0):
        file = tmp_path / (experiment + ".yaml")
        file.write_text(
            LAB_CONFIG.format(experiment=experiment, potential_max=potential_max)
        )
        return str(file)

    return _write


def _exit_code(argv):
    with patch("sys.argv", ["py.test"] + argv):
        with pytest.raises(SystemExit) as exc:
            run_lab.run()
    return exc.value.code


@pytest.mark.order(index=500)
def test_version():
    """Check if version is defined."""
    with patch("sys.argv", ["py.test", "--version"]):
        with pytest.raises(SystemExit):
            run_lab.run()


@pytest.mark.order(index=510)
def test_init(tmp_path):
    """Check --init parameter."""
    file_yaml = tmp_path / "lab_pytest.yaml"
    assert _exit_code(["--init", str(file_yaml)]) == run_lab.EXIT_PASSED
    assert file_yaml.is_file()
    assert "master_seed" in file_yaml.read_text()


def test_no_command():
    assert _exit_code([]) == run_lab.EXIT_ERROR


def test_arguments():
    args = run_lab.arguments(
        ["replay", "--config", "a.yaml", "--p", "8", "--ensemble", "0", "--trial", "3"]
    )
    assert (args.command, args.p, args.ensemble, args.trial) == ("replay", 8, 0, 3)
    args = run_lab.arguments(["--quiet", "moments", "--config", "a.yaml", "--seed", "5"])
    assert args.quiet
    assert args.seed == 5
    assert args.workers is None
    with pytest.raises(SystemExit):
        run_lab.arguments(["equidist"])


@pytest.mark.order(index=520)
def test_passed(tmp_path, lab_file):
    """All verdicts passed, report written to the overridden directory."""
    out = tmp_path / "diag"
    code = _exit_code(
        ["bergman-diag", "--config", lab_file("bergman-diag"), "--out", str(out), "--seed", "11"]
    )
    assert code == run_lab.EXIT_PASSED
    report = json.loads((out / "report.json").read_text())
    assert report["passed"]
    assert report["master_seed"] == 11


@pytest.mark.order(index=530)
def test_failed_verdict(tmp_path, lab_file):
    """A threshold no run can meet gives exit code 2."""
    out = tmp_path / "equidist"
    code = _exit_code(
        ["--quiet", "equidist", "--config", lab_file(potential_max=0.0), "--out", str(out)]
    )
    assert code == run_lab.EXIT_FAILED
    assert (out / "trials.jsonl").is_file()


def test_errors(tmp_path, lab_file):
    """Configuration and experiment errors give exit code 1."""
    missing = str(tmp_path / "missing.yaml")
    assert _exit_code(["equidist", "--config", missing]) == run_lab.EXIT_ERROR
    code = _exit_code(
        ["universality", "--config", lab_file(), "--out", str(tmp_path / "universality")]
    )
    assert code == run_lab.EXIT_ERROR


def test_replay(tmp_path, lab_file):
    out = tmp_path / "replay"
    code = _exit_code(
        [
            "replay",
            "--config",
            lab_file(),
            "--out",
            str(out),
            "--p",
            "4",
            "--ensemble",
            "0",
            "--trial",
            "1",
        ]
    )
    assert code == run_lab.EXIT_PASSED
    assert (out / "zeros" / "gaussian" / "zeros_p4_t1.csv").is_file()


def test_summary():
    report = {
        "rows": [
            {"p": 4, "radial_cdf_dist": {"median": 0.25, "n": 2}, "seed_chain": [1, 4, 0]},
        ],
        "verdicts": [{"name": "trace_identity", "passed": True, "details": {}}],
    }
    text = run_lab.summary(report)
    assert "radial_cdf_dist" in text
    assert "seed_chain" not in text
    assert "trace_identity" in text
