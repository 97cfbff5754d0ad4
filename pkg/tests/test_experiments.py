import json

import numpy as np
import pytest

from conftest import make_real
from pulsefield.experiments import (
    _judge, monotone_violations, resolvable_window, verify_coverage,
    verify_level_counts, verify_overlap_bound, verify_spectrum, verify_uniform_regularity,
)
from pulsefield.point_process import ModelParams, poisson_parameter
from pulsefield.pulse_field import Signal
from pulsefield import experiments


def test_level_counts_single_trial_low_power():
    r = verify_level_counts(ModelParams(0.5, 0.5, j_max=12), trials=1)
    assert r.passed
    assert any("low power" in f for f in r.flags)
    assert any("dispersion undefined" in f for f in r.flags)


def test_level_counts_mean_example():
    assert poisson_parameter(10, 0.5) == pytest.approx(2**5 - 2**4.5, rel=1e-12)
    r = verify_level_counts(ModelParams(0.5, 0.5, j_max=12), trials=500)
    row = next(r for r in r.details["levels"] if r["j"] == 10)
    assert abs(row["mean"] - 9.37) <= 3 * row["stderr"]
    assert r.statistic <= 3.0


def test_judge_senses():
    assert _judge(1.05, 1.0, 0.1, "two_sided") and not _judge(1.2, 1.0, 0.1, "two_sided")
    assert _judge(0.95, 1.0, 0.1, "at_least") and not _judge(0.85, 1.0, 0.1, "at_least")
    assert _judge(-5.0, 0.0, 0.0, "at_most") and not _judge(0.1, 0.0, 0.0, "at_most")
    assert not _judge(float("nan"), 0.0, 1.0, "two_sided")


def test_overlap_single_pulse(monkeypatch):
    p = ModelParams(0.5, 0.5, j_max=12)
    real = make_real([2.0**5.5], [0.5], j_max=12)
    monkeypatch.setattr(experiments, "sample_realization", lambda params: real)
    r = verify_overlap_bound(p, seeds=[1])
    assert max(max(row) for row in r.details["M_j_per_seed"]) <= 1
    assert r.passed


def test_overlap_simulated():
    r = verify_overlap_bound(ModelParams(0.5, 0.5, j_max=14))
    assert r.statistic <= 0 and r.passed


def test_coverage_truncation_too_coarse():
    r = verify_coverage(ModelParams(0.5, 0.5, j_max=4), seeds=[1])
    assert not r.passed
    assert any("truncation too coarse" in f for f in r.flags)


def test_uniform_regularity_smooth_input_non_applicable():
    p = ModelParams(0.5, 0.5, j_max=12)
    sine = Signal.from_function(lambda x: np.sin(2 * np.pi * x), p.grid_bits)
    r = verify_uniform_regularity(p, seeds=[1], field_fn=lambda seed: sine)
    assert r.statistic >= 0.9 and r.statistic <= 1.0
    assert r.details["mean_modulus_raw"] >= 0.9
    assert any("non-applicable" in f for f in r.flags)
    assert not r.passed


def test_spectrum_constant_field_single_bin():
    p = ModelParams(0.9, 0.4, j_max=23)
    const = Signal.from_function(lambda x: np.zeros_like(x), 14)
    r = verify_spectrum(p, seeds=[1], field_fn=lambda seed: const)
    assert r.details["occupied_bins"] == 1
    assert any("vacuously" in f for f in r.flags)
    assert r.details["median_h"] == 1.0


def test_monotone_violations():
    assert monotone_violations(np.array([0.1, 0.2, -np.inf, 0.3])) == 0
    assert monotone_violations(np.array([0.3, 0.2, 0.25, 0.1])) == 2


def test_resolvable_window():
    assert resolvable_window(ModelParams(0.5, 0.5, j_max=18)) == (3, 9)
    assert resolvable_window(ModelParams(0.9, 0.4, j_max=23, grid_bits=25)) == (3, 9)


def test_reports_reproducible_and_serializable(tmp_path):
    p = ModelParams(0.5, 0.5, j_max=10)
    a = verify_coverage(p, seeds=[1, 2])
    b = verify_coverage(p, seeds=[1, 2])
    assert a.statistic == b.statistic and a.details == b.details
    a.write(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["pass"] == a.passed and d["name"] == "coverage" and d["params"]["alpha"] == 0.5
    a.write_text(tmp_path / "r.txt")
    text = (tmp_path / "r.txt").read_text()
    assert text.startswith("experiment") and ("PASS" in text or "FAIL" in text)


def test_order_independence():
    p = ModelParams(0.5, 0.5, j_max=10)
    first = verify_coverage(p, seeds=[3]).statistic
    verify_level_counts(p, trials=20)
    assert verify_coverage(p, seeds=[3]).statistic == first


def test_threaded_matches_serial(monkeypatch):
    p = ModelParams(0.5, 0.5, j_max=10)
    serial = verify_coverage(p, seeds=[1, 2, 3]).to_dict()
    monkeypatch.setenv("PULSEFIELD_THREADS", "3")
    assert verify_coverage(p, seeds=[1, 2, 3]).to_dict() == serial
