import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsefield.errors import DomainError, InsufficientDataError
from pulsefield.fitting import batch_slopes, fit_power_log


def _pairs(fn, ks):
    s = 2.0 ** -np.asarray(ks, dtype=float)
    return np.column_stack([s, fn(s)])


def test_exact_power_law():
    slope, diag = fit_power_log(_pairs(lambda s: s**0.5, range(2, 20)))
    assert slope == pytest.approx(0.5, abs=1e-12)
    assert diag.r_squared == pytest.approx(1.0) and diag.n_points == 18
    assert diag.warning is not None and diag.log_power is None


def test_log_corrected_power_law_exact():
    pairs = _pairs(lambda s: s**0.5 * np.abs(np.log2(s)) ** 2, range(2, 20))
    assert fit_power_log(pairs, 2.0)[0] == pytest.approx(0.5, abs=1e-12)


def _ls_slope_oracle(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


def test_uncorrected_log_factor_bias_matches_oracle():
    ks = range(8, 21)
    pairs = _pairs(lambda s: s**0.5 * np.abs(np.log2(s)) ** 2, ks)
    slope = fit_power_log(pairs)[0]
    xs = [-float(k) for k in ks]
    ys = [-0.5 * k + 2 * math.log2(k) for k in ks]
    assert slope == pytest.approx(_ls_slope_oracle(xs, ys), abs=1e-12)
    assert slope < 0.5  # the log factor biases the raw slope downward


@pytest.mark.xfail(strict=True, reason="stated bracket [0.35, 0.5) is inconsistent with the least-squares "
                   "slope of this synthetic law, which is about 0.28")
def test_uncorrected_log_factor_bias_in_stated_bracket():
    pairs = _pairs(lambda s: s**0.5 * np.abs(np.log2(s)) ** 2, range(8, 21))
    assert 0.35 <= fit_power_log(pairs)[0] < 0.5


def test_errors():
    with pytest.raises(InsufficientDataError):
        fit_power_log([(0.5, 1.0), (0.25, 1.0), (0.125, 1.0)])
    with pytest.raises(DomainError):
        fit_power_log([(0.5, 1.0), (0.25, 0.0), (0.125, 1.0), (0.0625, 1.0)])
    with pytest.raises(DomainError):
        fit_power_log([(0.5, 1.0), (0.5, 2.0), (0.125, 1.0), (0.0625, 1.0)])
    with pytest.raises(DomainError):
        fit_power_log([(1.0, 1.0), (0.5, 2.0), (0.125, 1.0), (0.0625, 1.0)], 1.0)


@given(st.floats(-2, 2), st.floats(-5, 5), st.floats(0.01, 100))
@settings(max_examples=200, deadline=None)
def test_scale_invariance(h, shift, amp):
    base = fit_power_log(_pairs(lambda s: s**h * (1 + 0.1 * np.sin(np.log2(s))), range(1, 15)))[0]
    scaled = fit_power_log(_pairs(lambda s: amp * s**h * (1 + 0.1 * np.sin(np.log2(s))), range(1, 15)))[0]
    assert scaled == pytest.approx(base, abs=1e-9)


def test_batch_matches_single_and_skips_nan():
    rng = np.random.default_rng(0)
    ks = np.arange(3, 12)
    logs = rng.normal(size=(20, ks.size)) - 0.6 * ks
    logs[3, [0, 4]] = np.nan
    slope, r2 = batch_slopes(-ks.astype(float), logs)
    for i in range(20):
        ok = np.isfinite(logs[i])
        ref, diag = fit_power_log(np.column_stack([2.0 ** -ks[ok], 2.0 ** logs[i, ok]]))
        assert slope[i] == pytest.approx(ref, abs=1e-10)
        assert r2[i] == pytest.approx(diag.r_squared, abs=1e-10)
