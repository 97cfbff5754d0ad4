import math
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsefield.errors import OutOfWindowError, ParameterError
from pulsefield.point_process import (
    EPS_SENTINEL, ModelParams, default_p0_gamma, eps_level, eps_tilde_level, level_slice, level_stats,
    poisson_parameter, read_realization, sample_realization,
)
from conftest import make_real


def test_default_p0_gamma_examples():
    assert default_p0_gamma(0.9, 0.4) == (9, 1.0)
    assert default_p0_gamma(0.5, 0.5) == (7, 1.0)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
@settings(max_examples=1000, deadline=None)
def test_default_p0_strictly_above_bound(alpha, eta):
    p0, gamma = default_p0_gamma(alpha, eta)
    assert p0 > (3 + 3 * alpha) / (1 - alpha * eta)
    assert gamma == 1.0


@pytest.mark.parametrize("kw, msg", [
    (dict(alpha=1.5, eta=0.5), "alpha must lie in (0,1)"),
    (dict(alpha=0.5, eta=0.0), "eta must lie in (0,1)"),
    (dict(alpha=0.5, eta=0.5, gamma=2.5), "gamma must lie in [1, 1/eta]"),
    (dict(alpha=0.5, eta=0.5, p0=6), "p0 must be an integer >"),
    (dict(alpha=0.5, eta=0.5, j_max=10, grid_bits=11), "grid-bits must be >= jmax + 2"),
    (dict(alpha=0.5, eta=0.5, pulse_kind="box"), "pulse must be one of"),
    (dict(alpha=0.5, eta=0.5, seed=-1), "seed must be"),
])
def test_params_validation(kw, msg):
    with pytest.raises(ParameterError, match=re.escape(msg)):
        ModelParams(**kw)


def test_params_defaults_and_replace():
    p = ModelParams(0.5, 0.5, j_max=10)
    assert (p.p0, p.gamma, p.grid_bits) == (7, 1.0, 12)
    q = p.replace(j_max=14)
    assert q.grid_bits == 16 and q.seed == p.seed


def test_eps_examples():
    assert eps_level(8, 0.5) == pytest.approx(0.75, abs=1e-15)
    assert eps_tilde_level(8, 0.5) == pytest.approx(math.log2(384) / 4, abs=1e-15)
    assert eps_tilde_level(8, 0.5) == pytest.approx(2.1462, abs=1e-4)
    assert poisson_parameter(3, 0.5) == pytest.approx(2**1.5 - 2.0, abs=1e-15)
    assert poisson_parameter(0, 0.5) == 1.0
    assert eps_level(0, 0.5) == eps_level(1, 0.5) == EPS_SENTINEL
    assert eps_tilde_level(1, 0.3) == EPS_SENTINEL


def test_eps_eventually_decreasing_to_zero():
    for fn in (eps_level, eps_tilde_level):
        vals = np.array([fn(j, 0.4) for j in range(10, 400)])
        assert np.all(np.diff(vals) < 0)
        assert fn(10**6, 0.4) < 1e-4


def test_invariants_and_determinism():
    p = ModelParams(0.5, 0.5, seed=42, j_max=10)
    r1, r2 = sample_realization(p), sample_realization(p)
    assert np.all(np.diff(r1.b) > 0) and np.all(np.diff(r1.c) > 0)
    assert np.all((r1.x >= 0) & (r1.x <= 1))
    assert np.all(r1.b ** (1 / p.eta) <= 2.0**p.j_max)
    for name in ("b", "c", "x", "level_bounds"):
        assert np.array_equal(getattr(r1, name), getattr(r2, name))
    assert not r1.b.flags.writeable


def test_substreams_stable_under_deeper_truncation():
    lo = sample_realization(ModelParams(0.5, 0.5, seed=3, j_max=8))
    hi = sample_realization(ModelParams(0.5, 0.5, seed=3, j_max=12))
    n = lo.n_total
    assert np.array_equal(lo.b, hi.b[:n]) and np.array_equal(lo.x, hi.x[:n])
    assert np.array_equal(lo.c, hi.c[:n])


def test_level_slice_example():
    r = make_real([1.2, 2.9, 7.3], [0.1, 0.5, 0.9], eta=0.5, j_max=8)
    sizes = {j: len(level_slice(r, j)) for j in range(9)}
    assert list(level_slice(r, 1)) == [0]
    assert list(level_slice(r, 4)) == [1]
    assert list(level_slice(r, 6)) == [2]
    assert sum(sizes.values()) == 3 and sizes[0] == sizes[2] == sizes[3] == sizes[5] == 0
    with pytest.raises(OutOfWindowError):
        level_slice(r, 9)


def test_empty_realization_levels():
    r = make_real([], [])
    assert r.n_total == 0
    assert all(len(level_slice(r, j)) == 0 for j in range(r.params.j_max + 1))


def test_level_partition(real_small):
    r = real_small
    idx = np.concatenate([np.array(list(level_slice(r, j)), dtype=int) for j in range(r.params.j_max + 1)])
    assert np.array_equal(idx, np.arange(r.n_total))
    for j in range(1, r.params.j_max + 1):
        sl = level_slice(r, j)
        w = r.b[sl.start:sl.stop] ** (1 / r.params.eta)
        assert np.all((w > 2.0 ** (j - 1)) & (w <= 2.0**j))


def test_level_stats(real_small):
    s = level_stats(real_small, 8)
    assert s.n_j == len(level_slice(real_small, 8))
    assert s.eps_j == pytest.approx(0.75)
    assert s.poisson_parameter == pytest.approx(2**4 - 2**3.5)


def test_total_count_poisson_over_500_seeds():
    eta, j_max = 0.5, 10
    n = np.array([sample_realization(ModelParams(0.5, eta, seed=s, j_max=j_max)).n_total for s in range(1, 501)])
    lam = 2 ** (eta * j_max)
    assert abs(n.mean() - lam) <= 3 * math.sqrt(lam / n.size)


def test_csv_round_trip(tmp_path, real_small):
    path = real_small.to_csv(tmp_path / "r.csv")
    back = read_realization(path)
    for name in ("b", "c", "x"):
        assert np.array_equal(getattr(back, name), getattr(real_small, name))
    assert back.params == real_small.params
    assert path.read_text().splitlines()[0] == "n,c,b,x"
