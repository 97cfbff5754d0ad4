import math

import numpy as np
import pytest
import sympy
from scipy.integrate import simpson

from pulsefield.errors import InsufficientDataError, OutOfWindowError, ResolutionError
from pulsefield.geometry import isolated_indices
from pulsefield.point_process import ModelParams, sample_realization
from pulsefield.pulse_field import PULSES, Signal, evaluate_field
from pulsefield.wavelet import (
    WAVELET, CwtGrid, analyzing_wavelet_eval, cwt_pulse_sum, cwt_signal_grid, pulse_coefficient,
    uniform_decay_fit,
)
from conftest import make_real


def test_wavelet_shape():
    assert analyzing_wavelet_eval(1.0) == 0.0 and analyzing_wavelet_eval(-1.0) == 0.0
    u = np.linspace(-1, 1, 10_001)
    assert abs(simpson(analyzing_wavelet_eval(u), x=u)) <= 1e-10
    # C^1 at the support edge
    h = 1e-6
    assert abs(analyzing_wavelet_eval(1 - h)) / h < 1e-5


def test_wavelet_hat_integral_exact():
    u = sympy.symbols("u")
    phi = (1 - u**2) ** 3 - sympy.Rational(6, 7) * (1 - u**2) ** 2
    exact = 2 * sympy.integrate(phi * (1 - u), (u, 0, 1))
    assert exact == sympy.Rational(1, 28)
    grid = np.linspace(-1, 1, 100_001)
    quad = simpson(analyzing_wavelet_eval(grid) * np.maximum(0, 1 - np.abs(grid)), x=grid)
    assert quad == pytest.approx(1 / 28, abs=1e-9)
    assert WAVELET.integral_with("hat") == pytest.approx(1 / 28, abs=1e-14)
    assert abs(WAVELET.integral_with("smooth_bump")) > 1e-3


def test_disjoint_supports_exact_zero(real_small):
    n = 3
    x = real_small.x[n]
    w = real_small.half_width[n]
    t = x + w + 0.1 if x + w + 0.1 <= 1 else x - w - 0.1
    assert pulse_coefficient(real_small, n, 0.05, t) == 0.0
    with pytest.raises(OutOfWindowError):
        pulse_coefficient(real_small, real_small.n_total, 0.1, 0.5)


@pytest.mark.parametrize("kind", ["hat", "smooth_bump"])
def test_matched_scale_identity(kind):
    r = sample_realization(ModelParams(0.5, 0.5, pulse_kind=kind, seed=11, j_max=16))
    for n in np.random.default_rng(0).choice(r.n_total, 100, replace=False):
        s = r.half_width[n]
        expect = r.b[n] ** (-1 / (2 * r.params.eta)) * WAVELET.integral_with(kind)
        got = pulse_coefficient(r, int(n), s, r.x[n])
        assert got == pytest.approx(expect, rel=1e-6)


@pytest.mark.parametrize("kind", ["hat", "smooth_bump"])
def test_coefficient_bound(kind):
    r = sample_realization(ModelParams(0.5, 0.5, pulse_kind=kind, seed=12, j_max=12))
    u = np.linspace(-1, 1, 200_001)
    phi = analyzing_wavelet_eval(u)
    psi_l1 = simpson(np.abs(PULSES[kind](u)), x=u)
    c = max(PULSES[kind].lipschitz_constant * simpson(np.abs(u * phi), x=u),
            np.abs(phi).max() * psi_l1) * (1 + 1e-6)
    rng = np.random.default_rng(4)
    for _ in range(1000):
        n = int(rng.integers(r.n_total))
        s = 2.0 ** -rng.uniform(0, 14)
        t = r.x[n] + rng.uniform(-2, 2) * (s + r.half_width[n])
        d = pulse_coefficient(r, n, s, t)
        bound = c * math.sqrt(s) * min(s * r.inv_width[n], 1 / (s * r.inv_width[n]))
        assert abs(d) <= bound


def test_pulse_sum_examples():
    r = make_real([], [], j_max=6)
    assert cwt_pulse_sum(r, 0.1, 0.5) == 0.0
    r = make_real([4.0], [0.5], c=[2.0], j_max=6)
    expect = 2.0**-0.5 * 4.0**-1.0 * WAVELET.integral_with("hat")
    assert cwt_pulse_sum(r, 1 / 16, 0.5) == pytest.approx(expect, rel=1e-12)


def test_isolated_pulses_dominate_matched_coefficient():
    r = sample_realization(ModelParams(0.5, 0.5, seed=2, j_max=12))
    phipsi = abs(WAVELET.integral_with("hat"))
    checked = 0
    for j in range(8, 13):
        for n in isolated_indices(r, j).indices:
            w = cwt_pulse_sum(r, r.half_width[n], r.x[n])
            floor = 0.5 * r.amplitude[n] * r.b[n] ** (-1 / (2 * r.params.eta)) * phipsi
            assert abs(w) >= floor
            checked += 1
    assert checked > 0


def test_paths_agree(real_small):
    sig = evaluate_field(real_small)
    grid = cwt_signal_grid(sig, m_lo=2, m_hi=10)
    rng = np.random.default_rng(9)
    for _ in range(50):
        i = int(rng.integers(len(grid.m_values)))
        k = int(rng.integers(grid.positions[i].size))
        s, t = 2.0 ** -int(grid.m_values[i]), grid.positions[i][k]
        exact = cwt_pulse_sum(real_small, s, t)
        assert abs(exact - grid.coeffs[i][k]) <= 1e-4 * (1 + abs(exact))


def test_constant_kill_and_linearity():
    g = 16
    const = Signal.from_function(lambda x: np.full_like(x, 3.7), g)
    grid = cwt_signal_grid(const)
    assert max(np.abs(c).max() for c in grid.coeffs) <= 1e-10 * 3.7
    f = Signal.from_function(lambda x: np.sin(7 * x) + np.abs(x - 0.3) ** 0.4, g)
    h = Signal.from_function(lambda x: np.cos(3 * x), g)
    combo = f.with_values(2.5 * f.values - 1.5 * h.values)
    a, b, c = cwt_signal_grid(f), cwt_signal_grid(h), cwt_signal_grid(combo)
    for ca, cb, cc in zip(a.coeffs, b.coeffs, c.coeffs):
        assert np.max(np.abs(cc - (2.5 * ca - 1.5 * cb))) <= 1e-12


def test_quadrature_converges_under_refinement():
    fn = lambda x: np.sin(5 * x) + np.exp(x)
    coarse = cwt_signal_grid(Signal.from_function(fn, 14), m_lo=2, m_hi=8)
    fine = cwt_signal_grid(Signal.from_function(fn, 15), m_lo=2, m_hi=8)
    for ca, cb in zip(coarse.coeffs, fine.coeffs):
        assert np.max(np.abs(ca - cb) / np.maximum(np.abs(cb), 1e-300)) <= 1e-6


def test_grid_layout_and_errors(tmp_path):
    sig = Signal.from_function(np.sin, 12)
    grid = cwt_signal_grid(sig)
    assert list(grid.m_values) == list(range(1, 9))
    assert np.all(np.diff(grid.scales) < 0)
    for m, t in zip(grid.m_values, grid.positions):
        s = 2.0**-m
        assert np.all(t - s >= 0) and np.all(t + s <= 1)
        assert np.allclose(np.diff(t), s / 4)
    with pytest.raises(ResolutionError):
        cwt_signal_grid(sig, m_hi=9)
    text = grid.to_csv(tmp_path / "w.csv").read_text().splitlines()
    assert text[0] == "m,t,W"


def _synthetic(fn, ms=range(2, 16)):
    ms = np.array(list(ms))
    return CwtGrid(ms, [np.array([0.5]) for _ in ms], [np.array([fn(2.0**-m)]) for m in ms])


def test_uniform_fit_synthetic():
    h, diag = uniform_decay_fit(_synthetic(lambda s: s**1.2))
    assert h == pytest.approx(0.7, abs=1e-6) and diag.r_squared > 0.999
    grid = _synthetic(lambda s: s**1.2 * abs(math.log2(s)) ** 3)
    assert uniform_decay_fit(grid, log_power=3)[0] == pytest.approx(0.7, abs=0.02)
    assert uniform_decay_fit(grid, alpha=1.0)[0] == pytest.approx(0.7, abs=0.02)
    with pytest.raises(InsufficientDataError):
        uniform_decay_fit(_synthetic(lambda s: s, ms=range(2, 6)))


def test_uniform_fit_simulated():
    vals = []
    for seed in range(1, 6):
        sig = evaluate_field(sample_realization(ModelParams(0.5, 0.5, seed=seed, j_max=16)))
        vals.append(uniform_decay_fit(cwt_signal_grid(sig), m_window=(5, sig.grid_bits - 4))[0])
    assert 0.15 <= np.mean(vals) <= 0.35
