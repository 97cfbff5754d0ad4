"""Continuous wavelet transform of the field.

Two independent routes compute ``W(s, t) = s^{-1/2} int F(x) phi((x-t)/s) dx``:

* :func:`cwt_signal_grid` applies trapezoid quadrature to a sampled
  :class:`~pulsefield.pulse_field.Signal`;
* :func:`cwt_pulse_sum` sums exact per-pulse coefficients (Gauss-Legendre on
  the intersection of the two supports) over the realization.

The analyzing wavelet is fixed: ``phi(u) = (1-u^2)^3 - (6/7)(1-u^2)^2`` on
``[-1, 1]``, which is C^1, has zero mean, and correlates non-trivially with
both pulse profiles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, OutOfWindowError, ResolutionError
from .fitting import FitDiagnostics, fit_power_log
from .io import write_csv, write_json
from .point_process import Realization
from .pulse_field import _PROFILES, Signal

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def analyzing_wavelet_eval(u):
    u = np.asarray(u, dtype=np.float64)
    v = 1.0 - u * u
    out = np.where(np.abs(u) < 1.0, v**3 - (6.0 / 7.0) * v**2, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def _gl_integral(fn, a: float, b: float, pieces: int = 8) -> float:
    edges = np.linspace(a, b, pieces + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        total += half * float(_GL_WEIGHTS @ fn(mid + half * _GL_NODES))
    return total


def _phi_psi_integral(kind: str) -> float:
    psi = _PROFILES[kind]

    def fn(u):
        return analyzing_wavelet_eval(u) * psi(u)

    # split at the hat's kink; the bump is analytic inside
    return _gl_integral(fn, -1.0, 0.0) + _gl_integral(fn, 0.0, 1.0)


@dataclass(frozen=True)
class AnalyzingWavelet:
    kind: str = "c1_bump_diff"
    phi_psi: dict = field(default_factory=dict)

    def __call__(self, u):
        return analyzing_wavelet_eval(u)

    def integral_with(self, pulse_kind: str) -> float:
        """``int phi psi`` for a pulse profile."""
        return self.phi_psi[pulse_kind]


def _build_wavelet() -> AnalyzingWavelet:
    values = {k: _phi_psi_integral(k) for k in _PROFILES}
    for k, v in values.items():
        if abs(v) < 1e-3:
            raise RuntimeError(f"analyzing wavelet nearly orthogonal to pulse {k!r}: {v}")
    return AnalyzingWavelet(phi_psi=values)


WAVELET = _build_wavelet()


def _coefficients(xc, iw, hw, kind: str, s: float, t: float) -> np.ndarray:
    """Vectorized ``d_n(s, t)`` for pulses with centres ``xc``, dilations ``iw``
    and half-widths ``hw``.  Pulses whose support misses ``[t-s, t+s]`` give 0."""
    xc, iw, hw = (np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (xc, iw, hw))
    a = np.maximum(xc - hw, t - s)
    b = np.minimum(xc + hw, t + s)
    out = np.zeros(xc.size)
    live = a < b
    if not live.any():
        return out
    a, b, xl, iwl = a[live], b[live], xc[live], iw[live]
    m = np.clip(xl, a, b)
    psi = _PROFILES[kind]
    total = np.zeros(a.size)
    for lo, hi in ((a, m), (m, b)):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        f = psi(iwl[:, None] * (nodes - xl[:, None])) * analyzing_wavelet_eval((nodes - t) / s)
        total += half * (f @ _GL_WEIGHTS)
    out[live] = total / math.sqrt(s)
    return out


def pulse_coefficient(real: Realization, n: int, s: float, t: float) -> float:
    """``s^{-1/2} int psi_n(x) phi((x-t)/s) dx`` for a single pulse."""
    if not 0 <= n < real.n_total:
        raise OutOfWindowError(f"pulse index {n} outside [0, {real.n_total})")
    if s <= 0:
        raise ValueError("scale must be positive")
    return float(_coefficients(real.x[n], real.inv_width[n], real.half_width[n],
                               real.params.pulse_kind, s, t)[0])


def cwt_pulse_sum(real: Realization, s: float, t: float, j_range=None) -> float:
    """``sum_n c_n^{-alpha} d_n(s, t)`` over pulses in ``j_range`` whose support meets ``[t-s, t+s]``."""
    if s <= 0:
        raise ValueError("scale must be positive")
    j_max = real.params.j_max
    lo_j, hi_j = (0, j_max) if j_range is None else (int(j_range[0]), int(j_range[1]))
    if not 0 <= lo_j <= hi_j <= j_max:
        raise OutOfWindowError(f"level range ({lo_j}, {hi_j}) not inside [0, {j_max}]")
    picked = []
    for j in range(lo_j, hi_j + 1):
        start, stop = int(real.level_bounds[j]), int(real.level_bounds[j + 1])
        if start == stop:
            continue
        order = real.level_x_order(j)
        xs = real.x[order]
        reach = s + float(real.half_width[start:stop].max())
        i0 = np.searchsorted(xs, t - reach, side="left")
        i1 = np.searchsorted(xs, t + reach, side="right")
        cand = order[i0:i1]
        picked.append(cand[np.abs(real.x[cand] - t) < s + real.half_width[cand]])
    if not picked:
        return 0.0
    idx = np.sort(np.concatenate(picked))
    d = _coefficients(real.x[idx], real.inv_width[idx], real.half_width[idx],
                      real.params.pulse_kind, s, t)
    terms = real.amplitude[idx] * d
    total = 0.0
    for v in terms.tolist():
        total += v
    return total


@dataclass(frozen=True, eq=False)
class CwtGrid:
    """Coefficients on scales ``2^-m``; ``positions[i]`` and ``coeffs[i]`` belong to ``m_values[i]``."""

    m_values: np.ndarray
    positions: list
    coeffs: list
    method: str = "signal_quadrature"
    wavelet: str = "c1_bump_diff"
    quadrature: str = "trapezoid"

    @property
    def scales(self) -> np.ndarray:
        return 2.0 ** -np.asarray(self.m_values, dtype=np.float64)

    def scale_index(self, m: int) -> int | None:
        hits = np.nonzero(np.asarray(self.m_values) == m)[0]
        return int(hits[0]) if hits.size else None

    def sup_abs(self) -> np.ndarray:
        """Lattice supremum of ``|W(s, .)|`` per scale."""
        return np.array([np.abs(c).max() if c.size else 0.0 for c in self.coeffs])

    def to_csv(self, path) -> Path:
        path = Path(path)
        ms = np.concatenate([np.full(len(p), m, dtype=np.int64)
                             for m, p in zip(self.m_values, self.positions)]) if self.positions else np.empty(0, np.int64)
        ts = np.concatenate(self.positions) if self.positions else np.empty(0)
        ws = np.concatenate(self.coeffs) if self.coeffs else np.empty(0)
        write_csv(path, ["m", "t", "W"], [ms, ts, ws])
        write_json(path.with_suffix(".json"), {
            "wavelet": self.wavelet, "method": self.method, "quadrature": self.quadrature,
            "m_values": [int(m) for m in self.m_values],
        })
        return path


def cwt_signal_grid(signal: Signal, wavelet: AnalyzingWavelet = WAVELET, m_lo: int = 1,
                    m_hi: int | None = None, chunk_elems: int = 1 << 22) -> CwtGrid:
    """Trapezoid-rule CWT of a sampled signal on scales ``2^-m``, ``m = m_lo..m_hi``.

    Positions step by ``s/4`` and keep ``[t-s, t+s]`` inside ``[0, 1]``.  The
    integrand uses ``F(x) - F(t)``, which changes nothing analytically (zero
    mean wavelet) but makes constants vanish exactly in the discrete sum.
    """
    g = signal.grid_bits
    if m_hi is None:
        m_hi = g - 4
    if m_hi > g - 4:
        raise ResolutionError(f"scale 2^-{m_hi} too fine for grid_bits={g}; need m_hi <= {g - 4}")
    if m_lo < 1 or m_lo > m_hi:
        raise ResolutionError(f"need 1 <= m_lo <= m_hi, got m_lo={m_lo}, m_hi={m_hi}")
    vals = signal.values
    n_last = vals.size - 1
    h = signal.step
    view = np.lib.stride_tricks.sliding_window_view
    m_values, positions, coeffs = [], [], []
    for m in range(m_lo, m_hi + 1):
        half = 2 ** (g - m)
        stride = half // 4
        u = np.arange(-half, half + 1) / half
        kern = wavelet(u)
        kern[0] *= 0.5
        kern[-1] *= 0.5
        factor = h / math.sqrt(2.0**-m)
        centers = np.arange(half, n_last - half + 1, stride)
        windows = view(vals, 2 * half + 1)[centers - half]
        out = np.empty(centers.size)
        rows = max(1, chunk_elems // (2 * half + 1))
        for i in range(0, centers.size, rows):
            block = windows[i:i + rows] - vals[centers[i:i + rows], None]
            out[i:i + rows] = block @ kern
        m_values.append(m)
        positions.append(centers * h)
        coeffs.append(out * factor)
    return CwtGrid(np.array(m_values), positions, coeffs, method="signal_quadrature",
                   wavelet=wavelet.kind)


def cwt_pulse_grid(real: Realization, m_lo: int, m_hi: int, j_range=None) -> CwtGrid:
    """The pulse-sum route evaluated on the same lattice as :func:`cwt_signal_grid`."""
    m_values, positions, coeffs = [], [], []
    for m in range(m_lo, m_hi + 1):
        s = 2.0**-m
        ts = np.arange(s, 1.0 - s + s / 8, s / 4)
        ts = ts[ts <= 1.0 - s]
        m_values.append(m)
        positions.append(ts)
        coeffs.append(np.array([cwt_pulse_sum(real, s, float(t), j_range) for t in ts]))
    return CwtGrid(np.array(m_values), positions, coeffs, method="pulse_sum", quadrature="gauss_legendre")


def uniform_decay_fit(grid: CwtGrid, alpha: float | None = None, log_power: float | None = None,
                      m_window: tuple[int, int] | None = None) -> tuple[float, FitDiagnostics]:
    """Uniform exponent from the decay of ``sup_t |W(s, t)|``.

    Returns the log-log slope minus 1/2.  Passing ``alpha`` divides out
    ``|log2 s|^(2+alpha)`` before fitting; ``log_power`` sets that power
    directly.  ``m_window`` restricts the scales used.
    """
    ms = np.asarray(grid.m_values)
    sups = grid.sup_abs()
    keep = np.ones(ms.size, dtype=bool)
    if m_window is not None:
        keep &= (ms >= m_window[0]) & (ms <= m_window[1])
    keep &= sups > 0
    if keep.sum() < 5:
        raise InsufficientDataError(f"need at least 5 scales, got {int(keep.sum())}")
    if log_power is None and alpha is not None:
        log_power = 2.0 + alpha
    pairs = np.column_stack([2.0 ** -ms[keep].astype(float), sups[keep]])
    slope, diag = fit_power_log(pairs, log_power)
    return slope - 0.5, diag
