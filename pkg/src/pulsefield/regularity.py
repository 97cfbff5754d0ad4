"""Pointwise and uniform regularity estimators and multifractal spectra.

All estimators assume exponents below 1, where the local Taylor polynomial is
the constant ``f(x0)``: pointwise regularity is read off raw oscillations
``sup_{|x-x0|<=r} |f(x) - f(x0)|``.  This is wrong for exponents >= 1, which
is why fitted values above 1 are reported as capped.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import DomainError, InsufficientDataError, ResolutionError
from .fitting import FitDiagnostics, batch_slopes, fit_power_log
from .io import write_csv
from .pulse_field import Signal
from .wavelet import CwtGrid

H_CAP = 1.0
DIM_SENTINEL = -math.inf


class OffGridWarning(UserWarning):
    """A position was snapped to the nearest grid point."""


def snap_index(signal: Signal, x0: float) -> int:
    """Nearest grid index (ties to even); warns when ``x0`` is not a grid point."""
    if not 0.0 <= x0 <= 1.0:
        raise DomainError(f"x0 must lie in [0, 1], got {x0}")
    pos = x0 * 2**signal.grid_bits
    idx = int(round(pos))
    if idx != pos:
        warnings.warn(f"x0={x0!r} is off-grid; using grid point {idx * signal.step!r}",
                      OffGridWarning, stacklevel=3)
    return idx


def _radius_samples(signal: Signal, r: float) -> int:
    if r < signal.step:
        raise ResolutionError(f"radius {r} below grid step {signal.step}")
    return int(math.floor(r / signal.step + 1e-9))


def oscillation(signal: Signal, x0: float, r: float) -> float:
    """``max |F(x) - F(x0)|`` over grid points with ``|x - x0| <= r``."""
    i = snap_index(signal, x0)
    k = _radius_samples(signal, r)
    v = signal.values
    win = v[max(0, i - k):i + k + 1]
    return float(np.max(np.abs(win - v[i])))


@dataclass(frozen=True)
class PointwiseDiagnostics:
    fit: FitDiagnostics | None
    raw_slope: float
    capped: bool
    method: str


def _cap(raw: float) -> tuple[float, bool]:
    if not np.isfinite(raw) or raw > H_CAP:
        return H_CAP, True
    return max(raw, 0.0), False


def _cone_sup(cwt: CwtGrid, m: int, x0):
    """``sup |W(2^-m, t)|`` over ``|t - x0| <= 2^-m``; NaN where the cone is empty."""
    i = cwt.scale_index(m)
    if i is None:
        raise ResolutionError(f"scale 2^-{m} missing from the wavelet grid")
    ts, ws = cwt.positions[i], np.abs(cwt.coeffs[i])
    s = 2.0**-m
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    lo = np.searchsorted(ts, x0 - s * (1 + 1e-12), side="left")
    hi = np.searchsorted(ts, x0 + s * (1 + 1e-12), side="right")
    out = np.full(x0.size, -np.inf)
    for d in range(int((hi - lo).max(initial=0))):
        pos = lo + d
        ok = pos < hi
        out = np.where(ok, np.maximum(out, ws[np.minimum(pos, ts.size - 1)]), out)
    return np.where(np.isfinite(out), out, np.nan)


def pointwise_exponent(signal: Signal, x0: float, k_lo: int, k_hi: int, method: str = "oscillation",
                       cwt: CwtGrid | None = None) -> tuple[float, PointwiseDiagnostics]:
    """Hölder exponent at ``x0`` from scales ``2^-k``, ``k = k_lo..k_hi``.

    ``oscillation`` fits local oscillations; ``wavelet_cone`` fits
    ``s^{-1/2} sup_{|t-x0|<=s} |W(s, t)|`` and needs ``cwt``.
    """
    ks = np.arange(k_lo, k_hi + 1)
    if method == "oscillation":
        if 2.0**-k_hi < signal.step:
            raise ResolutionError(f"scale 2^-{k_hi} below grid step 2^-{signal.grid_bits}")
        vals = np.array([oscillation(signal, x0, 2.0**-int(k)) for k in ks])
    elif method == "wavelet_cone":
        if cwt is None:
            raise DomainError("wavelet_cone method needs a CwtGrid")
        vals = np.array([_cone_sup(cwt, int(k), x0)[0] for k in ks]) * 2.0 ** (ks / 2.0)
    else:
        raise DomainError(f"unknown method {method!r}")
    ok = np.isfinite(vals) & (vals > 0)
    if ok.sum() < 4:
        return H_CAP, PointwiseDiagnostics(None, math.nan, True, method)
    slope, diag = fit_power_log(np.column_stack([2.0 ** -ks[ok].astype(float), vals[ok]]))
    h, capped = _cap(slope)
    return h, PointwiseDiagnostics(diag, slope, capped, method)


def uniform_modulus(signal: Signal, k_lo: int, k_hi: int) -> np.ndarray:
    """Rows ``(2^-k, w(2^-k))`` with ``w(h) = max_{|i-j| <= h/step} |F_i - F_j|``."""
    if 2.0**-k_hi < signal.step:
        raise ResolutionError(f"scale 2^-{k_hi} below grid step 2^-{signal.grid_bits}")
    v = signal.values
    rows = []
    for k in range(k_lo, k_hi + 1):
        size = 2 ** (signal.grid_bits - k) + 1
        # every window of `size` consecutive samples appears as some centred window
        spread = maximum_filter1d(v, size, mode="nearest") - minimum_filter1d(v, size, mode="nearest")
        rows.append((2.0**-k, float(spread.max())))
    return np.array(rows)


def _lattice_oscillation(v: np.ndarray, g: int, stride_bits: int, k: int) -> np.ndarray:
    """Oscillation at radius ``2^-k`` for every lattice point ``i 2^-stride_bits``.

    Radii that are whole multiples of the lattice spacing reuse per-block
    max/min, so the cost does not grow with the grid size.
    """
    span = 2 ** (g - stride_bits)
    rad = 2 ** (g - k)
    n_last = v.size - 1
    pos = np.arange(2**stride_bits) * span
    centre = v[pos]
    if rad >= span:
        q = rad // span
        blocks = v[:-1].reshape(-1, span)
        view = np.lib.stride_tricks.sliding_window_view
        bmax = view(np.pad(blocks.max(axis=1), q, constant_values=-np.inf), 2 * q).max(axis=1)
        bmin = view(np.pad(blocks.min(axis=1), q, constant_values=np.inf), 2 * q).min(axis=1)
        # closed window: the point at pos + rad starts the block just outside
        edge = v[np.minimum(pos + rad, n_last)]
        hi, lo = np.maximum(bmax[:pos.size], edge), np.minimum(bmin[:pos.size], edge)
    else:
        idx = np.clip(pos[:, None] + np.arange(-rad, rad + 1)[None, :], 0, n_last)
        win = v[idx]
        hi, lo = win.max(axis=1), win.min(axis=1)
    return np.maximum(hi - centre, centre - lo)


@dataclass(frozen=True, eq=False)
class ExponentField:
    positions: np.ndarray
    h_est: np.ndarray
    method: str
    scale_window: tuple[int, int]
    r_squared: np.ndarray
    capped: np.ndarray = field(repr=False, default=None)

    def to_csv(self, path) -> Path:
        return write_csv(Path(path), ["x", "h", "r2"], [self.positions, self.h_est, self.r_squared])


def exponent_field(signal: Signal, stride_bits: int, method: str = "oscillation",
                   cwt: CwtGrid | None = None, k_lo: int = 5, k_hi: int | None = None) -> ExponentField:
    """Pointwise exponents at ``x_i = i 2^-stride_bits``, ``i = 0..2^stride_bits - 1``."""
    g = signal.grid_bits
    if k_hi is None:
        k_hi = g - 4
    if stride_bits > g:
        raise ResolutionError(f"stride 2^-{stride_bits} finer than grid 2^-{g}")
    if k_hi - k_lo + 1 < 4:
        raise InsufficientDataError("need at least 4 scales")
    ks = np.arange(k_lo, k_hi + 1)
    pos_idx = np.arange(2**stride_bits) * 2 ** (g - stride_bits)
    positions = pos_idx * signal.step
    v = signal.values
    logs = np.empty((pos_idx.size, ks.size))
    for col, k in enumerate(ks):
        if method == "oscillation":
            if 2.0**-int(k) < signal.step:
                raise ResolutionError(f"scale 2^-{k} below grid step 2^-{g}")
            osc = _lattice_oscillation(v, g, stride_bits, int(k))
        elif method == "wavelet_cone":
            if cwt is None:
                raise DomainError("wavelet_cone method needs a CwtGrid")
            osc = _cone_sup(cwt, int(k), positions) * 2.0 ** (k / 2.0)
        else:
            raise DomainError(f"unknown method {method!r}")
        with np.errstate(divide="ignore", invalid="ignore"):
            logs[:, col] = np.where(osc > 0, np.log2(osc), np.nan)
    h, r2, capped = _fit_rows(ks, logs)
    return ExponentField(positions, h, method, (int(k_lo), int(k_hi)), r2, capped)


def _fit_rows(ks: np.ndarray, logs: np.ndarray):
    """Capped row-wise slopes of ``log2 osc`` against ``log2 2^-k``; rows need 4 finite scales."""
    enough = np.isfinite(logs).sum(axis=1) >= 4
    slope, r2 = batch_slopes(-ks.astype(float), logs)
    slope = np.where(enough, slope, np.nan)
    capped = ~np.isfinite(slope) | (slope > H_CAP)
    h = np.where(capped, H_CAP, np.maximum(np.nan_to_num(slope, nan=H_CAP), 0.0))
    return h, np.nan_to_num(r2, nan=0.0), capped


def pointwise_exponents(signal: Signal, idx, k_lo: int, k_hi: int):
    """Oscillation exponents at many grid indices at once.

    Same estimator as :func:`pointwise_exponent`, sharing one sliding max/min
    pass over the grid per scale.  Returns ``(h, r_squared, capped)``.
    """
    idx = np.asarray(idx, dtype=np.int64)
    g = signal.grid_bits
    if 2.0**-k_hi < signal.step:
        raise ResolutionError(f"scale 2^-{k_hi} below grid step 2^-{g}")
    ks = np.arange(k_lo, k_hi + 1)
    v = signal.values
    logs = np.empty((idx.size, ks.size))
    for col, k in enumerate(ks):
        size = 2 * 2 ** (g - int(k)) + 1
        hi = maximum_filter1d(v, size, mode="nearest")[idx]
        lo = minimum_filter1d(v, size, mode="nearest")[idx]
        osc = np.maximum(hi - v[idx], v[idx] - lo)
        with np.errstate(divide="ignore"):
            logs[:, col] = np.where(osc > 0, np.log2(osc), np.nan)
    return _fit_rows(ks, logs)


def theoretical_spectrum(alpha: float, eta: float, H: float) -> float:
    """``H/alpha`` on ``[alpha eta, alpha]``, the sentinel ``-inf`` elsewhere."""
    lo = alpha * eta
    if H == lo:
        return float(eta)
    if H == alpha:
        return 1.0
    if lo <= H <= alpha:
        return H / alpha
    return DIM_SENTINEL


def box_dimension(points: np.ndarray, k_lo: int, k_hi: int) -> float:
    """Slope of ``log2 #{occupied dyadic intervals of size 2^-k}`` against ``k``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return DIM_SENTINEL
    ks = np.arange(k_lo, k_hi + 1)
    counts = np.array([np.unique(np.minimum(np.floor(pts * 2.0**k), 2.0**k - 1)).size for k in ks])
    slope, _ = fit_power_log(np.column_stack([2.0 ** -ks.astype(float), counts.astype(float)]))
    return 0.0 - slope


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    bin_centers: np.ndarray
    bin_width: float
    dims: np.ndarray
    counts: np.ndarray
    theory: np.ndarray
    alpha: float
    eta: float
    flags: list = field(default_factory=list)

    def interior_mask(self, margin: float | None = None) -> np.ndarray:
        """Bins whose centre lies in ``[alpha eta + margin, alpha - margin]`` (margin ``0.05 alpha``)."""
        if margin is None:
            margin = 0.05 * self.alpha
        c = self.bin_centers
        return (c >= self.alpha * self.eta + margin) & (c <= self.alpha - margin)

    def to_csv(self, path) -> Path:
        return write_csv(Path(path), ["H", "dim_est", "dim_theory", "count"],
                         [self.bin_centers, self.dims, self.theory, self.counts.astype(np.int64)])


def spectrum_estimate(fld: ExponentField, bin_width: float, box_k_lo: int, box_k_hi: int,
                      alpha: float, eta: float) -> SpectrumEstimate:
    """Box dimensions of the binned iso-exponent sets next to the line ``H/alpha``."""
    if box_k_hi - box_k_lo + 1 < 4:
        raise InsufficientDataError("need at least 4 box-counting scales")
    if fld.positions.size < 2 ** (box_k_hi + 2):
        raise ResolutionError(f"need >= {2 ** (box_k_hi + 2)} positions for box scale 2^-{box_k_hi}")
    n_bins = int(math.ceil(H_CAP / bin_width - 1e-9))
    idx = np.minimum(np.floor(fld.h_est / bin_width + 1e-9).astype(np.int64), n_bins - 1)
    centers = (np.arange(n_bins) + 0.5) * bin_width
    counts = np.bincount(idx, minlength=n_bins)
    dims = np.full(n_bins, DIM_SENTINEL)
    flags = []
    for b in range(n_bins):
        pts = fld.positions[idx == b]
        if pts.size == 0:
            flags.append("empty")
            continue
        if pts.size == 1:
            # one point occupies one box at every scale: no regression possible
            flags.append("single_point")
            continue
        dims[b] = box_dimension(pts, box_k_lo, box_k_hi)
        flags.append("")
    theory = np.array([theoretical_spectrum(alpha, eta, c) for c in centers])
    return SpectrumEstimate(centers, float(bin_width), dims, counts, theory, float(alpha), float(eta), flags)
