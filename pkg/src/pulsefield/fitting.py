"""Log-log least squares shared by all exponent estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError


@dataclass(frozen=True)
class FitDiagnostics:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    scale_window: tuple[float, float]
    log_power: float | None = None
    warning: str | None = None


def _ls_slope(xv: np.ndarray, yv: np.ndarray) -> tuple[float, float, float]:
    xm, ym = xv.mean(), yv.mean()
    dx, dy = xv - xm, yv - ym
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = float(ym - slope * xm)
    resid = dy - slope * dx
    syy = float(dy @ dy)
    r2 = 1.0 - float(resid @ resid) / syy if syy > 0 else 1.0
    return slope, intercept, r2


def fit_power_log(pairs, log_power: float | None = None) -> tuple[float, FitDiagnostics]:
    """Slope of ``log2(value / |log2 scale|^log_power)`` against ``log2 scale``.

    ``pairs`` is a sequence of ``(scale, value)``.  With ``log_power=None`` the
    raw power-law slope is returned; a logarithmic factor in the data then
    biases it.
    """
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] < 4:
        raise InsufficientDataError(f"need at least 4 (scale, value) pairs, got {arr.shape[0]}")
    scales, values = arr[:, 0], arr[:, 1]
    if np.any(scales <= 0) or np.unique(scales).size != scales.size:
        raise DomainError("scales must be positive and distinct")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise DomainError("values must be positive and finite")
    ls = np.log2(scales)
    ly = np.log2(values)
    if log_power is not None:
        if np.any(ls == 0):
            raise DomainError("log correction undefined at scale 1")
        ly = ly - log_power * np.log2(np.abs(ls))
    slope, intercept, r2 = _ls_slope(ls, ly)
    warning = None if log_power is not None else "no log correction: slope biased by any log factor"
    return slope, FitDiagnostics(slope, intercept, r2, int(arr.shape[0]),
                                 (float(scales.min()), float(scales.max())), log_power, warning)


def batch_slopes(log_scales: np.ndarray, log_values: np.ndarray):
    """Row-wise least squares slopes and r^2.

    ``log_values`` has shape ``(n_rows, n_scales)``; NaN entries are skipped
    per row.  Rows with fewer than 2 finite entries get NaN.
    """
    y = np.asarray(log_values, dtype=np.float64)
    ok = np.isfinite(y)
    xs = np.broadcast_to(np.asarray(log_scales, dtype=np.float64), y.shape)
    cnt = ok.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        xm = np.where(ok, xs, 0.0).sum(axis=1) / cnt
        ym = np.where(ok, y, 0.0).sum(axis=1) / cnt
        dx = np.where(ok, xs - xm[:, None], 0.0)
        dy = np.where(ok, y - ym[:, None], 0.0)
        sxx = (dx * dx).sum(axis=1)
        slope = (dx * dy).sum(axis=1) / sxx
        syy = (dy * dy).sum(axis=1)
        res = dy - slope[:, None] * dx
        r2 = np.where(syy > 0, 1.0 - (res * res).sum(axis=1) / syy, 1.0)
    slope = np.where(cnt >= 2, slope, np.nan)
    r2 = np.where(cnt >= 2, r2, np.nan)
    return slope, r2
