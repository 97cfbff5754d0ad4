"""Pulse profiles and evaluation of the truncated random field on dyadic grids.

The field is ``F(x) = sum_n c_n^{-alpha} psi(b_n^{1/eta} (x - x_n))``.  Two
evaluation routes are provided: :func:`evaluate_field` scatters every pulse
onto the grid points inside its support, and :func:`evaluate_field_direct`
is a plain loop over all pulses kept as an independent check.  Both add
contributions in ascending pulse index, so they agree to rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, OutOfWindowError, ResolutionError
from .io import read_csv, write_csv, write_json
from .point_process import ModelParams, Realization, eps_level


def _hat(u):
    return np.maximum(0.0, 1.0 - np.abs(u))


def _smooth_bump(u):
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


_PROFILES = {"hat": _hat, "smooth_bump": _smooth_bump}


def pulse_eval(kind: str, u):
    """Evaluate the pulse profile ``kind`` at ``u`` (scalar or array).

    ``hat`` is ``max(0, 1-|u|)``; ``smooth_bump`` is ``exp(1 - 1/(1-u^2))``
    inside ``(-1, 1)``.  Both equal 1 at the origin and vanish for ``|u| >= 1``.
    """
    try:
        fn = _PROFILES[kind]
    except KeyError:
        raise DomainError(f"unknown pulse kind {kind!r}") from None
    arr = np.asarray(u, dtype=np.float64)
    if np.isnan(arr).any():
        raise DomainError("pulse argument is NaN")
    out = fn(arr)
    if np.ndim(u) == 0:
        return float(out)
    return out


# sup |psi'| of the smooth bump, attained at u = 3**(-1/4)
_u_star = 3.0 ** -0.25
_BUMP_LIP = 2 * _u_star / (1 - _u_star**2) ** 2 * math.exp(1 - 1 / (1 - _u_star**2))


@dataclass(frozen=True)
class Pulse:
    kind: str
    lipschitz_constant: float
    sup_norm: float

    def __call__(self, u):
        return pulse_eval(self.kind, u)


PULSES = {
    "hat": Pulse("hat", 1.0, 1.0),
    "smooth_bump": Pulse("smooth_bump", _BUMP_LIP, 1.0),
}


def get_pulse(kind: str) -> Pulse:
    try:
        return PULSES[kind]
    except KeyError:
        raise DomainError(f"unknown pulse kind {kind!r}") from None


def tail_estimate(params: ModelParams, j_trunc: int) -> float:
    """Heuristic bound on the levels above ``j_trunc`` left out of a truncated field.

    Sums ``sup|psi| * j^2 * 2^{-alpha eta j (1 - eps_j)}`` over ``j > j_trunc``
    until the terms stop mattering.  The overlap constant is taken as 1, so
    this is an order-of-magnitude estimate, never a rigorous bound.
    """
    if j_trunc < 2:
        raise DomainError(f"j_trunc must be >= 2, got {j_trunc}")
    ae = params.alpha * params.eta
    total = 0.0
    prev = math.inf
    j = j_trunc + 1
    while True:
        term = j * j * 2.0 ** (-ae * j * (1.0 - eps_level(j, params.eta)))
        total += term
        if term < prev and term <= 1e-18 * total:
            break
        prev = term
        j += 1
        if j > j_trunc + 1_000_000:
            break
    return get_pulse(params.pulse_kind).sup_norm * total


@dataclass(frozen=True, eq=False)
class Signal:
    """Samples of the field at ``x_i = i 2^-grid_bits``, ``i = 0..2^grid_bits``."""

    grid_bits: int
    values: np.ndarray
    j_range: tuple[int, int] | None = None
    tail_estimate: float = math.nan
    source: Realization | None = None

    def __post_init__(self):
        if self.values.shape != (2**self.grid_bits + 1,):
            raise ResolutionError(
                f"expected {2**self.grid_bits + 1} samples for grid_bits={self.grid_bits}, got {self.values.shape}")

    @property
    def step(self) -> float:
        return 2.0 ** -self.grid_bits

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.values.size) * self.step

    @classmethod
    def from_function(cls, fn, grid_bits: int) -> "Signal":
        """Sample an arbitrary vectorized function on the dyadic grid."""
        x = np.arange(2**grid_bits + 1) * 2.0**-grid_bits
        return cls(grid_bits, np.asarray(fn(x), dtype=np.float64))

    def with_values(self, values) -> "Signal":
        return Signal(self.grid_bits, np.asarray(values, dtype=np.float64),
                      self.j_range, self.tail_estimate, self.source)

    def to_csv(self, path) -> Path:
        path = Path(path)
        write_csv(path, ["x", "F"], [self.x, self.values])
        meta = {
            "kind": "signal",
            "version": __version__,
            "grid_bits": self.grid_bits,
            "j_range": list(self.j_range) if self.j_range else None,
            "tail_estimate": self.tail_estimate,
            "params": self.source.params.to_dict() if self.source is not None else None,
        }
        write_json(path.with_suffix(".json"), meta)
        return path


def read_signal(path) -> Signal:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    cols = read_csv(path)
    jr = tuple(meta["j_range"]) if meta.get("j_range") else None
    return Signal(int(meta["grid_bits"]), cols["F"], jr, float(meta["tail_estimate"]))


def _check_range(real: Realization, j_range) -> tuple[int, int]:
    j_max = real.params.j_max
    if j_range is None:
        return 0, j_max
    lo, hi = int(j_range[0]), int(j_range[1])
    if not 0 <= lo <= hi <= j_max:
        raise OutOfWindowError(f"level range ({lo}, {hi}) not inside [0, {j_max}]")
    return lo, hi


def evaluate_field(real: Realization, grid_bits: int | None = None, j_range=None) -> Signal:
    """Field restricted to levels ``j_range`` (inclusive) on the dyadic grid.

    Each pulse only touches the grid points of its support; within a point
    the terms are accumulated in ascending pulse index.
    """
    params = real.params
    g = params.grid_bits if grid_bits is None else int(grid_bits)
    lo_j, hi_j = _check_range(real, j_range)
    if g < hi_j + 2:
        raise ResolutionError(f"grid_bits={g} too coarse for level {hi_j}; need grid_bits >= {hi_j + 2}")
    n_pts = 2**g
    step = 2.0**-g
    values = np.zeros(n_pts + 1)
    psi = _PROFILES[params.pulse_kind]
    start, stop = int(real.level_bounds[lo_j]), int(real.level_bounds[hi_j + 1])
    xs, iw, hw, amp = real.x, real.inv_width, real.half_width, real.amplitude
    for n in range(start, stop):
        # one extra point each side; psi vanishes there anyway
        i0 = max(0, math.ceil((xs[n] - hw[n]) * n_pts) - 1)
        i1 = min(n_pts, math.floor((xs[n] + hw[n]) * n_pts) + 1)
        if i1 < i0:
            continue
        grid = np.arange(i0, i1 + 1) * step
        values[i0:i1 + 1] += amp[n] * psi(iw[n] * (grid - xs[n]))
    tail = tail_estimate(params, hi_j) if hi_j >= 2 else math.nan
    return Signal(g, values, (lo_j, hi_j), tail, real)


def evaluate_field_direct(real: Realization, x):
    """Reference evaluation: every pulse, ascending index, no culling."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any((arr < 0) | (arr > 1)):
        raise DomainError("x must lie in [0, 1]")
    psi = _PROFILES[real.params.pulse_kind]
    total = np.zeros_like(arr)
    xs, iw, amp = real.x, real.inv_width, real.amplitude
    for n in range(real.n_total):
        total = total + amp[n] * psi(iw[n] * (arr - xs[n]))
    if arr.ndim == 0:
        return float(total)
    return total
