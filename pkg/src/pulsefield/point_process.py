"""Sampling of the pulse parameters and their dyadic level decomposition.

A realization holds three sequences: the amplitudes' arrival times ``c``
(unit-rate Poisson process on the half line), the increasing dilation
variables ``b`` and the centres ``x`` (a unit-rate Poisson process on
``R_+ x [0, 1]``).  Pulse ``n`` has half-width ``b[n] ** (-1/eta)`` and
amplitude ``c[n] ** (-alpha)``.

Only pulses with ``b ** (1/eta) <= 2 ** j_max`` are materialized.  Level ``j``
collects the pulses whose inverse half-width lies in ``(2**(j-1), 2**j]``
(``[0, 1]`` for ``j = 0``); levels are contiguous index ranges because ``b``
is sorted.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import __version__
from .errors import OutOfWindowError, ParameterError
from .io import read_csv, write_csv, write_json
from .rng import substream

PULSE_KINDS = ("hat", "smooth_bump")

#: Sentinel used for the epsilon sequences on levels 0 and 1.
EPS_SENTINEL = math.inf


def default_p0_gamma(alpha: float, eta: float) -> tuple[int, float]:
    """Smallest admissible ``p0`` (strictly above ``(3+3a)/(1-a*eta)``) and ``gamma = 1``."""
    return math.floor((3.0 + 3.0 * alpha) / (1.0 - alpha * eta)) + 1, 1.0


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    eta: float
    pulse_kind: str = "hat"
    gamma: float | None = None
    p0: int | None = None
    seed: int = 1
    j_max: int = 16
    grid_bits: int | None = None

    def __post_init__(self):
        a, e = self.alpha, self.eta
        if not (isinstance(a, (int, float)) and 0.0 < a < 1.0):
            raise ParameterError(f"alpha must lie in (0,1), got {a!r}")
        if not (isinstance(e, (int, float)) and 0.0 < e < 1.0):
            raise ParameterError(f"eta must lie in (0,1), got {e!r}")
        p0_def, gamma_def = default_p0_gamma(a, e)
        if self.p0 is None:
            object.__setattr__(self, "p0", p0_def)
        if self.gamma is None:
            object.__setattr__(self, "gamma", gamma_def)
        if self.grid_bits is None:
            object.__setattr__(self, "grid_bits", int(self.j_max) + 2)
        if self.pulse_kind not in PULSE_KINDS:
            raise ParameterError(f"pulse must be one of {PULSE_KINDS}, got {self.pulse_kind!r}")
        if not 1.0 <= self.gamma <= 1.0 / e:
            raise ParameterError(f"gamma must lie in [1, 1/eta] = [1, {1.0 / e:.6g}], got {self.gamma!r}")
        bound = (3.0 + 3.0 * a) / (1.0 - a * e)
        if int(self.p0) != self.p0 or not self.p0 > bound:
            raise ParameterError(f"p0 must be an integer > (3+3*alpha)/(1-alpha*eta) = {bound:.6g}, got {self.p0!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if int(self.j_max) != self.j_max or self.j_max < 1:
            raise ParameterError(f"jmax must be a positive integer, got {self.j_max!r}")
        if int(self.grid_bits) != self.grid_bits or self.grid_bits < self.j_max + 2:
            raise ParameterError(
                f"grid-bits must be >= jmax + 2 = {self.j_max + 2}, got {self.grid_bits!r}")

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        if "j_max" in changes and "grid_bits" not in changes:
            d["grid_bits"] = None
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def eps_level(j: int, eta: float) -> float:
    """``log2(j) / (eta j)``; the sentinel for ``j < 2``."""
    if j < 2:
        return EPS_SENTINEL
    return math.log2(j) / (eta * j)


def eps_tilde_level(j: int, eta: float) -> float:
    """``log2(16 j log2 j) / (eta j)``; the sentinel for ``j < 2``."""
    if j < 2:
        return EPS_SENTINEL
    return math.log2(16.0 * j * math.log2(j)) / (eta * j)


def poisson_parameter(j: int, eta: float) -> float:
    """Expected number of pulses in level ``j`` (Lebesgue measure of its B-window)."""
    if j == 0:
        return 1.0
    return 2.0 ** (eta * j) - 2.0 ** (eta * (j - 1))


def _level_bounds(b: np.ndarray, eta: float, j_max: int) -> np.ndarray:
    inv_width = b ** (1.0 / eta)
    ends = np.searchsorted(inv_width, 2.0 ** np.arange(j_max + 1), side="right")
    # a top pulse rounded just above 2**j_max still belongs to the last level
    ends[-1] = b.size
    return np.concatenate(([0], ends)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class Realization:
    """One sampled triple ``(c, b, x)``; arrays are read-only."""

    params: ModelParams
    c: np.ndarray
    b: np.ndarray
    x: np.ndarray
    level_bounds: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, params: ModelParams, c, b, x) -> "Realization":
        c = np.array(c, dtype=np.float64).ravel()
        b = np.array(b, dtype=np.float64).ravel()
        x = np.array(x, dtype=np.float64).ravel()
        if not c.size == b.size == x.size:
            raise ParameterError("c, b and x must have the same length")
        if b.size:
            if np.any(b <= 0) or np.any(np.diff(b) <= 0):
                raise ParameterError("b must be positive and strictly increasing")
            if np.any(c <= 0) or np.any(np.diff(c) <= 0):
                raise ParameterError("c must be positive and strictly increasing")
            if np.any((x < 0) | (x > 1)):
                raise ParameterError("x must lie in [0, 1]")
            if b[-1] ** (1.0 / params.eta) > 2.0 ** params.j_max:
                raise OutOfWindowError(
                    f"b^(1/eta) = {b[-1] ** (1.0 / params.eta):.6g} exceeds 2^jmax = {2.0 ** params.j_max:.6g}")
        for arr in (c, b, x):
            arr.flags.writeable = False
        bounds = _level_bounds(b, params.eta, params.j_max)
        bounds.flags.writeable = False
        return cls(params, c, b, x, bounds)

    @property
    def n_total(self) -> int:
        return int(self.b.size)

    @cached_property
    def inv_width(self) -> np.ndarray:
        """``b ** (1/eta)``: dilation factor of each pulse."""
        out = self.b ** (1.0 / self.params.eta)
        out.flags.writeable = False
        return out

    @cached_property
    def half_width(self) -> np.ndarray:
        """Support radius ``b ** (-1/eta)`` of each pulse."""
        out = 1.0 / self.inv_width
        out.flags.writeable = False
        return out

    @cached_property
    def amplitude(self) -> np.ndarray:
        """``c ** (-alpha)``."""
        out = self.c ** (-self.params.alpha)
        out.flags.writeable = False
        return out

    @cached_property
    def levels(self) -> np.ndarray:
        """Level index of every pulse."""
        out = np.repeat(np.arange(self.params.j_max + 1), np.diff(self.level_bounds))
        out.flags.writeable = False
        return out

    def level_x_order(self, j: int) -> np.ndarray:
        """Absolute indices of level ``j`` sorted by centre position."""
        return self._x_orders[j]

    @cached_property
    def _x_orders(self) -> list[np.ndarray]:
        out = []
        for j in range(self.params.j_max + 1):
            lo, hi = self.level_bounds[j], self.level_bounds[j + 1]
            out.append(lo + np.argsort(self.x[lo:hi], kind="stable"))
        return out

    def to_csv(self, path) -> Path:
        """Write ``n,c,b,x`` plus a JSON sidecar next to it."""
        path = Path(path)
        write_csv(path, ["n", "c", "b", "x"], [np.arange(self.n_total), self.c, self.b, self.x])
        write_json(path.with_suffix(".json"), {
            "kind": "realization",
            "version": __version__,
            "params": self.params.to_dict(),
            "n_total": self.n_total,
        })
        return path


def read_realization(path) -> Realization:
    """Inverse of :meth:`Realization.to_csv`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    cols = read_csv(path)
    return Realization.from_arrays(ModelParams(**meta["params"]), cols["c"], cols["b"], cols["x"])


def sample_realization(params: ModelParams) -> Realization:
    """Draw a realization.

    Level ``j`` gets ``N_j ~ Poisson(poisson_parameter(j))`` dilations uniform
    on its window of ``b`` values, drawn from its own substream together with
    the matching centres.  Pairing rule: after sorting, the n-th smallest
    ``b`` takes the n-th arrival time of the ``c`` process.
    """
    eta = params.eta
    bs, xs = [], []
    for j in range(params.j_max + 1):
        lo = 0.0 if j == 0 else 2.0 ** (eta * (j - 1))
        hi = 2.0 ** (eta * j)
        gb = substream(params.seed, "B", j)
        k = int(gb.poisson(hi - lo))
        # 1 - U lies in (0, 1], so values fall in (lo, hi]
        bs.append(np.sort(hi - (hi - lo) * gb.random(k)))
        xs.append(substream(params.seed, "X", j).random(k))
    b = np.concatenate(bs)
    x = np.concatenate(xs)
    c = np.cumsum(substream(params.seed, "C").standard_exponential(b.size))
    # guard against a top value rounding past the window edge
    lim = 2.0 ** params.j_max
    while b.size and b[-1] ** (1.0 / eta) > lim:
        b[-1] = np.nextafter(b[-1], 0.0)
    return Realization.from_arrays(params, c, b, x)


def level_slice(real: Realization, j: int) -> range:
    """Index range of level ``j`` (0-based pulse indices)."""
    if not 0 <= j <= real.params.j_max:
        raise OutOfWindowError(f"level {j} outside materialized window [0, {real.params.j_max}]")
    return range(int(real.level_bounds[j]), int(real.level_bounds[j + 1]))


@dataclass(frozen=True)
class LevelStats:
    j: int
    n_j: int
    poisson_parameter: float
    eps_j: float
    eps_tilde_j: float


def level_stats(real: Realization, j: int) -> LevelStats:
    sl = level_slice(real, j)
    eta = real.params.eta
    return LevelStats(j, len(sl), poisson_parameter(j, eta), eps_level(j, eta), eps_tilde_level(j, eta))
