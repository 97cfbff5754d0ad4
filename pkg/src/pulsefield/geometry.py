"""Covering combinatorics of the pulse supports.

All balls are closed: ``x`` lies in ``B(c, r)`` iff ``|x - c| <= r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, OutOfWindowError
from .io import write_csv, write_json
from .point_process import Realization, eps_level, eps_tilde_level, level_slice

VARIANTS = ("G_delta", "G_prime_delta", "full_covering", "G_tilde_one")

# relative slack used when bracketing candidates before the exact test
_SLACK = 1e-12


def covers(real: Realization, n: int, x: float, r: float) -> bool:
    """Whether the support of pulse ``n`` meets ``B(x, r)``."""
    if not 0 <= n < real.n_total:
        raise OutOfWindowError(f"pulse index {n} outside [0, {real.n_total})")
    return bool(abs(x - real.x[n]) <= r + real.half_width[n])


def _level_candidates(real: Realization, j: int, x: np.ndarray, reach: float):
    """Yield ``(idx, valid)`` pairs enumerating, for every query point, the
    level-``j`` pulses whose centre is within ``reach`` of it."""
    order = real.level_x_order(j)
    xs = real.x[order]
    slack = _SLACK * (1.0 + reach)
    lo = np.searchsorted(xs, x - reach - slack, side="left")
    hi = np.searchsorted(xs, x + reach + slack, side="right")
    width = int((hi - lo).max(initial=0))
    for d in range(width):
        pos = lo + d
        valid = pos < hi
        yield order[np.minimum(pos, max(order.size - 1, 0))], valid


def overlap_count(real: Realization, j: int, x, r: float):
    """Number of level-``j`` pulses whose support meets ``B(x, r)``.

    ``x`` may be an array; candidates come from the level's centre-sorted
    index and are then tested exactly.
    """
    sl = level_slice(real, j)
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    counts = np.zeros(arr.shape, dtype=np.int64)
    if len(sl):
        reach = r + float(real.half_width[sl.start:sl.stop].max())
        for idx, valid in _level_candidates(real, j, arr, reach):
            hit = np.abs(arr - real.x[idx]) <= r + real.half_width[idx]
            counts += valid & hit
    if np.ndim(x) == 0:
        return int(counts[0])
    return counts


def local_count_l_jk(real: Realization, j: int, k: int) -> int:
    """Level-``j`` centres in the dyadic interval ``I_{j_eta,k}`` widened by ``2^{-j_eta+1}``,
    where ``j_eta = floor(eta j)``."""
    sl = level_slice(real, j)
    j_eta = math.floor(real.params.eta * j + 1e-12)
    if not 0 <= k < 2**j_eta:
        raise OutOfWindowError(f"k={k} outside [0, {2**j_eta})")
    size = 2.0**-j_eta
    lo = k * size - 2 * size
    hi = (k + 1) * size + 2 * size
    xs = real.x[real.level_x_order(j)] if len(sl) else np.empty(0)
    return int(np.searchsorted(xs, hi, side="right") - np.searchsorted(xs, lo, side="left"))


@dataclass(frozen=True)
class IsolatedSet:
    j: int
    indices: frozenset
    a_tilde_range: tuple[int, int]


def isolation_window(real: Realization, j: int) -> tuple[int, int]:
    """Levels ``floor((1 - p0 eta eps_j) j) .. floor(gamma j)``, lower end clamped at 0."""
    p = real.params
    if j < 2:
        raise DomainError(f"isolation needs j >= 2, got {j}")
    lo = max(0, math.floor((1.0 - p.p0 * p.eta * eps_level(j, p.eta)) * j))
    hi = math.floor(p.gamma * j)
    if hi > p.j_max:
        raise OutOfWindowError(f"isolation window for level {j} reaches level {hi} > jmax = {p.j_max}; raise jmax")
    return lo, hi


def isolated_indices(real: Realization, j: int) -> IsolatedSet:
    """Level-``j`` pulses whose support is disjoint from every other support in the window."""
    lo_j, hi_j = isolation_window(real, j)
    sl = level_slice(real, j)
    start, stop = int(real.level_bounds[lo_j]), int(real.level_bounds[hi_j + 1])
    if not len(sl):
        return IsolatedSet(j, frozenset(), (lo_j, hi_j))
    idx = np.arange(start, stop)
    left = real.x[idx] - real.half_width[idx]
    right = real.x[idx] + real.half_width[idx]
    order = np.argsort(left, kind="stable")
    left, right, idx = left[order], right[order], idx[order]
    # sweep: an interval is isolated iff no earlier one reaches it and the next one starts after it
    prev_reach = np.concatenate(([-np.inf], np.maximum.accumulate(right)[:-1]))
    next_left = np.concatenate((left[1:], [np.inf]))
    free = (prev_reach < left) & (next_left > right)
    in_level = (idx >= sl.start) & (idx < sl.stop)
    return IsolatedSet(j, frozenset(int(n) for n in idx[free & in_level]), (lo_j, hi_j))


def _ball_radii(real: Realization, variant: str, delta: float, j: int):
    """Indices and radii of the balls a variant places at level ``j``."""
    eta = real.params.eta
    sl = level_slice(real, j)
    b = real.b[sl.start:sl.stop]
    idx = np.arange(sl.start, sl.stop)
    if variant == "G_delta":
        return idx, b ** -delta
    if variant == "G_prime_delta":
        iso = np.array(sorted(isolated_indices(real, j).indices), dtype=np.int64)
        return iso, real.b[iso] ** (-delta * (1.0 - eps_tilde_level(j, eta)))
    if variant == "full_covering":
        return idx, b ** -(1.0 - eps_tilde_level(j, eta))
    if variant == "G_tilde_one":
        return idx, b ** -(1.0 + 3.0 * eps_level(j, eta))
    raise DomainError(f"unknown coverage variant {variant!r}")


def _check_variant(real: Realization, variant: str, delta: float) -> None:
    if variant not in VARIANTS:
        raise DomainError(f"unknown coverage variant {variant!r}; choose from {VARIANTS}")
    if variant in ("G_delta", "G_prime_delta"):
        eta = real.params.eta
        if not 1.0 <= delta <= 1.0 / eta:
            raise DomainError(f"delta must lie in [1, 1/eta] = [1, {1.0 / eta:.6g}], got {delta}")


def _mark(grid: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Boolean mask of sorted ``grid`` points inside any closed ball."""
    mark = np.zeros(grid.size + 1, dtype=np.int64)
    if centers.size:
        slack = _SLACK * (1.0 + radii)
        lo = np.searchsorted(grid, centers - radii - slack, side="left")
        hi = np.searchsorted(grid, centers + radii + slack, side="right")
        last = grid.size - 1
        # trim the bracket ends to the exact closed-ball test (at most a point or two)
        for _ in range(3):
            drop = (lo < hi) & (np.abs(grid[np.minimum(lo, last)] - centers) > radii)
            lo = lo + drop
            drop = (lo < hi) & (np.abs(grid[np.maximum(hi - 1, 0)] - centers) > radii)
            hi = hi - drop
        ok = lo < hi
        np.add.at(mark, lo[ok], 1)
        np.add.at(mark, hi[ok], -1)
    return np.cumsum(mark[:-1]) > 0


@dataclass(frozen=True)
class CoverageReport:
    variant: str
    delta: float
    per_level: list = field(default_factory=list)  # (j, covered_fraction, ball_count)
    cumulative_fraction: float = 0.0
    grid_bits: int = 0

    def to_csv(self, path) -> Path:
        path = Path(path)
        rows = self.per_level
        write_csv(path, ["j", "ball_count", "covered_fraction"],
                  [np.array([r[0] for r in rows], dtype=np.int64),
                   np.array([r[2] for r in rows], dtype=np.int64),
                   np.array([r[1] for r in rows], dtype=np.float64)])
        write_json(path.with_suffix(".json"), {
            "variant": self.variant, "delta": self.delta,
            "cumulative_fraction": self.cumulative_fraction, "grid_bits": self.grid_bits,
        })
        return path


def union_coverage(real: Realization, variant: str, delta: float, j_lo: int, j_hi: int,
                   grid_bits: int) -> CoverageReport:
    """Fraction of grid points covered by each level's balls and by their union."""
    _check_variant(real, variant, delta)
    if j_lo < 2:
        raise DomainError(f"j_lo must be >= 2, got {j_lo}")
    if j_hi > real.params.j_max:
        raise OutOfWindowError(f"j_hi={j_hi} exceeds jmax={real.params.j_max}")
    grid = np.arange(2**grid_bits + 1) * 2.0**-grid_bits
    union = np.zeros(grid.size, dtype=bool)
    per_level = []
    for j in range(j_lo, j_hi + 1):
        idx, radii = _ball_radii(real, variant, delta, j)
        mask = _mark(grid, real.x[idx], np.asarray(radii, dtype=np.float64))
        union |= mask
        per_level.append((j, float(mask.mean()), int(idx.size)))
    return CoverageReport(variant, float(delta), per_level, float(union.mean()), grid_bits)


def limsup_hits(real: Realization, x: float, variant: str, delta: float = 1.0) -> list[int]:
    """Levels whose variant balls contain ``x`` (levels from 2, or 0 for ``G_delta``)."""
    _check_variant(real, variant, delta)
    p = real.params
    first = 0 if variant == "G_delta" else 2
    last = p.j_max
    if variant == "G_prime_delta":
        last = min(last, math.floor(p.j_max / p.gamma))
    hits = []
    for j in range(first, last + 1):
        idx, radii = _ball_radii(real, variant, delta, j)
        if idx.size and np.any(np.abs(x - real.x[idx]) <= radii):
            hits.append(j)
    return hits
