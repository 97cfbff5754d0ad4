"""Verification battery: finite-scale checks of the model's almost-sure statements.

Every experiment returns a :class:`VerificationReport` carrying the statistic,
its target and tolerance, the per-seed table it was computed from and any
flags raised on the way.  Tolerances are desk-scale choices and are recorded
in each report.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .geometry import isolated_indices, overlap_count, union_coverage
from .io import write_json, write_text
from .point_process import ModelParams, eps_level, poisson_parameter, sample_realization
from .pulse_field import evaluate_field
from .regularity import H_CAP, exponent_field, pointwise_exponents, spectrum_estimate, uniform_modulus
from .fitting import fit_power_log
from .rng import substream
from .wavelet import cwt_signal_grid, uniform_decay_fit

DEFAULT_SEEDS = (1, 2, 3, 4, 5)
SUITE = ("level_counts", "overlap_bound", "coverage", "uniform_regularity", "spectrum")


@dataclass
class VerificationReport:
    name: str
    params: ModelParams
    seeds: list
    statistic: float
    target: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    sense: str = "two_sided"  # or "at_least" / "at_most"

    def to_dict(self) -> dict:
        return {
            "name": self.name, "params": self.params.to_dict(), "seeds": list(self.seeds),
            "statistic": self.statistic, "target": self.target, "tolerance": self.tolerance,
            "sense": self.sense, "pass": self.passed, "flags": list(self.flags), "details": self.details,
        }

    def to_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        rows = [
            ("experiment", self.name),
            ("status", status),
            ("statistic", f"{self.statistic:.6g}"),
            ("target", f"{self.target:.6g} ({self.sense}, tol {self.tolerance:.6g})"),
            ("alpha, eta", f"{self.params.alpha:g}, {self.params.eta:g}"),
            ("jmax, grid", f"{self.params.j_max}, 2^{self.params.grid_bits}"),
            ("seeds", ",".join(str(s) for s in self.seeds)),
        ]
        if self.flags:
            rows.append(("flags", "; ".join(self.flags)))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"

    def write(self, path) -> None:
        write_json(path, self.to_dict())

    def write_text(self, path) -> None:
        write_text(path, self.to_text())


def _judge(statistic: float, target: float, tol: float, sense: str) -> bool:
    if not np.isfinite(statistic):
        return False
    if sense == "at_least":
        return statistic >= target - tol
    if sense == "at_most":
        return statistic <= target + tol
    return abs(statistic - target) <= tol


def _map(fn, items):
    """Map over seeds, on ``PULSEFIELD_THREADS`` worker threads when set."""
    n = int(os.environ.get("PULSEFIELD_THREADS", "1") or 1)
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def resolvable_window(params: ModelParams, k_lo: int = 3) -> tuple[int, int]:
    """Scales ``2^-k`` a truncated field resolves at a typical point: ``k_lo .. floor(eta jmax)``.

    Pulses above ``jmax`` are missing, and a typical point only feels
    level ``j`` at distances around ``2^{-eta j}``.
    """
    return k_lo, int(math.floor(params.eta * params.j_max + 1e-12))


# --- level counts -------------------------------------------------------------

def verify_level_counts(params: ModelParams, trials: int = 500, first_seed: int = 1) -> VerificationReport:
    """Poisson law of the level populations over ``trials`` seeds.

    Per level ``j in [4, jmax]``: sample mean within 3 standard errors of
    ``2^{eta j} - 2^{eta (j-1)}`` and dispersion index in ``[0.8, 1.2]``; for
    ``j >= 8`` at most 1% of the draws may leave ``[2^{eta j}/j, j 2^{eta j}]``.
    """
    eta = params.eta
    seeds = list(range(first_seed, first_seed + trials))
    levels = list(range(4, params.j_max + 1))
    counts = np.array(_map(lambda s: np.diff(sample_realization(params.replace(seed=s)).level_bounds)[4:],
                           seeds), dtype=np.float64).reshape(trials, len(levels))
    flags = []
    if trials < 100:
        flags.append("low power: fewer than 100 trials; bound failure rate reported, not judged")
    rows = []
    z_max, disp_ok, bound_ok = 0.0, True, True
    for col, j in enumerate(levels):
        lam = poisson_parameter(j, eta)
        n = counts[:, col]
        mean = float(n.mean())
        se = math.sqrt(lam / trials)
        z = abs(mean - lam) / se
        disp = float(n.var(ddof=1) / mean) if trials > 1 and mean > 0 else math.nan
        row = {"j": j, "lambda": lam, "mean": mean, "stderr": se, "z": z, "dispersion": disp}
        z_max = max(z_max, z)
        if np.isfinite(disp):
            disp_ok &= 0.8 <= disp <= 1.2
        if j >= 8:
            width = 2.0 ** (eta * j * eps_level(j, eta))
            lo, hi = 2.0 ** (eta * j) / width, 2.0 ** (eta * j) * width
            fail = float(np.mean((n < lo) | (n > hi)))
            row["bound_failure_rate"] = fail
            # a 1% rate is not resolvable with fewer than 100 draws
            if trials >= 100:
                bound_ok &= fail <= 0.01
        rows.append(row)
    if trials < 2:
        flags.append("dispersion undefined for a single trial")
    passed = z_max <= 3.0 and disp_ok and bound_ok
    if not disp_ok:
        flags.append("dispersion outside [0.8, 1.2]")
    if not bound_ok:
        flags.append("almost-sure level bound violated in more than 1% of draws")
    return VerificationReport("level_counts", params, seeds, z_max, 0.0, 3.0, passed,
                              {"levels": rows}, flags, "at_most")


# --- overlap law --------------------------------------------------------------

def _no_growth(ratios: np.ndarray) -> bool:
    """The upper half of a ratio sequence stays within twice its median."""
    tail = ratios[len(ratios) // 2:]
    return bool(np.all(tail <= 2.0 * np.median(ratios)))


def verify_overlap_bound(params: ModelParams, seeds=DEFAULT_SEEDS, grid_bits: int = 14) -> VerificationReport:
    """``M_j = max_x #(level-j supports containing x)`` grows no faster than ``j^2``.

    Pass when the seed-averaged ``M_j / j^2`` has a non-increasing trend
    (Spearman rho <= 0) over ``j = 6..jmax`` and its upper half stays within
    twice the median.  Spot checks at ``r = 2^{-eta J}`` for three ``J`` are
    normalized by ``j^2 max(1, 2^{eta (j-J)})`` and held to the same rule.
    """
    levels = np.arange(6, params.j_max + 1)
    if levels.size < 3:
        raise ValueError(f"overlap check needs jmax >= 8, got {params.j_max}")
    grid = np.arange(2**grid_bits + 1) * 2.0**-grid_bits
    spot_J = sorted({int(levels[len(levels) // 3]), int(levels[2 * len(levels) // 3]), int(levels[-1])})
    eta = params.eta

    def one(seed):
        real = sample_realization(params.replace(seed=seed))
        m0 = [int(overlap_count(real, int(j), grid, 0.0).max()) for j in levels]
        spots = {J: [int(overlap_count(real, int(j), grid, 2.0 ** (-eta * J)).max()) for j in levels]
                 for J in spot_J}
        return m0, spots

    runs = _map(one, seeds)
    m = np.array([r[0] for r in runs], dtype=np.float64)
    ratio = (m / levels**2).mean(axis=0)
    rho = float(spearmanr(levels, ratio).statistic) if np.ptp(ratio) > 0 else 0.0
    if not np.isfinite(rho):
        rho = 0.0
    K = float((m / levels**2).max())
    # at most one support over any point bounds the sum with K = 1 outright
    trivial = bool(m.max() <= 1)
    spot_rows, spot_ok = [], True
    for J in spot_J:
        mj = np.array([r[1][J] for r in runs], dtype=np.float64).mean(axis=0)
        norm = levels**2 * np.maximum(1.0, 2.0 ** (eta * (levels - J)))
        sr = mj / norm
        ok = trivial or _no_growth(sr)
        spot_ok &= ok
        spot_rows.append({"J": J, "ratios": sr.tolist(), "max_over_K": float(sr.max() / K) if K > 0 else 0.0,
                          "pass": ok})
    flags = ["every M_j <= 1: bound holds with K = 1, trend tests skipped"] if trivial else []
    growth_ok = trivial or _no_growth(ratio)
    if not growth_ok:
        flags.append("M_j/j^2 upper half exceeds twice the median")
    if not spot_ok:
        flags.append("spot check at r = 2^{-eta J} shows growth")
    passed = trivial or (rho <= 0.0 and growth_ok and spot_ok)
    details = {"j": levels.tolist(), "M_j_per_seed": m.astype(int).tolist(), "ratio_mean": ratio.tolist(),
               "spearman_rho": rho, "K": K, "grid_bits": grid_bits, "spot_checks": spot_rows}
    return VerificationReport("overlap_bound", params, list(seeds), rho, 0.0, 0.0, passed, details, flags,
                              "at_most")


# --- coverage -----------------------------------------------------------------

def verify_coverage(params: ModelParams, seeds=DEFAULT_SEEDS, grid_bits: int | None = None) -> VerificationReport:
    """Union coverage of the isolated-pulse balls (delta = 1) and of the enlarged covering.

    Pass when, on every seed, both cumulative fractions are at least 0.99 and
    every level ``j in [8, 14]`` (within the window) has isolated pulses.
    """
    g = params.grid_bits if grid_bits is None else grid_bits
    j_hi = params.j_max
    flags = []
    if j_hi < 8:
        flags.append("truncation too coarse: jmax < 8")
    iso_levels = [j for j in range(8, 15) if j <= j_hi]

    def one(seed):
        real = sample_realization(params.replace(seed=seed))
        gp = union_coverage(real, "G_prime_delta", 1.0, 2, j_hi, g)
        eq = union_coverage(real, "full_covering", 1.0, 2, j_hi, g)
        sizes = {j: len(isolated_indices(real, j).indices) for j in range(2, j_hi + 1)}
        return gp.cumulative_fraction, eq.cumulative_fraction, sizes

    runs = _map(one, seeds)
    gp = np.array([r[0] for r in runs])
    eq = np.array([r[1] for r in runs])
    empty = sorted({(s, j) for s, r in zip(seeds, runs) for j in iso_levels if r[2][j] == 0})
    statistic = float(min(gp.min(), eq.min()))
    passed = statistic >= 0.99 and not empty and j_hi >= 8
    if empty:
        flags.append(f"{len(empty)} (seed, level) pairs in [8, 14] without isolated pulses")
    details = {
        "G_prime_coverage": gp.tolist(), "covering_coverage": eq.tolist(), "grid_bits": g,
        "isolated_counts": [{str(j): n for j, n in r[2].items()} for r in runs],
        "empty_levels": [list(p) for p in empty],
    }
    return VerificationReport("coverage", params, list(seeds), statistic, 1.0, 0.01, passed, details, flags,
                              "at_least")


# --- uniform regularity -------------------------------------------------------

def _default_field(params: ModelParams):
    return lambda seed: evaluate_field(sample_realization(params.replace(seed=seed)))


def verify_uniform_regularity(params: ModelParams, seeds=DEFAULT_SEEDS,
                              window: tuple[int, int] | None = None, field_fn=None) -> VerificationReport:
    """Uniform exponent ``alpha eta`` from wavelet decay and from the modulus of continuity.

    Both are raw power-law slopes over scales ``2^-k``, ``k`` in ``window``
    (default ``5 .. grid_bits - 4``), averaged over seeds; each must land
    within 0.1 of ``alpha eta``.  The fits with the ``|log2 s|^{2+alpha}``
    factor divided out are reported alongside.  ``field_fn(seed) -> Signal``
    replaces the simulated field; a mean fit of 0.9 or more marks the input as
    smooth and the check as non-applicable.
    """
    g = params.grid_bits
    lo, hi = window if window is not None else (5, g - 4)
    target = params.alpha * params.eta
    p_log = 2.0 + params.alpha

    make = field_fn or _default_field(params)

    def one(seed):
        sig = make(seed)
        g = sig.grid_bits
        grid = cwt_signal_grid(sig, m_lo=1, m_hi=g - 4)
        cwt_raw, _ = uniform_decay_fit(grid, m_window=(lo, hi))
        cwt_log, _ = uniform_decay_fit(grid, log_power=p_log, m_window=(lo, hi))
        mod = uniform_modulus(sig, lo, hi)
        mod_raw, _ = fit_power_log(mod)
        mod_log, _ = fit_power_log(mod, p_log)
        return cwt_raw, mod_raw, cwt_log, mod_log

    runs = np.array(_map(one, seeds))
    means = runs.mean(axis=0)
    ok_cwt = abs(means[0] - target) <= 0.1
    ok_mod = abs(means[1] - target) <= 0.1
    flags = []
    if not ok_cwt:
        flags.append("wavelet-decay fit outside tolerance")
    if not ok_mod:
        flags.append("modulus fit outside tolerance")
    if means[0] >= 0.9 or means[1] >= 0.9:
        flags.append("non-applicable: fitted exponent >= 0.9, signal looks smooth at these scales")
    details = {
        "window": [lo, hi], "uncapped_mean_cwt_raw": float(means[0]), "cwt_raw": runs[:, 0].tolist(), "modulus_raw": runs[:, 1].tolist(),
        "cwt_log_corrected": runs[:, 2].tolist(), "modulus_log_corrected": runs[:, 3].tolist(),
        "log_power": p_log, "mean_cwt_raw": float(means[0]), "mean_modulus_raw": float(means[1]),
        "mean_cwt_log_corrected": float(means[2]), "mean_modulus_log_corrected": float(means[3]),
    }
    return VerificationReport("uniform_regularity", params, list(seeds), float(min(means[0], H_CAP)), target, 0.1,
                              bool(ok_cwt and ok_mod), details, flags)


# --- pointwise and spectrum ---------------------------------------------------

def sample_exponents(params: ModelParams, seeds=DEFAULT_SEEDS, n_points: int = 200,
                     window: tuple[int, int] | None = None) -> np.ndarray:
    """Pointwise exponents at ``n_points`` uniform random grid points per seed.

    Points come from their own random stream, so they do not depend on the
    field.  Returns an array of shape ``(len(seeds), n_points)``.
    """
    lo, hi = window if window is not None else resolvable_window(params)

    def one(seed):
        p = params.replace(seed=seed)
        sig = evaluate_field(sample_realization(p))
        xs = substream(seed, "points").random(n_points)
        idx = np.round(xs * 2**sig.grid_bits).astype(np.int64)
        return pointwise_exponents(sig, idx, lo, hi)[0]

    return np.array(_map(one, seeds))


def verify_ae_exponent(params: ModelParams, seeds=DEFAULT_SEEDS, n_points: int = 200,
                       window: tuple[int, int] | None = None) -> VerificationReport:
    """Median pointwise exponent at uniform random points, pooled over seeds, within ``alpha +- 0.1``."""
    win = window if window is not None else resolvable_window(params)
    flags = []
    if win[1] - win[0] + 1 < 4:
        flags.append("fewer than 4 resolvable scales: raise jmax")
        return VerificationReport("ae_exponent", params, list(seeds), math.nan, params.alpha, 0.1, False,
                                  {"window": list(win)}, flags)
    h = sample_exponents(params, seeds, n_points, win)
    med = float(np.median(h))
    details = {"window": list(win), "n_points": n_points, "median_per_seed": np.median(h, axis=1).tolist(),
               "capped_fraction": float(np.mean(h >= 1.0))}
    return VerificationReport("ae_exponent", params, list(seeds), med, params.alpha, 0.1,
                              _judge(med, params.alpha, 0.1, "two_sided"), details, flags)


def monotone_violations(values: np.ndarray) -> int:
    """Number of strict decreases between consecutive finite entries."""
    v = values[np.isfinite(values)]
    return int(np.sum(np.diff(v) < 0))


def verify_spectrum(params: ModelParams, seeds=DEFAULT_SEEDS, stride_bits: int = 12,
                    window: tuple[int, int] | None = None, field_fn=None) -> VerificationReport:
    """Box-counting spectrum of the exponent field against ``H/alpha``.

    Pass when (a) the pooled median exponent is within ``alpha +- 0.1``,
    (b) the seed-averaged box dimension stays within 0.2 of ``H/alpha`` on
    every interior bin, and (c) those dimensions are nondecreasing in ``H``
    up to one violation.  When no interior bin holds any point the interior
    tests pass vacuously and are flagged.  ``field_fn(seed) -> Signal``
    replaces the simulated field.
    """
    a, e = params.alpha, params.eta
    win = window if window is not None else resolvable_window(params)
    flags = []
    if win[1] - win[0] + 1 < 4:
        flags.append("fewer than 4 resolvable scales: raise jmax")
        return VerificationReport("spectrum", params, list(seeds), math.nan, 0.0, 0.2, False,
                                  {"window": list(win)}, flags, "at_most")

    make = field_fn or _default_field(params)

    def one(seed):
        sig = make(seed)
        fld = exponent_field(sig, stride_bits, k_lo=win[0], k_hi=win[1])
        return fld.h_est, spectrum_estimate(fld, 0.05 * a, 4, stride_bits - 2, a, e)

    runs = _map(one, seeds)
    med = float(np.median(np.concatenate([r[0] for r in runs])))
    specs = [r[1] for r in runs]
    mask = specs[0].interior_mask()
    dims = np.array([s.dims for s in specs])
    finite = np.isfinite(dims)
    n_fin = finite.sum(axis=0)
    sums = np.where(finite, dims, 0.0).sum(axis=0)
    mean_dims = np.full(dims.shape[1], -np.inf)
    mean_dims[n_fin > 0] = sums[n_fin > 0] / n_fin[n_fin > 0]
    theory = specs[0].theory
    occupied = np.array([s.counts for s in specs]).sum(axis=0) > 0
    if (mask & occupied).any():
        dev = float(np.max(np.abs(mean_dims[mask] - theory[mask])))
        violations = monotone_violations(mean_dims[mask])
    else:
        dev, violations = 0.0, 0
        flags.append("no occupied interior bins: interior tests pass vacuously")
    ok_med = abs(med - a) <= 0.1
    ok_dev = dev <= 0.2
    ok_mono = violations <= 1
    for ok, msg in ((ok_med, "median exponent outside alpha +- 0.1"), (ok_dev, "spectrum deviation above 0.2"),
                    (ok_mono, f"{violations} monotonicity violations")):
        if not ok:
            flags.append(msg)
    details = {
        "window": list(win), "stride_bits": stride_bits, "median_h": med,
        "bin_centers": specs[0].bin_centers.tolist(), "interior": mask.tolist(),
        "dims_mean": mean_dims.tolist(), "occupied_bins": int(occupied.sum()), "theory": theory.tolist(),
        "counts": [s.counts.tolist() for s in specs], "monotone_violations": violations,
    }
    return VerificationReport("spectrum", params, list(seeds), dev, 0.0, 0.2, bool(ok_med and ok_dev and ok_mono),
                              details, flags, "at_most")


def run_suite(params: ModelParams, seeds=DEFAULT_SEEDS, trials: int = 500) -> list[VerificationReport]:
    """The five experiments in a fixed order; each builds its own realizations."""
    return [
        verify_level_counts(params, trials),
        verify_overlap_bound(params, seeds),
        verify_coverage(params, seeds),
        verify_uniform_regularity(params, seeds),
        verify_spectrum(params, seeds),
    ]
