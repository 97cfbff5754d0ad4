"""Command-line front end.

Exit codes: 0 success, 1 a verification failed, 2 bad usage or parameters,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments
from .errors import PulseFieldError
from .io import format_csv, write_csv, write_json
from .point_process import PULSE_KINDS, ModelParams, sample_realization
from .pulse_field import evaluate_field
from .regularity import exponent_field, pointwise_exponent, spectrum_estimate, theoretical_spectrum
from .wavelet import cwt_pulse_grid, cwt_signal_grid

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("simulate", "field", "cwt", "holder", "spectrum", "verify", "theory")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: ModelParams | None
    options: dict = field(default_factory=dict)
    out: Path | None = None
    fmt: str = "csv"


def _common(p: argparse.ArgumentParser, model: bool = True) -> None:
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    if not model:
        return
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--jmax", type=int, default=16)
    p.add_argument("--grid-bits", type=int, default=None)
    p.add_argument("--pulse", choices=PULSE_KINDS, default="hat")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--p0", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsefield", description="Random pulse fields and their regularity.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample pulse parameters (n,c,b,x)")
    _common(p)

    p = sub.add_parser("field", help="evaluate the field on the dyadic grid (x,F)")
    _common(p)
    p.add_argument("--j-lo", type=int, default=0)
    p.add_argument("--j-hi", type=int, default=None)

    p = sub.add_parser("cwt", help="continuous wavelet transform on scales 2^-m (m,t,W)")
    _common(p)
    p.add_argument("--m-lo", type=int, default=1)
    p.add_argument("--m-hi", type=int, default=None)
    p.add_argument("--method", choices=("signal", "pulse"), default="signal")

    p = sub.add_parser("holder", help="pointwise exponents on a lattice (x,h,r2) or at --x0")
    _common(p)
    p.add_argument("--stride", type=int, default=12)
    p.add_argument("--k-lo", type=int, default=None)
    p.add_argument("--k-hi", type=int, default=None)
    p.add_argument("--method", choices=("oscillation", "wavelet_cone"), default="oscillation")
    p.add_argument("--x0", type=float, default=None)

    p = sub.add_parser("spectrum", help="box-counting spectrum (H,dim_est,dim_theory,count)")
    _common(p)
    p.add_argument("--stride", type=int, default=12)
    p.add_argument("--k-lo", type=int, default=None)
    p.add_argument("--k-hi", type=int, default=None)
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--box-k-lo", type=int, default=4)
    p.add_argument("--box-k-hi", type=int, default=None)

    p = sub.add_parser("verify", help="run verification experiments")
    _common(p)
    p.add_argument("--suite", choices=("all",) + experiments.SUITE + ("ae_exponent",), default="all")
    p.add_argument("--seeds", default="1-5", help="e.g. 1-5 or 1,3,7")
    p.add_argument("--trials", type=int, default=500)

    p = sub.add_parser("theory", help="theoretical spectrum value at H")
    _common(p, model=False)
    p.add_argument("--H", type=float, required=True)
    return parser


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("empty seed list")
    return seeds


def parse_config(argv) -> RunConfig:
    """Parse and validate ``argv``; raises ``SystemExit(2)`` on unknown flags and
    :class:`UsageError` when a value breaks a precondition."""
    args = build_parser().parse_args(argv)
    if args.command == "theory":
        for name in ("alpha", "eta"):
            v = getattr(args, name)
            if not 0.0 < v < 1.0:
                raise UsageError(f"{name} must lie in (0,1), got {v!r}")
        return RunConfig("theory", None, {"alpha": args.alpha, "eta": args.eta, "H": args.H})
    try:
        params = ModelParams(args.alpha, args.eta, pulse_kind=args.pulse, gamma=args.gamma, p0=args.p0,
                             seed=args.seed, j_max=args.jmax, grid_bits=args.grid_bits)
    except PulseFieldError as exc:
        raise UsageError(str(exc)) from None
    opts = {k: v for k, v in vars(args).items()
            if k not in ("command", "alpha", "eta", "seed", "jmax", "grid_bits", "pulse", "gamma", "p0",
                         "out", "format")}
    g = params.grid_bits
    if args.command == "field":
        j_hi = params.j_max if opts["j_hi"] is None else opts["j_hi"]
        if not 0 <= opts["j_lo"] <= j_hi <= params.j_max:
            raise UsageError(f"--j-lo/--j-hi must satisfy 0 <= j-lo <= j-hi <= jmax={params.j_max}, "
                             f"got {opts['j_lo']}, {j_hi}")
        opts["j_hi"] = j_hi
    elif args.command == "cwt":
        m_hi = g - 4 if opts["m_hi"] is None else opts["m_hi"]
        if not 1 <= opts["m_lo"] <= m_hi <= g - 4:
            raise UsageError(f"--m-lo/--m-hi must satisfy 1 <= m-lo <= m-hi <= grid-bits - 4 = {g - 4}, "
                             f"got {opts['m_lo']}, {m_hi}")
        opts["m_hi"] = m_hi
    elif args.command in ("holder", "spectrum"):
        k_lo, k_hi = experiments.resolvable_window(params)
        opts["k_lo"] = k_lo if opts["k_lo"] is None else opts["k_lo"]
        opts["k_hi"] = k_hi if opts["k_hi"] is None else opts["k_hi"]
        if opts["k_hi"] - opts["k_lo"] + 1 < 4 or opts["k_lo"] < 1 or opts["k_hi"] > g:
            raise UsageError(f"--k-lo/--k-hi need at least 4 scales within 1..grid-bits={g}, "
                             f"got {opts['k_lo']}, {opts['k_hi']}")
        if not 1 <= opts["stride"] <= g:
            raise UsageError(f"--stride must lie in [1, grid-bits={g}], got {opts['stride']}")
        if args.command == "holder" and opts["x0"] is not None and not 0.0 <= opts["x0"] <= 1.0:
            raise UsageError(f"--x0 must lie in [0, 1], got {opts['x0']}")
        if args.command == "spectrum":
            opts["bin_width"] = 0.05 * params.alpha if opts["bin_width"] is None else opts["bin_width"]
            opts["box_k_hi"] = opts["stride"] - 2 if opts["box_k_hi"] is None else opts["box_k_hi"]
            if not 0.0 < opts["bin_width"] <= 1.0:
                raise UsageError(f"--bin-width must lie in (0, 1], got {opts['bin_width']}")
            if opts["box_k_hi"] - opts["box_k_lo"] + 1 < 4 or opts["box_k_hi"] + 2 > opts["stride"]:
                raise UsageError(f"--box-k-lo/--box-k-hi need at least 4 scales and box-k-hi <= stride - 2, "
                                 f"got {opts['box_k_lo']}, {opts['box_k_hi']}")
    elif args.command == "verify":
        try:
            opts["seeds"] = _parse_seeds(opts["seeds"])
        except ValueError:
            raise UsageError(f"--seeds must look like 1-5 or 1,3,7, got {opts['seeds']!r}") from None
        if opts["trials"] < 1:
            raise UsageError(f"--trials must be >= 1, got {opts['trials']}")
    return RunConfig(args.command, params, opts, args.out, args.format)


def _emit(cfg: RunConfig, header, columns, meta: dict, obj=None) -> None:
    if cfg.fmt == "json":
        payload = {"meta": meta, "columns": {h: np.asarray(c).tolist() for h, c in zip(header, columns)}}
        if cfg.out is None:
            sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
        else:
            write_json(cfg.out, payload)
        return
    if cfg.out is None:
        sys.stdout.write(format_csv(header, columns))
    elif obj is not None:
        obj.to_csv(cfg.out)
    else:
        write_csv(cfg.out, header, columns)


def run_command(cfg: RunConfig) -> int:
    o = cfg.options
    if cfg.command == "theory":
        value = theoretical_spectrum(o["alpha"], o["eta"], o["H"])
        sys.stdout.write(("-inf" if value == -math.inf else f"{value:.15g}") + "\n")
        return EXIT_OK
    params = cfg.params
    meta = {"params": params.to_dict(), "command": cfg.command}
    if cfg.command == "verify":
        names = experiments.SUITE if o["suite"] == "all" else (o["suite"],)
        reports = []
        for name in names:
            fn = getattr(experiments, f"verify_{name}")
            if name == "level_counts":
                reports.append(fn(params, o["trials"]))
            else:
                reports.append(fn(params, o["seeds"]))
            sys.stderr.write(reports[-1].to_text() + "\n")
        payload = [r.to_dict() for r in reports]
        if cfg.out is not None:
            write_json(cfg.out, payload)
        else:
            sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")
        return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL

    real = sample_realization(params)
    if cfg.command == "simulate":
        _emit(cfg, ["n", "c", "b", "x"], [np.arange(real.n_total), real.c, real.b, real.x],
              meta | {"n_total": real.n_total}, real)
        return EXIT_OK
    if cfg.command == "field":
        sig = evaluate_field(real, j_range=(o["j_lo"], o["j_hi"]))
        _emit(cfg, ["x", "F"], [sig.x, sig.values], meta | {"tail_estimate": sig.tail_estimate}, sig)
        return EXIT_OK
    if cfg.command == "cwt":
        if o["method"] == "signal":
            grid = cwt_signal_grid(evaluate_field(real), m_lo=o["m_lo"], m_hi=o["m_hi"])
        else:
            grid = cwt_pulse_grid(real, o["m_lo"], o["m_hi"])
        ms = np.concatenate([np.full(len(p), m, dtype=np.int64) for m, p in zip(grid.m_values, grid.positions)])
        _emit(cfg, ["m", "t", "W"], [ms, np.concatenate(grid.positions), np.concatenate(grid.coeffs)],
              meta | {"method": grid.method}, grid)
        return EXIT_OK
    sig = evaluate_field(real)
    cwt = None
    if cfg.command == "holder" and o["method"] == "wavelet_cone":
        cwt = cwt_signal_grid(sig, m_lo=max(1, o["k_lo"]), m_hi=min(o["k_hi"], sig.grid_bits - 4))
    if cfg.command == "holder" and o["x0"] is not None:
        h, diag = pointwise_exponent(sig, o["x0"], o["k_lo"], o["k_hi"], o["method"], cwt)
        sys.stdout.write(f"{h:.17g}\n")
        return EXIT_OK
    if cfg.command == "holder":
        fld = exponent_field(sig, o["stride"], o["method"], cwt, o["k_lo"], o["k_hi"])
        _emit(cfg, ["x", "h", "r2"], [fld.positions, fld.h_est, fld.r_squared],
              meta | {"scale_window": list(fld.scale_window), "method": fld.method}, fld)
        return EXIT_OK
    fld = exponent_field(sig, o["stride"], "oscillation", None, o["k_lo"], o["k_hi"])
    est = spectrum_estimate(fld, o["bin_width"], o["box_k_lo"], o["box_k_hi"], params.alpha, params.eta)
    _emit(cfg, ["H", "dim_est", "dim_theory", "count"],
          [est.bin_centers, est.dims, est.theory, est.counts.astype(np.int64)], meta, est)
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"pulsefield: error: {exc}\n")
        return EXIT_USAGE
    try:
        return run_command(cfg)
    except OSError as exc:
        sys.stderr.write(f"pulsefield: I/O error: {exc}\n")
        return EXIT_IO
    except PulseFieldError as exc:
        sys.stderr.write(f"pulsefield: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
