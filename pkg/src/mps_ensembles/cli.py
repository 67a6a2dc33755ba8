"""Command-line interface for ensemble sweeps and analysis.

Subcommands: sweep, spectrum, minfo, fit, order-param, figure,
oracle-check. Exit codes: 0 success, 2 config error, 3 budget exceeded,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (BudgetExceededError, CapExceededError, ConfigError,
                     MpsEnsemblesError, NumericalError)
from .harness import (FIGURES, SweepConfig, emit_figure_data, fit_alpha,
                      order_parameter_scan, read_csv, run_sweep, write_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERICAL = 4


def _add_grid_args(parser: argparse.ArgumentParser):
    parser.add_argument("--family", default=None,
                        choices=["rmps", "brickwork_ti", "brickwork", "monitored"])
    parser.add_argument("--chi", type=int, nargs="+", default=None)
    parser.add_argument("--p", type=float, nargs="+", default=None)
    parser.add_argument("--r", type=int, nargs="+", default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--N", type=int, default=None)
    parser.add_argument("--depth", type=int, default=None)
    parser.add_argument("--realizations", type=int, default=None)


def _build_config(args) -> SweepConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    overrides = {
        "family": args.family,
        "N": args.N,
        "chi_grid": tuple(args.chi) if args.chi else None,
        "p_grid": tuple(args.p) if args.p else None,
        "r_grid": tuple(args.r) if args.r else None,
        "k": args.k,
        "depth": args.depth,
        "realizations": args.realizations,
        "seed": args.seed,
        "workers": args.workers,
        "out_dir": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if "family" not in data:
        raise ConfigError("a family is required (flag --family or config file)")
    data.setdefault("N", 16)
    data.setdefault("chi_grid", (8,))
    data.setdefault("seed", 0)
    data.setdefault("out_dir", "mps_ensembles_out")
    return SweepConfig.from_dict(data)


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    result = run_sweep(config)
    print(f"sweep complete: {result.n_spectra_rows} spectra rows, "
          f"{result.n_minfo_rows} minfo rows -> {result.out_dir}")
    for point, err in result.point_errors.items():
        print(f"grid point {point}: budget exceeded ({err})")
    return EXIT_BUDGET if result.point_errors else EXIT_OK


def _cmd_spectrum(args) -> int:
    args.config = None
    config = _build_config(args)
    config.measure_minfo = False
    config.measure_spectra = True
    result = run_sweep(config.validate())
    print(f"wrote {result.n_spectra_rows} eigenvalue rows to "
          f"{result.out_dir / 'spectra.csv'}")
    return EXIT_BUDGET if result.point_errors else EXIT_OK


def _cmd_minfo(args) -> int:
    args.config = None
    config = _build_config(args)
    config.measure_minfo = True
    config.measure_spectra = False
    result = run_sweep(config.validate())
    print(f"wrote {result.n_minfo_rows} mutual-information rows to "
          f"{result.out_dir / 'minfo.csv'}")
    return EXIT_BUDGET if result.point_errors else EXIT_OK


def _cmd_fit(args) -> int:
    rows = read_csv(args.data)
    fit = fit_alpha(rows, k=args.k, r=args.r_fixed, chi_min=args.chi_min,
                    estimator=args.estimator)
    print(json.dumps(fit.as_dict(), indent=2, sort_keys=True))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "fit.json", "w") as fh:
            json.dump(fit.as_dict(), fh, indent=2, sort_keys=True)
    return EXIT_OK


def _cmd_order_param(args) -> int:
    rows = read_csv(args.data)
    rho_grid = np.linspace(args.rho_min, args.rho_max, args.rho_points)
    table = order_parameter_scan(rows, rho_grid=rho_grid)
    out_rows = [(row["p"], row["chi"], row["intercept"], row["intercept_stderr"],
                 row["n_pooled"], row["low_confidence"]) for row in table]
    header = ("p", "chi", "P_zero_plus", "P_zero_plus_stderr", "n_pooled",
              "low_confidence")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(args.out) / "order_param.csv", header, out_rows)
        print(f"wrote {len(out_rows)} rows to {Path(args.out) / 'order_param.csv'}")
    else:
        print(",".join(header))
        for row in out_rows:
            print(",".join(str(v) for v in row))
    return EXIT_OK


def _cmd_figure(args) -> int:
    spectra_rows = read_csv(args.spectra) if args.spectra else None
    minfo_rows = read_csv(args.minfo) if args.minfo else None
    extra = {}
    for item in args.compare or []:
        family, _, path = item.partition("=")
        if not path:
            raise ConfigError("--compare expects family=path/to/spectra.csv")
        extra[family] = read_csv(path)
    out_dir = args.out if args.out is not None else "mps_ensembles_out"
    written = emit_figure_data(args.figure, out_dir, spectra_rows=spectra_rows,
                               minfo_rows=minfo_rows,
                               extra_spectra=extra or None,
                               k=args.k, d=args.d, plot=args.plot)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_oracle_check(args) -> int:
    """Fast dual-path identity battery; fails with exit code 4."""
    from .replica import ReplicaOperator, renyi_mutual_info_TI
    from .rng import GATES, substream
    from .spectra import connected_correlator
    from .circuits import build_rmps
    from .weingarten import identity_perm

    rng = substream(args.seed if args.seed is not None else 0, 0, GATES)
    failures = []

    tensor = build_rmps(1, 3, 2, rng, uniform=True).tensors[0]
    z = np.diag([1.0, -1.0])
    try:
        connected_correlator(tensor, z, r=2)
        print("oracle-check: correlator eigenexpansion vs direct . PASS")
    except MpsEnsemblesError as exc:
        failures.append(f"correlator: {exc}")
        print("oracle-check: correlator eigenexpansion vs direct . FAIL")

    tensor2 = build_rmps(1, 2, 2, rng, uniform=True).tensors[0]
    try:
        renyi_mutual_info_TI(tensor2, k=2, r=1)
        print("oracle-check: TI mutual information dual path ..... PASS")
    except MpsEnsemblesError as exc:
        failures.append(f"ti minfo: {exc}")
        print("oracle-check: TI mutual information dual path ..... FAIL")

    op_dense = ReplicaOperator(tensor2, 2, identity_perm(2), mode="dense")
    op_contr = ReplicaOperator(tensor2, 2, identity_perm(2))
    ok = True
    for _ in range(10):
        v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        if np.linalg.norm(op_dense.apply(v) - op_contr.apply(v)) > 1e-10 * np.linalg.norm(v):
            ok = False
    print(f"oracle-check: replica dense vs contraction ......... {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("replica apply modes disagree")

    if failures:
        raise NumericalError("; ".join(failures))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted both before and after the subcommand; the
    # SUPPRESS defaults keep subcommand-level omissions from clobbering
    # values given up front.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="mps-ensembles",
        description="Generate and analyze ensembles of matrix product states.")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run a full ensemble sweep")
    p_sweep.add_argument("--config", default=None, help="JSON sweep config")
    _add_grid_args(p_sweep)

    p_spec = sub.add_parser("spectrum", parents=[common],
                            help="transfer spectra only")
    _add_grid_args(p_spec)

    p_minfo = sub.add_parser("minfo", parents=[common],
                             help="mutual information only")
    _add_grid_args(p_minfo)

    p_fit = sub.add_parser("fit", parents=[common],
                           help="fit the spreading exponent")
    p_fit.add_argument("--data", required=True, help="minfo.csv path")
    p_fit.add_argument("--k", type=int, default=2)
    p_fit.add_argument("--r-fixed", type=int, default=1)
    p_fit.add_argument("--chi-min", type=int, default=1)
    p_fit.add_argument("--estimator", choices=["exp", "direct"], default="exp")

    p_op = sub.add_parser("order-param", parents=[common],
                          help="vanishing-eigenvalue order parameter")
    p_op.add_argument("--data", required=True, help="spectra.csv path")
    p_op.add_argument("--rho-min", type=float, default=0.01)
    p_op.add_argument("--rho-max", type=float, default=0.10)
    p_op.add_argument("--rho-points", type=int, default=10)

    p_fig = sub.add_parser("figure", parents=[common],
                           help="emit a figure-ready CSV bundle")
    p_fig.add_argument("--figure", required=True, choices=list(FIGURES))
    p_fig.add_argument("--spectra", default=None, help="spectra.csv path")
    p_fig.add_argument("--minfo", default=None, help="minfo.csv path")
    p_fig.add_argument("--compare", nargs="*", default=None,
                       help="family=spectra.csv pairs for difference plots")
    p_fig.add_argument("--k", type=int, default=2)
    p_fig.add_argument("--d", type=int, default=2)
    p_fig.add_argument("--plot", action="store_true", help="also render an SVG")

    sub.add_parser("oracle-check", parents=[common],
                   help="run the dual-path identity battery")
    return parser


_COMMANDS = {
    "sweep": _cmd_sweep,
    "spectrum": _cmd_spectrum,
    "minfo": _cmd_minfo,
    "fit": _cmd_fit,
    "order-param": _cmd_order_param,
    "figure": _cmd_figure,
    "oracle-check": _cmd_oracle_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "config"):
        args.config = None
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceededError, CapExceededError) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
