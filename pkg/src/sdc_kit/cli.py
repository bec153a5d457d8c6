"""Command-line entry point: ``sdc-kit study | run | tables``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .collocation import collocation_table
from .errors import DegenerateFit, SdcError
from .harness import (FAMILY_NAMES, parse_config_text, problem_params, run_study, sdc_from_mapping,
                      study_from_mapping)
from .problems import PROBLEMS
from .reference import write_snapshot
from .sdc import integrate

# CLI flag -> config-file key
STUDY_FLAGS = {
    "problem": "problem", "M": "M", "K": "K", "family": "family", "qdelta_imp": "qdelta_imp",
    "qdelta_exp": "qdelta_exp", "guess": "guess", "final": "final", "dts": "dts", "t_end": "t_end",
    "out": "out", "reference": "reference", "tol": "tol",
}


def _add_sdc_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value file")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--M", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--family", choices=sorted(FAMILY_NAMES))
    p.add_argument("--qdelta-imp", dest="qdelta_imp", choices=["IE", "LU", "MIN-SR-FLEX"])
    p.add_argument("--qdelta-exp", dest="qdelta_exp", choices=["EE", "MIN-SR-NS"])
    p.add_argument("--guess", choices=["copy", "low-order"])
    p.add_argument("--final", choices=["collocation", "copy-node"])
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--tol", type=float, help="solver tolerance (all four)")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="problem constructor argument, repeatable")


def _options(args) -> dict[str, str]:
    opts = parse_config_text(args.config.read_text()) if args.config else {}
    for flag, key in STUDY_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            opts[key] = str(val)
    for item in args.param:
        k, sep, v = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects KEY=VALUE, got {item!r}")
        opts[f"param.{k.strip()}"] = v.strip()
    return opts


def cmd_study(args) -> int:
    config = study_from_mapping(_options(args))
    try:
        result = run_study(config)
    except DegenerateFit as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return 2
    for r in result.rows:
        order = "" if r.observed_order is None else f"{r.observed_order:.3f}"
        print(f"dt={r.dt:<12g} error={r.error_l2:.6e} order={order}")
    print(f"fitted order: {result.fitted_order:.3f}")
    return 0


def cmd_run(args) -> int:
    opts = _options(args)
    sdc = sdc_from_mapping(opts)
    name = opts.get("problem", "dahlquist")
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}")
    problem = PROBLEMS[name](**problem_params(opts))
    if "t_end" in opts:
        t_end = float(opts["t_end"])
        n_steps = round(t_end / args.dt)
        if n_steps < 1 or abs(n_steps * args.dt - t_end) > 1e-12 * t_end:
            raise ValueError("--dt must divide --t-end")
    else:
        n_steps = args.steps or 1
        t_end = n_steps * args.dt
    snaps, report = integrate(sdc, problem, problem.initial_state(), 0.0, t_end, n_steps,
                              snapshot_stride=args.stride)
    out = Path(args.out_dir)
    for i, (t, x) in enumerate(snaps):
        path = out / f"{problem.name}_{i:04d}.csv"
        write_snapshot(path, problem, x)
        print(f"t={t:g} -> {path}")
    print(f"implicit solves: {report.implicit_solve_count}")
    return 0


def cmd_tables(args) -> int:
    print(collocation_table(FAMILY_NAMES[args.family], args.M).to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdc-kit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("study", help="convergence study written to CSV")
    _add_sdc_flags(st)
    st.add_argument("--dts", help="comma-separated, strictly decreasing")
    st.add_argument("--reference", help="analytic | ssprk3[:dt] | self-finest")
    st.add_argument("--out", help="CSV path")
    st.set_defaults(func=cmd_study)

    rn = sub.add_parser("run", help="single simulation emitting snapshot CSVs")
    _add_sdc_flags(rn)
    rn.add_argument("--dt", type=float, required=True)
    rn.add_argument("--steps", type=int, help="step count when --t-end is not given")
    rn.add_argument("--stride", type=int, help="write a snapshot every STRIDE steps")
    rn.add_argument("--out-dir", default="snapshots")
    rn.set_defaults(func=cmd_run)

    tb = sub.add_parser("tables", help="print the collocation table as JSON")
    tb.add_argument("--M", type=int, required=True)
    tb.add_argument("--family", choices=sorted(FAMILY_NAMES), default="gauss")
    tb.set_defaults(func=cmd_tables)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SdcError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
