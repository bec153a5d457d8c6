"""Vertical-slice gravity wave: snapshot at t = 3000 s and temporal self-convergence of SDC(2,3).

The reference is SSPRK3 at dt = 0.05 s (about half a minute on one core, then
cached). Writes the dt = 6 s end state as a snapshot CSV, the convergence CSV
with per-variable errors, and prints the b' symmetry defect about the advected
centre.
"""
import argparse
import logging
from pathlib import Path

from sdc_kit.harness import Reference, ReferenceKind, StudyConfig, run_study
from sdc_kit.imex import SolverTolerances
from sdc_kit.problems import GravityWave2D
from sdc_kit.reference import write_snapshot
from sdc_kit.sdc import SdcConfig, integrate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("results/gravity"))
    ap.add_argument("--nx", type=int, default=150)
    ap.add_argument("--nz", type=int, default=10)
    ap.add_argument("--advection", choices=["spectral", "centered"], default="spectral")
    ap.add_argument("--balanced", action="store_true", help="start from hydrostatically balanced pressure")
    ap.add_argument("--skip-study", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    params = dict(nx=args.nx, nz=args.nz, advection=args.advection, balanced=args.balanced)
    problem = GravityWave2D(**params)
    sdc = SdcConfig(2, 3, tolerances=SolverTolerances.tight())
    snaps, report = integrate(sdc, problem, problem.initial_state(), 0.0, 3000.0, 500)
    x = snaps[-1][1]
    write_snapshot(args.out_dir / "b_t3000_dt6.csv", problem, x)
    print(f"dt = 6 s: {report.implicit_solve_count} implicit solves, "
          f"symmetry defect {100 * problem.symmetry_defect(x, 3000.0):.3f}% of max|b'|")

    if args.skip_study:
        return
    cfg = StudyConfig("gravity2d", sdc, [24.0, 12.0, 6.0, 3.0], 3000.0,
                      reference=Reference(ReferenceKind.SSPRK3, 0.05),
                      output_path=str(args.out_dir / "convergence.csv"), problem_params=params)
    res = run_study(cfg)
    for r in res.rows:
        print(f"dt={r.dt:5g}  error={r.error_l2:.3e}  order={r.observed_order if r.observed_order else ''}")
    print(f"fitted order {res.fitted_order:.2f}; b-only errors: "
          + ", ".join(f"{e:.2e}" for e in res.variable_errors["b"]))


if __name__ == "__main__":
    main()
