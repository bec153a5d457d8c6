"""Energy of the acoustic-advection problem under SDC with growing fast Courant numbers.

Slow CFL stays at 0.5 while the sound-wave CFL is swept. Writes a CSV of
E(t)/E(0) per step for every fast CFL and prints the maximum ratio.
"""
import argparse
import csv
from pathlib import Path

from sdc_kit.collocation import QDeltaType
from sdc_kit.problems import AcousticAdvection1D
from sdc_kit.sdc import SdcConfig, step


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fast-cfl", type=float, nargs="+", default=[2.0, 5.0, 10.0, 50.0])
    ap.add_argument("--slow-cfl", type=float, default=0.5)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--M", type=int, default=3)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--qdelta-imp", default="LU", choices=["IE", "LU", "MIN-SR-FLEX"])
    ap.add_argument("--out", type=Path, default=Path("results/fwsw_energy.csv"))
    args = ap.parse_args()

    cfg = SdcConfig(args.M, args.K, qdelta_implicit=QDeltaType(args.qdelta_imp))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fast_cfl", "step", "energy_ratio"])
        for cfl in args.fast_cfl:
            problem = AcousticAdvection1D.from_cfl(cfl, args.slow_cfl, dt=1.0)
            x = problem.initial_state()
            e0, worst = problem.energy(x), 0.0
            for n in range(args.steps):
                x, _ = step(cfg, problem, x, float(n), 1.0)
                ratio = problem.energy(x) / e0
                worst = max(worst, ratio)
                w.writerow([cfl, n + 1, format(ratio, ".17g")])
            print(f"fast CFL {cfl:6g}: max E/E0 = {worst:.6f}")


if __name__ == "__main__":
    main()
