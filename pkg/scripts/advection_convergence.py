"""Temporal self-convergence of SDC(2,3), SDC(3,5), SDC(4,7) on periodic cosine-bell advection.

Writes one CSV per configuration into --out-dir and prints the fitted orders
next to the expected 4, 6 and 8.
"""
import argparse
import logging
from pathlib import Path

from sdc_kit.collocation import QDeltaType
from sdc_kit.harness import Reference, ReferenceKind, StudyConfig, run_study
from sdc_kit.sdc import SdcConfig

# dt windows sit above the round-off plateau and below the stability limit
STUDIES = [
    (2, 3, [4800.0, 2400.0, 1200.0, 600.0]),
    (3, 5, [9600.0, 4800.0, 2400.0, 1200.0]),
    (4, 7, [10800.0, 8640.0, 7200.0, 5400.0]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("results/advection"))
    ap.add_argument("--n-cells", type=int, default=128)
    ap.add_argument("--t-end", type=float, default=86400.0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for M, K, dts in STUDIES:
        cfg = StudyConfig(
            "advection1d", SdcConfig(M, K, qdelta_implicit=QDeltaType.IE), dts, args.t_end,
            reference=Reference(ReferenceKind.SSPRK3, min(dts) / 64),
            output_path=str(args.out_dir / f"sdc_{M}_{K}.csv"),
            problem_params={"n_cells": args.n_cells},
        )
        res = run_study(cfg)
        print(f"SDC({M},{K}): fitted order {res.fitted_order:.2f} (expected {min(K + 1, 2 * M)})")


if __name__ == "__main__":
    main()
