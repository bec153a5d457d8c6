"""Convergence studies: errors, fitted orders and CSV reports."""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .collocation import NodeFamily, QDeltaType
from .errors import DegenerateFit, DimensionMismatch
from .imex import SolverTolerances
from .problems import PROBLEMS
from .reference import reference_solution
from .sdc import FinalUpdate, InitialGuess, SdcConfig, integrate

log = logging.getLogger(__name__)

CSV_HEADER = ["problem", "family", "M", "K", "qdelta_imp", "qdelta_exp", "dt", "error_l2", "observed_order"]
# errors below this sit on the round-off plateau and would corrupt the fit
ROUNDOFF_FLOOR = 1e-13
FIT_FLOOR = 1e-15


class ReferenceKind(enum.Enum):
    ANALYTIC = "analytic"
    SSPRK3 = "ssprk3"
    SELF_FINEST = "self-finest"


@dataclass(frozen=True)
class Reference:
    kind: ReferenceKind
    dt_ref: float | None = None

    @classmethod
    def parse(cls, text: str) -> "Reference":
        """``analytic``, ``self-finest``, ``ssprk3`` or ``ssprk3:<dt>``."""
        name, _, arg = text.strip().partition(":")
        kind = ReferenceKind(name.strip())
        return cls(kind, float(arg) if arg else None)

    def __str__(self):
        return self.kind.value + (f":{self.dt_ref!r}" if self.dt_ref is not None else "")


@dataclass
class StudyConfig:
    problem: str
    sdc: SdcConfig
    dt_list: list[float]
    t_end: float
    reference: Reference | None = None
    output_path: str | None = None
    t_0: float = 0.0
    problem_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        self.dt_list = [float(d) for d in self.dt_list]
        if len(self.dt_list) < 3:
            raise ValueError("a study needs at least 3 step sizes")
        if any(b >= a for a, b in zip(self.dt_list, self.dt_list[1:])):
            raise ValueError("dt_list must be strictly decreasing")
        span = self.t_end - self.t_0
        for dt in self.dt_list:
            if abs(round(span / dt) * dt - span) > 1e-12 * abs(span):
                raise ValueError(f"dt={dt!r} does not divide the interval {span!r}")
        if self.reference is None:
            if self.problem == "dahlquist":
                self.reference = Reference(ReferenceKind.ANALYTIC)
            else:
                self.reference = Reference(ReferenceKind.SSPRK3)

    def n_steps(self, dt: float) -> int:
        return round((self.t_end - self.t_0) / dt)


@dataclass
class ConvergenceRow:
    dt: float
    error_l2: float
    observed_order: float | None = None


@dataclass
class StudyResult:
    rows: list[ConvergenceRow]
    fitted_order: float | None
    variable_errors: dict[str, list[float]]


def normalized_l2_error(x: np.ndarray, x_ref: np.ndarray) -> float:
    """||x - x_ref|| / ||x_ref||, or the absolute norm when the reference vanishes."""
    x, x_ref = np.asarray(x), np.asarray(x_ref)
    if x.shape != x_ref.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {x_ref.shape} differ")
    diff = float(np.linalg.norm(x - x_ref))
    scale = float(np.linalg.norm(x_ref))
    return diff if scale < 1e-14 else diff / scale


def pairwise_orders(rows: list[ConvergenceRow]) -> None:
    """Fill observed_order from consecutive rows; the first row stays empty."""
    rows[0].observed_order = None
    for prev, cur in zip(rows, rows[1:]):
        if prev.error_l2 > 0 and cur.error_l2 > 0:
            cur.observed_order = math.log(prev.error_l2 / cur.error_l2) / math.log(prev.dt / cur.dt)
        else:
            cur.observed_order = None


def fit_order(rows: list[ConvergenceRow]) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    if len(rows) < 3:
        raise DegenerateFit("need at least 3 rows to fit an order")
    errs = np.array([r.error_l2 for r in rows])
    if np.any(errs < FIT_FLOOR):
        raise DegenerateFit("errors at or below round-off; use larger step sizes")
    pairwise_orders(rows)
    dts = np.array([r.dt for r in rows])
    slope, _ = np.polyfit(np.log(dts), np.log(errs), 1)
    return float(slope)


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def write_rows(path, config: StudyConfig, rows: list[ConvergenceRow]) -> None:
    sdc = config.sdc
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([config.problem, sdc.family.value, sdc.M, sdc.K, sdc.qdelta_implicit.value,
                        sdc.qdelta_explicit.value, _fmt(r.dt), _fmt(r.error_l2), _fmt(r.observed_order)])


def read_rows(path) -> list[ConvergenceRow]:
    with open(path, newline="") as fh:
        return [ConvergenceRow(float(r["dt"]), float(r["error_l2"]),
                               float(r["observed_order"]) if r["observed_order"] else None)
                for r in csv.DictReader(fh)]


def _write_variable_errors(path, dts, per_var: dict[str, list[float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dt", *per_var])
        for i, dt in enumerate(dts):
            w.writerow([_fmt(dt), *(_fmt(v[i]) for v in per_var.values())])


def run_study(config: StudyConfig, cache=True) -> StudyResult:
    """Integrate once per dt, compare against the reference, write the CSV, fit the order.

    The CSV is rewritten after every completed dt so a failing run leaves the
    finished rows behind. DegenerateFit is raised after the CSV is complete
    when any error sits below the round-off floor.
    """
    problem = PROBLEMS[config.problem](**config.problem_params)
    x0 = problem.initial_state()
    ref_kind = config.reference.kind
    dts = list(config.dt_list)

    if ref_kind is ReferenceKind.ANALYTIC:
        if not hasattr(problem, "exact"):
            raise ValueError(f"{config.problem} has no analytic solution")
        x_ref = problem.exact(config.t_end)
    elif ref_kind is ReferenceKind.SSPRK3:
        dt_ref = config.reference.dt_ref or min(dts) / 64.0
        x_ref = reference_solution(problem, config.t_0, config.t_end, dt_ref, x0, cache=cache)
    else:
        finest, _ = integrate(config.sdc, problem, x0, config.t_0, config.t_end, config.n_steps(dts[-1]))
        x_ref = finest[-1][1]
        dts = dts[:-1]

    out = Path(config.output_path) if config.output_path else None
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
    rows: list[ConvergenceRow] = []
    per_var: dict[str, list[float]] = {v: [] for v in problem.layout.variables}
    ref_fields = problem.fields(x_ref)
    for dt in dts:
        snaps, report = integrate(config.sdc, problem, x0, config.t_0, config.t_end, config.n_steps(dt))
        x = snaps[-1][1]
        rows.append(ConvergenceRow(dt, normalized_l2_error(x, x_ref)))
        for name, val in problem.fields(x).items():
            per_var[name].append(normalized_l2_error(val, ref_fields[name]))
        pairwise_orders(rows)
        log.info("%s dt=%g error=%.3e solves=%d", config.sdc.label, dt, rows[-1].error_l2,
                 report.implicit_solve_count)
        if out is not None:
            write_rows(out, config, rows)
    if out is not None:
        _write_variable_errors(out.with_suffix(".variables.csv"), dts, per_var)

    if any(r.error_l2 < ROUNDOFF_FLOOR for r in rows):
        raise DegenerateFit(f"errors below {ROUNDOFF_FLOOR:g}; the study hit the round-off plateau")
    return StudyResult(rows, fit_order(rows), per_var)


# --------------------------------------------------------------------------
# configuration

DEFAULT_STUDIES = {
    "dahlquist": dict(t_end=1.0, dts=[0.2, 0.1, 0.05, 0.025]),
    "advection1d": dict(t_end=86400.0, dts=[4800.0, 2400.0, 1200.0, 600.0]),
    "acoustic1d": dict(t_end=1.0, dts=[0.02, 0.01, 0.005, 0.0025]),
    "gravity2d": dict(t_end=3000.0, dts=[24.0, 12.0, 6.0, 3.0], reference="ssprk3:0.05"),
}

FAMILY_NAMES = {f.value: f for f in NodeFamily}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {n}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return complex(text.replace(" ", ""))


def sdc_from_mapping(opts: dict[str, str]) -> SdcConfig:
    tol = opts.get("tol")
    return SdcConfig(
        M=int(opts.get("M", 2)),
        K=int(opts.get("K", 3)),
        family=FAMILY_NAMES[opts.get("family", "gauss")],
        qdelta_implicit=QDeltaType(opts.get("qdelta_imp", "LU")),
        qdelta_explicit=QDeltaType(opts.get("qdelta_exp", "EE")),
        initial_guess=InitialGuess(opts.get("guess", "copy")),
        final_update=FinalUpdate(opts.get("final", "collocation")),
        tolerances=SolverTolerances.tight(float(tol)) if tol else SolverTolerances(),
    )


def problem_params(opts: dict[str, str]) -> dict:
    """``param.<name> = value`` entries as constructor keyword arguments."""
    return {k.split(".", 1)[1]: _number(v) for k, v in opts.items() if k.startswith("param.")}


def study_from_mapping(opts: dict[str, str]) -> StudyConfig:
    """Build a StudyConfig from string options (config file merged with CLI flags)."""
    problem = opts.get("problem", "dahlquist")
    defaults = DEFAULT_STUDIES.get(problem, {})
    dts = [float(d) for d in opts["dts"].split(",")] if "dts" in opts else defaults.get("dts")
    ref = opts.get("reference", defaults.get("reference"))
    return StudyConfig(
        problem=problem,
        sdc=sdc_from_mapping(opts),
        dt_list=dts,
        t_end=float(opts.get("t_end", defaults.get("t_end", 1.0))),
        t_0=float(opts.get("t_0", 0.0)),
        reference=Reference.parse(ref) if ref else None,
        output_path=opts.get("out"),
        problem_params=problem_params(opts),
    )
