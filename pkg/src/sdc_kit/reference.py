"""SSPRK3 reference integrator and the on-disk reference cache."""
from __future__ import annotations

import csv
import hashlib
import os
from pathlib import Path

import numpy as np

from .imex import ImexSystem

CACHE_ENV = "SDC_KIT_CACHE"


def ssprk3_step(system: ImexSystem, x_n: np.ndarray, t_n: float, dt: float) -> np.ndarray:
    """Shu-Osher three-stage SSP Runge-Kutta step on f = F + S, all explicit."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = system.eval_rhs
    x1 = x_n + dt * f(x_n, t_n)
    x2 = 0.75 * x_n + 0.25 * (x1 + dt * f(x1, t_n + dt))
    return x_n / 3.0 + 2.0 / 3.0 * (x2 + dt * f(x2, t_n + 0.5 * dt))


def ssprk3_integrate(system: ImexSystem, x_0: np.ndarray, t_0: float, t_end: float,
                     n_steps: int) -> np.ndarray:
    dt = (t_end - t_0) / n_steps
    x = np.array(x_0, dtype=float)
    for n in range(n_steps):
        x = ssprk3_step(system, x, t_0 + n * dt, dt)
    return x


# --------------------------------------------------------------------------
# snapshot CSV: one row per grid point, columns x, z, then one per variable

def write_snapshot(path, problem, x: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs, zs = problem.coordinates()
    fields = {k: v.ravel() for k, v in problem.fields(x).items()}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "z", *fields])
        for i in range(xs.size):
            w.writerow([format(xs[i], ".17g"), format(zs[i], ".17g"),
                        *(format(v[i], ".17g") for v in fields.values())])


def read_snapshot(path, problem) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    cols = {name: body[:, i] for i, name in enumerate(header)}
    return problem.pack(**{v: cols[v].reshape(problem.layout.shape) for v in problem.layout.variables})


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, ".sdc_kit_cache"))


def reference_solution(problem, t_0: float, t_end: float, dt_ref: float,
                       x_0: np.ndarray | None = None, cache: bool | Path = True) -> np.ndarray:
    """SSPRK3 solution at t_end, cached on disk keyed by (problem, grid, dt, interval).

    ``cache`` may be False to skip the disk, or a directory overriding the default.
    """
    n_steps = round((t_end - t_0) / dt_ref)
    if n_steps < 1 or abs(n_steps * dt_ref - (t_end - t_0)) > 1e-9 * (t_end - t_0):
        raise ValueError("dt_ref must divide the integration interval")
    x_0 = problem.initial_state() if x_0 is None else x_0
    if not cache:
        return ssprk3_integrate(problem, x_0, t_0, t_end, n_steps)

    key = f"{problem.cache_key()}|t0={t_0!r}|t1={t_end!r}|dt={dt_ref!r}|x0={hashlib.sha1(np.ascontiguousarray(x_0)).hexdigest()}"
    folder = Path(cache) if not isinstance(cache, bool) else cache_dir()
    path = folder / f"ssprk3_{problem.name}_{hashlib.sha1(key.encode()).hexdigest()[:16]}.csv"
    if path.exists():
        return read_snapshot(path, problem)
    x = ssprk3_integrate(problem, x_0, t_0, t_end, n_steps)
    tmp = path.with_suffix(".tmp")
    write_snapshot(tmp, problem, x)
    os.replace(tmp, path)
    return x
