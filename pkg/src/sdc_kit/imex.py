"""IMEX problem contract and the default implicit node solver.

A problem splits its right-hand side as f = F + S. F (fast) is integrated
implicitly, S (slow) explicitly. Every implicit stage reduces to

    x - a * F(x, t) = rhs

which :func:`default_solve_implicit` handles with Newton's method; linear
problems take a single direct or Krylov solve.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import NoConvergence, NonFiniteState, SingularSystem

DENSE_MAX_DOF = 400
GMRES_RESTART = 30
PIVOT_MIN = 1e-14


@dataclass(frozen=True)
class SolverTolerances:
    nonlinear_abs: float = 1e-4
    nonlinear_rel: float = 1e-4
    linear_abs: float = 1e-4
    linear_rel: float = 1e-4
    max_newton: int = 30
    max_krylov: int = 200

    def __post_init__(self):
        for name in ("nonlinear_abs", "nonlinear_rel", "linear_abs", "linear_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_newton < 1 or self.max_krylov < 1:
            raise ValueError("iteration limits must be at least 1")

    @classmethod
    def tight(cls, tol: float = 1e-13) -> "SolverTolerances":
        """Tolerances for convergence studies, where solver error must not pollute the measured order."""
        return cls(tol, tol, tol, tol, max_newton=50, max_krylov=2000)


@dataclass
class SolveStats:
    """Running counters filled in by implicit solves."""
    solves: int = 0
    newton_iterations: int = 0
    krylov_iterations: int = 0

    def __iadd__(self, other: "SolveStats") -> "SolveStats":
        self.solves += other.solves
        self.newton_iterations += other.newton_iterations
        self.krylov_iterations += other.krylov_iterations
        return self


class ImexSystem:
    """Base class for split problems.

    Subclasses set ``n_dof`` and implement ``eval_fast`` and ``eval_slow``.
    They may override ``solve_implicit`` when a cheaper exact solve exists.
    """

    n_dof: int
    is_linear: bool = True
    # F does not depend on t, so factorizations can be reused across node times
    autonomous: bool = True

    def eval_fast(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def eval_slow(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def eval_rhs(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.eval_fast(x, t) + self.eval_slow(x, t)

    def solve_implicit(self, a: float, rhs: np.ndarray, t: float,
                       tols: SolverTolerances | None = None,
                       stats: SolveStats | None = None) -> np.ndarray:
        return default_solve_implicit(self, a, rhs, t, tols or SolverTolerances(), stats)


def residual_norm(system: ImexSystem, x: np.ndarray, a: float, rhs: np.ndarray, t: float) -> float:
    """||x - a F(x) - rhs||_2."""
    r = x - rhs
    if a != 0.0:
        r = r - a * system.eval_fast(x, t)
    return float(np.linalg.norm(r))


def check_finite(x: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"non-finite entries in state ({where})")


def assemble_operator(func, n: int) -> np.ndarray:
    """Dense matrix of a linear map by applying it to the identity columns."""
    A = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        A[:, j] = func(e)
        e[j] = 0.0
    return A


def _dense_factor(system: ImexSystem, a: float, t: float):
    cache = system.__dict__.setdefault("_resolvent_cache", {})
    key = a if system.autonomous else (a, t)
    if key not in cache:
        A = assemble_operator(lambda v: system.eval_fast(v, t), system.n_dof)
        with warnings.catch_warnings():
            # a zero pivot is reported below as SingularSystem
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(np.eye(system.n_dof) - a * A, check_finite=False)
        if np.min(np.abs(np.diag(lu))) < PIVOT_MIN:
            raise SingularSystem(f"pivot below {PIVOT_MIN} in I - {a:g} F")
        cache[key] = (lu, piv)
    return cache[key]


def gmres_solve(matvec, b: np.ndarray, x0: np.ndarray, atol: float, maxiter: int):
    """Restarted GMRES on a matrix-free operator. Returns (x, inner iterations)."""
    n = b.size
    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    x, _ = spla.gmres(op, b, x0=x0, rtol=0.0, atol=atol, restart=GMRES_RESTART,
                      maxiter=max(1, math.ceil(maxiter / GMRES_RESTART)),
                      callback=cb, callback_type="pr_norm")
    return x, count[0]


def default_solve_implicit(system: ImexSystem, a: float, rhs: np.ndarray, t: float,
                           tols: SolverTolerances, stats: SolveStats | None = None) -> np.ndarray:
    """Solve x - a F(x, t) = rhs.

    Linear systems get one solve of (I - a F) x = rhs: LU when the problem has
    at most DENSE_MAX_DOF unknowns, unpreconditioned GMRES(30) otherwise.
    Nonlinear systems run Newton with a finite-difference Jacobian.
    """
    if a < 0:
        raise ValueError("implicit coefficient must be non-negative")
    if stats is not None:
        stats.solves += 1
    if a == 0.0:
        return rhs.copy()
    check_finite(rhs, "implicit solve input")

    bound = tols.nonlinear_abs + tols.nonlinear_rel * np.linalg.norm(rhs)
    if system.is_linear:
        if system.n_dof <= DENSE_MAX_DOF:
            x = scipy.linalg.lu_solve(_dense_factor(system, a, t), rhs, check_finite=False)
            iters = 0
        else:
            atol = tols.linear_abs + tols.linear_rel * np.linalg.norm(rhs)
            x, iters = gmres_solve(lambda v: v - a * system.eval_fast(v, t), rhs, rhs.copy(),
                                   atol, tols.max_krylov)
        if stats is not None:
            stats.newton_iterations += 1
            stats.krylov_iterations += iters
        res = residual_norm(system, x, a, rhs, t)
        if not res <= bound:
            raise NoConvergence(res, iters, "linear solve")
        check_finite(x, "implicit solve output")
        return x

    x = rhs.copy()
    n = system.n_dof
    for it in range(tols.max_newton + 1):
        fx = system.eval_fast(x, t)
        r = x - a * fx - rhs
        res = float(np.linalg.norm(r))
        if res <= bound:
            check_finite(x, "implicit solve output")
            return x
        if it == tols.max_newton:
            break
        if n <= DENSE_MAX_DOF:
            J = np.eye(n) - a * fd_jacobian(lambda v: system.eval_fast(v, t), x, fx)
            dx = np.linalg.solve(J, -r)
            kits = 0
        else:
            def jv(v, x=x, fx=fx):
                nv = np.linalg.norm(v)
                if nv == 0.0:
                    return v.copy()
                h = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(x)) / nv
                return v - a * (system.eval_fast(x + h * v, t) - fx) / h
            atol = tols.linear_abs + tols.linear_rel * res
            dx, kits = gmres_solve(jv, -r, np.zeros(n), atol, tols.max_krylov)
        x = x + dx
        if stats is not None:
            stats.newton_iterations += 1
            stats.krylov_iterations += kits
    raise NoConvergence(res, tols.max_newton, "Newton")


def fd_jacobian(func, x: np.ndarray, fx: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference Jacobian with per-column step sqrt(eps) * (1 + |x_i|)."""
    if fx is None:
        fx = func(x)
    n = x.size
    J = np.empty((fx.size, n))
    sq = np.sqrt(np.finfo(float).eps)
    xp = x.copy()
    for i in range(n):
        h = sq * (1.0 + abs(x[i]))
        xp[i] = x[i] + h
        J[:, i] = (func(xp) - fx) / h
        xp[i] = x[i]
    return J
