"""Fast-wave slow-wave spectral deferred correction, zero-to-node form.

One step of SDC(M, K) on x' = F(x) + S(x):

1. put a first guess on the M collocation nodes (copy x_n, or an IMEX Euler chain),
2. run K preconditioned Richardson sweeps towards the collocation solution,
3. finish with the quadrature update over the whole step, or copy the last
   node when it sits at t_{n+1}.

Each sweep solves, node by node,

    x_m - dt q^I_mm F(x_m) = x_n + R_m

with R_m collecting the already-updated nodes (weights from the QDelta
matrices) and the previous iterate (weights Q - QDelta).
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .collocation import (CollocationTable, NodeFamily, PreconditionerKind, PreconditionerMatrix,
                          QDeltaType, Role, build_preconditioner, collocation_table)
from .errors import InvalidFinalUpdate, NoConvergence, RoleMismatch
from .imex import (ImexSystem, SolverTolerances, SolveStats, assemble_operator, check_finite,
                   fd_jacobian, gmres_solve)

# stacked collocation systems larger than this go to GMRES instead of LU
DIRECT_DENSE_MAX = 2000


class InitialGuess(enum.Enum):
    COPY = "copy"
    LOW_ORDER = "low-order"


class FinalUpdate(enum.Enum):
    COLLOCATION = "collocation"
    COPY_LAST_NODE = "copy-node"


@functools.lru_cache(maxsize=None)
def _preconditioner(qtype: QDeltaType, role: Role, family: NodeFamily, M: int,
                    sweep: int) -> PreconditionerMatrix:
    return build_preconditioner(PreconditionerKind(qtype, role), collocation_table(family, M), sweep)


@dataclass(frozen=True)
class SdcConfig:
    M: int
    K: int
    family: NodeFamily = NodeFamily.GAUSS_LEGENDRE
    qdelta_implicit: QDeltaType = QDeltaType.LU
    qdelta_explicit: QDeltaType = QDeltaType.EE
    initial_guess: InitialGuess = InitialGuess.COPY
    final_update: FinalUpdate = FinalUpdate.COLLOCATION
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be non-negative")
        for qt, role in ((self.qdelta_implicit, Role.IMPLICIT), (self.qdelta_explicit, Role.EXPLICIT)):
            if not PreconditionerKind(qt, role).valid:
                raise RoleMismatch(f"{qt.value} cannot be used in the {role.value} role")
        table = self.table  # validates M for the family
        if self.final_update is FinalUpdate.COPY_LAST_NODE and table.tau[-1] != 1.0:
            raise InvalidFinalUpdate(f"{self.family.value} nodes do not include t_(n+1); "
                                     "copying the last node needs radau-right or lobatto")

    @property
    def table(self) -> CollocationTable:
        return collocation_table(self.family, self.M)

    def qdelta(self, role: Role, sweep: int) -> np.ndarray:
        """QDelta matrix used in sweep number ``sweep`` (1-based)."""
        qt = self.qdelta_implicit if role is Role.IMPLICIT else self.qdelta_explicit
        # only MIN-SR-FLEX changes between sweeps
        key = sweep if qt is QDeltaType.MIN_SR_FLEX else 1
        return _preconditioner(qt, role, self.family, self.M, key).qdelta

    @property
    def expected_order(self) -> int:
        """Formal order: one per sweep, one for a low-order guess and one for the quadrature update."""
        gained = self.K + (self.initial_guess is InitialGuess.LOW_ORDER) \
            + (self.final_update is FinalUpdate.COLLOCATION)
        return min(gained, self.table.order)

    @property
    def label(self) -> str:
        return f"SDC({self.M},{self.K})"


@dataclass
class NodeStates:
    """Iterate on the nodes, one row per node, with cached F and S evaluations."""
    states: np.ndarray
    fast_evals: np.ndarray
    slow_evals: np.ndarray
    sweep: int = 0


@dataclass
class StepReport:
    implicit_solve_count: int = 0
    newton_iterations_total: int = 0
    krylov_iterations_total: int = 0
    final_collocation_residual: float = 0.0

    def merge(self, other: "StepReport") -> None:
        """Accumulate counts; the residual keeps the worst step."""
        self.implicit_solve_count += other.implicit_solve_count
        self.newton_iterations_total += other.newton_iterations_total
        self.krylov_iterations_total += other.krylov_iterations_total
        self.final_collocation_residual = max(self.final_collocation_residual,
                                              other.final_collocation_residual)


def node_times(table: CollocationTable, t_n: float, dt: float) -> np.ndarray:
    return t_n + dt * table.tau


def _evaluate(system: ImexSystem, X: np.ndarray, times: np.ndarray, sweep: int) -> NodeStates:
    fast = np.stack([system.eval_fast(x, t) for x, t in zip(X, times)])
    slow = np.stack([system.eval_slow(x, t) for x, t in zip(X, times)])
    return NodeStates(X, fast, slow, sweep)


def initial_guess(config: SdcConfig, system: ImexSystem, x_n: np.ndarray, t_n: float, dt: float,
                  stats: SolveStats | None = None) -> NodeStates:
    if not dt > 0:
        raise ValueError("dt must be positive")
    table = config.table
    times = node_times(table, t_n, dt)
    if config.initial_guess is InitialGuess.COPY:
        return _evaluate(system, np.tile(x_n, (table.M, 1)), times, 0)

    # IMEX Euler chain x_n -> tau_1 -> ... -> tau_M
    X = np.empty((table.M, x_n.size))
    x_prev, t_prev = x_n, t_n
    for m, step in enumerate(np.diff(table.tau, prepend=0.0) * dt):
        rhs = x_prev + step * system.eval_slow(x_prev, t_prev)
        X[m] = system.solve_implicit(step, rhs, times[m], config.tolerances, stats)
        x_prev, t_prev = X[m], times[m]
    return _evaluate(system, X, times, 0)


def sweep(config: SdcConfig, system: ImexSystem, table: CollocationTable, node_states: NodeStates,
          x_n: np.ndarray, t_n: float, dt: float, stats: SolveStats | None = None) -> NodeStates:
    k = node_states.sweep + 1
    q = table.Q
    qi = config.qdelta(Role.IMPLICIT, k)
    # the explicit diagonal is applied to S at the previous iterate of the same
    # node, so it sits with the old terms; diagonal MIN-SR-NS relies on this
    qe = np.tril(config.qdelta(Role.EXPLICIT, k), -1)
    times = node_times(table, t_n, dt)

    R = dt * ((q - qi) @ node_states.fast_evals + (q - qe) @ node_states.slow_evals)
    X = np.empty_like(node_states.states)
    F = np.empty_like(X)
    S = np.empty_like(X)
    for m in range(table.M):
        rhs = x_n + R[m] + dt * (qi[m, :m] @ F[:m] + qe[m, :m] @ S[:m])
        X[m] = system.solve_implicit(dt * qi[m, m], rhs, times[m], config.tolerances, stats)
        F[m] = system.eval_fast(X[m], times[m])
        S[m] = system.eval_slow(X[m], times[m])
    return NodeStates(X, F, S, k)


def finalize(config: SdcConfig, system: ImexSystem, table: CollocationTable, node_states: NodeStates,
             x_n: np.ndarray, t_n: float, dt: float) -> np.ndarray:
    if config.final_update is FinalUpdate.COPY_LAST_NODE:
        if table.tau[-1] != 1.0:
            raise InvalidFinalUpdate("last node is not at t_(n+1)")
        return node_states.states[-1].copy()
    return x_n + dt * (table.w @ (node_states.fast_evals + node_states.slow_evals))


def collocation_residual(table: CollocationTable, node_states: NodeStates, x_n: np.ndarray,
                         dt: float) -> float:
    """||X - X_n - dt Q f(X)|| over all nodes."""
    f = node_states.fast_evals + node_states.slow_evals
    return float(np.linalg.norm(node_states.states - x_n - dt * (table.Q @ f)))


def step(config: SdcConfig, system: ImexSystem, x_n: np.ndarray, t_n: float,
         dt: float) -> tuple[np.ndarray, StepReport]:
    check_finite(x_n, "step input")
    table = config.table
    stats = SolveStats()
    ns = initial_guess(config, system, x_n, t_n, dt, stats)
    for _ in range(config.K):
        ns = sweep(config, system, table, ns, x_n, t_n, dt, stats)
    x_next = finalize(config, system, table, ns, x_n, t_n, dt)
    check_finite(x_next, "step output")
    report = StepReport(stats.solves, stats.newton_iterations, stats.krylov_iterations,
                        collocation_residual(table, ns, x_n, dt))
    return x_next, report


def integrate(config: SdcConfig, system: ImexSystem, x_0: np.ndarray, t_0: float, t_end: float,
              n_steps: int, snapshot_stride: int | None = None,
              ) -> tuple[list[tuple[float, np.ndarray]], StepReport]:
    """Take ``n_steps`` uniform steps from t_0 to t_end.

    Returns ``(snapshots, report)``. Snapshots are ``(t, x)`` pairs: the initial
    state and every ``snapshot_stride``-th step when a stride is given, and
    always the final state as the last entry.
    """
    if n_steps < 1 or not t_end > t_0:
        raise ValueError("need n_steps >= 1 and t_end > t_0")
    dt = (t_end - t_0) / n_steps
    total = StepReport()
    x = np.array(x_0, dtype=float)
    snaps = [(t_0, x.copy())] if snapshot_stride else []
    for n in range(n_steps):
        x, rep = step(config, system, x, t_0 + n * dt, dt)
        total.merge(rep)
        if snapshot_stride and (n + 1) % snapshot_stride == 0 and n + 1 < n_steps:
            snaps.append((t_0 + (n + 1) * dt, x.copy()))
    snaps.append((t_end, x))
    return snaps, total


def solve_collocation_direct(system: ImexSystem, table: CollocationTable, x_n: np.ndarray,
                             t_n: float, dt: float,
                             tols: SolverTolerances | None = None) -> NodeStates:
    """Solve the all-node collocation problem X - dt (Q x f)(X) = X_n with Newton.

    Linear problems converge in one Newton step. Used as the fixed point that
    SDC sweeps should reproduce.
    """
    tols = tols or SolverTolerances.tight()
    M, N = table.M, x_n.size
    times = node_times(table, t_n, dt)
    Xn = np.tile(x_n, (M, 1))
    target = 1e-12 * (1.0 + np.linalg.norm(Xn))

    def f_all(X):
        return np.stack([system.eval_rhs(x, t) for x, t in zip(X, times)])

    X = Xn.copy()
    for it in range(tols.max_newton + 1):
        fX = f_all(X)
        r = X - Xn - dt * (table.Q @ fX)
        res = float(np.linalg.norm(r))
        if res <= target:
            return _evaluate(system, X, times, 0)
        if it == tols.max_newton:
            break
        if M * N <= DIRECT_DENSE_MAX:
            if system.is_linear:
                if system.autonomous:
                    A = assemble_operator(lambda v: system.eval_rhs(v, times[0]), N)
                    blocks = [A] * M
                else:
                    blocks = [assemble_operator(lambda v, t=t: system.eval_rhs(v, t), N) for t in times]
            else:
                blocks = [fd_jacobian(lambda v, t=t: system.eval_rhs(v, t), x) for x, t in zip(X, times)]
            J = np.eye(M * N) - dt * np.block([[table.Q[m, j] * blocks[j] for j in range(M)]
                                               for m in range(M)])
            dX = scipy.linalg.solve(J, -r.ravel()).reshape(M, N)
        else:
            if system.is_linear:
                def jv(v):
                    V = v.reshape(M, N)
                    return (V - dt * (table.Q @ f_all(V))).ravel()
            else:
                def jv(v, X=X, fX=fX):
                    V = v.reshape(M, N)
                    nv = np.linalg.norm(V)
                    if nv == 0.0:
                        return v.copy()
                    h = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(X)) / nv
                    return (V - dt * (table.Q @ ((f_all(X + h * V) - fX) / h))).ravel()
            dx, _ = gmres_solve(jv, -r.ravel(), np.zeros(M * N), 0.1 * target, 50 * tols.max_krylov)
            dX = dx.reshape(M, N)
        X = X + dX
    raise NoConvergence(res, tols.max_newton, "collocation Newton")
