"""Collocation nodes, integration matrices and QDelta preconditioners.

All tables live on the unit interval [0, 1]; the stepper scales by dt.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateNodes, RoleMismatch, UnsupportedNodeCount

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100
# above this node count Lagrange integrals use Gauss quadrature per subinterval
MONOMIAL_MAX_M = 5


class NodeFamily(enum.Enum):
    GAUSS_LEGENDRE = "gauss"
    GAUSS_RADAU_RIGHT = "radau-right"
    GAUSS_LOBATTO = "lobatto"

    def order(self, M: int) -> int:
        """Order of the underlying quadrature rule for M nodes."""
        return {
            NodeFamily.GAUSS_LEGENDRE: 2 * M,
            NodeFamily.GAUSS_RADAU_RIGHT: 2 * M - 1,
            NodeFamily.GAUSS_LOBATTO: 2 * M - 2,
        }[self]

    @property
    def min_nodes(self) -> int:
        return 2 if self is NodeFamily.GAUSS_LOBATTO else 1


class QDeltaType(enum.Enum):
    IE = "IE"
    EE = "EE"
    LU = "LU"
    MIN_SR_NS = "MIN-SR-NS"
    MIN_SR_FLEX = "MIN-SR-FLEX"


class Role(enum.Enum):
    IMPLICIT = "implicit"
    EXPLICIT = "explicit"


_VALID_ROLE = {
    QDeltaType.IE: Role.IMPLICIT,
    QDeltaType.LU: Role.IMPLICIT,
    QDeltaType.MIN_SR_FLEX: Role.IMPLICIT,
    QDeltaType.EE: Role.EXPLICIT,
    QDeltaType.MIN_SR_NS: Role.EXPLICIT,
}


@dataclass(frozen=True)
class PreconditionerKind:
    qtype: QDeltaType
    role: Role

    @property
    def valid(self) -> bool:
        return _VALID_ROLE[self.qtype] is self.role


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CollocationTable:
    family: NodeFamily
    M: int
    tau: np.ndarray
    Q: np.ndarray
    w: np.ndarray
    order: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tau", _frozen(self.tau))
        object.__setattr__(self, "Q", _frozen(self.Q))
        object.__setattr__(self, "w", _frozen(self.w))
        object.__setattr__(self, "order", self.family.order(self.M))

    def to_json(self) -> str:
        return _dump_json({
            "family": self.family.value,
            "M": self.M,
            "tau": self.tau,
            "Q": self.Q,
            "w": self.w,
        })


@dataclass(frozen=True)
class PreconditionerMatrix:
    kind: PreconditionerKind
    qdelta: np.ndarray
    sweep_dependent: bool

    def __post_init__(self):
        object.__setattr__(self, "qdelta", _frozen(self.qdelta))

    @property
    def M(self) -> int:
        return self.qdelta.shape[0]

    def to_json(self) -> str:
        return _dump_json({
            "kind": self.kind.qtype.value,
            "M": self.M,
            "qdelta": self.qdelta,
        })


def _dump_json(doc: dict) -> str:
    # json.dumps would emit shortest-repr floats; reals are pinned to 17 digits.
    def fmt(v):
        if isinstance(v, np.ndarray):
            v = v.tolist()
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        if isinstance(v, str):
            return '"' + v + '"'
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            return str(int(v))
        return format(float(v), ".17g")

    return "{" + ", ".join(f'"{k}": {fmt(v)}' for k, v in doc.items()) + "}"


# --------------------------------------------------------------------------
# nodes

def _legendre(n: int, x: float) -> tuple[float, float]:
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    if n == 0:
        return 1.0, 0.0
    p0, p1 = 1.0, x
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    # derivative from (1 - x^2) P_n' = n (P_{n-1} - x P_n), valid off the endpoints
    dp = n * (p0 - x * p1) / (1.0 - x * x)
    return p1, dp


def _radau_interior_residual(M):
    # interior right-Radau nodes: roots of (P_{M-1} - P_M) / (1 - x)
    def f(x):
        pm1, dpm1 = _legendre(M - 1, x)
        pm, dpm = _legendre(M, x)
        g = pm1 - pm
        dg = dpm1 - dpm
        h = 1.0 - x
        return g / h, (dg * h + g) / (h * h)
    return f


def _lobatto_interior_residual(M):
    # interior Lobatto nodes: roots of P'_{M-1}; P'' from the Legendre ODE
    n = M - 1

    def f(x):
        p, dp = _legendre(n, x)
        d2p = (2 * x * dp - n * (n + 1) * p) / (1.0 - x * x)
        return dp, d2p
    return f


def _newton_roots(func, guesses: np.ndarray) -> np.ndarray:
    roots = []
    for x in guesses:
        for _ in range(NEWTON_MAXITER):
            val, der = func(x)
            # deflate roots already found so two guesses cannot merge
            defl = sum(1.0 / (x - r) for r in roots)
            step = val / (der - val * defl)
            x -= step
            if abs(step) <= NEWTON_TOL:
                break
        roots.append(x)
    return np.sort(np.array(roots))


def _chebyshev_guess(n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    return -np.cos((2 * k - 1) * np.pi / (2 * n))


def generate_nodes(family: NodeFamily, M: int) -> np.ndarray:
    """Collocation nodes of ``family`` on [0, 1], strictly increasing."""
    if not isinstance(M, (int, np.integer)) or M < family.min_nodes:
        raise UnsupportedNodeCount(f"{family.value} needs M >= {family.min_nodes}, got {M}")
    if family is NodeFamily.GAUSS_LEGENDRE:
        x = _newton_roots(functools.partial(_legendre, M), _chebyshev_guess(M))
    elif family is NodeFamily.GAUSS_RADAU_RIGHT:
        inner = _newton_roots(_radau_interior_residual(M), _chebyshev_guess(M - 1)) if M > 1 else []
        x = np.concatenate([inner, [1.0]])
    else:
        inner = _newton_roots(_lobatto_interior_residual(M), _chebyshev_guess(M - 2)) if M > 2 else []
        x = np.concatenate([[-1.0], inner, [1.0]])
    tau = (np.asarray(x) + 1.0) / 2.0
    if family is NodeFamily.GAUSS_LEGENDRE and M % 2 == 1:
        tau[M // 2] = 0.5
    if family is not NodeFamily.GAUSS_LEGENDRE:
        tau[-1] = 1.0
    if family is NodeFamily.GAUSS_LOBATTO:
        tau[0] = 0.0
    return tau


# --------------------------------------------------------------------------
# integration matrices

def _check_nodes(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise DegenerateNodes("nodes must be a non-empty 1-D array")
    if np.any(np.diff(tau) <= 1e-14):
        raise DegenerateNodes("nodes must be strictly increasing and distinct")
    return tau


def _lagrange_integrals(tau: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """out[m, j] = integral of l_j over [0, upper[m]]."""
    M = tau.size
    out = np.empty((upper.size, M))
    if M <= MONOMIAL_MAX_M:
        for j in range(M):
            others = np.delete(tau, j)
            coef = P.polyfromroots(others) / np.prod(tau[j] - others)
            anti = P.polyint(coef)
            out[:, j] = P.polyval(upper, anti) - P.polyval(0.0, anti)
        return out

    # product-form Lagrange basis integrated by Gauss-Legendre of order 2M on
    # each subinterval between consecutive breakpoints
    xg, wg = np.polynomial.legendre.leggauss(M)
    breaks = np.unique(np.concatenate([[0.0], tau, upper]))
    denom = np.array([np.prod(tau[j] - np.delete(tau, j)) for j in range(M)])

    def basis(s):
        vals = np.empty((s.size, M))
        for j in range(M):
            vals[:, j] = np.prod(s[:, None] - np.delete(tau, j)[None, :], axis=1) / denom[j]
        return vals

    cum = np.zeros((breaks.size, M))
    for i in range(1, breaks.size):
        a, b = breaks[i - 1], breaks[i]
        s = 0.5 * (b - a) * xg + 0.5 * (a + b)
        cum[i] = cum[i - 1] + 0.5 * (b - a) * (wg @ basis(s))
    for m, u in enumerate(upper):
        out[m] = cum[np.searchsorted(breaks, u)]
    return out


def build_q_matrix(tau) -> np.ndarray:
    """q[m, j] = integral over [0, tau_m] of the j-th Lagrange basis polynomial."""
    tau = _check_nodes(tau)
    return _lagrange_integrals(tau, tau)


def build_final_weights(tau) -> np.ndarray:
    tau = _check_nodes(tau)
    return _lagrange_integrals(tau, np.array([1.0]))[0]


@functools.lru_cache(maxsize=None)
def collocation_table(family: NodeFamily, M: int) -> CollocationTable:
    tau = generate_nodes(family, M)
    return CollocationTable(family, M, tau, build_q_matrix(tau), build_final_weights(tau))


# --------------------------------------------------------------------------
# preconditioners

def lu_nopivot(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Doolittle factorization A = L U with unit-diagonal L and no row exchanges.

    A zero pivot is accepted when the column below it is zero as well (the
    Lobatto case, where the node at 0 gives Q a zero first row); that column
    of L is then left at zero.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    L = np.eye(n)
    U = np.zeros_like(A)
    scale = max(np.abs(A).max(), 1.0)
    for i in range(n):
        U[i, i:] = A[i, i:] - L[i, :i] @ U[:i, i:]
        below = A[i + 1:, i] - L[i + 1:, :i] @ U[:i, i]
        if abs(U[i, i]) <= 1e-14 * scale:
            if np.any(np.abs(below) > 1e-14 * scale):
                raise DegenerateNodes("zero pivot in unpivoted LU")
            U[i, i] = 0.0
            continue
        L[i + 1:, i] = below / U[i, i]
    return L, U


def build_preconditioner(kind: PreconditionerKind, table: CollocationTable,
                         sweep_index: int = 1) -> PreconditionerMatrix:
    if not kind.valid:
        raise RoleMismatch(f"{kind.qtype.value} cannot be used in the {kind.role.value} role")
    if sweep_index < 1:
        raise ValueError("sweep_index starts at 1")
    tau, M = table.tau, table.M
    dtau = np.diff(tau, prepend=0.0)
    qt = kind.qtype

    if qt is QDeltaType.IE:
        qd = np.tril(np.broadcast_to(dtau, (M, M)))
    elif qt is QDeltaType.EE:
        # row m holds dtau_2 .. dtau_m; the first subinterval never enters
        qd = np.zeros((M, M))
        for m in range(1, M):
            qd[m, :m] = dtau[1:m + 1]
    elif qt is QDeltaType.LU:
        _, U = lu_nopivot(table.Q.T)
        qd = U.T
    elif qt is QDeltaType.MIN_SR_NS:
        qd = np.diag(tau / M)
    else:
        qd = np.diag(tau / min(sweep_index, M))
    return PreconditionerMatrix(kind, qd, qt is QDeltaType.MIN_SR_FLEX)
