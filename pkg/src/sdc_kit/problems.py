"""Desk-scale split problems.

* :class:`DahlquistTwoRate` - scalar x' = (lambda_f + lambda_s) x stored as a real 2-vector
* :class:`Advection1D` - periodic cosine-bell advection, everything explicit
* :class:`AcousticAdvection1D` - sound waves implicit, advection explicit
* :class:`GravityWave2D` - linear vertical-slice gravity waves with a pseudo-sound speed

All state vectors are flat float arrays laid out variable-major.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .imex import ImexSystem

EARTH_RADIUS = 6.37122e6
DAY = 86400.0
GRAVITY = 9.80616


@dataclass(frozen=True)
class Layout:
    variables: tuple[str, ...]
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.variables) * math.prod(self.shape)


class Problem(ImexSystem):
    """Shared plumbing: layout, named fields, grid coordinates."""

    name: str
    layout: Layout

    @property
    def n_dof(self) -> int:
        return self.layout.size

    def fields(self, x: np.ndarray) -> dict[str, np.ndarray]:
        arr = np.asarray(x).reshape((len(self.layout.variables),) + self.layout.shape)
        return dict(zip(self.layout.variables, arr))

    def pack(self, **fields) -> np.ndarray:
        return np.concatenate([np.broadcast_to(fields[v], self.layout.shape).ravel()
                               for v in self.layout.variables])

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, z) of every grid point; z is zero for 1-D problems."""
        raise NotImplementedError

    def initial_state(self) -> np.ndarray:
        raise NotImplementedError

    def cache_key(self) -> str:
        raise NotImplementedError


def periodic_centered(f: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * dx)


def periodic_centered4(f: np.ndarray, dx: float) -> np.ndarray:
    return (-np.roll(f, -2) + 8.0 * np.roll(f, -1) - 8.0 * np.roll(f, 1) + np.roll(f, 2)) / (12.0 * dx)


# --------------------------------------------------------------------------

class DahlquistTwoRate(Problem):
    """x' = lambda_fast x + lambda_slow x for complex x, as (Re x, Im x)."""

    name = "dahlquist"

    def __init__(self, lambda_fast: complex = -1.0, lambda_slow: complex = 0.0, x0: complex = 1.0):
        self.lambda_fast = complex(lambda_fast)
        self.lambda_slow = complex(lambda_slow)
        self.x0 = complex(x0)
        self.layout = Layout(("re", "im"), (1,))
        self.fast_matrix = self._block(self.lambda_fast)
        self.slow_matrix = self._block(self.lambda_slow)

    @staticmethod
    def _block(lam: complex) -> np.ndarray:
        return np.array([[lam.real, -lam.imag], [lam.imag, lam.real]])

    def eval_fast(self, x, t):
        return self.fast_matrix @ x

    def eval_slow(self, x, t):
        return self.slow_matrix @ x

    def solve_implicit(self, a, rhs, t, tols=None, stats=None):
        if stats is not None:
            stats.solves += 1
            stats.newton_iterations += 1
        if a == 0.0:
            return rhs.copy()
        z = complex(rhs[0], rhs[1]) / (1.0 - a * self.lambda_fast)
        return np.array([z.real, z.imag])

    def initial_state(self):
        return np.array([self.x0.real, self.x0.imag])

    def exact(self, t: float) -> np.ndarray:
        z = np.exp((self.lambda_fast + self.lambda_slow) * t) * self.x0
        return np.array([z.real, z.imag])

    def coordinates(self):
        return np.zeros(1), np.zeros(1)

    def cache_key(self):
        return f"dahlquist_lf{self.lambda_fast}_ls{self.lambda_slow}_x0{self.x0}"


# --------------------------------------------------------------------------

class Advection1D(Problem):
    """Periodic tracer advection D_t + c D_x = 0 with 4th-order centered differences.

    Defaults put one equatorial great circle of the Earth on a 128-cell grid
    and advect at u_max = 2 pi a / 12 days.
    """

    name = "advection1d"

    def __init__(self, n_cells: int = 128, L: float = 2.0 * np.pi * EARTH_RADIUS,
                 c: float | None = None, D_max: float = 1000.0, R: float = EARTH_RADIUS / 3.0):
        if n_cells < 8:
            raise ValueError("advection1d needs at least 8 cells")
        self.n_cells, self.L, self.D_max, self.R = n_cells, L, D_max, R
        self.c = L / (12.0 * DAY) if c is None else c
        self.dx = L / n_cells
        self.x = (np.arange(n_cells) + 0.5) * self.dx
        self.layout = Layout(("D",), (n_cells,))

    def eval_fast(self, x, t):
        return np.zeros_like(x)

    def eval_slow(self, x, t):
        return -self.c * periodic_centered4(x, self.dx)

    def solve_implicit(self, a, rhs, t, tols=None, stats=None):
        # F vanishes, every implicit solve is the identity
        if stats is not None:
            stats.solves += 1
        return rhs.copy()

    def initial_state(self):
        r = np.abs(self.x - 0.5 * self.L)
        return np.where(r <= self.R, 0.5 * self.D_max * (1.0 + np.cos(3.0 * np.pi * r / self.R)), 0.0)

    def coordinates(self):
        return self.x.copy(), np.zeros(self.n_cells)

    def cache_key(self):
        return f"advection1d_n{self.n_cells}_L{self.L!r}_c{self.c!r}_D{self.D_max!r}_R{self.R!r}"


# --------------------------------------------------------------------------

class AcousticAdvection1D(Problem):
    """Linear acoustics in a uniform flow, periodic.

    u_t + U u_x + c_s p_x = 0,  p_t + U p_x + c_s u_x = 0.
    Sound (c_s) is the fast term, advection (U) the slow one. Both use
    2nd-order centered differences, so the semi-discrete energy
    sum(u^2 + p^2) dx is conserved exactly.
    """

    name = "acoustic1d"

    def __init__(self, n_cells: int = 64, L: float = 1.0, U: float = 0.05, c_s: float = 1.0):
        self.n_cells, self.L, self.U, self.c_s = n_cells, L, U, c_s
        self.dx = L / n_cells
        self.x = (np.arange(n_cells) + 0.5) * self.dx
        self.layout = Layout(("u", "p"), (n_cells,))

    @classmethod
    def from_cfl(cls, fast_cfl: float, slow_cfl: float, dt: float = 1.0, n_cells: int = 64,
                 L: float = 1.0) -> "AcousticAdvection1D":
        """Pick c_s and U so that a step of ``dt`` has the requested Courant numbers."""
        dx = L / n_cells
        return cls(n_cells, L, U=slow_cfl * dx / dt, c_s=fast_cfl * dx / dt)

    def fast_cfl(self, dt: float) -> float:
        return self.c_s * dt / self.dx

    def slow_cfl(self, dt: float) -> float:
        return self.U * dt / self.dx

    def eval_fast(self, x, t):
        u, p = x.reshape(2, -1)
        return np.concatenate([-self.c_s * periodic_centered(p, self.dx),
                               -self.c_s * periodic_centered(u, self.dx)])

    def eval_slow(self, x, t):
        return -self.U * periodic_centered(x.reshape(2, -1), self.dx).ravel()

    def energy(self, x: np.ndarray) -> float:
        return float(np.sum(x * x) * self.dx)

    def initial_state(self):
        p = np.exp(-((self.x - 0.5 * self.L) / (0.1 * self.L)) ** 2)
        return self.pack(u=0.0, p=p)

    def coordinates(self):
        return self.x.copy(), np.zeros(self.n_cells)

    def cache_key(self):
        return f"acoustic1d_n{self.n_cells}_L{self.L!r}_U{self.U!r}_cs{self.c_s!r}"


# --------------------------------------------------------------------------

def _periodic_diff_matrix(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([np.ones(n - 1), -np.ones(n - 1), [1.0], [-1.0]], [1, -1, -(n - 1), n - 1],
                    shape=(n, n)) / (2.0 * h)


def _lid_diff_matrices(n: int, h: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Centered d/dz with mirrored ghosts: (even reflection, odd reflection)."""
    base = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [1, -1], shape=(n, n)).tolil()
    even, odd = base.copy(), base.copy()
    even[0, 0], even[n - 1, n - 1] = -1.0, 1.0
    odd[0, 0], odd[n - 1, n - 1] = 1.0, -1.0
    return even.tocsr() / (2.0 * h), odd.tocsr() / (2.0 * h)


class GravityWave2D(Problem):
    """Linearized vertical-slice gravity waves, x-periodic, rigid lids.

    Prognostic perturbations (u, w, p, b) on a cell-centred (nz, nx) grid:

        u_t = -p_x             - U u_x
        w_t = -p_z + b         - U w_x
        p_t = -c_s^2 (u_x + w_z) - U p_x
        b_t = -N^2 w           - U b_x

    The first column is the fast (implicit) part, the advection the slow part.
    At the lids w and its flux vanish through odd ghost reflection; u, p and b
    are reflected evenly.
    """

    name = "gravity2d"

    def __init__(self, nx: int = 150, nz: int = 10, Lx: float = 300e3, H: float = 10e3,
                 N_bv: float = 0.01, U: float = 20.0, a: float = 5e3, x_c: float = 0.0,
                 delta_theta: float = 1e-2, theta_ref: float = 300.0, c_s: float = 300.0,
                 advection: str = "spectral", balanced: bool = False):
        if nx < 30 or nz < 5:
            raise ValueError("gravity2d needs nx >= 30 and nz >= 5")
        self.nx, self.nz = nx, nz
        self.Lx, self.H, self.N_bv, self.U, self.a, self.x_c = Lx, H, N_bv, U, a, x_c
        self.c_s = c_s
        if advection not in ("spectral", "centered"):
            raise ValueError("advection must be 'spectral' or 'centered'")
        self.advection, self.balanced = advection, balanced
        self.delta_b = GRAVITY * delta_theta / theta_ref
        self.dx, self.dz = Lx / nx, H / nz
        self.x = -0.5 * Lx + (np.arange(nx) + 0.5) * self.dx
        self.z = (np.arange(nz) + 0.5) * self.dz
        self.layout = Layout(("u", "w", "p", "b"), (nz, nx))
        k = 2.0 * np.pi * np.fft.rfftfreq(nx, d=self.dx)
        if nx % 2 == 0:
            k[-1] = 0.0  # Nyquist mode has no real derivative
        self._ik = 1j * k

    def _dz_even(self, f):
        g = np.concatenate([f[:1], f, f[-1:]], axis=0)
        return (g[2:] - g[:-2]) / (2.0 * self.dz)

    def _dz_odd(self, f):
        g = np.concatenate([-f[:1], f, -f[-1:]], axis=0)
        return (g[2:] - g[:-2]) / (2.0 * self.dz)

    def eval_fast(self, x, t):
        u, w, p, b = x.reshape(4, self.nz, self.nx)
        return np.concatenate([
            (-periodic_centered(p, self.dx)).ravel(),
            (-self._dz_even(p) + b).ravel(),
            (-self.c_s ** 2 * (periodic_centered(u, self.dx) + self._dz_odd(w))).ravel(),
            (-self.N_bv ** 2 * w).ravel(),
        ])

    def ddx_slow(self, f: np.ndarray) -> np.ndarray:
        """x-derivative used by the advection term."""
        if self.advection == "centered":
            return periodic_centered(f, self.dx)
        return np.fft.irfft(self._ik * np.fft.rfft(f, axis=-1), n=self.nx, axis=-1)

    def eval_slow(self, x, t):
        return -self.U * self.ddx_slow(x.reshape(4, self.nz, self.nx)).ravel()

    @functools.cached_property
    def fast_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of the fast operator, assembled from 1-D difference matrices."""
        nx, nz = self.nx, self.nz
        Ix, Iz = sp.identity(nx), sp.identity(nz)
        Dx = sp.kron(Iz, _periodic_diff_matrix(nx, self.dx))
        ev, od = _lid_diff_matrices(nz, self.dz)
        Dz_even, Dz_odd = sp.kron(ev, Ix), sp.kron(od, Ix)
        I = sp.identity(nx * nz)
        c2, n2 = self.c_s ** 2, self.N_bv ** 2
        return sp.bmat([
            [None, None, -Dx, None],
            [None, None, -Dz_even, I],
            [-c2 * Dx, -c2 * Dz_odd, None, None],
            [None, -n2 * I, None, None],
        ], format="csc")

    def solve_implicit(self, a, rhs, t, tols=None, stats=None):
        # exact sparse LU of I - a F, cached per coefficient
        if stats is not None:
            stats.solves += 1
            stats.newton_iterations += 1
        if a == 0.0:
            return rhs.copy()
        cache = self.__dict__.setdefault("_splu_cache", {})
        if a not in cache:
            cache[a] = spla.splu(sp.identity(self.n_dof, format="csc") - a * self.fast_matrix)
        return cache[a].solve(rhs)

    def initial_state(self):
        X, Z = np.meshgrid(self.x, self.z)
        b = self.delta_b * np.sin(np.pi * Z / self.H) / (1.0 + (X - self.x_c) ** 2 / self.a ** 2)
        p = self.hydrostatic_pressure(b) if self.balanced else 0.0
        return self.pack(u=0.0, w=0.0, p=p, b=b)

    def hydrostatic_pressure(self, b: np.ndarray) -> np.ndarray:
        """Column-wise p with discrete d/dz p = b and zero column mean, so w_t starts at zero."""
        even, _ = _lid_diff_matrices(self.nz, self.dz)
        D = even.toarray()
        # append the zero-mean constraint to fix the constant null vector
        A = np.vstack([D, np.ones((1, self.nz))])
        rhs = np.vstack([b, np.zeros((1, self.nx))])
        p, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        return p

    def advected_center(self, t: float) -> float:
        return self.x_c + self.U * t

    def symmetry_defect(self, x: np.ndarray, t: float) -> float:
        """max |b(x) - b(2 X_c - x)| / max |b| with X_c the advected centre."""
        b = self.fields(x)["b"]
        mirrored_x = 2.0 * self.advected_center(t) - self.x
        mirror = np.stack([np.interp(mirrored_x, self.x, row, period=self.Lx) for row in b])
        return float(np.max(np.abs(b - mirror)) / np.max(np.abs(b)))

    def coordinates(self):
        X, Z = np.meshgrid(self.x, self.z)
        return X.ravel(), Z.ravel()

    def cache_key(self):
        return (f"gravity2d_nx{self.nx}_nz{self.nz}_Lx{self.Lx!r}_H{self.H!r}_N{self.N_bv!r}_U{self.U!r}"
                f"_a{self.a!r}_xc{self.x_c!r}_db{self.delta_b!r}_cs{self.c_s!r}_{self.advection}_bal{self.balanced}")


PROBLEMS = {
    "dahlquist": DahlquistTwoRate,
    "advection1d": Advection1D,
    "acoustic1d": AcousticAdvection1D,
    "gravity2d": GravityWave2D,
}
