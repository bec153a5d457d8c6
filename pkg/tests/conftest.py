import numpy as np
import pytest

from sdc_kit.imex import ImexSystem, SolverTolerances, residual_norm


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    # keep reference-solution caches out of the working tree
    mp = pytest.MonkeyPatch()
    mp.setenv("SDC_KIT_CACHE", str(tmp_path_factory.mktemp("ref_cache")))
    yield
    mp.undo()


class CheckedSystem(ImexSystem):
    """Wraps a problem and asserts the implicit-solve residual bound after every solve."""

    def __init__(self, inner):
        self.inner = inner
        self.n_dof = inner.n_dof
        self.is_linear = inner.is_linear
        self.autonomous = inner.autonomous
        self.checked = 0
        self.worst = 0.0

    def eval_fast(self, x, t):
        return self.inner.eval_fast(x, t)

    def eval_slow(self, x, t):
        return self.inner.eval_slow(x, t)

    def solve_implicit(self, a, rhs, t, tols=None, stats=None):
        tols = tols or SolverTolerances()
        x = self.inner.solve_implicit(a, rhs, t, tols, stats)
        res = residual_norm(self.inner, x, a, rhs, t)
        bound = tols.nonlinear_abs + tols.nonlinear_rel * np.linalg.norm(rhs)
        assert res <= bound, f"implicit solve residual {res:.3e} exceeds {bound:.3e}"
        self.checked += 1
        self.worst = max(self.worst, res / bound if bound else 0.0)
        return x

    def __getattr__(self, name):
        return getattr(self.inner, name)


class LinearSystem(ImexSystem):
    """x' = A x + B x with dense matrices; uses the default implicit solver."""

    def __init__(self, A, B=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.zeros_like(self.A) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        self.n_dof = self.A.shape[0]

    def eval_fast(self, x, t):
        return self.A @ x

    def eval_slow(self, x, t):
        return self.B @ x


class ForcingSystem(ImexSystem):
    """State-independent forcing: F = f_fast(t), S = f_slow(t)."""

    def __init__(self, n, f_fast, f_slow=None):
        self.n_dof = n
        self.f_fast = f_fast
        self.f_slow = f_slow or (lambda t: np.zeros(n))
        self.autonomous = False

    def eval_fast(self, x, t):
        return np.asarray(self.f_fast(t), dtype=float) * np.ones(self.n_dof)

    def eval_slow(self, x, t):
        return np.asarray(self.f_slow(t), dtype=float) * np.ones(self.n_dof)
