import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdc_kit.harness import ConvergenceRow, fit_order
from sdc_kit.imex import assemble_operator
from sdc_kit.problems import AcousticAdvection1D, Advection1D, DahlquistTwoRate, GravityWave2D
from sdc_kit.reference import (read_snapshot, reference_solution, ssprk3_integrate, ssprk3_step,
                               write_snapshot)

from conftest import LinearSystem


def test_zero_dynamics():
    x = np.array([1.0, -3.0])
    assert np.array_equal(ssprk3_step(LinearSystem(np.zeros((2, 2))), x, 0.0, 0.1), x)


def test_scalar_cubic_taylor():
    x = ssprk3_step(LinearSystem([[-1.0]]), np.array([1.0]), 0.0, 0.1)
    assert x[0] == pytest.approx(1 - 0.1 + 0.005 - 0.1 ** 3 / 6, abs=1e-16)
    assert x[0] == pytest.approx(0.9048333333333333, abs=2e-16)


def test_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        ssprk3_step(LinearSystem([[-1.0]]), np.ones(1), 0.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.floats(0.01, 0.5))
def test_linear_systems_equal_cubic_taylor(seed, n, dt):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((2, n, n))
    x = rng.standard_normal(n)
    hA = dt * (A + B)
    expected = x + hA @ x + hA @ hA @ x / 2 + hA @ hA @ hA @ x / 6
    got = ssprk3_step(LinearSystem(A, B), x, 0.0, dt)
    assert np.linalg.norm(got - expected) <= 1e-13 * max(1.0, np.linalg.norm(expected))


def test_stage_times():
    seen = []

    class Clock(LinearSystem):
        autonomous = False

        def eval_fast(self, x, t):
            seen.append(t)
            return np.zeros_like(x)

    ssprk3_step(Clock(np.zeros((1, 1))), np.ones(1), 1.0, 0.5)
    assert seen == [1.0, 1.5, 1.25]


def test_third_order_on_dahlquist():
    p = DahlquistTwoRate(-1.0 + 1j, 0.5j)
    rows = []
    for n in (10, 20, 40, 80):
        x = ssprk3_integrate(p, p.initial_state(), 0.0, 1.0, n)
        rows.append(ConvergenceRow(1.0 / n, np.linalg.norm(x - p.exact(1.0)) / np.linalg.norm(p.exact(1.0))))
    assert abs(fit_order(rows) - 3.0) <= 0.2


@pytest.mark.parametrize("problem", [Advection1D(n_cells=16), AcousticAdvection1D(n_cells=8),
                                     GravityWave2D(nx=30, nz=5), DahlquistTwoRate(1j)])
def test_snapshot_round_trip(tmp_path, problem):
    x = np.random.default_rng(4).standard_normal(problem.n_dof)
    write_snapshot(tmp_path / "s.csv", problem, x)
    assert read_snapshot(tmp_path / "s.csv", problem).tobytes() == x.tobytes()
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == ",".join(["x", "z", *problem.layout.variables])


def test_reference_cache(tmp_path):
    p = AcousticAdvection1D(n_cells=8)
    a = reference_solution(p, 0.0, 0.5, 0.01, cache=tmp_path)
    files = list(tmp_path.glob("ssprk3_acoustic1d_*.csv"))
    assert len(files) == 1
    b = reference_solution(p, 0.0, 0.5, 0.01, cache=tmp_path)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() == reference_solution(p, 0.0, 0.5, 0.01, cache=False).tobytes()
    # different dt or initial state means a different file
    reference_solution(p, 0.0, 0.5, 0.005, cache=tmp_path)
    reference_solution(p, 0.0, 0.5, 0.01, x_0=2 * p.initial_state(), cache=tmp_path)
    assert len(list(tmp_path.glob("*.csv"))) == 3
    assert not list(tmp_path.glob("*.tmp"))


def test_reference_cache_uses_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SDC_KIT_CACHE", str(tmp_path / "env"))
    reference_solution(DahlquistTwoRate(-1.0), 0.0, 1.0, 0.1)
    assert len(list((tmp_path / "env").glob("*.csv"))) == 1


def test_reference_requires_dividing_dt():
    with pytest.raises(ValueError):
        reference_solution(DahlquistTwoRate(), 0.0, 1.0, 0.3, cache=False)
