import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdc_kit.collocation import QDeltaType
from sdc_kit.imex import SolverTolerances, SolveStats, assemble_operator, residual_norm
from sdc_kit.problems import (DAY, EARTH_RADIUS, GRAVITY, PROBLEMS, AcousticAdvection1D, Advection1D,
                              DahlquistTwoRate, GravityWave2D, Layout, periodic_centered4)
from sdc_kit.sdc import SdcConfig, finalize, integrate, solve_collocation_direct, step

SMALL = {
    "dahlquist": lambda: DahlquistTwoRate(-1.0 + 2.0j, 0.5j),
    "advection1d": lambda: Advection1D(n_cells=32),
    "acoustic1d": lambda: AcousticAdvection1D(n_cells=16),
    "gravity2d": lambda: GravityWave2D(nx=30, nz=5),
}


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_zero_state_gives_zero_terms(name):
    p = SMALL[name]()
    z = np.zeros(p.n_dof)
    assert not np.any(p.eval_fast(z, 0.0)) and not np.any(p.eval_slow(z, 0.0))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(PROBLEMS)), st.integers(0, 2 ** 32 - 1), st.floats(-3, 3))
def test_linearity(name, seed, alpha):
    p = SMALL[name]()
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, p.n_dof))
    for f in (p.eval_fast, p.eval_slow):
        lhs = f(x + alpha * y, 0.0)
        rhs = f(x, 0.0) + alpha * f(y, 0.0)
        assert np.linalg.norm(lhs - rhs) <= 1e-13 * max(1.0, np.linalg.norm(rhs)) * 10


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_pack_fields_round_trip(name):
    p = SMALL[name]()
    x = np.arange(p.n_dof, dtype=float)
    assert np.array_equal(p.pack(**p.fields(x)), x)
    assert p.n_dof == p.layout.size
    xs, zs = p.coordinates()
    assert xs.size == zs.size == int(np.prod(p.layout.shape))


def test_layout_size():
    assert Layout(("u", "p"), (3, 4)).size == 24


# --- Dahlquist ---

def test_dahlquist_rotation_representation():
    p = DahlquistTwoRate(1j, 0.0)
    np.testing.assert_array_equal(p.eval_fast(np.array([1.0, 0.0]), 0.0), [0.0, 1.0])
    assert not np.any(p.eval_slow(np.array([1.0, 0.0]), 0.0))


def test_dahlquist_exact_and_closed_form_solve():
    p = DahlquistTwoRate(-1.0 + 2j, 0.5 - 1j, x0=2 - 1j)
    z = np.exp((-0.5 + 1j) * 0.7) * (2 - 1j)
    np.testing.assert_allclose(p.exact(0.7), [z.real, z.imag], rtol=1e-15)
    stats = SolveStats()
    rhs = np.array([0.3, -1.2])
    x = p.solve_implicit(0.25, rhs, 0.0, stats=stats)
    assert residual_norm(p, x, 0.25, rhs, 0.0) < 1e-15
    assert stats.solves == 1
    assert np.array_equal(p.solve_implicit(0.0, rhs, 0.0), rhs)


# --- advection ---

def test_advection_defaults():
    p = Advection1D()
    assert p.n_cells == 128 and p.D_max == 1000.0
    assert p.c == pytest.approx(2 * np.pi * EARTH_RADIUS / (12 * DAY))
    D = p.initial_state()
    assert D.max() == pytest.approx(1000.0, rel=1e-3) and D.min() == 0.0
    with pytest.raises(ValueError):
        Advection1D(n_cells=4)


def test_advection_cosine_bell_shape():
    p = Advection1D(n_cells=256)
    r = np.abs(p.x - p.L / 2)
    inside = r <= p.R
    np.testing.assert_allclose(p.initial_state()[inside], 500.0 * (1 + np.cos(3 * np.pi * r[inside] / p.R)))
    assert not np.any(p.initial_state()[~inside])


def test_advection_constant_field():
    p = Advection1D(n_cells=16)
    assert np.max(np.abs(p.eval_slow(np.full(16, 7.0), 0.0))) < 1e-25
    assert not np.any(p.eval_fast(np.full(16, 7.0), 0.0))


def test_advection_fourth_order_derivative():
    errs, dxs = [], []
    for n in (32, 64, 128):
        p = Advection1D(n_cells=n, L=1.0, c=1.0)
        D = np.sin(2 * np.pi * p.x)
        exact = -2 * np.pi * np.cos(2 * np.pi * p.x)
        errs.append(np.max(np.abs(p.eval_slow(D, 0.0) - exact)))
        dxs.append(p.dx)
    C = errs[0] / dxs[0] ** 4
    assert errs[2] <= 1.01 * C * dxs[2] ** 4
    assert 3.9 < np.log2(errs[1] / errs[2]) < 4.1


def test_fourth_order_stencil_formula():
    f = np.random.default_rng(2).standard_normal(10)
    i = 4
    manual = (-f[i + 2] + 8 * f[i + 1] - 8 * f[i - 1] + f[i - 2]) / (12 * 0.5)
    assert periodic_centered4(f, 0.5)[i] == pytest.approx(manual, rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_advection_rhs_mean_vanishes(seed):
    p = Advection1D(n_cells=64)
    D = np.random.default_rng(seed).standard_normal(64) * 1e3
    assert abs(np.mean(p.eval_slow(D, 0.0))) <= 1e-13 * np.linalg.norm(D)


def test_advection_implicit_solve_is_identity_and_counted():
    p = Advection1D(n_cells=16)
    stats = SolveStats()
    rhs = np.linspace(0, 1, 16)
    assert np.array_equal(p.solve_implicit(123.0, rhs, 0.0, stats=stats), rhs)
    assert stats.solves == 1


def test_advection_explicit_sdc_conserves_mean():
    p = Advection1D()
    x = p.initial_state()
    m0 = x.mean()
    for n in range(10):
        x, _ = step(SdcConfig(3, 3, qdelta_implicit=QDeltaType.IE), p, x, n * 3600.0, 3600.0)
        assert abs(x.mean() - m0) <= 1e-12 * abs(m0)


# --- acoustic-advection ---

def test_acoustic_constant_state():
    p = AcousticAdvection1D(n_cells=16)
    x = p.pack(u=2.0, p=-1.0)
    assert np.max(np.abs(p.eval_fast(x, 0.0))) < 1e-13
    assert np.max(np.abs(p.eval_slow(x, 0.0))) < 1e-13


def test_acoustic_fast_term_second_order():
    errs = []
    for n in (32, 64, 128):
        p = AcousticAdvection1D(n_cells=n, c_s=1.0)
        k = 2 * np.pi
        f = p.fields(p.eval_fast(p.pack(u=np.sin(k * p.x), p=0.0), 0.0))
        assert not np.any(f["u"])
        errs.append(np.max(np.abs(f["p"] + k * np.cos(k * p.x))))
    assert 1.9 < np.log2(errs[1] / errs[2]) < 2.1


def test_acoustic_slow_term():
    p = AcousticAdvection1D(n_cells=256, U=0.3)
    k = 4 * np.pi
    f = p.fields(p.eval_slow(p.pack(u=np.sin(k * p.x), p=np.cos(k * p.x)), 0.0))
    np.testing.assert_allclose(f["u"], -0.3 * k * np.cos(k * p.x), atol=2e-3)
    np.testing.assert_allclose(f["p"], 0.3 * k * np.sin(k * p.x), atol=2e-3)


def test_acoustic_cfl():
    p = AcousticAdvection1D.from_cfl(fast_cfl=5.0, slow_cfl=0.5, dt=0.01, n_cells=50)
    assert p.fast_cfl(0.01) == pytest.approx(5.0) and p.slow_cfl(0.01) == pytest.approx(0.5)


def test_acoustic_semi_discrete_energy_is_skew():
    p = AcousticAdvection1D(n_cells=16)
    A = assemble_operator(lambda v: p.eval_rhs(v, 0.0), p.n_dof)
    np.testing.assert_allclose(A + A.T, 0.0, atol=1e-13)


@pytest.mark.parametrize("fast_cfl", [1.0, 2.0, 5.0])
def test_acoustic_energy_drift_per_step(fast_cfl):
    p = AcousticAdvection1D.from_cfl(fast_cfl, 0.5, dt=1.0)
    x = p.initial_state()
    E0 = p.energy(x)
    y, _ = step(SdcConfig(3, 20), p, x, 0.0, 1.0)
    assert abs(p.energy(y) / E0 - 1) <= 1e-6
    # the collocation oracle conserves to round-off, so the drift is the time discretization
    cfg = SdcConfig(3, 1)
    ns = solve_collocation_direct(p, cfg.table, x, 0.0, 1.0)
    assert abs(p.energy(finalize(cfg, p, cfg.table, ns, x, 0.0, 1.0)) / E0 - 1) < 1e-13


# --- gravity wave ---

def test_gravity_parameters_and_initial_state():
    p = GravityWave2D(nx=60, nz=6)
    assert p.delta_b == pytest.approx(GRAVITY * 1e-2 / 300.0)
    f = p.fields(p.initial_state())
    X, Z = np.meshgrid(p.x, p.z)
    np.testing.assert_allclose(f["b"], p.delta_b * np.sin(np.pi * Z / p.H) / (1 + X ** 2 / p.a ** 2))
    assert not np.any(f["u"]) and not np.any(f["w"]) and not np.any(f["p"])
    with pytest.raises(ValueError):
        GravityWave2D(nx=20, nz=5)
    with pytest.raises(ValueError):
        GravityWave2D(nx=30, nz=5, advection="upwind")


def test_gravity_fast_terms_structure():
    p = GravityWave2D(nx=40, nz=6)
    rng = np.random.default_rng(5)
    u, w, pr, b = rng.standard_normal((4, 6, 40))
    f = p.fields(p.eval_fast(p.pack(u=u, w=w, p=pr, b=b), 0.0))
    np.testing.assert_allclose(f["b"], -p.N_bv ** 2 * w)
    # interior z-rows use plain centered differences
    dpz = (pr[2:] - pr[:-2]) / (2 * p.dz)
    np.testing.assert_allclose(f["w"][1:-1], -dpz + b[1:-1])
    dux = (np.roll(u, -1, 1) - np.roll(u, 1, 1)) / (2 * p.dx)
    dwz = (w[2:] - w[:-2]) / (2 * p.dz)
    np.testing.assert_allclose(f["p"][1:-1], -p.c_s ** 2 * (dux[1:-1] + dwz), rtol=1e-12)


def test_gravity_lid_reflection():
    p = GravityWave2D(nx=30, nz=5)
    w = np.ones((5, 30))
    pr = np.ones((5, 30))
    f = p.fields(p.eval_fast(p.pack(u=0.0, w=w, p=pr, b=0.0), 0.0))
    # odd reflection: ghost w = -w at the lids, even: ghost p = p
    np.testing.assert_allclose(f["p"][0], -p.c_s ** 2 * (1 - (-1)) / (2 * p.dz))
    np.testing.assert_allclose(f["p"][-1], -p.c_s ** 2 * (-1 - 1) / (2 * p.dz))
    np.testing.assert_allclose(f["w"], 0.0, atol=1e-20)


def test_gravity_buoyancy_forcing_one_euler_step():
    p = GravityWave2D(nx=60, nz=6)
    x = p.initial_state()
    dt = 1e-3
    y = x + dt * p.eval_rhs(x, 0.0)
    fx, fy = p.fields(x), p.fields(y)
    np.testing.assert_allclose(fy["w"], dt * fx["b"], rtol=1e-12)


def test_gravity_sparse_matrix_matches_stencil():
    p = GravityWave2D(nx=30, nz=5)
    x = np.random.default_rng(9).standard_normal(p.n_dof)
    np.testing.assert_allclose(p.fast_matrix @ x, p.eval_fast(x, 0.0), rtol=1e-13, atol=1e-13)


def test_gravity_implicit_solve_residual():
    p = GravityWave2D(nx=30, nz=5)
    rhs = p.initial_state()
    stats = SolveStats()
    x = p.solve_implicit(6.0, rhs, 0.0, SolverTolerances.tight(), stats)
    assert residual_norm(p, x, 6.0, rhs, 0.0) <= 1e-13 * (1 + np.linalg.norm(rhs))
    assert stats.solves == 1


def test_gravity_spectral_slow_derivative():
    p = GravityWave2D(nx=64, nz=5)
    k = 2 * np.pi / p.Lx * 3
    f = np.tile(np.sin(k * p.x), (5, 1))
    np.testing.assert_allclose(p.ddx_slow(f), k * np.cos(k * p.x) * np.ones((5, 1)), atol=1e-15)
    c = GravityWave2D(nx=64, nz=5, advection="centered")
    # centered differences lose (k dx)^2 / 6 relative
    assert np.max(np.abs(c.ddx_slow(f) - k * np.cos(k * p.x))) < 0.02 * k


def test_gravity_balanced_state_has_no_vertical_acceleration():
    p = GravityWave2D(nx=40, nz=8, balanced=True)
    f = p.fields(p.eval_fast(p.initial_state(), 0.0))
    assert np.max(np.abs(f["w"])) < 1e-15
    assert p.cache_key() != GravityWave2D(nx=40, nz=8).cache_key()


def test_gravity_symmetry_about_advected_centre_small_grid():
    # coarse grid: pick t so the mirror image lands on grid points (2 U t = 4 dx)
    p = GravityWave2D(nx=60, nz=5)
    snaps, _ = integrate(SdcConfig(2, 3), p, p.initial_state(), 0.0, 500.0, 50)
    assert p.advected_center(500.0) == pytest.approx(10e3)
    assert p.symmetry_defect(snaps[-1][1], 500.0) < 0.02
    # a deliberately wrong centre breaks the symmetry
    assert p.symmetry_defect(snaps[-1][1], 0.0) > 0.1
