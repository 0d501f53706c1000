import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poiseuille_lab.discretization import (
    Grid,
    ModeField,
    PerturbationState,
    assemble_laplacian_k,
    band_weight,
    dy_norm,
    grad_norm,
    l2_inner,
    l2_norm,
    laplacian_apply,
    linf_norm_gradpsi,
    poisson_solve_k,
    resolved_grid,
    to_physical,
    weighted_norm_y_dx,
)
from poiseuille_lab.errors import GridMismatchError, GridTooSmallError, ZeroModeError

from conftest import random_field


def sine_mode(grid, m):
    """Discrete Dirichlet eigenvector ``sin(m pi (y + Ly) / (2 Ly))``."""
    return np.sin(m * np.pi * (grid.y + grid.Ly) / (2 * grid.Ly))


def discrete_eigenvalue(grid, m):
    return 2.0 / grid.dy ** 2 * (np.cos(m * np.pi * grid.dy / (2 * grid.Ly)) - 1.0)


# --------------------------------------------------------------------------
# grid

def test_grid_spacing_and_nodes():
    g = Grid(Ly=10.0, Ny=511, Kmax=4)
    assert g.dy * (g.Ny + 1) == pytest.approx(2 * g.Ly, rel=1e-15)
    assert np.all(np.diff(g.y) > 0)
    np.testing.assert_allclose(g.y, -g.y[::-1], atol=1e-13)
    assert g.y[0] == pytest.approx(-g.Ly + g.dy)
    assert g.y[g.Ny // 2] == pytest.approx(0.0, abs=1e-13)


@pytest.mark.parametrize("kw", [{"Ny": 2}, {"Ly": 0.0}, {"Ly": -1.0}, {"Kmax": 0}])
def test_grid_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        Grid(**kw)


def test_grid_too_small_error_type():
    with pytest.raises(GridTooSmallError):
        Grid(Ny=2)


def test_resolved_grid_is_odd_and_resolves_layer():
    g = resolved_grid(10.0, 1e-5, 1)
    assert g.Ny % 2 == 1
    assert g.dy <= (1e-5) ** 0.25 / 8 * (1 + 1e-12)


# --------------------------------------------------------------------------
# Laplacian

def test_laplacian_three_point_stencil():
    g = Grid(Ly=2.0, Ny=3)  # dy = 1
    m = assemble_laplacian_k(g, 0).to_dense()
    np.testing.assert_array_equal(m.real, [[-2, 1, 0], [1, -2, 1], [0, 1, -2]])


def test_laplacian_wavenumber_shift():
    g = Grid(Ly=2.0, Ny=3)
    d = assemble_laplacian_k(g, 2).to_dense() - assemble_laplacian_k(g, 0).to_dense()
    np.testing.assert_array_equal(d, -4 * np.eye(3))


def test_laplacian_viscosity_is_metadata():
    g = Grid(Ly=2.0, Ny=9)
    a, b = assemble_laplacian_k(g, 1, nu=0.5), assemble_laplacian_k(g, 1)
    np.testing.assert_array_equal(a.to_dense(), b.to_dense())
    assert a.nu == 0.5


def test_laplacian_spectrum_matches_sine_series():
    g = Grid(Ly=np.pi, Ny=127)
    ev = np.sort(assemble_laplacian_k(g, 0).eigvalsh())[::-1]
    for m in (1, 2, 3):
        assert ev[m - 1] == pytest.approx(discrete_eigenvalue(g, m), rel=1e-10)
        assert ev[m - 1] == pytest.approx(-(m * np.pi / (2 * g.Ly)) ** 2, rel=1e-2)


def test_laplacian_apply_matches_matrix(rng):
    g = Grid(Ly=5.0, Ny=41)
    f = random_field(rng, g, 3, smooth=False)
    np.testing.assert_allclose(laplacian_apply(f.values, g.dy, 3),
                               assemble_laplacian_k(g, 3).matvec(f.values), rtol=1e-13)


# --------------------------------------------------------------------------
# Poisson

def test_poisson_zero():
    g = Grid(Ly=5.0, Ny=31)
    psi = poisson_solve_k(g, 1, ModeField.zeros(g, 1))
    assert np.all(psi.values == 0)


def test_poisson_eigenvector():
    g = Grid(Ly=5.0, Ny=63)
    s = sine_mode(g, 3)
    lam = discrete_eigenvalue(g, 3)
    psi = poisson_solve_k(g, 1, ModeField(1, -2 * s, g))
    np.testing.assert_allclose(psi.values, -2 * s / (lam - 1), rtol=1e-10, atol=1e-13)


@given(k=st.integers(1, 20), seed=st.integers(0, 2 ** 31))
def test_poisson_round_trip(k, seed):
    g = Grid(Ly=6.0, Ny=101)
    w = random_field(np.random.default_rng(seed), g, k, smooth=False)
    psi = poisson_solve_k(g, k, w)
    back = laplacian_apply(psi.values, g.dy, k)
    assert np.linalg.norm(back - w.values) <= 1e-10 * np.linalg.norm(w.values)
    lap_w = ModeField(k, laplacian_apply(w.values, g.dy, k), g)
    again = poisson_solve_k(g, k, lap_w)
    assert np.linalg.norm(again.values - w.values) <= 1e-10 * np.linalg.norm(w.values)


def test_poisson_refuses_zero_band():
    g = Grid(Ly=5.0, Ny=31)
    with pytest.raises(ZeroModeError):
        poisson_solve_k(g, 0, ModeField.zeros(g, 0))


# --------------------------------------------------------------------------
# inner products and norms

def test_band_weights():
    assert band_weight(0) == pytest.approx(2 * np.pi)
    assert band_weight(5) == pytest.approx(4 * np.pi)


def test_constant_norm_trapezoid_with_dirichlet_ends():
    # trapezoid over [-1, 1] with the zero end values: 4 pi Ny / (Ny + 1)
    for ny in (9, 99, 999):
        g = Grid(Ly=1.0, Ny=ny)
        f = ModeField(0, np.ones(ny), g)
        assert l2_norm(f) ** 2 == pytest.approx(4 * np.pi * ny / (ny + 1), rel=1e-14)
        assert l2_norm(f) ** 2 == pytest.approx(4 * np.pi, rel=1.0 / (ny + 1) + 1e-14)


def test_gradient_of_constant():
    g = Grid(Ly=1.0, Ny=49)
    f = ModeField(3, np.ones(g.Ny), g)
    assert grad_norm(f, "one-sided") ** 2 == pytest.approx(9 * l2_norm(f) ** 2, rel=1e-14)


def test_gradient_identity_staggered(rng):
    g = Grid(Ly=5.0, Ny=51)
    f = random_field(rng, g, 2, smooth=False)
    lap = ModeField(2, laplacian_apply(f.values, g.dy, 2), g)
    assert grad_norm(f) ** 2 == pytest.approx(-l2_inner(lap, f).real, rel=1e-12)
    assert grad_norm(f) ** 2 == pytest.approx(4 * l2_norm(f) ** 2 + dy_norm(f) ** 2, rel=1e-14)


def test_weighted_norm():
    g = Grid(Ly=3.0, Ny=31)
    f = ModeField(2, np.ones(g.Ny), g)
    expected = 2 * np.sqrt(4 * np.pi * g.dy * np.sum(g.y ** 2))
    assert weighted_norm_y_dx(f) == pytest.approx(expected, rel=1e-14)


def test_parseval_against_direct_quadrature():
    g = Grid(Ly=8.0, Ny=255, Kmax=3)
    y = g.y
    modes = np.zeros((4, g.Ny), dtype=complex)
    modes[0] = np.exp(-y ** 2)
    modes[2] = (0.3 - 0.7j) * y * np.exp(-y ** 2 / 2)
    state = PerturbationState(modes, g)
    nx = 32
    phys = to_physical(modes, nx)
    direct = (2 * np.pi / nx) * g.dy * np.sum(phys ** 2)
    assert state.norm() ** 2 == pytest.approx(direct, rel=1e-10)


def test_mismatched_grids_rejected():
    a = ModeField(1, np.ones(9), Grid(Ly=1.0, Ny=9))
    b = ModeField(1, np.ones(9), Grid(Ly=2.0, Ny=9))
    with pytest.raises(GridMismatchError):
        l2_inner(a, b)
    with pytest.raises(GridMismatchError):
        l2_inner(a, ModeField(2, np.ones(9), a.grid))


@given(k=st.integers(0, 12), seed=st.integers(0, 2 ** 31))
def test_adjoint_and_negative(k, seed):
    rng = np.random.default_rng(seed)
    g = Grid(Ly=4.0, Ny=61)
    f, h = random_field(rng, g, k, False), random_field(rng, g, k, False)
    lf = ModeField(k, laplacian_apply(f.values, g.dy, k), g)
    lh = ModeField(k, laplacian_apply(h.values, g.dy, k), g)
    a, b = l2_inner(lf, h), l2_inner(f, lh)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300)
    assert l2_inner(lf, f).real <= 0


def test_doubling_ly_keeps_gaussian_norm():
    g1 = Grid(Ly=10.0, Ny=399)
    g2 = Grid(Ly=20.0, Ny=799)
    assert g1.dy == pytest.approx(g2.dy)
    n1 = l2_norm(ModeField(1, np.exp(-g1.y ** 2), g1))
    n2 = l2_norm(ModeField(1, np.exp(-g2.y ** 2), g2))
    assert abs(n1 - n2) <= 1e-8 * n1


# --------------------------------------------------------------------------
# L-infinity of the velocity

def test_linf_zero():
    g = Grid(Ly=5.0, Ny=31)
    assert linf_norm_gradpsi(ModeField.zeros(g, 1)) == 0.0


def test_linf_gaussian_against_refined_oracle():
    g = Grid(Ly=6.0, Ny=479)
    psi = ModeField(1, np.exp(-g.y ** 2), g)
    yf = np.linspace(-g.Ly, g.Ly, 10 * (g.Ny + 1) + 1)
    exact = np.max(np.sqrt(np.exp(-2 * yf ** 2) * (1 + 4 * yf ** 2)))
    assert linf_norm_gradpsi(psi) == pytest.approx(exact, rel=1e-3)


@given(c=st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_linf_homogeneous(c):
    g = Grid(Ly=5.0, Ny=41)
    psi = ModeField(2, np.exp(-g.y ** 2) * (1 + 0.5j * g.y), g)
    assert linf_norm_gradpsi(psi * c) == pytest.approx(abs(c) * linf_norm_gradpsi(psi),
                                                       rel=1e-12, abs=1e-300)


# --------------------------------------------------------------------------
# full perturbation fields

def test_physical_reconstruction_is_real_and_invertible(rng):
    g = Grid(Ly=4.0, Ny=21, Kmax=5)
    modes = rng.normal(size=(6, g.Ny)) + 1j * rng.normal(size=(6, g.Ny))
    modes[0] = modes[0].real
    state = PerturbationState(modes, g)
    phys = state.to_physical(16)
    assert np.isrealobj(phys)
    back = PerturbationState.from_physical(phys, g)
    np.testing.assert_allclose(back.modes, modes, atol=1e-13)


def test_mode_field_shape_checked():
    with pytest.raises(GridMismatchError):
        ModeField(1, np.ones(5), Grid(Ly=1.0, Ny=7))
