import json
import math

import numpy as np
import pytest

from poiseuille_lab.discretization import Grid, PerturbationState, band_weight, d_center
from poiseuille_lab.errors import CFLViolationError, ConfigError
from poiseuille_lab.linear import ModeOperator, StepperConfig, evolve
from poiseuille_lab.nonlinear import (
    NonlinearState,
    NonlinearSolver,
    compute_A,
    default_datum,
    load_checkpoint,
    min_nx,
    nonlinear_term,
    run_nonlinear,
    save_checkpoint,
    shear_velocity,
    step_nonlinear,
    threshold_amplitude,
    threshold_experiment,
)

GRID = Grid(Ly=6.0, Ny=95, Kmax=4)


def _random_modes(rng, grid, bands=None, scale=1.0):
    modes = np.zeros((grid.Kmax + 1, grid.Ny), dtype=complex)
    env = np.exp(-grid.y ** 2 / 2)
    for k in (range(grid.Kmax + 1) if bands is None else bands):
        modes[k] = env * (rng.normal(size=grid.Ny) + 1j * rng.normal(size=grid.Ny))
        modes[k] = np.convolve(modes[k], np.ones(5) / 5, mode="same")
    modes[0] = modes[0].real
    return scale * modes


def _inner(a, b, grid):
    w = np.array([band_weight(k) for k in range(a.shape[0])]) * grid.dy
    return float(np.sum(w * np.sum(a * np.conj(b), axis=1).real))


# --------------------------------------------------------------------------
# transport term


def test_shear_only_field_has_no_forcing(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID, bands=[0]), GRID)
    assert np.max(np.abs(nonlinear_term(state))) <= 1e-14


def test_single_band_feeds_zero_and_double(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID, bands=[1]), GRID)
    n = nonlinear_term(state)
    scale = np.max(np.abs(n))
    assert scale > 0
    for k in (1, 3, 4):
        assert np.max(np.abs(n[k])) <= 1e-13 * scale
    assert np.max(np.abs(n[0])) > 1e-3 * scale
    assert np.max(np.abs(n[2])) > 1e-3 * scale


def test_transport_conserves_energy(rng):
    # skew-symmetric form: <u . grad w, w> = 0 on the grid
    state = NonlinearState.from_modes(_random_modes(rng, GRID), GRID)
    n = nonlinear_term(state)
    scale = math.sqrt(_inner(n, n, GRID) * _inner(state.omega.modes, state.omega.modes, GRID))
    assert abs(_inner(n, state.omega.modes, GRID)) <= 1e-12 * scale


def test_mean_band_forcing_is_real(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID), GRID)
    assert np.all(nonlinear_term(state)[0].imag == 0)


def test_aliasing_guard(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID), GRID)
    assert min_nx(4) == 13
    with pytest.raises(ConfigError):
        nonlinear_term(state, nx=12)
    with pytest.raises(ConfigError):
        NonlinearSolver(GRID, 1e-2, 0.01, nx=10)


def test_transform_grid_does_not_change_result(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID), GRID)
    a = nonlinear_term(state, nx=13)
    b = nonlinear_term(state, nx=32)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * np.max(np.abs(b)))


def test_shear_velocity_gauges():
    w = np.exp(-GRID.y ** 2) * GRID.y
    left = shear_velocity(w, GRID, "left")
    centered = shear_velocity(w, GRID, "centered")
    # same derivative, different additive constant
    diff = left - centered
    np.testing.assert_allclose(diff, diff[0], atol=1e-14)
    np.testing.assert_allclose(-d_center(left, GRID.dy)[1:-1], w[1:-1], rtol=0, atol=GRID.dy ** 2)
    with pytest.raises(ConfigError):
        shear_velocity(w, GRID, "right")


# --------------------------------------------------------------------------
# stepping


def test_zero_stays_zero():
    state = NonlinearState.from_omega(PerturbationState.zeros(GRID))
    traj = run_nonlinear(state, 1e-2, 2.0, dt=0.05)
    assert np.all(traj.final.omega.modes == 0)
    assert np.all(traj.norm == 0)


def test_transport_off_matches_linear_bands(rng):
    nu, T, dt = 1e-2, 2.0, 0.02
    modes = _random_modes(rng, GRID)
    traj = run_nonlinear(NonlinearState.from_modes(modes, GRID), nu, T, dt=dt, nonlinear=False)
    for k in range(GRID.Kmax + 1):
        op = ModeOperator(GRID, k, nu)
        lin = evolve(op, PerturbationState(modes, GRID).mode(k),
                     StepperConfig(dt=dt, t_end=T, sample_times=np.array([T])))
        ref = lin.omega[-1]
        err = np.linalg.norm(traj.final.omega.modes[k] - ref)
        assert err <= 1e-10 * max(np.linalg.norm(ref), 1e-300)


def test_tiny_amplitude_follows_linear_dynamics():
    nu = 1e-2
    datum = default_datum(GRID, 1e-8)
    T = 20.0
    a = run_nonlinear(NonlinearState.from_omega(datum), nu, T, dt=0.02)
    b = run_nonlinear(NonlinearState.from_omega(datum), nu, T, dt=0.02, nonlinear=False)
    rel = np.abs(a.norm_nonshear - b.norm_nonshear) / b.norm_nonshear
    assert rel.max() <= 1e-4


def test_step_nonlinear_chain(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID, scale=1e-3), GRID)
    s1, n0 = step_nonlinear(state, 0.01, 1e-2)
    s2, n1 = step_nonlinear(s1, 0.01, 1e-2, prev_term=n0)
    assert s2.t == pytest.approx(0.02)
    assert n1.shape == state.omega.modes.shape
    assert np.all(np.isfinite(s2.omega.modes))


def test_cfl_violation_advises_step(rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID, scale=50.0), GRID)
    with pytest.raises(CFLViolationError) as info:
        step_nonlinear(state, 1.0, 1e-2)
    assert 0 < info.value.advised_dt < 1.0
    step_nonlinear(state, 0.9 * info.value.advised_dt, 1e-2)


def test_energy_and_shear_in_short_run():
    nu = 1e-2
    datum = default_datum(GRID, 0.05, shear_amplitude=0.02)
    traj = run_nonlinear(NonlinearState.from_omega(datum), nu, 10.0, dt=0.01, samples=500)
    assert traj.max_step_increase <= 1e-10
    assert np.all(np.diff(traj.norm) <= 1e-12 * traj.norm[:-1])
    diss = np.trapezoid(traj.grad2, traj.times)
    ratio = (traj.norm[-1] ** 2 + 2 * nu * diss) / traj.norm[0] ** 2
    assert ratio == pytest.approx(1.0, abs=2e-3)


# --------------------------------------------------------------------------
# bootstrap quantity


def test_A_zero_for_zero_trajectory():
    traj = run_nonlinear(NonlinearState.from_omega(PerturbationState.zeros(GRID)), 1e-2, 1.0,
                         dt=0.1)
    assert np.all(compute_A(traj) == 0)


def test_A_monotone_and_homogeneous():
    nu = 1e-2
    a = run_nonlinear(NonlinearState.from_omega(default_datum(GRID, 1e-6)), nu, 5.0, dt=0.02,
                      nonlinear=False)
    b = run_nonlinear(NonlinearState.from_omega(default_datum(GRID, 2e-6)), nu, 5.0, dt=0.02,
                      nonlinear=False)
    A = compute_A(a)
    assert A[0] == 0 and np.all(np.diff(A) >= 0)
    np.testing.assert_allclose(compute_A(b), 2 * A, rtol=1e-10)


def test_threshold_amplitude_formula():
    nu = 1e-3
    expected = 0.01 / (1 + math.sqrt(math.log(1e3))) * 1e-2
    assert threshold_amplitude(0.01, nu) == pytest.approx(expected, rel=1e-12)


# --------------------------------------------------------------------------
# threshold experiments and checkpoints


def test_zero_datum_decays_trivially():
    rec, _ = threshold_experiment(1e-2, 0.0, grid=Grid(Ly=6.0, Ny=63, Kmax=2), T=5.0)
    assert rec.decayed


def test_small_datum_decays():
    nu = 1e-2
    rec, traj = threshold_experiment(nu, 0.01, grid=Grid(Ly=8.0, Ny=191, Kmax=4))
    assert rec.decayed and not rec.blowup
    assert rec.C1 <= 10 and rec.c1 >= 0.1 * rec.c_linear
    assert rec.monotone_ok and rec.energy_ok and rec.shear_ok
    assert rec.energy_identity_ratio == pytest.approx(1.0, abs=1e-3)


def test_checkpoint_round_trip(tmp_path, rng):
    state = NonlinearState.from_modes(_random_modes(rng, GRID), GRID, t=1.25, gauge="centered")
    path = save_checkpoint(tmp_path / "nu1.0e-3" / "step.0010", state, 1e-3, {"eps0": 0.01})
    assert path.name == "step.0010.bin"
    assert (tmp_path / "nu1.0e-3" / "step.0010.json").exists()
    loaded, side = load_checkpoint(path)
    np.testing.assert_array_equal(loaded.omega.modes, state.omega.modes)
    assert loaded.t == 1.25 and loaded.gauge == "centered"
    assert side["meta"]["eps0"] == 0.01
    assert side["layout"]["shape"] == [GRID.Kmax + 1, GRID.Ny]
    raw = np.fromfile(path, dtype="<f8")
    assert raw.size == 2 * (GRID.Kmax + 1) * GRID.Ny
    assert raw[0] == state.omega.modes[0, 0].real and raw[1] == state.omega.modes[0, 0].imag


def test_run_writes_checkpoints(tmp_path):
    state = NonlinearState.from_omega(default_datum(GRID, 1e-3))
    traj = run_nonlinear(state, 1e-2, 1.0, dt=0.1, checkpoint_dir=tmp_path, checkpoint_every=5,
                         meta={"tag": "x"})
    assert len(traj.checkpoints) == 2
    side = json.loads((tmp_path / "step00000010.json").read_text())
    assert side["meta"] == {"tag": "x"} and side["t"] == pytest.approx(1.0)
