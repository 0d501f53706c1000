import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poiseuille_lab.decay import (
    DecayFit,
    DecayRun,
    HalvingTime,
    _rates,
    crossover_time,
    decay_run,
    default_window,
    fit_decay,
    gaussian_datum,
    measure_halving_time,
    regress_scaling,
    semigroup_integrals,
    theoretical_halving_time,
)
from poiseuille_lab.discretization import Grid, ModeField, resolved_grid
from poiseuille_lab.errors import FitRejectedError, SeriesTooShortError
from poiseuille_lab.hypocoercivity import make_constants, velocity_bound
from poiseuille_lab.linear import ModeOperator, StepperConfig, default_dt, evolve

# --------------------------------------------------------------------------
# fits


def test_exact_exponential():
    t = np.linspace(0, 20, 201)
    fit = fit_decay(t, np.exp(-0.5 * t))
    assert fit.c_fit == pytest.approx(0.5, abs=1e-6)
    assert fit.C_fit == pytest.approx(1.0, rel=1e-9)
    assert fit.accepted


def test_constant_series():
    fit = fit_decay(np.linspace(0, 5, 11), np.full(11, 3.0))
    assert fit.c_fit == 0.0
    assert fit.C_fit == pytest.approx(3.0)


@given(c=st.floats(0.05, 5.0))
def test_perturbed_exponential(c):
    t = np.linspace(0, 10 / c, 400)
    fit = fit_decay(t, np.exp(-c * t) * (1 + 0.01 * np.sin(t)))
    assert fit.c_fit == pytest.approx(c, rel=0.01)


def test_window_restricts_fit():
    t = np.linspace(0, 10, 101)
    n = np.where(t < 5, np.exp(-0.1 * t), np.exp(-0.5 - 2 * (t - 5)))
    assert fit_decay(t, n, window=(6, 10)).c_fit == pytest.approx(2.0, rel=1e-9)
    assert fit_decay(t, n, window=(0, 4)).c_fit == pytest.approx(0.1, rel=1e-9)


def test_floor_truncates_window():
    t = np.linspace(0, 100, 1001)
    n = np.maximum(np.exp(-0.5 * t), 1e-20)
    fit = fit_decay(t, n)
    assert fit.truncated
    assert fit.c_fit == pytest.approx(0.5, rel=1e-9)
    assert fit.window[1] < 2 * math.log(1 / (1e2 * np.finfo(float).eps)) + 0.2


def test_too_short_series():
    with pytest.raises(SeriesTooShortError):
        fit_decay([0.0, 1.0], [1.0, 0.5])
    with pytest.raises(SeriesTooShortError):
        fit_decay(np.linspace(0, 10, 11), np.exp(-np.linspace(0, 10, 11)), window=(3.5, 4.5))


def test_fit_shape_check():
    with pytest.raises(ValueError):
        fit_decay([0, 1, 2], [1, 2])


# --------------------------------------------------------------------------
# halving


def test_theoretical_halving_time():
    c = make_constants(0.02)
    assert c.gamma == pytest.approx(2.56e-6)
    t0 = theoretical_halving_time(1e-3, 1, c)
    assert t0 == pytest.approx((2 / 2.56e-12) ** 0.25, rel=1e-12)
    assert t0 == pytest.approx(940.2, abs=0.05)


def test_halving_interpolation():
    t = np.linspace(0, 10, 11)
    n = 1.0 - 0.05 * t
    h = measure_halving_time(t, n)
    assert h.halved
    assert h.t_half == pytest.approx((1 - 2 ** -0.5) / 0.05, rel=1e-12)


def test_never_halved_marker():
    h = measure_halving_time(np.linspace(0, 1, 5), np.ones(5), nu=1e-3, k=1)
    assert isinstance(h, HalvingTime)
    assert not h.halved and h.t_half is None
    assert h.t0_theory == pytest.approx(940.2, abs=0.05)


def test_measured_halving_before_theory():
    nu, k = 1e-3, 1
    run = decay_run(nu, k)
    assert run.halving.halved
    assert run.halving.t_half <= run.halving.t0_theory


# --------------------------------------------------------------------------
# runs


def test_fitted_rate_in_bracket():
    nu = 1e-3
    run = decay_run(nu, 1)
    assert run.fit.accepted
    assert 0.3 * math.sqrt(nu) <= run.fit.c_fit <= 3 * math.sqrt(nu)


def test_fitted_rate_order_one_multiple():
    nu = 1e-3
    run = decay_run(nu, 1)
    ratio = run.fit.c_fit / math.sqrt(nu)
    assert 1.0 < ratio < 10.0


def test_rate_invariant_under_scaling_the_datum():
    nu, k = 1e-2, 1
    grid = resolved_grid(10.0, nu, k)
    op = ModeOperator(grid, k, nu)
    window = default_window(nu, k)
    fits = []
    for amp in (1.0, 10.0):
        g = gaussian_datum(grid, k, amplitude=amp)
        traj = evolve(op, g, StepperConfig(dt=default_dt(op, g.values), t_end=window[1],
                                           sample_every=4, keep_fields=False))
        fits.append(fit_decay(traj.times, traj.norms(), window, g_norm=traj.g_norm))
    assert fits[1].c_fit == pytest.approx(fits[0].c_fit, rel=1e-10)
    assert fits[1].C_fit == pytest.approx(10 * fits[0].C_fit, rel=1e-10)


def test_heat_only_rate():
    nu = 1e-2
    run = decay_run(nu, 1, heat_only=True)
    assert run.fit.accepted
    # the Gaussian heat solution decays slower than the top Fourier rate nu k^2
    assert 0.5 * nu < run.fit.c_fit < 2 * nu


def test_velocity_bound_on_run():
    nu, k = 1e-3, 2
    grid = resolved_grid(10.0, nu, k)
    op = ModeOperator(grid, k, nu)
    g = gaussian_datum(grid, k)
    traj = evolve(op, g, StepperConfig(dt=default_dt(op, g.values), t_end=200.0,
                                       sample_every=10, keep_fields=False))
    bound = traj.g_norm ** 2 * velocity_bound(traj.times, nu, k, make_constants(0.02))
    assert np.all(traj.quad["u2"] <= bound * (1 + 1e-10))


# --------------------------------------------------------------------------
# regressions


def test_regression_recovers_power_law():
    x = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    res = regress_scaling(x, 3 * x ** 0.5, expected=0.5)
    assert res.exponent == pytest.approx(0.5, abs=1e-12)
    assert res.within(1e-9)


def test_regression_min_points():
    with pytest.raises(SeriesTooShortError):
        regress_scaling([1e-2, 1e-3, 1e-4], [1, 2, 3])
    with pytest.raises(ValueError):
        regress_scaling([1, 2, 3, 4], [1, -2, 3, 4])


def test_rejected_fit_names_cell():
    bad = DecayFit(0.1, 1.0, 0.5, (0, 1), 0.0, 10)
    run = DecayRun(1e-4, 2, False, bad, HalvingTime(None, False, None), np.zeros(1), np.zeros(1))
    with pytest.raises(FitRejectedError) as info:
        _rates([run])
    assert "nu=0.0001" in str(info.value) and "k=2" in str(info.value)


# --------------------------------------------------------------------------
# semigroup integrals


def test_semigroup_integrals_single_band():
    nu = 1e-2
    grid = resolved_grid(10.0, nu, 1)
    g = gaussian_datum(grid, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = semigroup_integrals(g, nu, T=10 / math.sqrt(nu))
    assert res.saturated
    assert res.grad_bound_ok
    # the bound is the energy identity with the final energy dropped
    assert res.grad_integral == pytest.approx(res.grad_bound, rel=1e-2)
    assert res.dx_integral > 0 and res.linf_integral > 0


def test_semigroup_integrals_unsaturated_advisory():
    grid = Grid(Ly=6.0, Ny=127)
    with pytest.warns(RuntimeWarning, match="extend"):
        res = semigroup_integrals(gaussian_datum(grid, 1), 1e-3, T=5.0)
    assert not res.saturated


def test_semigroup_integrals_reject_mean_band():
    grid = Grid(Ly=6.0, Ny=63)
    with pytest.raises(ValueError):
        semigroup_integrals(ModeField(0, np.exp(-grid.y ** 2), grid), 1e-2)


def test_crossover_of_known_profile():
    # slope of t^{-1/2} exp(-t/tc) is -1/2 - t/tc, reaching -1 at tc/2
    t = np.linspace(0.01, 200, 20001)
    tc = 40.0
    assert crossover_time(t, t ** -0.5 * np.exp(-t / tc)) == pytest.approx(tc / 2, rel=1e-2)
    assert crossover_time(t, t ** -0.5) is None
