"""Decay rates, halving times, scaling regressions and semigroup integrals.

Rates are fitted on ``log ||w(t)||`` over a window that skips the
initial plateau. Scaling exponents come from log-log regressions across
viscosities or wavenumbers. The integral estimates are measured by
evolving single-band data and combining the band series.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .discretization import Grid, ModeField, l2_norm, resolved_grid
from .errors import FitRejectedError, SeriesTooShortError
from .hypocoercivity import HypoConstants, make_constants
from .linear import ModeOperator, StepperConfig, default_dt, evolve, natural_time

MIN_R2 = 0.98
FLOOR_FACTOR = 1e2


# --------------------------------------------------------------------------
# fits

@dataclass
class DecayFit:
    """Least-squares fit ``||w(t)|| ~ C_fit exp(-c_fit t)`` over ``window``.

    ``window`` is the interval actually used, after any truncation at the
    round-off floor. ``accepted`` is false when ``r2 < 0.98``.
    """

    c_fit: float
    C_fit: float
    r2: float
    window: tuple
    stderr: float
    n_points: int
    truncated: bool = False
    t_half: float | None = None

    @property
    def accepted(self) -> bool:
        return self.r2 >= MIN_R2


def fit_decay(times, norms, window=None, g_norm: float | None = None,
              floor_factor: float = FLOOR_FACTOR) -> DecayFit:
    """Fit an exponential rate to a norm series.

    Parameters
    ----------
    times, norms : array_like
        Sample times and positive norms.
    window : (t_min, t_max), optional
        Fit interval; the whole series when omitted.
    g_norm : float, optional
        Reference norm for the floor test (default ``norms[0]``).
    floor_factor : float
        Samples below ``floor_factor * eps * g_norm`` are dropped.

    Raises
    ------
    SeriesTooShortError
        Fewer than three usable samples in the window.
    """
    t = np.asarray(times, dtype=float)
    n = np.asarray(norms, dtype=float)
    if t.shape != n.shape or t.ndim != 1:
        raise ValueError("times and norms must be 1-D arrays of equal length")
    ref = float(n[0]) if g_norm is None else float(g_norm)
    lo, hi = (t[0], t[-1]) if window is None else (float(window[0]), float(window[1]))
    sel = (t >= lo - 1e-12 * max(abs(lo), 1.0)) & (t <= hi + 1e-12 * max(abs(hi), 1.0))
    floor = floor_factor * np.finfo(float).eps * ref
    usable = sel & (n > floor)
    truncated = bool(np.any(sel & ~usable))
    if truncated:
        # keep the contiguous head of the window above the floor
        idx = np.nonzero(sel)[0]
        below = idx[n[idx] <= floor]
        usable = sel & (np.arange(t.size) < below[0])
    if usable.sum() < 3:
        raise SeriesTooShortError(
            f"only {int(usable.sum())} samples above the floor in window [{lo:g}, {hi:g}]")
    tt, ln = t[usable], np.log(n[usable])
    if np.ptp(ln) == 0.0:
        slope, intercept, r2, se = 0.0, float(ln[0]), 1.0, 0.0
    else:
        res = scipy.stats.linregress(tt, ln)
        slope, intercept, r2, se = res.slope, res.intercept, res.rvalue ** 2, res.stderr
    return DecayFit(c_fit=float(-slope), C_fit=float(math.exp(intercept)), r2=float(r2),
                    window=(float(tt[0]), float(tt[-1])), stderr=float(se),
                    n_points=int(usable.sum()), truncated=truncated)


@dataclass
class HalvingTime:
    """First time the norm drops to ``1/sqrt(2)`` of its initial value.

    ``t_half`` is None (and ``halved`` false) when the series never gets
    there. ``t0_theory`` is the time at which the algebraic envelope
    guarantees halving of the squared norm.
    """

    t_half: float | None
    halved: bool
    t0_theory: float | None


def theoretical_halving_time(nu: float, k: int, c: HypoConstants) -> float:
    """``(2 / (gamma nu^2 k^2))^{1/4}``."""
    return (2.0 / (c.gamma * nu ** 2 * k ** 2)) ** 0.25


def measure_halving_time(times, norms, nu: float | None = None, k: int | None = None,
                         c: HypoConstants | None = None) -> HalvingTime:
    """Linear interpolation of the first crossing of ``||g|| / sqrt(2)``."""
    t = np.asarray(times, dtype=float)
    n = np.asarray(norms, dtype=float)
    t0 = None
    if nu is not None and k:
        t0 = theoretical_halving_time(nu, k, c if c is not None else make_constants(0.02))
    if n.size == 0:
        return HalvingTime(None, False, t0)
    target = n[0] / math.sqrt(2.0)
    below = np.nonzero(n <= target)[0]
    if below.size == 0 or n[0] == 0.0:
        return HalvingTime(None, False, t0)
    i = int(below[0])
    if i == 0:
        return HalvingTime(float(t[0]), True, t0)
    t1, t2, n1, n2 = t[i - 1], t[i], n[i - 1], n[i]
    th = t1 + (n1 - target) / (n1 - n2) * (t2 - t1) if n1 != n2 else t2
    return HalvingTime(float(th), True, t0)


# --------------------------------------------------------------------------
# single decay runs

def gaussian_datum(grid: Grid, k: int, width: float = 1.0, amplitude: float = 1.0) -> ModeField:
    """``amplitude * exp(-(y/width)^2)`` on band ``k``."""
    return ModeField(k, amplitude * np.exp(-(grid.y / width) ** 2) + 0j, grid)


def default_window(nu: float, k: int, heat_only: bool = False) -> tuple:
    """Fit window in units of the natural decay time.

    With shear the window is ``[2, 5] (nu k)^{-1/2}``; for the heat-only
    control it is ``[1, 5] / (nu (k^2 + 1))``.
    """
    if heat_only:
        tau = 1.0 / (nu * (k * k + 1))
        return (1.0 * tau, 5.0 * tau)
    tau = 1.0 / math.sqrt(nu * k)
    return (2.0 * tau, 5.0 * tau)


def theory_window(nu: float, k: int, c: HypoConstants) -> tuple:
    """``[t0, 5 t0]`` with ``t0`` the theoretical halving time."""
    t0 = theoretical_halving_time(nu, k, c)
    return (t0, 5.0 * t0)


@dataclass
class DecayRun:
    """Result of one linear decay run."""

    nu: float
    k: int
    heat_only: bool
    fit: DecayFit
    halving: HalvingTime
    times: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    Ny: int = 0
    Ly: float = 0.0
    dt: float = 0.0

    def row(self) -> dict:
        return {"nu": self.nu, "k": self.k, "heat_only": self.heat_only,
                "c_fit": self.fit.c_fit, "C_fit": self.fit.C_fit,
                "t_half": self.halving.t_half, "t0_theory": self.halving.t0_theory,
                "r2": self.fit.r2}


def decay_run(nu: float, k: int, *, Ly: float = 10.0, Ny: int | None = None,
              width: float = 1.0, heat_only: bool = False, window=None,
              samples: int = 400, eps: float = 0.02, backend: str | None = None) -> DecayRun:
    """Evolve a Gaussian band datum and fit its decay rate.

    The grid resolves the shear boundary-layer width ``(nu/k)^{1/4}``
    unless ``Ny`` is given. The run ends at the upper edge of the window.
    """
    if heat_only:
        grid = Grid(Ly=Ly, Ny=Ny or 255, Kmax=max(k, 1))
        op = ModeOperator.heat_only(grid, k, nu)
    else:
        grid = resolved_grid(Ly, nu, k) if Ny is None else Grid(Ly=Ly, Ny=Ny, Kmax=max(k, 1))
        op = ModeOperator(grid, k, nu)
    if window is None:
        window = default_window(nu, k, heat_only)
    g = gaussian_datum(grid, k, width)
    dt = default_dt(op, g.values)
    t_end = float(window[1])
    every = max(1, int(t_end / dt / samples))
    traj = evolve(op, g, StepperConfig(dt=dt, t_end=t_end, sample_every=every,
                                       keep_fields=False), backend=backend)
    norms = traj.norms()
    fit = fit_decay(traj.times, norms, window, g_norm=traj.g_norm)
    halving = measure_halving_time(traj.times, norms, nu, k if not heat_only else None,
                                   make_constants(eps))
    fit.t_half = halving.t_half
    return DecayRun(nu, k, heat_only, fit, halving, traj.times, norms, grid.Ny, grid.Ly, traj.dt)


# --------------------------------------------------------------------------
# scaling regressions

@dataclass
class ScalingResult:
    """Slope of ``log(rate)`` against ``log(variable)``."""

    variable: str
    exponent: float
    stderr: float
    intercept: float
    points: list
    expected: float | None = None

    def within(self, tol: float) -> bool:
        return self.expected is not None and abs(self.exponent - self.expected) <= tol

    def to_dict(self) -> dict:
        return {"variable": self.variable, "exponent": self.exponent, "stderr": self.stderr,
                "intercept": self.intercept, "expected": self.expected,
                "points": [list(p) for p in self.points]}


def regress_scaling(xs, values, variable: str = "nu", expected: float | None = None,
                    min_points: int = 4) -> ScalingResult:
    """Power-law fit ``value ~ C x^p``; needs at least ``min_points`` points."""
    x = np.asarray(xs, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.size < min_points:
        raise SeriesTooShortError(f"scaling regression needs >= {min_points} points, got {x.size}")
    if np.any(x <= 0) or np.any(v <= 0):
        raise ValueError("scaling regression needs positive values")
    res = scipy.stats.linregress(np.log(x), np.log(v))
    return ScalingResult(variable, float(res.slope), float(res.stderr), float(res.intercept),
                         list(zip(x.tolist(), v.tolist())), expected)


def _run_cell(args):
    nu, k, kw = args
    return decay_run(nu, k, **kw)


def parallel_map(fn, items, threads: int = 1):
    """Order-preserving map, in worker processes when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class ScalingSweep:
    """Rate-versus-viscosity and rate-versus-wavenumber regressions."""

    nu_result: ScalingResult | None
    k_result: ScalingResult | None
    heat_result: ScalingResult | None
    runs: list = field(repr=False)


def _rates(runs):
    for r in runs:
        if not r.fit.accepted:
            raise FitRejectedError(
                f"decay fit rejected at nu={r.nu:g}, k={r.k} (r2={r.fit.r2:.4f})", r.nu, r.k)
    return [r.fit.c_fit for r in runs]


def scaling_sweep(nu_list=(1e-2, 1e-3, 1e-4, 1e-5), k_list=(1, 2, 4, 8), *, k_fixed: int = 1,
                  nu_fixed: float = 1e-3, heat_control: bool = True, threads: int = 1,
                  **run_kw) -> ScalingSweep:
    """Fit decay rates across viscosities and wavenumbers.

    Parameters
    ----------
    nu_list : sequence of float
        Viscosities for the rate-vs-``nu`` regression at ``k_fixed``.
    k_list : sequence of int
        Wavenumbers for the rate-vs-``k`` regression at ``nu_fixed``.
    heat_control : bool
        Repeat the viscosity sweep with shear and coupling removed.
    threads : int
        Worker processes for the independent runs.
    run_kw
        Passed to :func:`decay_run`.

    Raises
    ------
    FitRejectedError
        Some fit had ``r2 < 0.98``; carries the offending ``(nu, k)``.
    """
    nus = sorted(set(float(v) for v in nu_list), reverse=True)
    ks = sorted(set(int(v) for v in k_list))
    cells = [(nu, k_fixed, dict(run_kw)) for nu in nus]
    cells += [(nu_fixed, k, dict(run_kw)) for k in ks]
    if heat_control:
        cells += [(nu, k_fixed, dict(run_kw, heat_only=True)) for nu in nus]
    runs = parallel_map(_run_cell, cells, threads)
    n1, n2 = len(nus), len(ks)
    nu_runs, k_runs, heat_runs = runs[:n1], runs[n1:n1 + n2], runs[n1 + n2:]
    nu_res = regress_scaling(nus, _rates(nu_runs), "nu", 0.5) if n1 else None
    k_res = regress_scaling(ks, _rates(k_runs), "k", 0.5) if n2 else None
    heat_res = regress_scaling(nus, _rates(heat_runs), "nu", 1.0) if heat_runs else None
    return ScalingSweep(nu_res, k_res, heat_res, runs)


# --------------------------------------------------------------------------
# semigroup integrals

def band_scale(nu: float, k: int) -> float:
    """Width ``(nu/k)^{1/4}`` on which shear and diffusion balance near ``y = 0``."""
    return (nu / k) ** 0.25


def band_half_width(nu: float, k: int) -> float:
    """Truncation half-width used for band ``k`` in the integral runs."""
    return min(10.0, max(2.0, 20.0 / k, 30.0 * band_scale(nu, k)))


@dataclass
class BandSeries:
    """Integrand series of one normalized single-band evolution.

    ``grad2`` is ``||grad w||^2``, ``dx`` is ``||d_x w||`` and ``linf`` is
    the L-infinity norm of the velocity ``grad^perp Delta^{-1} w`` of the
    real field carried by the band, all for ``||g|| = 1``.
    ``grad_integral`` is ``int ||grad w||^2 dt`` accumulated at every time
    step with the quadrature of the scheme.
    """

    nu: float
    k: int
    width: float
    times: np.ndarray = field(repr=False)
    grad2: np.ndarray = field(repr=False)
    dx: np.ndarray = field(repr=False)
    linf: np.ndarray = field(repr=False)
    grad_integral: float = 0.0
    final_ratio: float = 0.0
    Ny: int = 0
    Ly: float = 0.0


def _grad_integral(traj) -> float:
    """Step-accumulated dissipation integral, trapezoid on samples as fallback."""
    d = traj.dissipation
    if d is not None and d.size and np.isfinite(d[-1]):
        return float(d[-1])
    return float(np.trapezoid(traj.quad["grad2"], traj.times))


def _series_from_traj(traj, nu, k, width):
    q = traj.quad
    s = 1.0 / traj.g_norm
    linf = 2.0 * q["linf_gradpsi"] if k else q["linf_gradpsi"]
    final = math.sqrt(q["norm2"][-1]) * s
    return BandSeries(nu, k, width, traj.times, q["grad2"] * s * s, np.sqrt(q["dx2"]) * s,
                      linf * s, _grad_integral(traj) * s * s, final, traj.op.grid.Ny,
                      traj.op.grid.Ly)


def band_series(nu: float, k: int, width: float = 1.0, *, stop_ratio: float = 1e-6,
                horizon: float = 60.0, samples_per_tau: int = 50,
                backend: str | None = None) -> BandSeries:
    """Evolve ``exp(-(y / (width (nu/k)^{1/4}))^2)`` on band ``k`` until it has decayed.

    The run stops once the norm falls below ``stop_ratio`` times its
    initial value, or at ``horizon`` natural decay times.
    """
    sigma = width * band_scale(nu, k)
    grid = resolved_grid(band_half_width(nu, k), nu, k)
    op = ModeOperator(grid, k, nu)
    g = gaussian_datum(grid, k, sigma)
    g = g * (1.0 / l2_norm(g))
    tau = natural_time(op)
    dt = default_dt(op, g.values)
    every = max(1, int(tau / samples_per_tau / dt))
    traj = evolve(op, g, StepperConfig(dt=dt, t_end=horizon * tau, sample_every=every,
                                       keep_fields=False, stop_ratio=stop_ratio),
                  backend=backend)
    return _series_from_traj(traj, nu, k, width)


def _tail_fraction(t, f, frac=0.1):
    total = np.trapezoid(f, t)
    if total <= 0:
        return 0.0
    t_cut = t[0] + (1 - frac) * (t[-1] - t[0])
    sel = t >= t_cut
    if sel.sum() < 2:
        return 0.0
    return float(np.trapezoid(f[sel], t[sel]) / total)


@dataclass
class SemigroupIntegrals:
    """The three measured integrals for one datum.

    ``grad_bound`` is ``||g||^2 / (2 nu)``; ``saturated`` is false when the
    last tenth of the time span still carries more than 1% of any integral.
    """

    nu: float
    grad_integral: float
    dx_integral: float
    linf_integral: float
    grad_bound: float
    g_norm: float
    T: float
    tail_fractions: tuple
    saturated: bool

    @property
    def grad_bound_ok(self) -> bool:
        return self.grad_integral <= self.grad_bound

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["tail_fractions"] = list(self.tail_fractions)
        d["grad_bound_ok"] = self.grad_bound_ok
        return d


def semigroup_integrals(g, nu: float, T: float | None = None, dt: float | None = None,
                        samples_per_tau: int = 50, backend: str | None = None) -> SemigroupIntegrals:
    """Measure the three time integrals of ``exp(L t) g``.

    Parameters
    ----------
    g : ModeField or sequence of ModeField
        Datum with no ``k = 0`` content, one field per band.
    nu : float
    T : float, optional
        Final time; defaults to ``5 nu^{-1/2}``.
    dt : float, optional
        Step size; by default :func:`default_dt` per band.

    Returns
    -------
    SemigroupIntegrals
        (i) ``int ||grad w||^2``, (ii) ``int ||d_x w||`` and (iii)
        ``int ||grad Delta^{-1} w||_inf^2``; band L-infinity norms are
        summed (Minkowski) and band L2 norms add in squares. Integral (i)
        is accumulated at every time step with the scheme's own
        quadrature; (ii) and (iii) use the trapezoid rule on the samples.
    """
    bands = [g] if isinstance(g, ModeField) else list(g)
    if any(b.k == 0 for b in bands):
        raise ValueError("the datum must have zero x-average (no k = 0 band)")
    T = 5.0 / math.sqrt(nu) if T is None else float(T)
    g_norm2 = sum(l2_norm(b) ** 2 for b in bands)
    series = []
    grad_total = 0.0
    for b in bands:
        op = ModeOperator(b.grid, b.k, nu)
        step = default_dt(op, b.values) if dt is None else dt
        every = max(1, int(natural_time(op) / samples_per_tau / step))
        traj = evolve(op, b, StepperConfig(dt=step, t_end=T, sample_every=every,
                                           keep_fields=False), backend=backend)
        q = traj.quad
        series.append((traj.times, q["grad2"], q["dx2"], 2.0 * q["linf_gradpsi"]))
        grad_total += _grad_integral(traj)
    t = np.unique(np.concatenate([s[0] for s in series]))
    grad2 = sum(np.interp(t, s[0], s[1]) for s in series)
    dx = np.sqrt(sum(np.interp(t, s[0], s[2]) for s in series))
    linf2 = sum(np.interp(t, s[0], s[3]) for s in series) ** 2
    tails = tuple(_tail_fraction(t, f) for f in (grad2, dx, linf2))
    saturated = max(tails) <= 0.01
    if not saturated:
        warnings.warn(f"integrals not saturated at T={T:g} (tail fractions {tails}); "
                      "extend the final time", RuntimeWarning, stacklevel=2)
    return SemigroupIntegrals(nu, grad_total, float(np.trapezoid(dx, t)),
                              float(np.trapezoid(linf2, t)), 0.5 * g_norm2 / nu,
                              math.sqrt(g_norm2), T, tails, saturated)


def _common_grid(series: list, spacing: float):
    t_end = max(s.times[-1] for s in series)
    n = int(math.ceil(t_end / spacing)) + 1
    return np.linspace(0.0, t_end, n)


def _resample(s: BandSeries, t, values):
    # beyond the stop time the band has decayed below the stop ratio
    return np.interp(t, s.times, values, right=0.0)


@dataclass
class IntegralScaling:
    """Worst-case integrals at one viscosity.

    ``grad_max`` and ``dx_sup`` are suprema over the single-band data
    tried; ``linf_gram`` is the largest eigenvalue of the Gram matrix of
    the band L-infinity profiles, the supremum over unit data spread
    across bands of the Minkowski bound. ``crossover`` is where the
    envelope of ``||d_x w||`` steepens past ``t^{-1}``.
    """

    nu: float
    grad_max: float
    grad_bound_ok: bool
    dx_sup: float
    dx_argmax: tuple
    linf_gram: float
    linf_single_max: float
    crossover: float | None
    n_bands_dx: int
    n_bands_linf: int
    min_margin_grad: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["dx_argmax"] = list(self.dx_argmax)
        return d


def crossover_time(t, f, slope: float = -1.0, t_min: float | None = None) -> float | None:
    """First time at which the log-log slope of ``f`` falls to ``slope``.

    The slope is the centered difference of ``log f`` against ``log t``
    on a geometric resampling of the series (32 points per decade).
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    pos = (t > 0) & (f > 0)
    t, f = t[pos], f[pos]
    if t.size < 4:
        return None
    lo = t[0] if t_min is None else max(t_min, t[0])
    n = max(4, int(32 * math.log10(t[-1] / lo)))
    tg = np.geomspace(lo, t[-1], n)
    lf = np.log(np.interp(tg, t, f))
    s = np.gradient(lf, np.log(tg))
    hit = np.nonzero(s <= slope)[0]
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return float(tg[0])
    # interpolate the crossing between the two resampled points
    s1, s2 = s[i - 1], s[i]
    w = (s1 - slope) / (s1 - s2) if s1 != s2 else 1.0
    return float(math.exp(math.log(tg[i - 1]) + w * (math.log(tg[i]) - math.log(tg[i - 1]))))


def dx_wavenumbers(nu: float, factor: float = 6.0, per_octave: int = 2) -> list:
    """Geometric set of bands up to ``factor nu^{-1/3}`` for the ``d_x`` supremum."""
    k_max = max(2, int(math.ceil(factor * nu ** (-1.0 / 3.0))))
    n = int(per_octave * math.log2(k_max)) + 1
    return sorted(set(int(round(v)) for v in np.geomspace(1, k_max, n)))


def linf_wavenumbers(nu: float, factor: float = 2.5) -> list:
    """All bands up to ``factor nu^{-1/3}`` for the Gram matrix."""
    return list(range(1, max(2, int(math.ceil(factor * nu ** (-1.0 / 3.0)))) + 1))


def _series_cell(args):
    nu, k, width, kw = args
    return band_series(nu, k, width, **kw)


def integral_scaling(nu: float, *, widths=(1.0, 2.0), dx_factor: float = 6.0,
                     linf_factor: float = 2.5, threads: int = 1, **series_kw) -> IntegralScaling:
    """Worst-case semigroup integrals at one viscosity (see :class:`IntegralScaling`)."""
    k_dx = dx_wavenumbers(nu, dx_factor)
    k_linf = linf_wavenumbers(nu, linf_factor)
    cells = {(k, float(w)) for k in k_dx for w in widths}
    cells |= {(k, float(widths[0])) for k in k_linf}
    cells = sorted(cells)
    out = parallel_map(_series_cell, [(nu, k, w, series_kw) for k, w in cells], threads)
    by_cell = dict(zip(cells, out))
    grads = {c: s.grad_integral for c, s in by_cell.items()}
    grad_max = max(grads.values())
    margin = min(0.5 / nu - v for v in grads.values()) * nu * 2.0
    dx_int = {c: float(np.trapezoid(by_cell[c].dx, by_cell[c].times))
              for c in by_cell if c[0] in k_dx}
    arg = max(dx_int, key=dx_int.get)
    lin = [by_cell[(k, float(widths[0]))] for k in k_linf]
    tau_min = min(1.0 / math.sqrt(nu * s.k) for s in lin)
    t = _common_grid(lin, tau_min / 40.0)
    X = np.array([_resample(s, t, s.linf) for s in lin])
    # trapezoid weights on the uniform grid
    wts = np.full(t.size, t[1] - t[0])
    wts[0] = wts[-1] = 0.5 * (t[1] - t[0])
    gram = (X * wts) @ X.T
    lam = float(np.linalg.eigvalsh(gram)[-1])
    single = float(np.max(np.diag(gram)))
    dx_series = [by_cell[c] for c in by_cell if c[0] in k_dx]
    td = _common_grid(dx_series, min(s.times[1] - s.times[0] for s in dx_series))
    env = np.max([_resample(s, td, s.dx) for s in dx_series], axis=0)
    cross = crossover_time(td, env, -1.0, t_min=td[1])
    return IntegralScaling(nu, grad_max, grad_max <= 0.5 / nu, dx_int[arg], arg, lam, single,
                           cross, len(k_dx), len(k_linf), margin)


@dataclass
class IntegralSweep:
    """Scaling of the worst-case integrals across viscosities."""

    per_nu: list
    dx_result: ScalingResult
    linf_result: ScalingResult
    linf_raw_result: ScalingResult

    @property
    def grad_bound_ok(self) -> bool:
        return all(p.grad_bound_ok for p in self.per_nu)


def integral_sweep(nu_list=(1e-2, 1e-3, 1e-4, 1e-5), **kw) -> IntegralSweep:
    """Run :func:`integral_scaling` per viscosity and regress against ``nu``.

    The L-infinity integral is regressed after division by
    ``1 + |log nu|`` (``linf_result``) and as measured (``linf_raw_result``).
    """
    nus = sorted(set(float(v) for v in nu_list), reverse=True)
    per = [integral_scaling(nu, **kw) for nu in nus]
    dx = regress_scaling(nus, [p.dx_sup for p in per], "nu", -2.0 / 3.0)
    lin = regress_scaling(nus, [p.linf_gram / (1.0 + abs(math.log(p.nu))) for p in per],
                          "nu", -1.0 / 3.0)
    raw = regress_scaling(nus, [p.linf_gram for p in per], "nu", None)
    return IntegralSweep(per, dx, lin, raw)


__all__ = [
    "BandSeries", "DecayFit", "DecayRun", "HalvingTime", "IntegralScaling", "IntegralSweep",
    "ScalingResult", "ScalingSweep", "SemigroupIntegrals", "band_half_width", "band_scale",
    "band_series", "crossover_time", "decay_run", "default_window",
    "dx_wavenumbers", "fit_decay", "gaussian_datum", "integral_scaling", "integral_sweep",
    "linf_wavenumbers", "measure_halving_time", "parallel_map", "regress_scaling",
    "scaling_sweep", "semigroup_integrals", "theoretical_halving_time", "theory_window",
]
