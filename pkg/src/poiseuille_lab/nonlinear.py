"""Full perturbation dynamics around Poiseuille flow.

The vorticity perturbation is stored as x-bands ``k = 0..Kmax``. Each
band follows its linearized operator (shear and nonlocal coupling for
``k >= 1``, pure diffusion for ``k = 0``) plus the transport term
``-u . grad w``. The linear part is Crank-Nicolson with the coupling
implicit; the transport term is explicit second-order Adams-Bashforth.
Products are formed on a physical x-grid of at least ``3 Kmax + 1``
points, so the retained bands are free of aliasing.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from . import kernels
from .decay import default_window, fit_decay, measure_halving_time
from .discretization import (
    Grid,
    PerturbationState,
    band_weight,
    d_center,
    linf_gradpsi_array,
    poisson_solve_array,
)
from .errors import CFLViolationError, ConfigError, NumericalBreakdownError
from .linear import (
    ModeOperator,
    StepperConfig,
    _be_factor,
    _cn_factor,
    _march,
    default_dt,
    evolve,
)

GAUGES = ("left", "centered")
BLOWUP_FACTOR = 1e3


# --------------------------------------------------------------------------
# derived fields

def shear_velocity(omega_s: np.ndarray, grid: Grid, gauge: str = "left") -> np.ndarray:
    """Horizontal velocity of the x-averaged flow, ``d_y u_s = -omega_s``.

    ``gauge="left"`` fixes ``u_s(-Ly) = 0``; ``"centered"`` subtracts the
    mean of the two end values instead, so ``u_s(-Ly) = -u_s(Ly)``.
    """
    if gauge not in GAUGES:
        raise ConfigError(f"unknown gauge {gauge!r}; choose from {GAUGES}", "nonlinear.gauge")
    w = np.real(omega_s)
    ext = np.concatenate([[0.0], w, [0.0]])
    # cumulative trapezoid from y = -Ly, including the Dirichlet end values
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ext[1:] + ext[:-1]) * grid.dy)])
    u = -cum
    if gauge == "centered":
        u = u - 0.5 * (u[0] + u[-1])
    return u[1:-1]


def stream_functions(modes: np.ndarray, grid: Grid) -> np.ndarray:
    """``psi_k = Delta_k^{-1} w_k`` for ``k >= 1``; row 0 is zero."""
    psi = np.zeros_like(modes)
    for k in range(1, modes.shape[0]):
        psi[k] = poisson_solve_array(modes[k], grid.dy, k)
    return psi


@dataclass
class NonlinearState:
    """Perturbation with its stream functions and shear velocity.

    Parameters
    ----------
    omega : PerturbationState
    psi : ndarray, shape (Kmax+1, Ny)
        Stream functions of the bands ``k >= 1`` (row 0 unused, zero).
    u_s : ndarray, shape (Ny,)
        Velocity of the x-averaged flow.
    gauge : str
        Additive-constant convention of ``u_s``.
    """

    omega: PerturbationState
    psi: np.ndarray = field(repr=False)
    u_s: np.ndarray = field(repr=False)
    gauge: str = "left"

    @property
    def t(self) -> float:
        return self.omega.time

    @property
    def grid(self) -> Grid:
        return self.omega.grid

    @classmethod
    def from_omega(cls, omega: PerturbationState, gauge: str = "left") -> "NonlinearState":
        psi = stream_functions(omega.modes, omega.grid)
        return cls(omega, psi, shear_velocity(omega.modes[0], omega.grid, gauge), gauge)

    @classmethod
    def from_modes(cls, modes: np.ndarray, grid: Grid, t: float = 0.0,
                   gauge: str = "left") -> "NonlinearState":
        return cls.from_omega(PerturbationState(np.array(modes, dtype=complex), grid, t), gauge)


def default_datum(grid: Grid, amplitude: float, shear_amplitude: float = 0.0) -> PerturbationState:
    """``cos(x) e^{-y^2}`` plus ``shear_amplitude * y e^{-y^2}``, then scaled.

    The non-shear part is rescaled so that its norm equals ``amplitude``;
    the shear part is added with the given coefficient.
    """
    modes = np.zeros((grid.Kmax + 1, grid.Ny), dtype=complex)
    g = np.exp(-grid.y ** 2)
    modes[1] = 0.5 * g
    base = PerturbationState(modes, grid)
    n = base.norm()
    modes = modes * (amplitude / n if n > 0 else 0.0)
    modes[0] = shear_amplitude * grid.y * g
    return PerturbationState(modes, grid)


def band_norms(modes: np.ndarray, grid: Grid) -> np.ndarray:
    """L2 norm of each band (with the band weights)."""
    w = np.array([band_weight(k) for k in range(modes.shape[0])]) * grid.dy
    return np.sqrt(w * np.sum(modes.real ** 2 + modes.imag ** 2, axis=-1))


# --------------------------------------------------------------------------
# transport term

def min_nx(Kmax: int) -> int:
    """Smallest x-grid free of aliasing for quadratic products."""
    return 3 * Kmax + 1


def _transport(modes, psi, u_s, grid: Grid, nx: int):
    """Skew-symmetric ``u . grad w`` per band and the velocity maxima."""
    K = modes.shape[0] - 1
    if nx < min_nx(K):
        raise ConfigError(f"nx={nx} aliases products of {K} bands; need nx >= {min_nx(K)}",
                          "grid.nx")
    dy = grid.dy
    ks = np.arange(K + 1)[:, None]
    u1 = -d_center(psi, dy)
    u1[0] = u_s
    # batch the five inverse transforms with x as the contiguous axis
    spec = np.zeros((5, grid.Ny, nx // 2 + 1), dtype=complex)
    for i, f in enumerate((u1, 1j * ks * psi, modes, 1j * ks * modes, d_center(modes, dy))):
        spec[i, :, : K + 1] = f.T
    spec[:, :, 0] = spec[:, :, 0].real
    U1, U2, W, WX, WY = scipy.fft.irfft(spec, n=nx, axis=-1) * nx
    prod = np.stack([U1 * WX + U2 * WY, U1 * W, U2 * W])
    back = scipy.fft.rfft(prod, axis=-1)[:, :, : K + 1] / nx
    adv, f1, f2 = (np.ascontiguousarray(b.T) for b in back)
    div = 1j * ks * f1 + d_center(f2, dy)
    out = 0.5 * (adv + div)
    out[0] = out[0].real
    return out, float(np.max(np.abs(U1))), float(np.max(np.abs(U2)))


def nonlinear_term(state: NonlinearState, nx: int | None = None) -> np.ndarray:
    """Band profiles of ``u . grad w`` (the equation carries ``-`` this).

    ``u = (u_s - d_y psi, d_x psi)``; the product is evaluated in the
    skew-symmetric form ``(u . grad w + div(u w)) / 2``, which conserves
    ``||w||^2`` exactly for the discretely divergence-free ``u``.
    """
    grid = state.grid
    nx = 4 * grid.Kmax if nx is None else nx
    out, _, _ = _transport(state.omega.modes, state.psi, state.u_s, grid, nx)
    return out


def cfl_dt(grid: Grid, nx: int, u1_max: float, u2_max: float, cfl: float = 0.5) -> float:
    """Explicit transport limit ``cfl * min(dx / max|u_1|, dy / max|u_2|)``.

    The Poiseuille profile ``y^2`` is treated implicitly and is left out.
    """
    dx = 2.0 * math.pi / nx
    lim = math.inf
    if u1_max > 0:
        lim = min(lim, dx / u1_max)
    if u2_max > 0:
        lim = min(lim, grid.dy / u2_max)
    return cfl * lim


# --------------------------------------------------------------------------
# time stepping

class NonlinearSolver:
    """Advance the perturbation with fixed ``dt``.

    Parameters
    ----------
    grid : Grid
    nu : float
    dt : float
    nx : int, optional
        Physical x-grid (default ``4 Kmax``; must be ``>= 3 Kmax + 1``).
    nonlinear : bool
        Include the transport term.
    startup : int
        Number of initial steps done as two backward Euler half steps,
        as in the linear solver.
    gauge : str
        Convention for the additive constant of ``u_s``.
    cfl : float
        Safety factor of the transport limit.
    """

    def __init__(self, grid: Grid, nu: float, dt: float, nx: int | None = None,
                 nonlinear: bool = True, startup: int = 2, gauge: str = "left",
                 cfl: float = 0.5, backend: str | None = None):
        self.grid = grid
        self.nu = nu
        self.dt = float(dt)
        self.nx = 4 * grid.Kmax if nx is None else int(nx)
        if self.nx < min_nx(grid.Kmax):
            raise ConfigError(f"nx={self.nx} aliases products of {grid.Kmax} bands; "
                              f"need nx >= {min_nx(grid.Kmax)}", "grid.nx")
        self.nonlinear = nonlinear
        self.startup = int(startup)
        self.gauge = gauge
        self.cfl = cfl
        self.be = kernels.backend if backend is None else kernels.load_backend(backend)
        self.ops = [ModeOperator(grid, k, nu) for k in range(grid.Kmax + 1)]
        self.n_prev = None
        self.steps = 0

    def _forcing(self, state: NonlinearState):
        if not self.nonlinear:
            return None
        n, u1, u2 = _transport(state.omega.modes, state.psi, state.u_s, self.grid, self.nx)
        lim = cfl_dt(self.grid, self.nx, u1, u2, self.cfl)
        if self.dt > lim:
            raise CFLViolationError(
                f"dt={self.dt:g} exceeds the transport limit {lim:g} at t={state.t:g}", lim)
        return n

    def _half_steps(self, w, psi, forcing):
        """Two backward Euler half steps, transport frozen at the step start."""
        h = 0.5 * self.dt
        for k, op in enumerate(self.ops):
            f = None if forcing is None else np.ascontiguousarray(-h * forcing[k])
            _march(op, _be_factor(op, h, self.be.NAME), w[k], psi[k], 2, 0, self.be, forcing=f)

    def step(self, state: NonlinearState) -> NonlinearState:
        """One step; returns a new state (the input is not modified)."""
        w = state.omega.modes.copy()
        psi = state.psi.copy()
        n_now = self._forcing(state)
        dt = self.dt
        if self.steps < self.startup:
            self._half_steps(w, psi, n_now)
        else:
            f = n_now
            if n_now is not None and self.n_prev is not None:
                f = 1.5 * n_now - 0.5 * self.n_prev
            for k, op in enumerate(self.ops):
                fk = None if f is None else np.ascontiguousarray(-dt * f[k])
                _march(op, _cn_factor(op, dt, self.be.NAME), w[k], psi[k], 1, 0, self.be,
                       forcing=fk)
        self.n_prev = n_now
        self.steps += 1
        w[0] = w[0].real
        if not np.all(np.isfinite(w)):
            raise NumericalBreakdownError(f"non-finite vorticity at t={state.t + dt:g}")
        omega = PerturbationState(w, self.grid, state.t + dt)
        return NonlinearState(omega, psi, shear_velocity(w[0], self.grid, self.gauge), self.gauge)


def step_nonlinear(state: NonlinearState, dt: float, nu: float, prev_term=None,
                   nonlinear: bool = True, nx: int | None = None,
                   backend: str | None = None):
    """One Crank-Nicolson / Adams-Bashforth step.

    ``prev_term`` is the transport term of the previous step; without
    it the step is forward Euler in the transport term. Returns
    ``(new_state, term_now)`` so the caller can chain steps.

    Raises
    ------
    CFLViolationError
        ``dt`` exceeds the transport limit; ``advised_dt`` carries it.
    """
    solver = NonlinearSolver(state.grid, nu, dt, nx=nx, nonlinear=nonlinear, startup=0,
                             gauge=state.gauge, backend=backend)
    solver.n_prev = prev_term
    solver.steps = 1 if prev_term is not None else 0
    term = solver._forcing(state)
    solver.n_prev = prev_term
    new = solver.step(state)
    return new, term


# --------------------------------------------------------------------------
# trajectories

@dataclass
class NonlinearTrajectory:
    """Sampled diagnostics of a nonlinear run."""

    times: np.ndarray
    band_norms: np.ndarray = field(repr=False)
    grad2: np.ndarray = field(repr=False)
    dx_nonshear: np.ndarray = field(repr=False)
    linf_u: np.ndarray = field(repr=False)
    nu: float = 0.0
    dt: float = 0.0
    blowup: bool = False
    max_step_increase: float = 0.0
    final: NonlinearState | None = field(default=None, repr=False)
    checkpoints: list = field(default_factory=list)

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.band_norms ** 2, axis=1))

    @property
    def norm_shear(self) -> np.ndarray:
        return self.band_norms[:, 0]

    @property
    def norm_nonshear(self) -> np.ndarray:
        return np.sqrt(np.sum(self.band_norms[:, 1:] ** 2, axis=1))


def _diagnostics(state: NonlinearState):
    grid = state.grid
    w = state.omega.modes
    bn = band_norms(w, grid)
    ks = np.arange(w.shape[0])
    weights = np.array([band_weight(k) for k in ks]) * grid.dy
    pad = np.pad(w, ((0, 0), (1, 1)))
    dyw = np.sum(np.abs(np.diff(pad, axis=1)) ** 2, axis=1) / grid.dy ** 2
    grad2 = float(np.sum(weights * (ks ** 2 * bn ** 2 / weights + dyw)))
    dxn = float(np.sqrt(np.sum(ks[1:] ** 2 * bn[1:] ** 2)))
    linf = 0.0
    for k in range(1, w.shape[0]):
        linf += 2.0 * float(linf_gradpsi_array(state.psi[k], grid.dy, k))
    return bn, grad2, dxn, linf


def run_nonlinear(state: NonlinearState, nu: float, t_end: float, dt: float | None = None,
                  samples: int = 1000, nonlinear: bool = True, nx: int | None = None,
                  startup: int = 2, checkpoint_dir: str | Path | None = None,
                  checkpoint_every: int = 0, meta: dict | None = None,
                  backend: str | None = None) -> NonlinearTrajectory:
    """Evolve to ``t_end`` and sample the diagnostics.

    The step is ``t_end / ceil(t_end / dt)``; by default ``dt`` is the
    linear default for band 1 and the datum. A run whose norm exceeds
    ``1e3`` times its initial value stops with ``blowup`` set.
    """
    grid = state.grid
    if dt is None:
        op1 = ModeOperator(grid, 1, nu)
        dt = default_dt(op1, state.omega.modes[1] if np.any(state.omega.modes[1]) else None)
    nsteps = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / nsteps
    every = max(1, nsteps // samples)
    solver = NonlinearSolver(grid, nu, dt, nx=nx, nonlinear=nonlinear, startup=startup,
                             gauge=state.gauge, backend=backend)
    rec_t, rec_b, rec_g, rec_d, rec_l = [], [], [], [], []

    def record(s):
        bn, g2, dxn, linf = _diagnostics(s)
        rec_t.append(s.t)
        rec_b.append(bn)
        rec_g.append(g2)
        rec_d.append(dxn)
        rec_l.append(linf)

    record(state)
    n0 = state.omega.norm()
    prev = n0
    worst = -math.inf
    blowup = False
    cps = []
    cur = state
    for i in range(1, nsteps + 1):
        cur = solver.step(cur)
        now = float(np.sqrt(np.sum(band_norms(cur.omega.modes, grid) ** 2)))
        if prev > 0:
            worst = max(worst, (now - prev) / prev)
        prev = now
        if not math.isfinite(now) or (n0 > 0 and now > BLOWUP_FACTOR * n0):
            blowup = True
            record(cur)
            break
        if i % every == 0 or i == nsteps:
            record(cur)
        if checkpoint_dir is not None and checkpoint_every and i % checkpoint_every == 0:
            cps.append(str(save_checkpoint(Path(checkpoint_dir) / f"step{i:08d}", cur, nu, meta)))
    return NonlinearTrajectory(np.array(rec_t), np.array(rec_b), np.array(rec_g),
                               np.array(rec_d), np.array(rec_l), nu, dt, blowup,
                               float(worst if worst > -math.inf else 0.0), cur, cps)


# --------------------------------------------------------------------------
# bootstrap quantity and threshold experiments

def compute_A(traj: NonlinearTrajectory, nu: float | None = None) -> np.ndarray:
    """``A(t) = nu^{2/3} int ||d_x w~|| + nu^{1/6} (|log nu|+1)^{-1/2} (int ||u~||_inf^2)^{1/2}``.

    Trapezoid quadrature on the samples; ``||u~||_inf`` is the sum over
    bands of the band maxima of ``|grad psi_k|`` (twice, for ``+-k``).
    """
    nu = traj.nu if nu is None else nu
    t = traj.times
    if t.size == 0:
        return np.zeros(0)
    dt = np.diff(t)
    i1 = np.concatenate([[0.0], np.cumsum(0.5 * dt * (traj.dx_nonshear[1:] + traj.dx_nonshear[:-1]))])
    l2 = traj.linf_u ** 2
    i2 = np.concatenate([[0.0], np.cumsum(0.5 * dt * (l2[1:] + l2[:-1]))])
    return nu ** (2.0 / 3.0) * i1 + nu ** (1.0 / 6.0) / math.sqrt(abs(math.log(nu)) + 1.0) * np.sqrt(i2)


def threshold_amplitude(eps0: float, nu: float) -> float:
    """``eps0 (1 + |log nu|^{1/2})^{-1} nu^{2/3}``."""
    return eps0 / (1.0 + math.sqrt(abs(math.log(nu)))) * nu ** (2.0 / 3.0)


@dataclass
class ThresholdRecord:
    """Outcome of one threshold experiment.

    ``decayed`` is true iff the run did not blow up, the non-shear norm
    fell to half its initial value by ``3 t_half`` (``t_half`` the
    halving time of the matching linear run), and the envelope
    ``C1 exp(-c1 nu^{1/2} t)`` fitted to the non-shear norm has
    ``C1 <= 10`` and ``c1 >= 0.1 c_linear``. ``envelope_margin`` is the
    smallest ``log(10 exp(-c1 nu^{1/2} t) ||w~_in|| / ||w~(t)||)``.
    ``energy_ratio`` is ``(||w(T)||^2 + nu/2 int ||grad w||^2) / ||w_in||^2``
    (the inequality form, must stay <= 1 + 1e-3); ``energy_identity_ratio``
    uses ``2 nu`` and should be close to 1.
    """

    nu: float
    eps0: float
    amplitude: float
    eps0_effective: float
    decayed: bool
    C1: float
    c1: float
    c_linear: float
    envelope_margin: float
    blowup: bool
    halved: bool
    t_half_linear: float | None
    monotone_ok: bool
    max_step_increase: float
    energy_ok: bool
    energy_ratio: float
    shear_ok: bool
    K_measured: float
    A_final: float
    gauge: str = "left"
    energy_identity_ratio: float = math.nan

    def row(self) -> dict:
        return {"nu": self.nu, "eps0": self.eps0, "amplitude": self.amplitude,
                "decayed": self.decayed, "C1": self.C1, "c1": self.c1,
                "envelope_margin": self.envelope_margin, "blowup": self.blowup}

    def to_dict(self) -> dict:
        return asdict(self)


def _linear_reference(grid, nu, datum, dt, t_end, backend):
    op = ModeOperator(grid, 1, nu)
    g = PerturbationState(datum.modes, grid).mode(1)
    every = max(1, int(t_end / dt / 1000))
    traj = evolve(op, g, StepperConfig(dt=dt, t_end=t_end, sample_every=every, keep_fields=False),
                  backend=backend)
    return traj.times, traj.norms()


def threshold_experiment(nu: float, eps0: float, *, grid: Grid | None = None,
                         shear_amplitude: float = 0.0, T: float | None = None,
                         dt: float | None = None, nx: int | None = None, samples: int = 1000,
                         gauge: str = "left", checkpoint_dir: str | Path | None = None,
                         checkpoint_every: int = 0, meta: dict | None = None,
                         backend: str | None = None):
    """Run the perturbation of size ``eps0 (1+|log nu|^{1/2})^{-1} nu^{2/3}``.

    Returns ``(ThresholdRecord, NonlinearTrajectory)``. The matching
    linear run (band 1, same grid and step) supplies ``c_linear`` and the
    halving time. ``meta`` is added to every checkpoint sidecar.
    """
    grid = Grid() if grid is None else grid
    amp = threshold_amplitude(eps0, nu)
    T = 5.0 / math.sqrt(nu) if T is None else float(T)
    datum = default_datum(grid, amp, shear_amplitude)
    state = NonlinearState.from_omega(datum, gauge)
    if dt is None:
        dt = default_dt(ModeOperator(grid, 1, nu), np.exp(-grid.y ** 2) + 0j)
    nsteps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    ref_datum = default_datum(grid, 1.0)
    lt, ln = _linear_reference(grid, nu, ref_datum, dt, T, backend)
    lo, hi = default_window(nu, 1)
    # short runs fit over the last 60% of the horizon
    window = (lo, hi) if hi <= T else (min(lo, 0.4 * T), T)
    c_lin = fit_decay(lt, ln, window).c_fit / math.sqrt(nu)
    t_half = measure_halving_time(lt, ln).t_half
    traj = run_nonlinear(state, nu, T, dt=dt, samples=samples, nx=nx,
                         checkpoint_dir=checkpoint_dir, checkpoint_every=checkpoint_every,
                         meta={"eps0": eps0, "gauge": gauge, **(meta or {})}, backend=backend)
    t = traj.times
    nn = traj.norm_nonshear
    n_in = nn[0]
    if amp == 0.0 or n_in == 0.0:
        return ThresholdRecord(nu, eps0, amp, eps0, True, 0.0, math.inf, c_lin, math.inf,
                               False, True, t_half, True, 0.0, True, 0.0, True, 0.0, 0.0,
                               gauge), traj
    if traj.blowup:
        c1, C1, margin = 0.0, math.inf, -math.inf
    else:
        fit = fit_decay(t, nn, window, g_norm=n_in)
        c1 = fit.c_fit / math.sqrt(nu)
        ratio = nn / n_in * np.exp(c1 * math.sqrt(nu) * t)
        C1 = float(np.max(ratio))
        margin = float(np.min(np.log(10.0) - np.log(np.maximum(ratio, 1e-300))))
    halved = False
    if t_half is not None:
        sel = t <= 3.0 * t_half
        halved = bool(np.any(nn[sel] <= 0.5 * n_in))
    decayed = (not traj.blowup) and halved and C1 <= 10.0 and c1 >= 0.1 * c_lin
    n_tot = traj.norm
    n0 = n_tot[0]
    diss = np.trapezoid(traj.grad2, t)
    energy_ratio = (n_tot[-1] ** 2 + 0.5 * nu * diss) / n0 ** 2
    A = compute_A(traj, nu)
    K_meas = float(0.75 * A.max() / n_in)
    rec = ThresholdRecord(
        nu=nu, eps0=eps0, amplitude=amp,
        eps0_effective=amp * (1.0 + math.sqrt(abs(math.log(nu)))) * nu ** (-2.0 / 3.0),
        decayed=bool(decayed), C1=C1, c1=c1, c_linear=c_lin, envelope_margin=margin,
        blowup=traj.blowup, halved=halved, t_half_linear=t_half,
        monotone_ok=bool(traj.max_step_increase <= 1e-10),
        max_step_increase=traj.max_step_increase,
        energy_ok=bool(energy_ratio <= 1.0 + 1e-3), energy_ratio=float(energy_ratio),
        shear_ok=bool(np.all(traj.norm_shear <= n0 * (1 + 1e-12))),
        K_measured=K_meas, A_final=float(A[-1]), gauge=gauge,
        energy_identity_ratio=float((n_tot[-1] ** 2 + 2.0 * nu * diss) / n0 ** 2))
    return rec, traj


def amplitude_sweep(nu_list=(1e-3, 3e-4, 1e-4), eps0_list=(0.01, 0.1, 1.0, 10.0, 100.0),
                    **kw) -> dict:
    """Exploratory sweep; reports the smallest non-decaying ``eps0`` per ``nu``.

    Returns ``{"records": [...], "threshold": {nu: eps0 or None}}``.
    """
    records = []
    threshold = {}
    for nu in nu_list:
        threshold[nu] = None
        for eps0 in sorted(eps0_list):
            rec, _ = threshold_experiment(nu, eps0, **kw)
            records.append(rec)
            if not rec.decayed and threshold[nu] is None:
                threshold[nu] = eps0
    return {"records": records, "threshold": threshold}


# --------------------------------------------------------------------------
# checkpoints

def save_checkpoint(stem: str | Path, state: NonlinearState, nu: float,
                    meta: dict | None = None) -> Path:
    """Write ``stem.bin`` (band-major, y-minor, complex little-endian) and ``stem.json``."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    bin_path = stem.parent / (stem.name + ".bin")
    data = np.ascontiguousarray(state.omega.modes, dtype="<c16")
    data.tofile(bin_path)
    g = state.grid
    side = {
        "grid": {"Ly": g.Ly, "Ny": g.Ny, "Kmax": g.Kmax},
        "nu": nu,
        "t": state.t,
        "layout": {"order": "k-major, y-minor", "dtype": "complex128",
                   "interleaved": "real, imag", "endianness": "little",
                   "shape": [g.Kmax + 1, g.Ny]},
        "gauge": state.gauge,
    }
    if meta:
        side["meta"] = meta
    (stem.parent / (stem.name + ".json")).write_text(json.dumps(side, indent=2, sort_keys=True))
    return bin_path


def load_checkpoint(path: str | Path) -> tuple:
    """Inverse of :func:`save_checkpoint`; returns ``(state, sidecar)``."""
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    g = side["grid"]
    grid = Grid(Ly=g["Ly"], Ny=g["Ny"], Kmax=g["Kmax"])
    modes = np.fromfile(path.with_suffix(".bin"), dtype="<c16").reshape(grid.Kmax + 1, grid.Ny)
    state = NonlinearState.from_modes(modes, grid, side["t"], side.get("gauge", "left"))
    return state, side
