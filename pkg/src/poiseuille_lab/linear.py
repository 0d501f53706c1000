"""Linearized dynamics around Poiseuille flow, one x-band at a time.

On band ``k`` the vorticity obeys ``d/dt w = L w`` with

    L w = -i k y^2 w + 2 i k psi + nu Delta_k w,    Delta_k psi = w.

The default integrator is Crank-Nicolson applied to the whole operator.
Vorticity and stream function are solved together as one banded system
with interleaved unknowns ``(w_j, psi_j)`` (two sub- and two
super-diagonals), so the nonlocal coupling is implicit and the scheme
inherits the exact norm contraction of the continuous semigroup. The
IMEX variant, with the coupling extrapolated explicitly, is kept as an
option for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import kernels
from .discretization import (
    Grid,
    ModeField,
    TridiagonalOperator,
    assemble_laplacian_k,
    band_quadratics,
    band_weight,
    l2_norm,
    laplacian_apply,
    poisson_solve_array,
)
from .errors import CostGuardError, GridMismatchError, NumericalBreakdownError

SCHEMES = ("crank-nicolson", "crank-nicolson-imex", "dense-expm")
DENSE_MAX_NY = 256


@dataclass(frozen=True)
class ModeOperator:
    """Linearized operator restricted to band ``k``.

    Parameters
    ----------
    grid : Grid
    k : int
    nu : float
        Viscosity, ``0 < nu < 1``.
    shear : bool
        Include the transport term ``-i k y^2``.
    coupling : bool
        Include the nonlocal term ``2 i k Delta_k^{-1}``.
    """

    grid: Grid
    k: int
    nu: float
    shear: bool = True
    coupling: bool = True

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise ValueError(f"band index must be a non-negative integer, got {self.k}")
        if not (0.0 < self.nu < 1.0):
            raise ValueError(f"viscosity must lie in (0, 1), got {self.nu}")
        object.__setattr__(self, "k", int(self.k))

    @classmethod
    def heat_only(cls, grid: Grid, k: int, nu: float) -> "ModeOperator":
        """Control operator ``nu Delta_k`` with shear and coupling removed."""
        return cls(grid, k, nu, shear=False, coupling=False)

    @property
    def coupled(self) -> bool:
        """Whether the stream function enters the dynamics."""
        return self.coupling and self.k != 0

    @property
    def coupling_factor(self) -> complex:
        return 2j * self.k if self.coupled else 0j

    @property
    def shear_diag(self) -> np.ndarray:
        if self.shear and self.k:
            return -1j * self.k * self.grid.y ** 2
        return np.zeros(self.grid.Ny, dtype=complex)

    @property
    def A_stiff(self) -> TridiagonalOperator:
        """Local part ``-i k y^2 + nu Delta_k`` as a tridiagonal matrix."""
        lap = assemble_laplacian_k(self.grid, self.k, self.nu)
        return TridiagonalOperator(self.nu * lap.lower, self.nu * lap.diag + self.shear_diag,
                                   self.nu * lap.upper, k=self.k, nu=self.nu)

    def _check(self, f: ModeField):
        if f.grid != self.grid or f.k != self.k:
            raise GridMismatchError("field does not match the operator's grid/band")


def apply_operator(op: ModeOperator, omega: ModeField) -> ModeField:
    """``L_{nu,k} omega``."""
    op._check(omega)
    return ModeField(op.k, _apply_array(op, omega.values), op.grid)


def _apply_array(op: ModeOperator, w: np.ndarray) -> np.ndarray:
    out = op.nu * laplacian_apply(w, op.grid.dy, op.k) + op.shear_diag * w
    if op.coupled:
        out = out + op.coupling_factor * poisson_solve_array(w, op.grid.dy, op.k)
    return out


def dense_operator(op: ModeOperator) -> np.ndarray:
    """Full ``Ny x Ny`` matrix of ``L_{nu,k}``, coupling via a dense inverse."""
    _guard(op)
    m = op.A_stiff.to_dense()
    if op.coupled:
        lap = assemble_laplacian_k(op.grid, op.k).to_dense()
        m = m + op.coupling_factor * np.linalg.inv(lap)
    return m


def dense_expm(op: ModeOperator, t: float) -> np.ndarray:
    """``exp(t L_{nu,k})`` by Pade scaling and squaring (validation oracle)."""
    _guard(op)
    return scipy.linalg.expm(t * dense_operator(op))


def _guard(op: ModeOperator):
    if op.grid.Ny > DENSE_MAX_NY:
        raise CostGuardError(
            f"dense oracle limited to Ny <= {DENSE_MAX_NY}, got Ny={op.grid.Ny}")


# --------------------------------------------------------------------------
# time step selection

def support_radius(values: np.ndarray, grid: Grid, rel: float = 1e-10) -> float:
    """Largest ``|y|`` where ``|values| >= rel * max|values|`` (``Ly`` if empty)."""
    a = np.abs(values)
    peak = a.max() if a.size else 0.0
    if peak == 0.0:
        return grid.Ly
    idx = np.nonzero(a >= rel * peak)[0]
    return float(max(abs(grid.y[idx[0]]), abs(grid.y[idx[-1]]), grid.dy))


def natural_time(op: ModeOperator) -> float:
    """Decay time scale: ``(nu k)^{-1/2}`` with shear, ``1/(nu (k^2+1))`` without."""
    if op.shear and op.k:
        return 1.0 / math.sqrt(op.nu * op.k)
    return 1.0 / (op.nu * (op.k ** 2 + 1))


def default_dt(op: ModeOperator, datum: np.ndarray | None = None, safety: float = 0.5,
               phase: float = 0.5, fraction: float = 0.02) -> float:
    """Step size for Crank-Nicolson runs.

    Crank-Nicolson is A-stable but not L-stable, so free transport
    ``exp(-i k y^2 t)`` must be phase-resolved wherever the datum lives:
    ``k y^2 dt <= phase`` up to the support radius of ``datum``. The step
    also resolves the decay scale (``fraction`` of :func:`natural_time`).
    """
    dt = fraction * natural_time(op)
    if op.shear and op.k:
        radius = op.grid.Ly if datum is None else support_radius(datum, op.grid)
        dt = min(dt, phase / (op.k * radius ** 2))
    return safety * dt


# --------------------------------------------------------------------------
# steppers

@dataclass
class StepperConfig:
    """Time-stepping schedule.

    Parameters
    ----------
    dt : float
        Requested step; it is shrunk so that every sample time is hit exactly.
    t_end : float
    scheme : str
        ``"crank-nicolson"`` (implicit coupling, default),
        ``"crank-nicolson-imex"`` or ``"dense-expm"``.
    sample_times : array_like, optional
        Sorted output times in ``[0, t_end]``. When omitted the trajectory
        is sampled every ``sample_every`` steps of a uniform grid.
    sample_every : int
    keep_fields : bool
        Store the sampled profiles (otherwise only diagnostics).
    diagnostics : bool
        Evaluate :func:`band_quadratics` at every sample.
    stop_ratio : float, optional
        Stop once ``||w|| < stop_ratio ||g||`` at a sample.
    startup : int
        Number of initial Crank-Nicolson steps replaced by two backward
        Euler half steps each (0 disables the damping).
    """

    dt: float
    t_end: float
    scheme: str = "crank-nicolson"
    sample_times: np.ndarray | None = None
    sample_every: int = 1
    keep_fields: bool = True
    diagnostics: bool = True
    stop_ratio: float | None = None
    startup: int = 2
    chunk: int = 512

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.sample_times is not None:
            st = np.asarray(self.sample_times, dtype=float)
            if st.ndim != 1 or np.any(np.diff(st) < 0):
                raise ValueError("sample_times must be a sorted 1-D sequence")
            if st.size and (st[0] < 0 or st[-1] > self.t_end * (1 + 1e-12)):
                raise ValueError("sample_times must lie within [0, t_end]")
            self.sample_times = st
        if int(self.startup) < 0:
            raise ValueError("startup must be >= 0")
        if int(self.sample_every) < 1:
            raise ValueError("sample_every must be >= 1")
        self.sample_every = int(self.sample_every)


@dataclass
class Trajectory:
    """Sampled evolution of one band.

    ``dissipation[i]`` is ``int_0^{t_i} ||grad w||^2 dt`` accumulated at
    every step with the quadrature of the time scheme (NaN when the
    scheme does not provide it).
    """

    op: ModeOperator
    times: np.ndarray
    omega: np.ndarray | None
    psi: np.ndarray | None
    quad: dict | None
    dt: float
    scheme: str
    g_norm: float
    backend: str = ""
    dissipation: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.shape[0]

    def field(self, i: int) -> ModeField:
        return ModeField(self.op.k, self.omega[i], self.op.grid)

    def norms(self) -> np.ndarray:
        if self.quad is not None:
            return np.sqrt(self.quad["norm2"])
        w = band_quadratics(self.omega, None if self.op.k == 0 else self.psi, self.op.grid, self.op.k)
        return np.sqrt(w["norm2"])


@dataclass(frozen=True)
class _Factor:
    lu: np.ndarray
    ipiv: np.ndarray
    kl: int
    ku: int
    coupled: bool
    rdiag: np.ndarray
    roff: float
    rcpl: complex
    theta: float
    dt: float


def _band_matrix(op: ModeOperator, h: float, coupled: bool):
    """LAPACK band storage of ``I - h L`` (interleaved when coupled)."""
    ny = op.grid.Ny
    inv = 1.0 / op.grid.dy ** 2
    a_diag = op.nu * (-2.0 * inv - op.k ** 2) + op.shear_diag
    a_off = op.nu * inv
    if not coupled:
        kl = ku = 1
        ab = np.zeros((2 * kl + ku + 1, ny), dtype=complex, order="F")
        ab[kl + ku] = 1.0 - h * a_diag
        ab[kl + ku - 1, 1:] = -h * a_off
        ab[kl + ku + 1, :-1] = -h * a_off
        return ab, kl, ku, a_diag, a_off
    kl = ku = 2
    n = 2 * ny
    ab = np.zeros((2 * kl + ku + 1, n), dtype=complex, order="F")
    d = kl + ku
    wi = np.arange(0, n, 2)
    pi = wi + 1
    # vorticity rows
    ab[d, wi] = 1.0 - h * a_diag
    ab[d - 2, wi[1:]] = -h * a_off          # row 2j, col 2j+2
    ab[d + 2, wi[:-1]] = -h * a_off         # row 2j+2, col 2j
    ab[d - 1, pi] = -h * op.coupling_factor  # row 2j, col 2j+1
    # stream-function rows: -w_j + Delta_k psi_j = 0
    ab[d + 1, wi] = -1.0                    # row 2j+1, col 2j
    ab[d, pi] = -2.0 * inv - op.k ** 2
    ab[d - 2, pi[1:]] = inv                 # row 2j+1, col 2j+3
    ab[d + 2, pi[:-1]] = inv                # row 2j+3, col 2j+1
    return ab, kl, ku, a_diag, a_off


@lru_cache(maxsize=128)
def _factor(op: ModeOperator, h_impl: float, h_expl: float, coupled: bool,
            backend_name: str) -> _Factor:
    """Factor ``I - h_impl L``; the right-hand side applies ``I + h_expl L``.

    Crank-Nicolson uses ``h_impl = h_expl = dt/2``, backward Euler
    ``h_impl = dt, h_expl = 0``.
    """
    be = kernels.load_backend(backend_name)
    ab, kl, ku, a_diag, a_off = _band_matrix(op, h_impl, coupled)
    lu, ipiv, info = be.factor_banded(ab, kl, ku)
    if info != 0:
        raise NumericalBreakdownError(f"banded factorization failed (info={info}) for k={op.k}")
    rcpl = h_expl * op.coupling_factor if coupled else 0j
    theta = h_impl / (h_impl + h_expl)
    return _Factor(lu, ipiv, kl, ku, coupled, np.ascontiguousarray(1.0 + h_expl * a_diag),
                   float(h_expl * a_off), complex(rcpl), theta, h_impl + h_expl)


def _cn_factor(op, dt, be_name):
    return _factor(op, 0.5 * dt, 0.5 * dt, op.coupled, be_name)


def _be_factor(op, dt, be_name):
    return _factor(op, dt, 0.0, op.coupled, be_name)


def _march(op, fac: _Factor, w, psi, nsteps, stride, backend, forcing=None, track=None):
    """Advance in place, returning sampled rows every ``stride`` steps.

    ``track`` is an optional :class:`_Dissipation` whose running total of
    ``int ||grad w||^2 dt`` is advanced by the kernel; its values at the
    sampled steps are returned as a third item.
    """
    nrows = nsteps // stride if stride > 0 else 0
    out_w = np.empty((max(nrows, 1), op.grid.Ny), dtype=complex)
    out_p = np.empty_like(out_w) if fac.coupled else np.empty((1, 1), dtype=complex)
    diss = dparams = None
    if track is not None:
        diss = np.zeros(nrows + 1)
        diss[0] = track.total
        dparams = track.params(fac.theta, fac.dt)
    info = backend.cn_march(fac.lu, fac.ipiv, fac.kl, fac.ku, fac.coupled, fac.rdiag, fac.roff,
                            fac.rcpl, w, psi, int(nsteps), int(stride), out_w, out_p, forcing,
                            diss, dparams)
    if info != 0:
        raise NumericalBreakdownError(f"banded solve failed (info={info}) for k={op.k}")
    samples = None
    if track is not None:
        track.total = float(diss[0])
        samples = diss[1:]
    return out_w[:nrows], (out_p[:nrows] if fac.coupled else None), samples


class _Dissipation:
    """Running ``int ||grad w||^2 dt`` with the scheme's own quadrature.

    Crank-Nicolson steps use the midpoint value and backward Euler steps
    the end-point value; with these rules the discrete energy identity
    holds step by step.
    """

    def __init__(self, op: ModeOperator):
        self.k2 = float(op.k) ** 2
        self.idy2 = 1.0 / op.grid.dy ** 2
        self.weight = band_weight(op.k) * op.grid.dy
        self.total = 0.0

    def params(self, theta, dt):
        return np.array([theta, self.k2, self.idy2, dt * self.weight])


def _initial_psi(op: ModeOperator, w: np.ndarray) -> np.ndarray:
    if op.k == 0:
        return np.zeros_like(w)
    return poisson_solve_array(w, op.grid.dy, op.k)


def step_cn(op: ModeOperator, omega: ModeField, dt: float, backend: str | None = None) -> ModeField:
    """One Crank-Nicolson step of the full operator (coupling implicit)."""
    op._check(omega)
    be = kernels.backend if backend is None else kernels.load_backend(backend)
    w = omega.values.astype(complex, copy=True)
    psi = _initial_psi(op, w)
    _march(op, _cn_factor(op, float(dt), be.NAME), w, psi, 1, 0, be)
    return ModeField(op.k, w, op.grid)


def step_be(op: ModeOperator, omega: ModeField, dt: float, backend: str | None = None) -> ModeField:
    """One backward Euler step (used for start-up damping)."""
    op._check(omega)
    be = kernels.backend if backend is None else kernels.load_backend(backend)
    w = omega.values.astype(complex, copy=True)
    psi = _initial_psi(op, w)
    _march(op, _be_factor(op, float(dt), be.NAME), w, psi, 1, 0, be)
    return ModeField(op.k, w, op.grid)


def step_cn_imex(op: ModeOperator, omega: ModeField, dt: float,
                 psi_prev: np.ndarray | None = None, backend: str | None = None) -> ModeField:
    """One IMEX step: Crank-Nicolson on ``-iky^2 + nu Delta_k``, coupling explicit.

    The coupling is evaluated at the half step by linear extrapolation
    ``(3 psi^n - psi^{n-1}) / 2``; without ``psi_prev`` the current
    stream function is used.
    """
    op._check(omega)
    be = kernels.backend if backend is None else kernels.load_backend(backend)
    w = omega.values.astype(complex, copy=True)
    psi = _initial_psi(op, w)
    forcing = None
    if op.coupled:
        half = psi if psi_prev is None else 1.5 * psi - 0.5 * psi_prev
        forcing = dt * op.coupling_factor * half
    fac = _factor(op, 0.5 * dt, 0.5 * dt, False, be.NAME)
    dummy = np.zeros(op.grid.Ny, dtype=complex)
    _march(op, fac, w, dummy, 1, 0, be, forcing=forcing)
    return ModeField(op.k, w, op.grid)


class _Stepper:
    """Steps one band in place, with optional backward Euler start-up.

    Start-up replaces each of the first ``startup`` steps by two backward
    Euler half steps. Crank-Nicolson is not L-stable: without damping,
    the mismatch between the datum and the quasi-static response in
    regions where ``k y^2 dt`` is large would persist as a sign-flipping
    mode. The start-up keeps second-order global accuracy.
    """

    def __init__(self, op, g_values, scheme, be, startup):
        self.op = op
        self.scheme = scheme
        self.be = be
        self.w = g_values.astype(complex, copy=True)
        self.psi = _initial_psi(op, self.w)
        self.startup_left = startup if scheme == "crank-nicolson" else 0
        self.psi_prev = None
        self.track = _Dissipation(op) if scheme == "crank-nicolson" else None

    def advance(self, n, dt, stride=0):
        """Advance ``n`` steps of size ``dt``.

        Returns the rows sampled every ``stride`` steps and the running
        dissipation integral at those samples (NaN for the IMEX scheme).
        """
        rows_w, rows_p, rows_d = [], [], []

        def snap():
            rows_w.append(self.w.copy())
            rows_p.append(self.psi.copy())
            rows_d.append(self.dissipation)

        done = 0
        if self.scheme == "crank-nicolson-imex":
            for i in range(1, n + 1):
                new = step_cn_imex(self.op, ModeField(self.op.k, self.w, self.op.grid), dt,
                                   self.psi_prev, backend=self.be.NAME)
                self.psi_prev = self.psi
                self.w = new.values
                self.psi = _initial_psi(self.op, self.w)
                if stride and i % stride == 0:
                    snap()
            return self._pack(rows_w, rows_p, rows_d)
        while self.startup_left > 0 and done < n:
            _march(self.op, _be_factor(self.op, 0.5 * dt, self.be.NAME), self.w, self.psi, 2, 0,
                   self.be, track=self.track)
            self.startup_left -= 1
            done += 1
            if stride and done % stride == 0:
                snap()
        rest = n - done
        if rest:
            fac = _cn_factor(self.op, dt, self.be.NAME)
            if stride:
                # first reach a multiple of stride, then let the kernel sample
                first = (-done) % stride
                if first:
                    k1 = min(first, rest)
                    _march(self.op, fac, self.w, self.psi, k1, 0, self.be, track=self.track)
                    done += k1
                    if done % stride == 0:
                        snap()
                rest = n - done
                if rest:
                    wr, pr, dr = _march(self.op, fac, self.w, self.psi, rest, stride, self.be,
                                        track=self.track)
                    rows_w.extend(wr)
                    if pr is not None:
                        rows_p.extend(pr)
                    rows_d.extend(dr)
            else:
                _march(self.op, fac, self.w, self.psi, rest, 0, self.be, track=self.track)
        return self._pack(rows_w, rows_p, rows_d)

    @property
    def dissipation(self) -> float:
        return self.track.total if self.track is not None else float("nan")

    def _pack(self, rows_w, rows_p, rows_d):
        ny = self.op.grid.Ny
        w = np.array(rows_w).reshape(-1, ny)
        p = np.array(rows_p).reshape(-1, ny) if self.op.coupled else None
        return w, p, np.array(rows_d, dtype=float)

    def current(self):
        return (self.w[None, :], (self.psi[None, :] if self.op.coupled else None),
                np.array([self.dissipation]))


def evolve(op: ModeOperator, g: ModeField, cfg: StepperConfig, backend: str | None = None) -> Trajectory:
    """Evolve ``g`` under ``L_{nu,k}`` and sample the trajectory.

    The initial datum is always the first sample (``t = 0``).
    """
    op._check(g)
    be = kernels.backend if backend is None else kernels.load_backend(backend)
    g_norm = l2_norm(g)
    if cfg.scheme == "dense-expm":
        return _evolve_expm(op, g, cfg, g_norm)
    if cfg.sample_times is not None:
        traj = _evolve_scheduled(op, g, cfg, be, g_norm)
    else:
        traj = _evolve_uniform(op, g, cfg, be, g_norm)
    traj.meta["startup_steps"] = cfg.startup if cfg.scheme == "crank-nicolson" else 0
    return traj


class _Recorder:
    def __init__(self, op, cfg):
        self.op = op
        self.cfg = cfg
        self.times = []
        self.w = []
        self.p = []
        self.quad = []
        self.diss = []

    def add(self, times, w_rows, p_rows, diss=None):
        if len(times) == 0:
            return
        self.times.append(np.asarray(times, dtype=float))
        self.diss.append(np.full(len(times), np.nan) if diss is None else np.asarray(diss, float))
        if p_rows is None and self.op.k:
            # uncoupled operators carry no stream function; diagnostics still need it
            p_rows = _initial_psi(self.op, w_rows)
        if self.cfg.keep_fields:
            self.w.append(w_rows.copy())
            if p_rows is not None:
                self.p.append(p_rows.copy())
        if self.cfg.diagnostics:
            self.quad.append(band_quadratics(w_rows, p_rows, self.op.grid, self.op.k))

    def last_norm(self):
        if self.quad:
            return math.sqrt(self.quad[-1]["norm2"][-1])
        return None

    def build(self, dt, scheme, g_norm, backend):
        times = np.concatenate(self.times) if self.times else np.zeros(0)
        w = np.concatenate(self.w) if self.w else None
        p = np.concatenate(self.p) if self.p else None
        quad = None
        if self.quad:
            quad = {key: np.concatenate([q[key] for q in self.quad]) for key in self.quad[0]}
        diss = np.concatenate(self.diss) if self.diss else np.zeros(0)
        return Trajectory(self.op, times, w, p, quad, dt, scheme, g_norm, backend,
                          dissipation=diss)


def _stopped(cfg, rec, g_norm):
    last = rec.last_norm()
    return cfg.stop_ratio is not None and last is not None and last < cfg.stop_ratio * g_norm


def _evolve_uniform(op, g, cfg, be, g_norm):
    nsteps = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9)) if cfg.t_end > 0 else 0
    dt = cfg.t_end / nsteps if nsteps else cfg.dt
    rec = _Recorder(op, cfg)
    st = _Stepper(op, g.values, cfg.scheme, be, cfg.startup)
    rec.add([0.0], *st.current())
    m = cfg.sample_every
    done = 0
    while done < nsteps:
        n_chunk = min(nsteps - done, cfg.chunk * m)
        wr, pr, dr = st.advance(n_chunk, dt, m)
        times = dt * (done + m * np.arange(1, wr.shape[0] + 1))
        done += n_chunk
        rec.add(times, wr, pr, dr)
        if done == nsteps and nsteps % m:
            rec.add([done * dt], *st.current())
        if _stopped(cfg, rec, g_norm):
            break
    return rec.build(dt, cfg.scheme, g_norm, be.NAME)


def _evolve_scheduled(op, g, cfg, be, g_norm):
    rec = _Recorder(op, cfg)
    st = _Stepper(op, g.values, cfg.scheme, be, cfg.startup)
    t = 0.0
    dt_used = cfg.dt
    schedule = cfg.sample_times
    if schedule.size == 0 or schedule[0] > 0:
        schedule = np.concatenate([[0.0], schedule])
    for ts in schedule:
        span = ts - t
        if span > 0:
            n = max(1, math.ceil(span / cfg.dt - 1e-9))
            dt_seg = span / n
            dt_used = min(dt_used, dt_seg)
            st.advance(n, dt_seg)
            t = ts
        rec.add([ts], *st.current())
        if _stopped(cfg, rec, g_norm):
            break
    return rec.build(dt_used, cfg.scheme, g_norm, be.NAME)


def _evolve_expm(op, g, cfg, g_norm):
    if cfg.sample_times is not None:
        times = cfg.sample_times
        if times.size == 0 or times[0] > 0:
            times = np.concatenate([[0.0], times])
    else:
        n = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9))
        dt = cfg.t_end / n
        times = dt * np.arange(0, n + 1, cfg.sample_every)
    m = dense_operator(op)
    rows = np.array([scipy.linalg.expm(t * m) @ g.values for t in times])
    psi = _initial_psi(op, rows) if op.coupled else None
    rec = _Recorder(op, cfg)
    rec.add(times, rows, psi)
    return rec.build(cfg.dt, cfg.scheme, g_norm, "dense")


def converged_evolution(op: ModeOperator, g: ModeField, t: float, dt0: float, tol: float = 1e-7,
                        max_halvings: int = 16, backend: str | None = None):
    """Crank-Nicolson value at time ``t`` with ``dt`` halved until converged.

    For a second-order scheme the error of the finer of two results is
    about a third of their difference. Halving stops once that estimate
    drops below ``tol`` (relative). Returns ``(omega_t, dt, history)`` with
    ``history`` a list of ``(dt, estimated_error)``.
    """
    history = []
    prev = None
    dt = dt0
    for _ in range(max_halvings + 1):
        cfg = StepperConfig(dt=dt, t_end=t, sample_times=np.array([t]), keep_fields=True,
                            diagnostics=False)
        cur = evolve(op, g, cfg, backend=backend).omega[-1]
        if prev is not None:
            est = np.linalg.norm(cur - prev) / max(np.linalg.norm(cur), 1e-300) / 3.0
            history.append((dt, est))
            if est < tol:
                return cur, dt, history
        prev = cur
        dt *= 0.5
    return prev, 2 * dt, history
