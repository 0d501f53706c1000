"""Truncated y-grid, per-band finite-difference operators, norms.

A perturbation is stored band by band: band ``k`` holds the complex
profile ``a_k(y)`` of ``a_k(y) e^{ikx}`` on the interior nodes of a
uniform grid on ``[-Ly, Ly]`` with homogeneous Dirichlet values at the
two ends. For ``k >= 1`` the band also represents the conjugate mode
``-k``, so every quadratic quantity carries the weight ``2 * 2 pi``;
band 0 carries ``2 pi``. With this convention band norms add up to the
full L2 norm on the periodic strip.

Derivatives in y used inside quadratic forms are staggered differences
``(f[j+1] - f[j]) / dy`` on the ``Ny + 1`` half-integer nodes, with the
Dirichlet zeros included at both ends. This makes summation by parts
exact: ``<-Delta_k f, f> = k^2 ||f||^2 + ||D+ f||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

from .errors import GridMismatchError, GridTooSmallError, ZeroModeError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid on the truncated channel ``[-Ly, Ly]``.

    Parameters
    ----------
    Ly : float
        Half-width of the truncated y-domain.
    Ny : int
        Number of interior nodes.
    Kmax : int
        Largest retained x-wavenumber.
    """

    Ly: float = 10.0
    Ny: int = 512
    Kmax: int = 16

    def __post_init__(self):
        if not (self.Ly > 0 and np.isfinite(self.Ly)):
            raise ValueError(f"Ly must be positive, got {self.Ly}")
        if int(self.Ny) != self.Ny or self.Ny < 3:
            raise GridTooSmallError(f"need at least 3 interior points, got Ny={self.Ny}")
        if int(self.Kmax) != self.Kmax or self.Kmax < 1:
            raise ValueError(f"Kmax must be a positive integer, got {self.Kmax}")
        object.__setattr__(self, "Ny", int(self.Ny))
        object.__setattr__(self, "Kmax", int(self.Kmax))

    @property
    def dy(self) -> float:
        return 2.0 * self.Ly / (self.Ny + 1)

    @cached_property
    def y(self) -> np.ndarray:
        """Interior nodes ``-Ly + j dy`` for ``j = 1..Ny``."""
        y = -self.Ly + self.dy * np.arange(1, self.Ny + 1)
        y.setflags(write=False)
        return y

    @cached_property
    def y_half(self) -> np.ndarray:
        """Staggered nodes ``-Ly + (j + 1/2) dy`` for ``j = 0..Ny``."""
        y = -self.Ly + self.dy * (np.arange(self.Ny + 1) + 0.5)
        y.setflags(write=False)
        return y

    def doubled(self) -> "Grid":
        """Grid with twice the half-width and the same spacing."""
        return Grid(Ly=2.0 * self.Ly, Ny=2 * (self.Ny + 1) - 1, Kmax=self.Kmax)

    def with_kmax(self, Kmax: int) -> "Grid":
        return Grid(Ly=self.Ly, Ny=self.Ny, Kmax=Kmax)


def resolved_grid(Ly: float, nu: float, k: int, points_per_width: float = 8.0,
                  dy_max: float = 0.05, Kmax: int = 16) -> Grid:
    """Grid whose spacing resolves the shear layer of width ``(nu/k)^{1/4}``.

    The number of interior nodes is rounded up to an odd integer so that
    ``y = 0`` is a node.
    """
    width = (nu / max(k, 1)) ** 0.25
    dy = min(dy_max, width / points_per_width)
    ny = int(np.ceil(2.0 * Ly / dy)) - 1
    if ny % 2 == 0:
        ny += 1
    return Grid(Ly=Ly, Ny=max(ny, 3), Kmax=Kmax)


def band_weight(k: int) -> float:
    """x-integral weight of one band: ``2 pi`` for k = 0, ``4 pi`` otherwise."""
    return TWO_PI * (2.0 if k != 0 else 1.0)


@dataclass
class ModeField:
    """Profile of one x-Fourier band on the interior y-grid."""

    k: int
    values: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise ValueError(f"band index must be a non-negative integer, got {self.k}")
        self.k = int(self.k)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.Ny,):
            raise GridMismatchError(
                f"values have shape {self.values.shape}, grid expects ({self.grid.Ny},)")

    @classmethod
    def zeros(cls, grid: Grid, k: int) -> "ModeField":
        return cls(k, np.zeros(grid.Ny, dtype=complex), grid)

    @classmethod
    def from_function(cls, grid: Grid, k: int, fn) -> "ModeField":
        return cls(k, fn(grid.y), grid)

    def copy(self) -> "ModeField":
        return ModeField(self.k, self.values.copy(), self.grid)

    def __mul__(self, c):
        return ModeField(self.k, self.values * c, self.grid)

    __rmul__ = __mul__

    def __add__(self, other: "ModeField") -> "ModeField":
        _check_pair(self, other)
        return ModeField(self.k, self.values + other.values, self.grid)

    def __sub__(self, other: "ModeField") -> "ModeField":
        _check_pair(self, other)
        return ModeField(self.k, self.values - other.values, self.grid)


@dataclass
class PerturbationState:
    """All bands ``k = 0..Kmax`` of a real perturbation field.

    ``modes[k]`` is the profile of band ``k``; the band ``-k`` is its
    complex conjugate and is not stored.
    """

    modes: np.ndarray
    grid: Grid = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=complex)
        expected = (self.grid.Kmax + 1, self.grid.Ny)
        if self.modes.shape != expected:
            raise GridMismatchError(f"modes have shape {self.modes.shape}, expected {expected}")

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "PerturbationState":
        return cls(np.zeros((grid.Kmax + 1, grid.Ny), dtype=complex), grid, time)

    def mode(self, k: int) -> ModeField:
        return ModeField(k, self.modes[k], self.grid)

    def to_physical(self, nx: int) -> np.ndarray:
        """Real field on an ``nx``-point x-grid, shape ``(nx, Ny)``."""
        return to_physical(self.modes, nx)

    @classmethod
    def from_physical(cls, field_xy: np.ndarray, grid: Grid, time: float = 0.0):
        return cls(from_physical(field_xy, grid.Kmax), grid, time)

    def norm(self) -> float:
        return float(np.sqrt(sum(l2_norm(self.mode(k)) ** 2 for k in range(self.grid.Kmax + 1))))


def to_physical(modes: np.ndarray, nx: int) -> np.ndarray:
    """Inverse x-transform of band profiles ``(K+1, Ny)`` to ``(nx, Ny)``."""
    kp1 = modes.shape[0]
    if nx < 2 * kp1 - 1:
        raise ValueError(f"nx={nx} cannot represent {kp1 - 1} bands")
    spec = np.zeros((nx // 2 + 1, modes.shape[1]), dtype=complex)
    spec[:kp1] = modes
    return np.fft.irfft(spec, n=nx, axis=0) * nx


def from_physical(field_xy: np.ndarray, Kmax: int) -> np.ndarray:
    """Forward x-transform of a real ``(nx, Ny)`` field, truncated to ``Kmax``."""
    nx = field_xy.shape[0]
    spec = np.fft.rfft(field_xy, axis=0) / nx
    return spec[: Kmax + 1].copy()


def _check_pair(f: ModeField, g: ModeField):
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    if f.k != g.k:
        raise GridMismatchError(f"fields live on different bands ({f.k} vs {g.k})")


# --------------------------------------------------------------------------
# operators

@dataclass(frozen=True)
class TridiagonalOperator:
    """Complex tridiagonal matrix stored by diagonals.

    ``lower[i]`` multiplies ``x[i]`` in row ``i + 1`` and ``upper[i]``
    multiplies ``x[i + 1]`` in row ``i``.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    k: int = 0
    nu: float = 0.0

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        out[:-1] += self.upper * x[1:]
        out[1:] += self.lower * x[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)).astype(complex)

    def to_banded(self) -> np.ndarray:
        """``(3, n)`` storage for :func:`scipy.linalg.solve_banded`."""
        ab = np.zeros((3, self.n), dtype=complex)
        ab[0, 1:] = self.upper
        ab[1] = self.diag
        ab[2, :-1] = self.lower
        return ab

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self.to_banded(), rhs, check_finite=False)

    def eigvalsh(self) -> np.ndarray:
        from scipy.linalg import eigvalsh_tridiagonal
        return eigvalsh_tridiagonal(self.diag.real, self.upper.real)


def assemble_laplacian_k(grid: Grid, k: int, nu: float = 0.0) -> TridiagonalOperator:
    """Three-point ``d^2/dy^2 - k^2`` with Dirichlet ends.

    ``nu`` is stored on the operator as metadata and does not scale it.
    """
    if k < 0:
        raise ValueError(f"wavenumber must be non-negative, got {k}")
    if grid.Ny < 3:
        raise GridTooSmallError(f"need at least 3 interior points, got Ny={grid.Ny}")
    n = grid.Ny
    inv = 1.0 / grid.dy ** 2
    off = np.full(n - 1, inv, dtype=complex)
    diag = np.full(n, -2.0 * inv - float(k) ** 2, dtype=complex)
    return TridiagonalOperator(off, diag, off.copy(), k=int(k), nu=float(nu))


def laplacian_apply(f: np.ndarray, dy: float, k: int) -> np.ndarray:
    """``(d^2/dy^2 - k^2) f`` along the last axis, Dirichlet ends."""
    out = -2.0 * f
    out[..., 1:] += f[..., :-1]
    out[..., :-1] += f[..., 1:]
    out /= dy * dy
    if k:
        out -= float(k) ** 2 * f
    return out


def poisson_solve_k(grid: Grid, k: int, omega: ModeField) -> ModeField:
    """Stream function ``psi`` with ``Delta_k psi = omega`` and Dirichlet ends.

    Raises
    ------
    ZeroModeError
        For ``k = 0``; the shear velocity is obtained by integration instead.
    """
    if k == 0:
        raise ZeroModeError("Delta_0 is not inverted; use the shear antiderivative")
    if omega.grid != grid or omega.k != k:
        raise GridMismatchError("omega does not match the requested grid/band")
    psi = poisson_solve_array(omega.values, grid.dy, k)
    return ModeField(k, psi, grid)


def poisson_solve_array(omega: np.ndarray, dy: float, k: int) -> np.ndarray:
    """Solve ``Delta_k psi = omega`` along the last axis (any leading shape)."""
    if k == 0:
        raise ZeroModeError("Delta_0 is not inverted; use the shear antiderivative")
    n = omega.shape[-1]
    inv = 1.0 / dy ** 2
    ab = np.empty((3, n))
    ab[0] = inv
    ab[1] = -2.0 * inv - float(k) ** 2
    ab[2] = inv
    rhs = np.moveaxis(np.asarray(omega, dtype=complex), -1, 0)
    psi = solve_banded((1, 1), ab, rhs.reshape(n, -1), check_finite=False)
    return np.moveaxis(psi.reshape(rhs.shape), 0, -1)


# --------------------------------------------------------------------------
# difference stencils on arrays (last axis is y)

def d_plus(f: np.ndarray, dy: float) -> np.ndarray:
    """Staggered difference on the ``Ny + 1`` half nodes, Dirichlet ends."""
    pad = [(0, 0)] * (f.ndim - 1) + [(1, 1)]
    return np.diff(np.pad(f, pad), axis=-1) / dy


def d_center(f: np.ndarray, dy: float) -> np.ndarray:
    """Centered difference on the interior nodes, Dirichlet ends."""
    out = np.zeros_like(f)
    out[..., 1:-1] = f[..., 2:] - f[..., :-2]
    out[..., 0] = f[..., 1]
    out[..., -1] = -f[..., -2]
    return out / (2.0 * dy)


def d_one_sided(f: np.ndarray, dy: float) -> np.ndarray:
    """Centered interior difference with one-sided first-order ends."""
    return np.gradient(f, dy, axis=-1, edge_order=1)


def average_plus(f: np.ndarray) -> np.ndarray:
    """Average of neighbours on the half nodes, Dirichlet ends."""
    pad = [(0, 0)] * (f.ndim - 1) + [(1, 1)]
    g = np.pad(f, pad)
    return 0.5 * (g[..., 1:] + g[..., :-1])


def _sq(f: np.ndarray) -> np.ndarray:
    return np.sum(f.real ** 2 + f.imag ** 2, axis=-1)


# --------------------------------------------------------------------------
# inner products and norms

def l2_inner(f: ModeField, g: ModeField) -> complex:
    """Band inner product ``w_k dy sum f conj(g)``.

    This is the trapezoid rule on ``[-Ly, Ly]`` with the Dirichlet zero
    end values, times the x-integral weight of the band.
    """
    _check_pair(f, g)
    return complex(band_weight(f.k) * f.grid.dy * np.vdot(g.values, f.values))


def l2_norm(f: ModeField) -> float:
    return float(np.sqrt(band_weight(f.k) * f.grid.dy * _sq(f.values)))


def dy_norm(f: ModeField, stencil: str = "staggered") -> float:
    """``||d_y f||`` with the staggered (default) or one-sided stencil."""
    dy = f.grid.dy
    if stencil == "staggered":
        s = _sq(d_plus(f.values, dy))
    elif stencil == "one-sided":
        s = _sq(d_one_sided(f.values, dy))
    else:
        raise ValueError(f"unknown stencil {stencil!r}")
    return float(np.sqrt(band_weight(f.k) * dy * s))


def grad_norm(f: ModeField, stencil: str = "staggered") -> float:
    """``||grad_k f||`` with ``||grad_k f||^2 = k^2 ||f||^2 + ||d_y f||^2``.

    The staggered stencil treats ``f`` as a Dirichlet field and makes
    ``||grad_k f||^2 = -<Delta_k f, f>`` exact. The one-sided stencil
    differentiates the interior samples only, so constants have zero
    gradient.
    """
    return float(np.hypot(f.k * l2_norm(f), dy_norm(f, stencil)))


def weighted_norm_y_dx(f: ModeField) -> float:
    """``||y d_x f|| = k ||y f||``."""
    return float(f.k * np.sqrt(band_weight(f.k) * f.grid.dy * _sq(f.grid.y * f.values)))


def linf_norm_gradpsi(psi: ModeField) -> float:
    """Grid maximum of ``|(ik psi, d_y psi)|`` for one band.

    The y-derivative is the centered difference. Summing this quantity
    over bands bounds the L-infinity norm of the full velocity.
    """
    return float(linf_gradpsi_array(psi.values, psi.grid.dy, psi.k))


def linf_gradpsi_array(psi: np.ndarray, dy: float, k: int) -> np.ndarray:
    """Vectorized :func:`linf_norm_gradpsi` over leading axes."""
    # hypot avoids the underflow and overflow of squaring tiny or huge profiles
    mag = np.hypot(float(k) * np.abs(psi), np.abs(d_center(psi, dy)))
    return np.max(mag, axis=-1)


def band_quadratics(omega: np.ndarray, psi: np.ndarray | None, grid: Grid, k: int) -> dict:
    """All band quadratic forms used by the diagnostics.

    Parameters
    ----------
    omega : ndarray, shape (..., Ny)
        Vorticity profiles, any number of leading sample axes.
    psi : ndarray or None
        Matching stream functions; required for ``k >= 1``.
    grid : Grid
    k : int

    Returns
    -------
    dict of ndarray
        Each entry has the leading shape of ``omega``. Keys:

        ``norm2``        ``||w||^2``
        ``dy2``          ``||d_y w||^2``
        ``grad2``        ``||grad w||^2``
        ``dx2``          ``||d_x w||^2``
        ``lap2``         ``||Delta w||^2``
        ``cross``        ``Re <d_y w, y d_x w>``
        ``cross_imag``   imaginary part of the same product
        ``ydx2``         ``||y d_x w||^2``
        ``ydx_grad2``    ``||y d_x grad w||^2``
        ``lap_ydxy``     ``Re <Delta w, y d_xy w>``
        ``ydx2_sbp``     ``||y d_x w||^2`` in summation-by-parts form
        ``dxy_psi2_sbp`` ``||d_xy psi||^2`` in summation-by-parts form
        ``u2``           ``||grad psi||^2``, the velocity energy
        ``dx_gradpsi2``  ``||grad d_x psi||^2``
        ``dxy_psi2``     ``||d_xy psi||^2``
        ``dxx_psi2``     ``||d_xx psi||^2``
        ``linf_gradpsi`` band L-infinity norm of ``grad psi``
    """
    dy = grid.dy
    w = band_weight(k) * dy
    k2 = float(k) ** 2
    y = grid.y
    yh = grid.y_half
    dpw = d_plus(omega, dy)
    lap = laplacian_apply(omega, dy, k)
    out = {}
    out["norm2"] = w * _sq(omega)
    out["dy2"] = w * _sq(dpw)
    out["dx2"] = k2 * out["norm2"]
    out["grad2"] = out["dx2"] + out["dy2"]
    out["lap2"] = w * _sq(lap)
    # Re <D+ w, ik y_half M w> on the staggered nodes
    prod = np.sum(dpw * np.conj(1j * k * yh * average_plus(omega)), axis=-1)
    out["cross"] = w * prod.real
    out["cross_imag"] = w * prod.imag
    yw2 = w * _sq(y * omega)
    out["ydx2"] = k2 * yw2
    ybar2 = 0.5 * (np.pad(y ** 2, (1, 0)) + np.pad(y ** 2, (0, 1)))
    ybar2[0] = ybar2[-1] = 0.5 * grid.Ly ** 2 + 0.5 * y[0] ** 2
    out["ydx_grad2"] = k2 * (k2 * yw2 + w * np.sum(ybar2 * np.abs(dpw) ** 2, axis=-1))
    dxy = 1j * k * y * d_center(omega, dy)
    out["lap_ydxy"] = w * np.sum(lap * np.conj(dxy), axis=-1).real
    # Second-order forms in which the transport identity for the cross term
    # holds exactly on the grid: k^2/4 (||D+(y^2 w)||^2 - Re<D+(y^4 w), D+ w>)
    # and k^2/4 (||y w||^2 - Re<y^2 psi, Delta w>).
    y2 = y * y
    out["ydx2_sbp"] = 0.25 * k2 * w * (
        _sq(d_plus(y2 * omega, dy))
        - np.sum(d_plus(y2 * y2 * omega, dy) * np.conj(dpw), axis=-1).real)
    if k == 0:
        zero = np.zeros(omega.shape[:-1])
        for key in ("u2", "dx_gradpsi2", "dxy_psi2", "dxx_psi2", "linf_gradpsi", "dxy_psi2_sbp"):
            out[key] = zero.copy()
        return out
    if psi is None:
        raise ValueError("psi is required for k >= 1")
    psi_n2 = w * _sq(psi)
    psi_dy2 = w * _sq(d_plus(psi, dy))
    out["u2"] = k2 * psi_n2 + psi_dy2
    out["dx_gradpsi2"] = k2 * out["u2"]
    out["dxy_psi2"] = k2 * psi_dy2
    out["dxx_psi2"] = k2 * k2 * psi_n2
    out["linf_gradpsi"] = linf_gradpsi_array(psi, dy, k)
    out["dxy_psi2_sbp"] = 0.25 * k2 * (yw2 - w * np.sum(y2 * psi * np.conj(lap), axis=-1).real)
    return out
