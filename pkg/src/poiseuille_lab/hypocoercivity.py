"""Time-weighted energy functional and its diagnostics.

For a band-``k`` solution of the linearized problem

    Phi(t) = 1/2 ||w||^2 + 1/2 alpha nu t ||grad w||^2
             + 2 beta nu t^2 Re<d_y w, y d_x w>
             + 1/2 gamma nu t^3 (||y d_x w||^2 + 2 ||grad d_x psi||^2)

with ``alpha = eps^2``, ``beta = eps^3``, ``gamma = 16 eps^4``. The
functional is non-increasing and its derivative is bounded by
``-gamma nu^2 t^3 ||d_x w||^2``. The module evaluates ``Phi`` from band
quadratics, audits those two properties on computed trajectories and
measures the residuals of the four energy identities behind them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .discretization import ModeField, band_quadratics
from .errors import ConstraintViolationError, SeriesTooShortError

EPS_MAX = 1.0 / 36.0
_REL = 1e-12


@dataclass(frozen=True)
class HypoConstants:
    """Weights of the functional.

    Build through :func:`make_constants`; :meth:`unchecked` skips the
    admissibility checks and exists for negative controls.
    """

    eps: float
    alpha: float
    beta: float
    gamma: float

    @classmethod
    def unchecked(cls, alpha: float, beta: float, gamma: float, eps: float = float("nan")):
        return cls(eps, alpha, beta, gamma)

    def violations(self) -> list:
        """Names of the admissibility inequalities that fail, in check order."""
        a, b, g = self.alpha, self.beta, self.gamma
        out = []
        if not a < 0.5 * (1 - _REL):
            out.append("alpha < 1/2")
        if not 16 * b * b <= a * g * (1 + _REL):
            out.append("16 beta^2 <= alpha gamma")
        if not 2 * a * a < b * (1 - _REL):
            out.append("2 alpha^2 < beta")
        if not b < 0.25 * a * (1 - _REL):
            out.append("beta < alpha/4")
        if not 9 * g < 4 * b * (1 - _REL):
            out.append("9 gamma < 4 beta")
        return out

    def scaled(self, gamma_factor: float) -> "HypoConstants":
        return HypoConstants(self.eps, self.alpha, self.beta, self.gamma * gamma_factor)


def make_constants(eps: float) -> HypoConstants:
    """Constants ``(eps^2, eps^3, 16 eps^4)`` after checking admissibility.

    Raises
    ------
    ConstraintViolationError
        If ``eps`` is not positive or one of the inequalities fails; the
        exception's ``inequality`` attribute names the first failure.
    """
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise ConstraintViolationError(f"epsilon must be positive, got {eps}", "eps > 0")
    c = HypoConstants(eps, eps ** 2, eps ** 3, 16 * eps ** 4)
    bad = c.violations()
    if bad:
        raise ConstraintViolationError(
            f"epsilon={eps:g} violates {bad[0]} (admissible range is 0 < eps < 1/36)", bad[0])
    return c


@dataclass
class FunctionalSample:
    """``Phi`` and its four terms at one time."""

    t: float
    term_L2: float
    term_grad: float
    term_cross: float
    term_weighted: float
    phi: float
    cross_imag: float
    constants: HypoConstants

    def lower_bound(self) -> float:
        """``1/2 ||w||^2 + 1/4 alpha nu t ||grad w||^2 + 1/4 gamma nu t^3 [..]``."""
        return self.term_L2 + 0.5 * self.term_grad + 0.5 * self.term_weighted

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = asdict(self.constants)
        return d


def functional_terms(quad: dict, t, nu: float, c: HypoConstants) -> dict:
    """Vectorized functional terms from :func:`band_quadratics` output."""
    t = np.asarray(t, dtype=float)
    terms = {
        "term_L2": 0.5 * quad["norm2"],
        "term_grad": 0.5 * c.alpha * nu * t * quad["grad2"],
        "term_cross": 2.0 * c.beta * nu * t ** 2 * quad["cross"],
        "term_weighted": 0.5 * c.gamma * nu * t ** 3 * (quad["ydx2"] + 2.0 * quad["dx_gradpsi2"]),
    }
    terms["phi"] = terms["term_L2"] + terms["term_grad"] + terms["term_cross"] + terms["term_weighted"]
    terms["cross_imag"] = 2.0 * c.beta * nu * t ** 2 * quad["cross_imag"]
    return terms


def compute_functional(omega: ModeField, psi: ModeField, t: float, nu: float,
                       c: HypoConstants) -> FunctionalSample:
    """Evaluate ``Phi(t)`` for one band snapshot (``k >= 1``)."""
    if omega.k == 0:
        raise ValueError("the functional is defined for x-dependent bands (k >= 1)")
    if psi.k != omega.k or psi.grid != omega.grid:
        raise ValueError("psi does not match omega's band/grid")
    quad = band_quadratics(omega.values, psi.values, omega.grid, omega.k)
    terms = functional_terms(quad, t, nu, c)
    return FunctionalSample(t=float(t), constants=c,
                            **{key: float(v) for key, v in terms.items()})


@dataclass
class FunctionalSeries:
    """``Phi`` along a trajectory with the quadratics needed by the audit."""

    times: np.ndarray
    terms: dict
    quad: dict
    nu: float
    k: int
    constants: HypoConstants

    @classmethod
    def from_trajectory(cls, traj, c: HypoConstants) -> "FunctionalSeries":
        if traj.op.k == 0:
            raise ValueError("the functional is defined for x-dependent bands (k >= 1)")
        quad = traj.quad
        if quad is None:
            quad = band_quadratics(traj.omega, traj.psi, traj.op.grid, traj.op.k)
        return cls(traj.times, functional_terms(quad, traj.times, traj.op.nu, c), quad,
                   traj.op.nu, traj.op.k, c)

    def __len__(self):
        return self.times.shape[0]

    def sample(self, i: int) -> FunctionalSample:
        return FunctionalSample(t=float(self.times[i]), constants=self.constants,
                                **{key: float(v[i]) for key, v in self.terms.items()})


@dataclass
class AuditReport:
    """Outcome of :func:`audit_monotonicity`.

    ``max_excess`` is the largest value over sample intervals of
    ``(dPhi/dt + gamma nu^2 t^3 ||d_x w||^2) / scale`` and must stay
    below ``tol``. ``max_excess_statement`` is the same with the single
    power ``nu`` in front of the dissipation term.
    """

    max_excess: float
    max_excess_statement: float
    worst_time: float
    tol: float
    derivative_ok: bool
    statement_form_ok: bool
    monotone_ok: bool
    max_relative_increase: float
    lower_bound_ok: bool
    min_lower_bound_margin: float
    max_cross_imag: float
    records: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.derivative_ok and self.monotone_ok and self.lower_bound_ok

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("records")
        d["passed"] = self.passed
        return d


def audit_monotonicity(series: FunctionalSeries, nu: float | None = None, k: int | None = None,
                       c: HypoConstants | None = None, tol: float = 1e-3,
                       keep_records: bool = False) -> AuditReport:
    """Check monotonicity, the lower bound and the derivative bound of ``Phi``.

    Over each sample interval ``[t_i, t_{i+1}]`` the increment of ``Phi``
    is compared with the trapezoid integral of ``-gamma nu^2 t^3
    ||d_x w||^2``. The excess is normalized by the local dissipation
    scale ``nu ||grad w||^2 + gamma nu^2 t^3 ||d_x w||^2``.
    """
    nu = series.nu if nu is None else nu
    c = series.constants if c is None else c
    if len(series) < 3:
        raise SeriesTooShortError(f"audit needs at least 3 samples, got {len(series)}")
    if c is not series.constants:
        terms = functional_terms(series.quad, series.times, nu, c)
    else:
        terms = series.terms
    t = series.times
    phi = terms["phi"]
    dx2 = series.quad["dx2"]
    grad2 = series.quad["grad2"]
    dt = np.diff(t)
    dphi = np.diff(phi) / dt

    def excess(nu_power):
        diss = c.gamma * nu ** nu_power * t ** 3 * dx2
        avg = 0.5 * (diss[1:] + diss[:-1])
        scale = nu * 0.5 * (grad2[1:] + grad2[:-1]) + avg
        floor = 1e-300 + 1e-14 * abs(phi[0]) / max(t[-1], 1e-300)
        return (dphi + avg) / np.maximum(scale, floor)

    ex2 = excess(2)
    ex1 = excess(1)
    i_worst = int(np.argmax(ex2))
    rel_inc = np.diff(phi) / np.maximum(np.abs(phi[:-1]), 1e-300)
    lower = terms["term_L2"] + 0.5 * terms["term_grad"] + 0.5 * terms["term_weighted"]
    margin = (phi - lower) / np.maximum(np.abs(phi), 1e-300)
    records = []
    if keep_records:
        for i in range(len(t)):
            r = float(ex2[min(i, len(ex2) - 1)])
            records.append({
                "t": float(t[i]), "phi": float(phi[i]),
                "terms": [float(terms[key][i]) for key in
                          ("term_L2", "term_grad", "term_cross", "term_weighted")],
                "excess": r, "pass": bool(r <= tol and margin[i] >= -1e-10),
            })
    return AuditReport(
        max_excess=float(ex2.max()),
        max_excess_statement=float(ex1.max()),
        worst_time=float(t[i_worst]),
        tol=tol,
        derivative_ok=bool(ex2.max() <= tol),
        statement_form_ok=bool(ex1.max() <= tol),
        monotone_ok=bool(np.all(phi[1:] <= phi[:-1] * (1 + 1e-10))),
        max_relative_increase=float(rel_inc.max()),
        lower_bound_ok=bool(margin.min() >= -1e-10),
        min_lower_bound_margin=float(margin.min()),
        max_cross_imag=float(np.max(np.abs(terms["cross_imag"]))),
        records=records,
    )


IDENTITY_NAMES = (
    "d/dt 1/2||w||^2 = -nu||grad w||^2",
    "d/dt 1/2||grad w||^2 = -nu||Delta w||^2 - 2<y d_x w, d_y w>",
    "d/dt <d_y w, y d_x w> = -2||y d_x w||^2 - 4||d_xy psi||^2 - 2nu<Delta w, y d_xy w>",
    "d/dt 1/2[||y d_x w||^2 + 2||grad d_x psi||^2] = -nu||d_x w||^2 - nu||y d_x grad w||^2",
)


def identity_terms(quad: dict, nu: float):
    """Left quantities ``Q_i`` and right-hand terms of the four identities.

    All terms are the grid quadratics of :func:`band_quadratics` for which
    summation by parts is exact, so the only residual left is the time
    discretization error. The third identity uses the ``*_sbp`` forms of
    ``||y d_x w||^2`` and ``||d_xy psi||^2``; they differ from the plain
    forms by ``O(dy^2)``.
    """
    q = [
        0.5 * quad["norm2"],
        0.5 * quad["grad2"],
        quad["cross"],
        0.5 * (quad["ydx2"] + 2.0 * quad["dx_gradpsi2"]),
    ]
    rhs_terms = [
        [-nu * quad["grad2"]],
        [-nu * quad["lap2"], -2.0 * quad["cross"]],
        [-2.0 * quad["ydx2_sbp"], -4.0 * quad["dxy_psi2_sbp"], -2.0 * nu * quad["lap_ydxy"]],
        [-nu * quad["dx2"], -nu * quad["ydx_grad2"]],
    ]
    return q, rhs_terms


@dataclass
class IdentityResiduals:
    """Largest relative residual of each identity over the interior samples."""

    residuals: np.ndarray
    times: np.ndarray
    per_sample: np.ndarray = field(repr=False)
    dt: float = 0.0

    def as_dict(self) -> dict:
        return {name: float(r) for name, r in zip(IDENTITY_NAMES, self.residuals)}


def verify_identities(traj, nu: float | None = None, dt: float | None = None) -> IdentityResiduals:
    """Residuals of the four energy identities along a trajectory.

    The time derivative is the centered difference over three
    consecutive, equally spaced samples; the right-hand side is taken
    from the middle snapshot. Each residual is normalized by the sum of
    the absolute values of its right-hand-side terms; when all of them
    vanish (identities 3 and 4 on band 0) the residual is the absolute
    mismatch. Samples whose difference stencil reaches into the damped
    startup steps (``traj.meta["startup_steps"]``) are skipped.
    """
    nu = traj.op.nu if nu is None else nu
    t = traj.times
    if len(t) < 3:
        raise SeriesTooShortError("identities need at least three samples")
    steps = np.diff(t)
    h = float(steps.mean()) if dt is None else float(dt)
    if np.max(np.abs(steps - h)) > 1e-9 * h:
        raise ValueError("identity check needs equally spaced samples")
    quad = traj.quad
    if quad is None:
        quad = band_quadratics(traj.omega, traj.psi if traj.op.k else None, traj.op.grid, traj.op.k)
    q, rhs_terms = identity_terms(quad, nu)
    res = np.zeros((4, len(t) - 2))
    for i in range(4):
        deriv = (q[i][2:] - q[i][:-2]) / (2 * h)
        rhs = sum(term[1:-1] for term in rhs_terms[i])
        scale = sum(np.abs(term[1:-1]) for term in rhs_terms[i])
        mismatch = np.abs(deriv - rhs)
        res[i] = np.where(scale > 0, mismatch / np.where(scale > 0, scale, 1.0), mismatch)
    t_start = traj.meta.get("startup_steps", 0) * traj.dt
    keep = t[:-2] >= t_start * (1 - 1e-12)
    if not np.any(keep):
        raise SeriesTooShortError("no samples left after the startup steps")
    res = res[:, keep]
    return IdentityResiduals(res.max(axis=1), t[1:-1][keep], res, h)


def cross_term_bound(quad: dict, t: float, c: HypoConstants):
    """Both sides of ``2 beta t^2 |<d_y w, y d_x w>| <= alpha t/4 ||d_y w||^2 + 4 beta^2 t^3/alpha ||y d_x w||^2``."""
    lhs = 2 * c.beta * t ** 2 * np.hypot(quad["cross"], quad["cross_imag"])
    rhs = 0.25 * c.alpha * t * quad["dy2"] + 4 * c.beta ** 2 * t ** 3 / c.alpha * quad["ydx2"]
    return lhs, rhs


def stream_function_bound(quad: dict):
    """Both sides of ``||grad d_x psi||^2 <= ||y d_x w||^2 + 3 ||d_xy psi||^2``."""
    return quad["dx_gradpsi2"], quad["ydx2"] + 3.0 * quad["dxy_psi2"]


def envelope(t, nu: float, k: int, c: HypoConstants):
    """Algebraic decay factor ``1 / (1 + gamma/2 nu^2 k^2 t^4)`` of ``||w||^2``."""
    t = np.asarray(t, dtype=float)
    return 1.0 / (1.0 + 0.5 * c.gamma * nu ** 2 * k ** 2 * t ** 4)


def velocity_bound(t, nu: float, k: int, c: HypoConstants):
    """Factor ``2 / (gamma nu k^2 t^3)`` bounding ``||u_k||^2 / ||g_k||^2``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t > 0, 2.0 / (c.gamma * nu * k ** 2 * np.where(t > 0, t, 1.0) ** 3), np.inf)
