"""Numerical laboratory for 2D Navier-Stokes perturbations of Poiseuille flow.

The flow ``(y^2, 0)`` on the channel ``T x R`` is perturbed by a
vorticity field expanded in x-bands ``k``. Each band is discretized in
``y`` by second-order finite differences on a truncated interval and
advanced in time by Crank-Nicolson. Subpackages and modules:

``discretization``   grids, band fields, difference operators and norms
``linear``           band operators, exact and discrete semigroups
``hypocoercivity``   energy functional, audits and energy identities
``decay``            decay-rate fits, scaling sweeps, semigroup integrals
``nonlinear``        full perturbation dynamics and threshold runs
``harness``          configuration, orchestration and command line
"""
from . import decay, discretization, hypocoercivity, linear, nonlinear
from .discretization import Grid, ModeField, PerturbationState
from .errors import ConfigError, LabError, RunError
from .kernels import BACKEND, available_backends
from .linear import ModeOperator, StepperConfig, Trajectory, evolve

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigError", "Grid", "LabError", "ModeField", "ModeOperator",
    "PerturbationState", "RunError", "StepperConfig", "Trajectory", "available_backends",
    "decay", "discretization", "evolve", "hypocoercivity", "linear", "nonlinear",
]
