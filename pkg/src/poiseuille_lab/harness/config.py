"""Experiment configuration.

A configuration is a YAML file with the sections ``grid``, ``physics``,
``stepper``, ``hypo`` and ``experiment`` plus the top-level keys
``seed`` and ``output_dir``. Unknown keys are rejected; every error
names the dotted path of the offending field.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..hypocoercivity import EPS_MAX
from ..linear import SCHEMES
from ..nonlinear import GAUGES

KINDS = ("linear-decay", "functional-audit", "identities", "semigroup-integrals",
         "scaling-sweep", "nonlinear-threshold")
DATA = ("gaussian", "random")


@dataclass
class GridSection:
    """``Ny = None`` picks a grid resolving the shear layer of each run."""

    Ly: float = 10.0
    Ny: int | None = None
    Kmax: int = 16
    nx: int | None = None


@dataclass
class PhysicsSection:
    nu: float = 1e-3
    nu_list: list | None = None
    k: int = 1
    k_list: list | None = None


@dataclass
class StepperSection:
    """``dt = "auto"`` uses the per-run default step; ``T = None`` the kind's default horizon."""

    dt: float | str = "auto"
    T: float | None = None
    samples: int = 400
    scheme: str = "crank-nicolson"


@dataclass
class HypoSection:
    epsilon: float = 0.02


@dataclass
class ExperimentSection:
    kind: str = "linear-decay"
    datum: str = "gaussian"
    width: float = 1.0
    eps0: float = 0.01
    eps0_list: list | None = None
    shear_amplitude: float = 0.0
    gauge: str = "left"
    heat_control: bool = True
    k_fixed: int = 1
    nu_fixed: float = 1e-3
    tol: float = 1e-3
    halvings: int = 2
    exploratory: bool = False
    checkpoint_every: int = 0


@dataclass
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    stepper: StepperSection = field(default_factory=StepperSection)
    hypo: HypoSection = field(default_factory=HypoSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    seed: int = 0
    output_dir: str = "runs/out"

    @property
    def kind(self) -> str:
        return self.experiment.kind

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_yaml())
        return path

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form, ``output_dir`` excluded."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"physics.nu": 1e-2})``."""
        d = self.to_dict()
        for key, value in changes.items():
            _set_path(d, key, value)
        return from_dict(d)


_SECTIONS = {
    "grid": GridSection,
    "physics": PhysicsSection,
    "stepper": StepperSection,
    "hypo": HypoSection,
    "experiment": ExperimentSection,
}


# --------------------------------------------------------------------------
# field coercion

def _number(value, path, integer=False):
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"expected a number, got {value!r}", path) from None
    if not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", path)
    return value


def _positive(value, path, integer=False):
    value = _number(value, path, integer)
    if value <= 0:
        raise ConfigError(f"must be positive, got {value!r}", path)
    return value


def _number_list(value, path, integer=False):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"expected a list, got {value!r}", path)
    if len(value) == 0:
        raise ConfigError("list must not be empty", path)
    return [_positive(v, f"{path}[{i}]", integer) for i, v in enumerate(value)]


def _choice(value, options, path):
    if value not in options:
        raise ConfigError(f"must be one of {list(options)}, got {value!r}", path)
    return value


def _bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", path)
    return value


def _section(name, raw):
    cls = _SECTIONS[name]
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"expected a mapping, got {raw!r}", name)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in names:
            raise ConfigError("unknown field", f"{name}.{key}")
    return cls(**raw)


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    g, p, s, h, e = cfg.grid, cfg.physics, cfg.stepper, cfg.hypo, cfg.experiment
    g.Ly = _positive(g.Ly, "grid.Ly")
    if g.Ny is not None:
        g.Ny = _positive(g.Ny, "grid.Ny", integer=True)
        if g.Ny < 3:
            raise ConfigError(f"need at least 3 interior points, got {g.Ny}", "grid.Ny")
    g.Kmax = _positive(g.Kmax, "grid.Kmax", integer=True)
    if g.nx is not None:
        g.nx = _positive(g.nx, "grid.nx", integer=True)
        if g.nx < 3 * g.Kmax + 1:
            raise ConfigError(f"nx={g.nx} aliases the retained bands; need >= {3 * g.Kmax + 1}",
                              "grid.nx")

    p.nu = _positive(p.nu, "physics.nu")
    p.nu_list = _number_list(p.nu_list, "physics.nu_list")
    p.k = _number(p.k, "physics.k", integer=True)
    if p.k < 0:
        raise ConfigError(f"must be >= 0, got {p.k}", "physics.k")
    p.k_list = _number_list(p.k_list, "physics.k_list", integer=True)

    if s.dt != "auto":
        s.dt = _positive(s.dt, "stepper.dt")
    if s.T is not None:
        s.T = _positive(s.T, "stepper.T")
    s.samples = _positive(s.samples, "stepper.samples", integer=True)
    s.scheme = _choice(s.scheme, SCHEMES, "stepper.scheme")

    h.epsilon = _positive(h.epsilon, "hypo.epsilon")
    if not h.epsilon < EPS_MAX:
        raise ConfigError(f"epsilon must lie in (0, 1/36), got {h.epsilon}", "hypo.epsilon")

    e.kind = _choice(e.kind, KINDS, "experiment.kind")
    e.datum = _choice(e.datum, DATA, "experiment.datum")
    e.width = _positive(e.width, "experiment.width")
    e.eps0 = _number(e.eps0, "experiment.eps0")
    if e.eps0 < 0:
        raise ConfigError(f"must be >= 0, got {e.eps0}", "experiment.eps0")
    e.eps0_list = _number_list(e.eps0_list, "experiment.eps0_list")
    e.shear_amplitude = _number(e.shear_amplitude, "experiment.shear_amplitude")
    e.gauge = _choice(e.gauge, GAUGES, "experiment.gauge")
    e.heat_control = _bool(e.heat_control, "experiment.heat_control")
    e.k_fixed = _positive(e.k_fixed, "experiment.k_fixed", integer=True)
    e.nu_fixed = _positive(e.nu_fixed, "experiment.nu_fixed")
    e.tol = _positive(e.tol, "experiment.tol")
    e.halvings = _positive(e.halvings, "experiment.halvings", integer=True)
    e.exploratory = _bool(e.exploratory, "experiment.exploratory")
    e.checkpoint_every = _number(e.checkpoint_every, "experiment.checkpoint_every", integer=True)
    if e.checkpoint_every < 0:
        raise ConfigError("must be >= 0", "experiment.checkpoint_every")
    if e.kind in ("linear-decay", "functional-audit", "semigroup-integrals") and p.k == 0 \
            and p.k_list is None:
        raise ConfigError(f"{e.kind} needs k >= 1", "physics.k")

    cfg.seed = _number(cfg.seed, "seed", integer=True)
    if cfg.seed < 0:
        raise ConfigError(f"must be >= 0, got {cfg.seed}", "seed")
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        raise ConfigError(f"expected a path, got {cfg.output_dir!r}", "output_dir")
    return cfg


# --------------------------------------------------------------------------
# loading

def from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a configuration from nested mappings."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"expected a mapping at the top level, got {type(raw).__name__}")
    raw = copy.deepcopy(raw)
    top = {"seed", "output_dir"} | set(_SECTIONS)
    for key in raw:
        if key not in top:
            raise ConfigError("unknown field", str(key))
    kw = {name: _section(name, raw.get(name)) for name in _SECTIONS}
    for key in ("seed", "output_dir"):
        if key in raw:
            kw[key] = raw[key]
    return _validate(ExperimentConfig(**kw))


def loads(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    return from_dict(raw)


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def _set_path(d: dict, key: str, value):
    parts = key.split(".")
    cur = d
    for i, part in enumerate(parts[:-1]):
        nxt = cur.get(part)
        if not isinstance(nxt, dict):
            raise ConfigError("not a section", ".".join(parts[:i + 1]))
        cur = nxt
    if parts[-1] not in cur:
        raise ConfigError("unknown field", key)
    cur[parts[-1]] = value


_EXPONENT = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+")


def _numeric(value):
    # YAML 1.1 reads exponent forms without a dot (``1e-4``) as strings
    if isinstance(value, str) and _EXPONENT.fullmatch(value):
        return float(value)
    if isinstance(value, list):
        return [_numeric(v) for v in value]
    return value


def parse_override(text: str) -> tuple:
    """Split ``key.path=value``; the value is parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override must look like key.path=value, got {text!r}")
    key, _, value = text.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"override has an empty key: {text!r}")
    try:
        parsed = yaml.safe_load(value) if value.strip() else None
    except yaml.YAMLError:
        raise ConfigError(f"cannot parse value {value!r}", key) from None
    if value.strip()[:1] in ("'", '"'):
        return key, parsed
    return key, _numeric(parsed)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    d = cfg.to_dict()
    for item in overrides or ():
        key, value = parse_override(item)
        _set_path(d, key, value)
    return from_dict(d)
