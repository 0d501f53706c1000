"""Run orchestration and persistence.

Every experiment is split into independent cells, one per parameter
point. A cell is a pure function of the configuration and its
parameters; it returns CSV rows, named verdicts and a JSON payload.
Cells fan out over worker processes and are aggregated in order, so the
CSV payload does not depend on the worker count.

Files written to the output directory:

``results.csv``     long-format rows, one header, no wall-clock data
``series.csv``      per-sample diagnostics where the kind has them
``*.csv.json``      sidecar with the config hash and the column list
``summary.json``    config, hash, verdicts, payload and failures
``runs.jsonl``      one line per run, append-only
``thresholds.csv``  nonlinear threshold records, append-only
``config.yaml``     the configuration as run
``checkpoints/``    nonlinear states (``.bin`` plus ``.json`` sidecar)
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..decay import (
    decay_run,
    default_window,
    fit_decay,
    gaussian_datum,
    integral_scaling,
    parallel_map,
    regress_scaling,
    semigroup_integrals,
)
from ..discretization import Grid, ModeField, l2_norm, resolved_grid
from ..errors import ConfigError, LabError, RunError
from ..hypocoercivity import (
    FunctionalSeries,
    IDENTITY_NAMES,
    audit_monotonicity,
    envelope,
    make_constants,
    velocity_bound,
    verify_identities,
)
from ..linear import ModeOperator, StepperConfig, default_dt, evolve, natural_time
from ..nonlinear import save_checkpoint, threshold_experiment
from .config import ExperimentConfig, from_dict

SCALING_NU = (1e-2, 1e-3, 1e-4, 1e-5)
SCALING_K = (1, 2, 4, 8)
EXPONENT_TOL = {"nu": 0.1, "k": 0.15, "heat": 0.05}
INTEGRAL_TOL = 0.1
ENVELOPE_SLACK = 1e-10


@dataclass
class RunRecord:
    """Outcome of one run or sweep.

    ``status`` is ``"pass"``, ``"fail"`` or ``"partial"`` (some cells
    failed, others passed).
    """

    config_hash: str
    kind: str
    start_time: float
    end_time: float
    status: str
    verdicts: dict
    payload: dict
    failures: list = field(default_factory=list)
    output_dir: str = ""
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# shared helpers

def _grid(cfg: ExperimentConfig, nu: float, k: int) -> Grid:
    g = cfg.grid
    if g.Ny is None:
        return resolved_grid(g.Ly, nu, k, Kmax=max(k, 1))
    return Grid(Ly=g.Ly, Ny=g.Ny, Kmax=max(k, 1))


def make_datum(cfg: ExperimentConfig, grid: Grid, k: int) -> ModeField:
    """Initial band profile: a Gaussian bump or a seeded random mix of bumps.

    The random datum draws four bumps with centers in ``[-2, 2]``, widths
    in ``[0.5, 1.5]`` and complex normal amplitudes from a generator
    seeded by ``(seed, k)``, normalized to unit norm.
    """
    e = cfg.experiment
    if e.datum == "gaussian":
        return gaussian_datum(grid, k, e.width)
    rng = np.random.default_rng([cfg.seed, k])
    centers = rng.uniform(-2.0, 2.0, 4)
    widths = rng.uniform(0.5, 1.5, 4)
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    y = grid.y[:, None]
    values = np.sum(amps * np.exp(-((y - centers) / widths) ** 2), axis=1)
    f = ModeField(k, values.astype(complex), grid)
    return f * (1.0 / l2_norm(f))


def _dt(cfg: ExperimentConfig, op: ModeOperator, g: ModeField) -> float:
    if cfg.stepper.dt == "auto":
        return default_dt(op, g.values)
    return float(cfg.stepper.dt)


def _linear_traj(cfg, nu, k, T, sample_every=None):
    grid = _grid(cfg, nu, k)
    op = ModeOperator(grid, k, nu)
    g = make_datum(cfg, grid, k)
    dt = _dt(cfg, op, g)
    every = sample_every or max(1, int(T / dt / cfg.stepper.samples))
    traj = evolve(op, g, StepperConfig(dt=dt, t_end=T, scheme=cfg.stepper.scheme,
                                       sample_every=every, keep_fields=False))
    return traj


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _cell(verdicts=None, rows=None, series=None, payload=None):
    return {"verdicts": verdicts or {}, "rows": rows or [], "series": series or [],
            "payload": payload or {}, "error": None}


# --------------------------------------------------------------------------
# cells, one function per kind

def _linear_decay_cell(cfg, nu, k, **_):
    window = default_window(nu, k)
    T = cfg.stepper.T or window[1]
    traj = _linear_traj(cfg, nu, k, T)
    c = make_constants(cfg.hypo.epsilon)
    series = FunctionalSeries.from_trajectory(traj, c)
    t = traj.times
    norms = traj.norms()
    lo, hi = window
    fit = fit_decay(t, norms, (lo, min(hi, T)) if lo < T else None, g_norm=traj.g_norm)
    g2 = traj.g_norm ** 2
    env_ok = bool(np.all(traj.quad["norm2"] <= g2 * envelope(t, nu, k, c) * (1 + ENVELOPE_SLACK)))
    rows = [{"nu": nu, "k": k, "t": ti, "norm": ni, "phi": pi}
            for ti, ni, pi in zip(t, norms, series.terms["phi"])]
    fit_d = asdict(fit)
    fit_d["accepted"] = fit.accepted
    fit_d["c_over_sqrt_nu"] = fit.c_fit / math.sqrt(nu)
    return _cell({"fit_accepted": fit.accepted, "envelope": env_ok}, rows,
                 payload={"nu": nu, "k": k, "dt": traj.dt, "Ny": traj.op.grid.Ny,
                          "decay_fit": fit_d})


def _functional_audit_cell(cfg, nu, k, **_):
    T = cfg.stepper.T or 5.0 / math.sqrt(nu * k)
    traj = _linear_traj(cfg, nu, k, T)
    c = make_constants(cfg.hypo.epsilon)
    series = FunctionalSeries.from_trajectory(traj, c)
    report = audit_monotonicity(series, tol=cfg.experiment.tol)
    t = traj.times
    q = traj.quad
    g2 = traj.g_norm ** 2
    env = g2 * envelope(t, nu, k, c)
    vel = g2 * velocity_bound(t, nu, k, c)
    env_ok = bool(np.all(q["norm2"] <= env * (1 + ENVELOPE_SLACK)))
    vel_ok = bool(np.all(q["u2"] <= vel * (1 + ENVELOPE_SLACK)))
    terms = series.terms
    rows = []
    for i in range(len(t)):
        rows.append({"nu": nu, "k": k, "t": t[i], "phi": terms["phi"][i],
                     "term_L2": terms["term_L2"][i], "term_grad": terms["term_grad"][i],
                     "term_cross": terms["term_cross"][i],
                     "term_weighted": terms["term_weighted"][i],
                     "norm2": q["norm2"][i], "envelope_bound": env[i],
                     "u2": q["u2"][i], "velocity_bound": vel[i]})
    verdicts = {"phi_monotone": report.monotone_ok, "phi_lower_bound": report.lower_bound_ok,
                "phi_derivative": report.derivative_ok, "envelope": env_ok,
                "velocity": vel_ok}
    return _cell(verdicts, rows, payload={"nu": nu, "k": k, "dt": traj.dt,
                                          "constants": asdict(c), "audit": report.summary()})


def _identities_cell(cfg, nu, k, **_):
    grid = _grid(cfg, nu, k)
    op = ModeOperator(grid, k, nu)
    g = make_datum(cfg, grid, k)
    T = cfg.stepper.T or min(natural_time(op), 10.0)
    dt0 = _dt(cfg, op, g)
    levels = []
    for j in range(cfg.experiment.halvings + 1):
        dt = dt0 / 2 ** j
        nsteps = max(3, math.ceil(T / dt - 1e-9))
        traj = evolve(op, g, StepperConfig(dt=T / nsteps, t_end=T, scheme=cfg.stepper.scheme,
                                           sample_every=1, keep_fields=False))
        levels.append((traj.dt, verify_identities(traj).residuals))
    rows = [{"nu": nu, "k": k, "dt": dt, "identity": i + 1, "residual": r[i]}
            for dt, r in levels for i in range(4)]
    finest = levels[-1][1]
    ratios = []
    for i in range(4):
        a, b = levels[-2][1][i], levels[-1][1][i]
        ratios.append(a / b if b > 1e-13 and a > 1e-13 else None)
    conv = all(r is None or 3.0 <= r <= 5.0 for r in ratios)
    verdicts = {"residual": bool(np.all(finest < cfg.experiment.tol)), "convergence": conv}
    payload = {"nu": nu, "k": k, "T": T,
               "residuals": {name: float(r) for name, r in zip(IDENTITY_NAMES, finest)},
               "ratios": ratios, "dt_levels": [dt for dt, _ in levels]}
    return _cell(verdicts, rows, payload=payload)


def _semigroup_cell(cfg, nu, k, **_):
    grid = _grid(cfg, nu, k)
    g = make_datum(cfg, grid, k)
    dt = None if cfg.stepper.dt == "auto" else float(cfg.stepper.dt)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = semigroup_integrals(g, nu, T=cfg.stepper.T, dt=dt)
    row = {"nu": nu, "k": k, "grad_integral": res.grad_integral, "grad_bound": res.grad_bound,
           "dx_integral": res.dx_integral, "linf_integral": res.linf_integral,
           "saturated": res.saturated}
    return _cell({"grad_bound": res.grad_bound_ok}, [row],
                 payload=dict(res.to_dict(), warnings=[str(w.message) for w in caught]))


def _integral_scaling_cell(cfg, nu, **_):
    res = integral_scaling(nu, widths=(cfg.experiment.width, 2.0 * cfg.experiment.width))
    row = {"nu": nu, "grad_max": res.grad_max, "grad_bound": 0.5 / nu, "dx_sup": res.dx_sup,
           "linf_gram": res.linf_gram,
           "linf_scaled": res.linf_gram / (1.0 + abs(math.log(nu))),
           "crossover": res.crossover if res.crossover is not None else math.nan}
    return _cell({"grad_bound": res.grad_bound_ok}, [row], payload=res.to_dict())


def _decay_cell(cfg, nu, k, heat_only=False, axis="nu", **_):
    run = decay_run(nu, k, Ly=cfg.grid.Ly, Ny=cfg.grid.Ny, width=cfg.experiment.width,
                    heat_only=heat_only, samples=cfg.stepper.samples, eps=cfg.hypo.epsilon)
    row = run.row()
    row["axis"] = axis
    return _cell({"fit_accepted": run.fit.accepted}, [row],
                 payload={"nu": nu, "k": k, "heat_only": heat_only, "Ny": run.Ny, "dt": run.dt,
                          "window": list(run.fit.window), "n_points": run.fit.n_points})


def _cell_name(nu, eps0):
    return f"nu{nu:g}_eps{eps0:g}".replace(".", "p")


def _threshold_cell(cfg, nu, eps0, ckpt_dir=None, config_hash="", **_):
    g = cfg.grid
    grid = Grid(Ly=g.Ly, Ny=g.Ny or 512, Kmax=g.Kmax)
    dt = None if cfg.stepper.dt == "auto" else float(cfg.stepper.dt)
    e = cfg.experiment
    meta = {"config_hash": config_hash, "nu": nu}
    sub = None
    if ckpt_dir is not None and e.checkpoint_every:
        sub = Path(ckpt_dir) / _cell_name(nu, eps0)
    rec, traj = threshold_experiment(nu, eps0, grid=grid, shear_amplitude=e.shear_amplitude,
                                     T=cfg.stepper.T, dt=dt, nx=g.nx,
                                     samples=cfg.stepper.samples, gauge=e.gauge,
                                     checkpoint_dir=sub, checkpoint_every=e.checkpoint_every,
                                     meta=meta)
    files = list(traj.checkpoints)
    if ckpt_dir is not None:
        stem = Path(ckpt_dir) / (_cell_name(nu, eps0) + "_final")
        files.append(str(save_checkpoint(stem, traj.final, nu, dict(meta, eps0=eps0))))
    row = rec.row()
    row.update({"monotone_ok": rec.monotone_ok, "energy_ratio": rec.energy_ratio,
                "shear_ok": rec.shear_ok, "K_measured": rec.K_measured,
                "c_linear": rec.c_linear})
    series = [{"nu": nu, "eps0": eps0, "t": t, "norm": n, "norm_shear": s,
               "norm_nonshear": ns}
              for t, n, s, ns in zip(traj.times, traj.norm, traj.norm_shear,
                                     traj.norm_nonshear)]
    verdicts = {"decayed": rec.decayed, "monotone": rec.monotone_ok,
                "energy": rec.energy_ok, "shear": rec.shear_ok}
    return _cell(verdicts, [row], series,
                 payload=dict(rec.to_dict(), checkpoints=files, dt=traj.dt))


_CELLS = {
    "linear-decay": _linear_decay_cell,
    "functional-audit": _functional_audit_cell,
    "identities": _identities_cell,
    "semigroup-integrals": _semigroup_cell,
    "nonlinear-threshold": _threshold_cell,
}


def _run_cell(args):
    """Worker entry point: ``(name, config dict, params)`` to a cell result."""
    name, cfg_dict, params = args
    cfg = from_dict(cfg_dict)
    fn = {"integral-scaling": _integral_scaling_cell, "decay": _decay_cell}.get(name) \
        or _CELLS[name]
    try:
        out = fn(cfg, **params)
    except (LabError, ValueError, ArithmeticError) as exc:
        out = _cell()
        out["error"] = f"{type(exc).__name__}: {exc}"
    out["params"] = {k: v for k, v in params.items() if k not in ("ckpt_dir", "config_hash")}
    return out


# --------------------------------------------------------------------------
# persistence

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, rows: list, config_hash: str, kind: str) -> list:
    """Write ``rows`` with a fixed column order and a JSON sidecar.

    Columns appear in first-seen order; floats use the shortest
    round-tripping representation. Returns the written paths.
    """
    columns = []
    for r in rows:
        for key in r:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    path.write_text(buf.getvalue())
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps({"config_hash": config_hash, "kind": kind, "columns": columns,
                                "rows": len(rows)}, indent=2, sort_keys=True) + "\n")
    return [str(path), str(side)]


def _persist(cfg: ExperimentConfig, rec: RunRecord, rows: list, series: list) -> RunRecord:
    out = Path(rec.output_dir)
    files = write_csv(out / "results.csv", rows, rec.config_hash, rec.kind)
    if series:
        files += write_csv(out / "series.csv", series, rec.config_hash, rec.kind)
    if rec.kind == "nonlinear-threshold":
        files.append(_append_thresholds(out / "thresholds.csv", rows))
    cfg.save(out / "config.yaml")
    files.append(str(out / "config.yaml"))
    rec.files = files + [str(out / "summary.json"), str(out / "runs.jsonl")] \
        + [f for f in _checkpoint_files(rec.payload)]
    summary = {"config": cfg.to_dict(), **rec.to_dict()}
    (out / "summary.json").write_text(
        json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    with open(out / "runs.jsonl", "a") as fh:
        fh.write(json.dumps(_jsonable(summary), sort_keys=True) + "\n")
    return rec


THRESHOLD_COLUMNS = ("nu", "eps0", "amplitude", "decayed", "C1", "c1", "envelope_margin",
                     "blowup")


def _append_thresholds(path: Path, rows: list) -> str:
    """Append threshold records to a CSV shared by successive runs."""
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(THRESHOLD_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in THRESHOLD_COLUMNS])
    return str(path)


def _checkpoint_files(payload):
    out = []
    for cell in payload.get("cells", []):
        for f in cell.get("checkpoints", []) or []:
            out += [f, str(Path(f).with_suffix(".json"))]
    return out


# --------------------------------------------------------------------------
# orchestration

def _dedup(values, path):
    if values is None:
        return None
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    if len(seen) < len(values):
        warnings.warn(f"{path}: duplicate values removed, keeping {seen}", UserWarning,
                      stacklevel=3)
    return seen


def _plan(cfg: ExperimentConfig, sweep: bool):
    """Cells as ``(name, params)`` plus the list of sweep axes used."""
    p, e = cfg.physics, cfg.experiment
    nus = _dedup(p.nu_list, "physics.nu_list")
    ks = _dedup(p.k_list, "physics.k_list")
    eps = _dedup(e.eps0_list, "experiment.eps0_list")
    kind = cfg.kind
    if kind == "scaling-sweep":
        nus = nus or list(SCALING_NU)
        ks = ks or list(SCALING_K)
        cells = [("decay", {"nu": nu, "k": e.k_fixed, "axis": "nu"}) for nu in nus]
        cells += [("decay", {"nu": e.nu_fixed, "k": k, "axis": "k"}) for k in ks]
        if e.heat_control:
            cells += [("decay", {"nu": nu, "k": e.k_fixed, "heat_only": True, "axis": "heat"})
                      for nu in nus]
        return cells, ["nu", "k"]
    axes = [name for name, v in (("nu", nus), ("k", ks), ("eps0", eps)) if v is not None]
    if sweep and not axes:
        raise ConfigError("a sweep needs at least one of physics.nu_list, physics.k_list, "
                          "experiment.eps0_list", "physics.nu_list")
    nus = nus or [p.nu]
    if kind == "nonlinear-threshold":
        if ks is not None:
            raise ConfigError("nonlinear runs have no band axis", "physics.k_list")
        return [(kind, {"nu": nu, "eps0": x}) for nu in nus for x in (eps or [e.eps0])], axes
    if eps is not None:
        raise ConfigError(f"{kind} has no amplitude axis", "experiment.eps0_list")
    if kind == "semigroup-integrals" and len(nus) > 1:
        if ks is not None:
            raise ConfigError("worst-case integral sweeps run over nu only", "physics.k_list")
        return [("integral-scaling", {"nu": nu}) for nu in nus], axes
    ks = ks or [p.k]
    return [(kind, {"nu": nu, "k": k}) for nu in nus for k in ks], axes


def _aggregate(cfg: ExperimentConfig, cells: list) -> tuple:
    """Cross-cell regressions and their verdicts."""
    kind = cfg.kind
    ok = [c for c in cells if c["error"] is None and all(c["verdicts"].values())]
    verdicts, payload = {}, {}

    def regress(sel, xkey, variable, expected, name, tol):
        pts = [(c["params"][xkey], c["rows"][0]["c_fit"]) for c in sel]
        try:
            res = regress_scaling([x for x, _ in pts], [v for _, v in pts], variable, expected)
        except (LabError, ValueError) as exc:
            payload[name] = {"error": str(exc)}
            verdicts[name] = False
            return
        payload[name] = res.to_dict()
        verdicts[name] = bool(res.within(tol))

    if kind == "scaling-sweep":
        decay_ok = [c for c in ok]
        regress([c for c in decay_ok if c["params"]["axis"] == "nu"], "nu", "nu", 0.5,
                "nu_exponent", EXPONENT_TOL["nu"])
        regress([c for c in decay_ok if c["params"]["axis"] == "k"], "k", "k", 0.5,
                "k_exponent", EXPONENT_TOL["k"])
        if cfg.experiment.heat_control:
            regress([c for c in decay_ok if c["params"]["axis"] == "heat"], "nu", "nu", 1.0,
                    "heat_exponent", EXPONENT_TOL["heat"])
    elif kind == "semigroup-integrals" and cells and "grad_max" in (cells[0]["rows"] or [{}])[0]:
        rows = [c["rows"][0] for c in cells if c["error"] is None]
        for name, key, expected in (("dx_exponent", "dx_sup", -2.0 / 3.0),
                                    ("linf_exponent", "linf_scaled", -1.0 / 3.0)):
            try:
                res = regress_scaling([r["nu"] for r in rows], [r[key] for r in rows], "nu",
                                      expected)
                payload[name] = res.to_dict()
                verdicts[name] = bool(res.within(INTEGRAL_TOL))
            except (LabError, ValueError) as exc:
                payload[name] = {"error": str(exc)}
                verdicts[name] = False
    elif kind == "linear-decay":
        # rate against nu at each k with at least four viscosities (report only)
        by_k = {}
        for c in ok:
            fit = c["payload"]["decay_fit"]
            by_k.setdefault(c["params"]["k"], []).append((c["params"]["nu"], fit["c_fit"]))
        for k, pts in sorted(by_k.items()):
            if len(pts) >= 4:
                res = regress_scaling([x for x, _ in pts], [v for _, v in pts], "nu", 0.5)
                payload[f"nu_scaling_k{k}"] = res.to_dict()
    return verdicts, payload


def _status(cells, agg_verdicts, exploratory):
    def cell_ok(c):
        return c["error"] is None and (exploratory or all(c["verdicts"].values()))
    n_ok = sum(cell_ok(c) for c in cells)
    if n_ok == len(cells):
        return "pass" if all(agg_verdicts.values()) else "fail"
    return "fail" if n_ok == 0 else "partial"


def _execute(cfg: ExperimentConfig, sweep: bool, threads: int) -> RunRecord:
    start = time.time()
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {out}: {exc.strerror}", "output_dir") from None
    h = cfg.hash()
    cells_plan, axes = _plan(cfg, sweep)
    ckpt = out / "checkpoints" if cfg.kind == "nonlinear-threshold" else None
    cfg_dict = cfg.to_dict()
    jobs = []
    for name, params in cells_plan:
        if ckpt is not None:
            params = dict(params, ckpt_dir=str(ckpt), config_hash=h)
        jobs.append((name, cfg_dict, params))
    cells = parallel_map(_run_cell, jobs, threads)
    if not sweep and len(cells) == 1 and cells[0]["error"] is not None:
        ctx = {"kind": cfg.kind, "config_hash": h, **cells[0]["params"]}
        raise RunError(f"{cfg.kind} run failed at {cells[0]['params']}: {cells[0]['error']}", ctx)
    agg_verdicts, agg_payload = _aggregate(cfg, cells)
    status = _status(cells, agg_verdicts, cfg.experiment.exploratory)
    rows, series, verdicts, failures, cell_payloads = [], [], {}, [], []
    for c in cells:
        rows += c["rows"]
        series += c["series"]
        tag = ",".join(f"{k}={v}" for k, v in c["params"].items())
        for name, v in c["verdicts"].items():
            verdicts[f"{name}[{tag}]" if len(cells) > 1 else name] = bool(v)
        if c["error"] is not None:
            failures.append({"params": c["params"], "error": c["error"]})
        elif not all(c["verdicts"].values()):
            failures.append({"params": c["params"],
                             "failed": [n for n, v in c["verdicts"].items() if not v]})
        cell_payloads.append(dict(c["payload"], params=c["params"], error=c["error"]))
    verdicts.update(agg_verdicts)
    payload = {"axes": axes, "cells": cell_payloads, **agg_payload}
    if cfg.kind == "nonlinear-threshold" and len(cells) > 1:
        payload["threshold"] = _threshold_table(cells)
    rec = RunRecord(h, cfg.kind, start, 0.0, status, verdicts, _jsonable(payload), failures,
                    str(out))
    rec.end_time = time.time()
    return _persist(cfg, rec, rows, series)


def _threshold_table(cells):
    """Smallest non-decaying ``eps0`` per viscosity (``None`` if all decayed)."""
    table = {}
    for c in cells:
        nu, eps0 = c["params"]["nu"], c["params"]["eps0"]
        table.setdefault(repr(nu), None)
        failed = c["error"] is not None or not c["verdicts"].get("decayed", False)
        if failed and (table[repr(nu)] is None or eps0 < table[repr(nu)]):
            table[repr(nu)] = eps0
    return table


def run(config: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Run the configured experiment and write its artifacts.

    Configurations with sweep lists (and every ``scaling-sweep``) are
    handed to :func:`sweep`.

    Raises
    ------
    ConfigError
        Invalid configuration or unwritable output directory.
    RunError
        Numerical failure of a single run, with the run context attached.
    """
    if not isinstance(config, ExperimentConfig):
        raise ConfigError(f"expected an ExperimentConfig, got {type(config).__name__}")
    p, e = config.physics, config.experiment
    if config.kind == "scaling-sweep" or p.nu_list or p.k_list or e.eps0_list:
        return sweep(config, threads)
    return _execute(config, sweep=False, threads=threads)


def sweep(config: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Fan out over ``nu_list`` / ``k_list`` / ``eps0_list`` and aggregate.

    Duplicate axis values are dropped with a warning. A failing cell is
    recorded in ``failures`` and the sweep continues; the status is
    ``"partial"`` when some cells pass and others fail.
    """
    return _execute(config, sweep=True, threads=threads)
