"""Experiment configs, deterministic output layout, and run orchestration.

A single JSON (or TOML, when a parser is available) config fully determines
a run; every default that influenced a verdict is echoed back into
run_meta.json so outputs are reproducible byte for byte.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .diagnostics import classify_case, energy_window, track_critical_points, zero_history
from .nonlinearity import DomainError, NonlinearitySpec
from .omega_limit import analyze
from .solver import (
    Bump,
    Front,
    Grid,
    InitialFamily,
    Plateaus,
    Profile,
    RunResult,
    Samples,
    SolverConfig,
    family_limits,
    make_initial,
    run,
    snapshot_times,
)


class ConfigError(ValueError):
    """Invalid experiment config; carries the offending field path."""

    def __init__(self, fld: str, message: str):
        super().__init__(f"config field '{fld}': {message}")
        self.field = fld


@dataclass(frozen=True)
class DiagnosticsPlan:
    interval: tuple[float, float]
    companions: tuple[str, ...] = ("zero",)
    lambdas: tuple[float, ...] = ()
    k_max: int = 10
    late_fraction: float = 0.2


@dataclass(frozen=True)
class OmegaPlan:
    window: float
    late_fraction: float = 0.3
    cluster_tol: float | None = None
    const_tol: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    spec: NonlinearitySpec
    grid: Grid
    initial: InitialFamily
    solver: SolverConfig
    diagnostics: DiagnosticsPlan
    omega: OmegaPlan
    seed: int = 0
    kappa_policy: str = "auto"   # "auto": set kappa = 2 (sup|u0| + 1) when absent


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}", "missing")
    return d[key]


def _initial_from_dict(d: dict) -> InitialFamily:
    fam = _need(d, "family", "initial")
    if fam == "front":
        return Front(float(_need(d, "alpha", "initial")), float(_need(d, "beta", "initial")),
                     float(d.get("steepness", 1.0)))
    if fam == "bump":
        return Bump(float(_need(d, "height", "initial")), float(d.get("center", 0.0)),
                    float(d.get("width", 1.0)))
    if fam == "plateaus":
        iv = tuple(tuple(float(v) for v in row) for row in _need(d, "intervals", "initial"))
        return Plateaus(iv, float(d.get("base", 0.0)), float(d.get("transition_width", 1.0)))
    if fam == "samples":
        return Samples(tuple(float(v) for v in _need(d, "values", "initial")))
    raise ConfigError("initial.family", f"unknown family {fam!r}")


def _initial_to_dict(f: InitialFamily) -> dict:
    if isinstance(f, Front):
        return {"family": "front", "alpha": f.alpha, "beta": f.beta, "steepness": f.steepness}
    if isinstance(f, Bump):
        return {"family": "bump", "height": f.height, "center": f.center, "width": f.width}
    if isinstance(f, Plateaus):
        return {"family": "plateaus", "intervals": [list(r) for r in f.intervals],
                "base": f.base, "transition_width": f.transition_width}
    return {"family": "samples", "values": list(f.values)}


def config_from_dict(d: dict) -> ExperimentConfig:
    try:
        spec = NonlinearitySpec.from_dict(_need(d, "spec", "config"))
    except (KeyError, DomainError) as e:
        raise ConfigError("spec", str(e)) from e

    g = _need(d, "grid", "config")
    L = float(_need(g, "L", "grid"))
    if "N" in g:
        n = int(g["N"])
        if n % 2 == 0:
            raise ConfigError("grid.N", f"node count must be odd, got {n}")
        try:
            grid = Grid(L=L, N=n)
        except DomainError as e:
            raise ConfigError("grid", str(e)) from e
    elif "dx" in g:
        grid = Grid.from_dx(L, float(g["dx"]))
    else:
        raise ConfigError("grid", "needs either N (odd) or dx")

    try:
        initial = _initial_from_dict(_need(d, "initial", "config"))
    except DomainError as e:
        raise ConfigError("initial", str(e)) from e

    s = _need(d, "solver", "config")
    t_end = float(_need(s, "t_end", "solver"))
    if "snapshot_times" in s:
        snaps = tuple(float(t) for t in s["snapshot_times"])
    else:
        snaps = snapshot_times(t_end, float(s.get("snapshot_every", max(t_end / 100.0, 1e-9))))
    try:
        solver = SolverConfig(dt=float(_need(s, "dt", "solver")), t_end=t_end,
                              snapshot_times=snaps, scheme=s.get("scheme", "imex"))
    except DomainError as e:
        raise ConfigError("solver", str(e)) from e

    dg = d.get("diagnostics", {})
    default_hw = max(grid.L - max(10.0, math.sqrt(4.0 * t_end)), grid.L / 8.0)
    interval = tuple(float(v) for v in dg.get("interval", (-default_hw, default_hw)))
    diag = DiagnosticsPlan(interval=interval,
                           companions=tuple(dg.get("companions", ("zero",))),
                           lambdas=tuple(float(v) for v in dg.get("lambdas", ())),
                           k_max=int(dg.get("k_max", 10)),
                           late_fraction=float(dg.get("late_fraction", 0.2)))

    om = d.get("omega", {})
    omega = OmegaPlan(window=float(om.get("window", grid.L / 4.0)),
                      late_fraction=float(om.get("late_fraction", 0.3)),
                      cluster_tol=(None if om.get("cluster_tol") is None else float(om["cluster_tol"])),
                      const_tol=(None if om.get("const_tol") is None else float(om["const_tol"])))

    return ExperimentConfig(spec=spec, grid=grid, initial=initial, solver=solver,
                            diagnostics=diag, omega=omega, seed=int(d.get("seed", 0)),
                            kappa_policy=str(d.get("kappa_policy", "auto")))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "spec": cfg.spec.to_dict(),
        "grid": {"L": cfg.grid.L, "N": cfg.grid.N},
        "initial": _initial_to_dict(cfg.initial),
        "solver": {"dt": cfg.solver.dt, "t_end": cfg.solver.t_end,
                   "snapshot_times": list(cfg.solver.snapshot_times),
                   "scheme": cfg.solver.scheme},
        "diagnostics": {"interval": list(cfg.diagnostics.interval),
                        "companions": list(cfg.diagnostics.companions),
                        "lambdas": list(cfg.diagnostics.lambdas),
                        "k_max": cfg.diagnostics.k_max,
                        "late_fraction": cfg.diagnostics.late_fraction},
        "omega": {"window": cfg.omega.window, "late_fraction": cfg.omega.late_fraction,
                  "cluster_tol": cfg.omega.cluster_tol, "const_tol": cfg.omega.const_tol},
        "seed": cfg.seed,
        "kappa_policy": cfg.kappa_policy,
    }


def load_config_file(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            try:
                import tomli as tomllib  # type: ignore
            except ModuleNotFoundError as e:
                raise ConfigError("file", "TOML configs need Python 3.11+ or the tomli package; "
                                          "use JSON instead") from e
        data = tomllib.loads(raw.decode())
    else:
        data = json.loads(raw.decode())
    return config_from_dict(data)


# -- output helpers -----------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _classification_dict(c) -> dict:
    d = {"type": type(c).__name__}
    d.update(dataclasses.asdict(c))
    return d


# -- run orchestration ---------------------------------------------------------

def resolve_run_inputs(cfg: ExperimentConfig):
    """Build the initial profile and apply the coercivity default policy."""
    u0 = make_initial(cfg.initial, cfg.grid)
    spec = cfg.spec
    kappa_applied = None
    if spec.kappa is None and cfg.kappa_policy == "auto":
        kappa_applied = 2.0 * (u0.sup() + 1.0)
        spec = dataclasses.replace(spec, kappa=kappa_applied)
    alpha, beta = family_limits(cfg.initial)
    if isinstance(cfg.initial, Samples):
        far_field = "approximate"
    else:
        far_field = "pinned_ode"
    return spec, u0, alpha, beta, kappa_applied, far_field


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> str:
    """Run the full pipeline and write the deterministic output layout.

    Files: run_meta.json, snapshots.csv, theta.csv, zeros.csv, tracks.csv,
    case.json, energy.csv, omega_profiles.csv, omega_report.json (plus
    ut.csv when the time-derivative companion is requested).
    """
    os.makedirs(out_dir, exist_ok=True)
    spec, u0, alpha, beta, kappa_applied, far_field = resolve_run_inputs(cfg)
    result = run(spec, u0, cfg.solver, limits=(alpha, beta))

    x = result.grid.x()
    write_csv(os.path.join(out_dir, "snapshots.csv"), ["t", "x", "u"],
              ((t, x[j], p.values[j]) for t, p in zip(result.times, result.profiles)
               for j in range(result.grid.N)))
    write_csv(os.path.join(out_dir, "theta.csv"), ["t", "theta_minus", "theta_plus"],
              zip(result.times, result.theta_minus, result.theta_plus))
    if "ut" in cfg.diagnostics.companions:
        write_csv(os.path.join(out_dir, "ut.csv"), ["t", "x", "du"],
                  ((t, x[j], du[j]) for t, du in zip(result.times, result.ut) if du is not None
                   for j in range(result.grid.N)))

    zero_rows = []
    for comp in cfg.diagnostics.companions:
        companion = comp if comp in ("zero", "ut") else None
        if companion is None:
            continue
        hist = zero_history(result, companion, cfg.diagnostics.interval)
        for rep in hist.reports:
            zero_rows.append((comp, rep.t, rep.count,
                              sum(1 for z in rep.zeros if z.kind == "multiple"),
                              rep.truncated))
    for lam in cfg.diagnostics.lambdas:
        hist = zero_history(result, ("vlambda", lam), cfg.diagnostics.interval)
        for rep in hist.reports:
            zero_rows.append((f"vlambda:{lam}", rep.t, rep.count,
                              sum(1 for z in rep.zeros if z.kind == "multiple"),
                              rep.truncated))
    write_csv(os.path.join(out_dir, "zeros.csv"),
              ["companion", "t", "count", "multiple", "truncated"], zero_rows)

    tracks = track_critical_points(result, cfg.diagnostics.interval)
    write_csv(os.path.join(out_dir, "tracks.csv"), ["track_id", "t", "x", "u", "kind"],
              ((tr.id, s.t, s.x, s.u, s.kind) for tr in tracks for s in tr.samples))
    case = classify_case(tracks, result.times, cfg.diagnostics.k_max,
                         cfg.diagnostics.late_fraction)
    write_json(os.path.join(out_dir, "case.json"),
               {"tag": case.tag, "k0": case.k0,
                "evidence": {str(k): v for k, v in case.evidence.items()}})

    R = min(cfg.omega.window, result.trusted_halfwidth()) if result.trusted_halfwidth() > 0 \
        else cfg.omega.window
    write_csv(os.path.join(out_dir, "energy.csv"), ["t", "E"],
              ((t, energy_window(p, spec, R)) for t, p in zip(result.times, result.profiles)))

    hypothesis_ok = alpha != beta
    report = analyze(result, case, cfg.omega.window, cfg.omega.late_fraction,
                     cfg.omega.cluster_tol, hypothesis_ok=hypothesis_ok)
    if cfg.omega.const_tol is not None:
        # re-classify with the documented flatness override
        from .omega_limit import classify_profile, verdict as make_verdict
        for op in report.profiles:
            op.classification = classify_profile(op, spec, const_tol=cfg.omega.const_tol)
        report = make_verdict(report.profiles, case, hypothesis_ok, report.parameters)

    write_csv(os.path.join(out_dir, "omega_profiles.csv"), ["cluster", "x", "u"],
              ((i, op.profile.x[j], op.profile.values[j])
               for i, op in enumerate(report.profiles) for j in range(len(op.profile.x))))
    write_json(os.path.join(out_dir, "omega_report.json"), {
        "quasiconvergent": report.quasiconvergent,
        "convergent": report.convergent,
        "hypothesis_ok": report.hypothesis_ok,
        "explanation": report.explanation,
        "case": case.tag,
        "clusters": [{
            "classification": _classification_dict(op.classification),
            "residual": op.residual,
            "size": op.cluster_size,
            "times": op.member_times,
        } for op in report.profiles],
        "oscillation_evidence": report.oscillation_evidence,
        "parameters": {"window": cfg.omega.window,
                       "late_fraction": cfg.omega.late_fraction,
                       "cluster_tol": cfg.omega.cluster_tol,
                       "const_tol": cfg.omega.const_tol},
    })

    meta = {
        "package_version": __version__,
        "config": config_to_dict(cfg),
        "derived": {
            "dx": result.grid.dx,
            "N": result.grid.N,
            "alpha": alpha,
            "beta": beta,
            "hypothesis_ok": hypothesis_ok,
            "hypothesis_note": "" if hypothesis_ok else "distinct-limits hypothesis violated (alpha == beta)",
            "kappa_policy_applied": kappa_applied,
            "kappa_effective": spec.kappa,
            "far_field": far_field,
            "trusted_halfwidth": result.trusted_halfwidth(),
            "case_tag": case.tag,
        },
    }
    write_json(os.path.join(out_dir, "run_meta.json"), meta)
    return out_dir


def load_run(out_dir: str) -> RunResult:
    """Rebuild a RunResult from a run directory (for diagnose/omega CLI)."""
    with open(os.path.join(out_dir, "run_meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    cfg = config_from_dict(meta["config"])
    spec = NonlinearitySpec.from_dict(meta["config"]["spec"])
    if meta["derived"]["kappa_effective"] is not None and spec.kappa is None:
        spec = dataclasses.replace(spec, kappa=meta["derived"]["kappa_effective"])
    grid = cfg.grid
    data = np.loadtxt(os.path.join(out_dir, "snapshots.csv"), delimiter=",", skiprows=1, ndmin=2)
    n = grid.N
    times = data[::n, 0]
    vals = data[:, 2].reshape(len(times), n)
    profiles = [Profile(grid, vals[i]) for i in range(len(times))]
    th = np.loadtxt(os.path.join(out_dir, "theta.csv"), delimiter=",", skiprows=1, ndmin=2)
    ut: list[np.ndarray | None] = [None] * len(times)
    ut_path = os.path.join(out_dir, "ut.csv")
    if os.path.exists(ut_path):
        du = np.loadtxt(ut_path, delimiter=",", skiprows=1, ndmin=2)
        if len(du):
            ut_times = du[::n, 0]
            ut_vals = du[:, 2].reshape(len(ut_times), n)
            lookup = {float(t): ut_vals[i] for i, t in enumerate(ut_times)}
            ut = [lookup.get(float(t)) for t in times]
    return RunResult(spec=spec, grid=grid, cfg=cfg.solver,
                     alpha=meta["derived"]["alpha"], beta=meta["derived"]["beta"],
                     times=times, profiles=profiles, ut=ut,
                     theta_minus=th[:, 1], theta_plus=th[:, 2])
