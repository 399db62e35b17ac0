"""Command-line entry points: simulate, phase, diagnose, omega, sweep, verify.

Exit codes: 0 ok, 1 numerical failure, 2 config error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .diagnostics import classify_case, energy_window, track_critical_points, zero_history
from .experiment import (
    ConfigError,
    config_from_dict,
    load_config_file,
    load_run,
    run_experiment,
    write_csv,
    write_json,
)
from .nonlinearity import DegenerateNonlinearityError, DomainError, NonlinearitySpec
from .omega_limit import analyze
from .phase_plane import PhasePoint, classify_orbit, hamiltonian, orbit_samples
from .presets import PRESETS, preset_config
from .solver import Profile, StepError


def _config_from_args(args) -> dict:
    if getattr(args, "preset", None):
        return preset_config(args.preset)
    if getattr(args, "config", None):
        from .experiment import config_to_dict
        return config_to_dict(load_config_file(args.config))
    raise ConfigError("config", "either --config or --preset is required")


def _cmd_simulate(args) -> int:
    cfg = config_from_dict(_config_from_args(args))
    out = args.out or "run_out"
    run_experiment(cfg, out)
    print(f"run written to {out}")
    return 0


def _cmd_phase(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        spec = NonlinearitySpec.from_dict(json.load(fh))
    out = args.out or "phase_out"
    os.makedirs(out, exist_ok=True)
    if args.start:
        u, v = (float(s) for s in args.start.split(","))
        pt = PhasePoint(u, v)
        cls = classify_orbit(spec, pt)
        print(f"H = {hamiltonian(spec, pt)!r}")
        print(f"classification: {cls}")
        if type(cls).__name__ in ("Periodic", "Homoclinic", "Heteroclinic"):
            xs = np.arange(args.range[0], args.range[1] + 1e-12, args.dx)
            us, vs = orbit_samples(spec, cls, xs)
            write_csv(os.path.join(out, "profile.csv"), ["x", "u", "v"],
                      zip(xs.tolist(), us.tolist(), vs.tolist()))
            print(f"profile written to {out}/profile.csv")
        return 0
    if args.scan:
        lo, hi, n = args.scan.split(":")
        rows = []
        for u in np.linspace(float(lo), float(hi), int(n)):
            pt = PhasePoint(float(u), 0.0)
            cls = classify_orbit(spec, pt)
            rows.append((float(u), 0.0, hamiltonian(spec, pt), type(cls).__name__))
        write_csv(os.path.join(out, "scan.csv"), ["u", "v", "H", "tag"], rows)
        print(f"scan written to {out}/scan.csv")
        return 0
    raise ConfigError("phase", "either --start or --scan is required")


def _parse_companion(tag: str, result):
    if tag.startswith("companion="):
        tag = tag[len("companion="):]
    if tag == "zero":
        return "zero"
    if tag == "ut":
        return "ut"
    if tag.startswith("vlambda:"):
        return ("vlambda", float(tag.split(":", 1)[1]))
    # otherwise a CSV profile file with columns x,u
    data = np.loadtxt(tag, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != result.grid.N:
        raise ConfigError("zeros.companion", "companion profile does not match the run grid")
    return Profile(result.grid, data[np.argsort(data[:, 0]), 1])


def _cmd_diagnose(args) -> int:
    result = load_run(args.run)
    out = args.out or args.run
    os.makedirs(out, exist_ok=True)
    a, b = (float(s) for s in args.interval.split(","))
    if args.zeros:
        companion = _parse_companion(args.zeros, result)
        hist = zero_history(result, companion, (a, b))
        write_csv(os.path.join(out, "zeros.csv"),
                  ["t", "count", "multiple", "truncated"],
                  ((r.t, r.count, sum(1 for z in r.zeros if z.kind == "multiple"), r.truncated)
                   for r in hist.reports))
        print(f"zeros: {len(hist.reports)} snapshots, {len(hist.increases)} audited increases, "
              f"{len(hist.endpoint_violations)} endpoint violations")
    if args.tracks or args.case:
        tracks = track_critical_points(result, (a, b))
        write_csv(os.path.join(out, "tracks.csv"), ["track_id", "t", "x", "u", "kind"],
                  ((tr.id, s.t, s.x, s.u, s.kind) for tr in tracks for s in tr.samples))
        if args.case:
            case = classify_case(tracks, result.times, args.kmax)
            write_json(os.path.join(out, "case.json"),
                       {"tag": case.tag, "k0": case.k0,
                        "evidence": {str(k): v for k, v in case.evidence.items()}})
            print(f"case: {case.tag} (k0 = {case.k0})")
    if args.energy is not None:
        write_csv(os.path.join(out, "energy.csv"), ["t", "E"],
                  ((t, energy_window(p, result.spec, args.energy))
                   for t, p in zip(result.times, result.profiles)))
    return 0


def _cmd_omega(args) -> int:
    result = load_run(args.run)
    out = args.out or args.run
    os.makedirs(out, exist_ok=True)
    tracks = track_critical_points(result, (-args.window, args.window))
    case = classify_case(tracks, result.times, max(2, int(args.window)))
    report = analyze(result, case, args.window, args.late, args.cluster_tol)
    write_json(os.path.join(out, "omega_report.json"), {
        "quasiconvergent": report.quasiconvergent,
        "convergent": report.convergent,
        "hypothesis_ok": report.hypothesis_ok,
        "explanation": report.explanation,
        "case": case.tag,
        "clusters": [{"classification": type(op.classification).__name__,
                      "residual": op.residual, "size": op.cluster_size}
                     for op in report.profiles],
    })
    print(f"omega: {len(report.profiles)} clusters, quasiconvergent={report.quasiconvergent}, "
          f"convergent={report.convergent}")
    return 0


def _cmd_sweep(args) -> int:
    names = args.presets.split(",")
    base = args.out or "sweep_out"
    jobs = []
    for name in names:
        cfg = config_from_dict(preset_config(name.strip()))
        jobs.append((cfg, os.path.join(base, name.strip())))
    if args.threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.threads) as pool:
            futures = [pool.submit(run_experiment, cfg, out) for cfg, out in jobs]
            for f in futures:
                f.result()
    else:
        for cfg, out in jobs:
            run_experiment(cfg, out)
    print(f"{len(jobs)} runs written under {base}")
    return 0


def _cmd_verify(args) -> int:
    from .acceptance import run_suite
    results = run_suite(args.suite)
    failed = 0
    for res in results:
        print(res.detail() if args.verbose else res.line())
        if not res.passed:
            failed += 1
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frontlab",
                                     description="experiments on u_t = u_xx + f(u)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured evolution")
    p.add_argument("--config", help="JSON/TOML experiment config")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named configuration")
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("phase", help="classify steady-state orbits")
    p.add_argument("--spec", required=True, help="JSON nonlinearity spec")
    p.add_argument("--start", help="u,v start point")
    p.add_argument("--scan", help="lo:hi:n scan of (u, 0) start points")
    p.add_argument("--range", nargs=2, type=float, default=(-10.0, 10.0))
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=_cmd_phase)

    p = sub.add_parser("diagnose", help="zero counts, tracks, case tag, energy")
    p.add_argument("--run", required=True, help="directory written by simulate")
    p.add_argument("--zeros", help="companion=<file|zero|vlambda:x|ut>")
    p.add_argument("--interval", default="-10,10")
    p.add_argument("--tracks", action="store_true")
    p.add_argument("--case", action="store_true")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--energy", type=float, help="half-width R for the windowed energy")
    p.add_argument("--out", help="output directory (defaults to the run dir)")
    p.set_defaults(fn=_cmd_diagnose)

    p = sub.add_parser("omega", help="limit-profile extraction and verdicts")
    p.add_argument("--run", required=True)
    p.add_argument("--window", type=float, required=True)
    p.add_argument("--late", type=float, default=0.3)
    p.add_argument("--cluster-tol", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_omega)

    p = sub.add_parser("sweep", help="run several presets")
    p.add_argument("--presets", required=True, help="comma-separated preset names")
    p.add_argument("--out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("verify", help="acceptance suites")
    p.add_argument("--suite", default="all",
                   choices=["phase", "solver", "sturm", "omega", "all"])
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DomainError, DegenerateNonlinearityError, StepError, ValueError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
