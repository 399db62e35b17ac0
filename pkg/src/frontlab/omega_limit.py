"""Late-time limit profiles: extraction, steady-state matching, verdicts.

The limit set is approximated by clustering the last fraction of a run's
snapshots on a trusted window. Each cluster representative is tested as a
steady state (second differences against the reaction term) and, when
nonconstant, matched against the phase-plane orbit structure: tails resting
on equilibria and the trajectory (u, u') lying inside a single level curve
identify the profile as a shifted wave; interior turning points identify a
nonconstant periodic profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import Segment
from .nonlinearity import (
    DegenerateNonlinearityError,
    DomainError,
    NonlinearitySpec,
    eval_F,
    eval_f,
    lipschitz_bound,
)
from .phase_plane import PhasePoint, classify_orbit, find_equilibria
from .solver import RunResult

CONST_OSC_REL = 1e-6
CONST_OSC_ABS = 1e-10
RESIDUAL_TOL_REL = 1e-4
H_SPREAD_FLOOR = 1e-6
H_SPREAD_DX2 = 0.05        # grid-aware slack: second-order profiles carry O(dx^2) energy drift
CONTAIN_FLOOR = 1e-4
CONTAIN_DX2 = 0.1
TAIL_REL = 0.05
CLUSTER_TOL_REL = 1e-3
CLUSTER_TOL_FLOOR_REL = 1e-8


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class GroundStateShift:
    base: float
    extremum: float
    shift: float


@dataclass(frozen=True)
class StandingWaveShift:
    left: float
    right: float
    shift: float


@dataclass(frozen=True)
class PeriodicNonconstant:
    period: float


@dataclass(frozen=True)
class NonSteady:
    reason: str


Classification = Constant | GroundStateShift | StandingWaveShift | PeriodicNonconstant | NonSteady

STEADY_TYPES = (Constant, GroundStateShift, StandingWaveShift, PeriodicNonconstant)


@dataclass
class OmegaProfile:
    profile: Segment
    residual: float
    cluster_size: int
    member_times: list[float]
    classification: Classification | None = None


@dataclass
class OmegaReport:
    profiles: list[OmegaProfile]
    case: object
    quasiconvergent: str          # "yes" | "no" | "undetermined"
    convergent: str
    hypothesis_ok: bool
    oscillation_evidence: dict | None
    explanation: str = ""
    parameters: dict = field(default_factory=dict)


def _window_slice(result: RunResult, w: float) -> np.ndarray:
    x = result.grid.x()
    return np.nonzero((x >= -w) & (x <= w))[0]


def _second_diff_residual(seg: Segment, spec: NonlinearitySpec) -> float:
    u = seg.values
    dx = seg.dx
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
    res = lap + np.asarray(eval_f(spec, u[1:-1]), dtype=float)
    return float(np.max(np.abs(res)))


def extract_omega(result: RunResult, window: float, late_fraction: float = 0.3,
                  cluster_tol: float | None = None) -> list[OmegaProfile]:
    """Cluster the late-window snapshots on [-window, window] by sup distance.

    Greedy and ordered (deterministic): each snapshot joins the first cluster
    whose current representative (its latest member) is within cluster_tol,
    else it opens a new cluster. Representatives are the latest members.
    """
    if not 0.0 < late_fraction < 1.0:
        raise DomainError("late_fraction must lie in (0, 1)")
    times = result.times
    if len(times) == 0:
        raise DomainError("run has no snapshots")
    t0, t1 = float(times[0]), float(times[-1])
    t_lo = t1 - late_fraction * (t1 - t0)
    idx = [i for i, t in enumerate(times) if t >= t_lo - 1e-12]
    if len(idx) < 3:
        raise DomainError("insufficient sampling: fewer than 3 late snapshots")
    cols = _window_slice(result, window)
    if len(cols) < 5:
        raise DomainError("window too narrow for the grid")
    x = result.grid.x()[cols]

    scale_ref = max(p.sup() for p in result.profiles)
    scale_late = max(result.profiles[i].sup() for i in idx)
    if cluster_tol is None:
        cluster_tol = max(CLUSTER_TOL_REL * scale_late, CLUSTER_TOL_FLOOR_REL * max(scale_ref, 1.0))

    reps: list[np.ndarray] = []
    members: list[list[float]] = []
    for i in idx:
        vals = result.profiles[i].values[cols]
        placed = False
        for c, rep in enumerate(reps):
            if float(np.max(np.abs(vals - rep))) <= cluster_tol:
                reps[c] = vals
                members[c].append(float(times[i]))
                placed = True
                break
        if not placed:
            reps.append(vals)
            members.append([float(times[i])])

    out = []
    for rep, ts in zip(reps, members):
        seg = Segment(x.copy(), rep.copy())
        out.append(OmegaProfile(profile=seg,
                                residual=_second_diff_residual(seg, result.spec),
                                cluster_size=len(ts), member_times=ts))
    return out


# -- steady-state classification ------------------------------------------------

def _deriv4(u: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order first derivative on the interior (two nodes trimmed per side)."""
    return (-u[4:] + 8.0 * u[3:-1] - 8.0 * u[1:-3] + u[:-4]) / (12.0 * dx)


def _v_crossings(x, v, tol):
    cls = np.zeros(len(v), dtype=int)
    cls[v > tol] = 1
    cls[v < -tol] = -1
    nz = np.nonzero(cls)[0]
    crossings = []
    for i1, i2 in zip(nz, nz[1:]):
        if cls[i1] * cls[i2] < 0:
            xz = x[i1] + (x[i2] - x[i1]) * (0.0 - v[i1]) / (v[i2] - v[i1])
            crossings.append((float(xz), int(cls[i1])))
    return crossings


def _containment(spec, u, v, c, a, b, tol) -> bool:
    """Every trajectory sample must sit within tol of the level curve
    {v^2 = 2 (c - F(u)), u in [a, b]} (endpoints included)."""
    for ui, vi in zip(u, v):
        if a - tol <= ui <= b + tol:
            w = 2.0 * (c - float(eval_F(spec, ui)))
            d = abs(abs(vi) - math.sqrt(max(w, 0.0)))
        else:
            d = min(math.hypot(ui - a, vi), math.hypot(ui - b, vi))
        if d > tol:
            return False
    return True


def _crossing_x(x, u, level):
    """x-position where the sampled profile crosses the given level."""
    s = u - level
    for i in range(len(s) - 1):
        if s[i] == 0.0:
            return float(x[i])
        if s[i] * s[i + 1] < 0.0:
            return float(x[i] + (x[i + 1] - x[i]) * (0.0 - s[i]) / (s[i + 1] - s[i]))
    return float(x[int(np.argmin(np.abs(s)))])


def classify_profile(op: OmegaProfile, spec: NonlinearitySpec,
                     residual_tol: float | None = None,
                     const_tol: float | None = None) -> Classification:
    """Match one extracted profile against the steady-state structure.

    Order of decision: residual gate, constants, energy-level coherence of
    the sampled trajectory, then orbit shape read off the turning structure
    (none: connection between two equilibria; one: symmetric pulse over a
    single equilibrium; two or more: nonconstant periodic), each verified by
    trajectory containment in the matched level curve. Tolerances on the
    energy spread and containment carry an O(dx^2) allowance, since a
    second-order steady profile drifts off the exact level set by exactly
    that much.
    """
    seg = op.profile
    u_full = seg.values
    x_full = seg.x
    dx = seg.dx
    scale = float(np.max(np.abs(u_full)))

    rng = max(1.0, scale) + 1.0
    lip = lipschitz_bound(spec, -rng, rng)
    if residual_tol is None:
        residual_tol = RESIDUAL_TOL_REL * max(scale, CONST_OSC_ABS) * (1.0 + lip)
    if op.residual > residual_tol:
        return NonSteady(f"residual {op.residual:.3e} above {residual_tol:.3e}")

    osc = float(np.max(u_full) - np.min(u_full))
    osc_limit = const_tol if const_tol is not None else max(CONST_OSC_REL * scale, CONST_OSC_ABS)
    if osc <= osc_limit:
        return Constant(float(np.mean(u_full)))

    u = u_full[2:-2]
    x = x_full[2:-2]
    v = _deriv4(u_full, dx)
    H = 0.5 * v * v + np.asarray(eval_F(spec, u), dtype=float)
    i_star = int(np.argmax(np.abs(v)))
    c = float(H[i_star])
    spread = float(np.max(H) - np.min(H))
    spread_tol = max(H_SPREAD_FLOOR, H_SPREAD_DX2 * dx * dx * (1.0 + abs(c)) * (1.0 + lip))
    if spread > spread_tol:
        return NonSteady(f"energy spread {spread:.3e} above {spread_tol:.3e}")

    try:
        eqs = find_equilibria(spec, float(np.min(u)) - 1.0, float(np.max(u)) + 1.0)
    except DegenerateNonlinearityError:
        return NonSteady("no isolated equilibria: reaction term vanishes identically")

    contain_tol = max(CONTAIN_FLOOR, CONTAIN_DX2 * dx * dx * (1.0 + lip))
    vmax = float(np.max(np.abs(v)))
    crossings = _v_crossings(x, v, 1e-3 * vmax)
    span = float(np.max(u) - np.min(u))
    tail_tol = TAIL_REL * span
    lvl_tol = max(1e-9, H_SPREAD_DX2 * dx * dx * (1.0 + abs(c)) * (1.0 + lip))

    def near_eq(val):
        if not eqs:
            return None
        e = min(eqs, key=lambda r: abs(r.u - val))
        return e.u if abs(e.u - val) <= tail_tol else None

    left_e = near_eq(float(u[0])) if abs(v[0]) <= TAIL_REL * vmax else None
    right_e = near_eq(float(u[-1])) if abs(v[-1]) <= TAIL_REL * vmax else None

    # cross-check: the level classification at the most transverse point
    orbit_guess = classify_orbit(spec, PhasePoint(float(u[i_star]), float(v[i_star])))

    if len(crossings) == 0:
        if left_e is None or right_e is None or abs(left_e - right_e) <= tail_tol:
            return NonSteady("monotone but tails do not rest on two equilibria")
        cl = float(eval_F(spec, left_e))
        cr = float(eval_F(spec, right_e))
        if abs(cl - cr) > lvl_tol:
            return NonSteady("tail equilibria sit on different energy levels")
        c_snap = 0.5 * (cl + cr)
        a, b = min(left_e, right_e), max(left_e, right_e)
        if not _containment(spec, u, v, c_snap, a, b, contain_tol):
            return NonSteady("trajectory leaves the connecting level curve")
        shift = _crossing_x(x, u, 0.5 * (a + b))
        return StandingWaveShift(a, b, shift)

    if len(crossings) == 1:
        x0 = crossings[0][0]
        if left_e is None or right_e is None or abs(left_e - right_e) > tail_tol:
            return NonSteady("single extremum but tails do not rest on one equilibrium")
        base = 0.5 * (left_e + right_e)
        c_snap = float(eval_F(spec, base))
        ext = float(np.interp(x0, x, u))
        if abs(float(eval_F(spec, ext)) - c_snap) > max(lvl_tol, 10.0 * contain_tol * max(1.0, abs(ext))):
            return NonSteady("extremum does not sit on the base energy level")
        a, b = min(base, ext), max(base, ext)
        if not _containment(spec, u, v, c_snap, a, b, contain_tol):
            return NonSteady("trajectory leaves the pulse level curve")
        return GroundStateShift(base, ext, float(x0))

    # two or more interior turning points
    vals_at = [float(np.interp(xz, x, u)) for xz, _ in crossings]
    p_hat, q_hat = min(vals_at), max(vals_at)
    if abs(float(eval_F(spec, p_hat)) - c) > 50.0 * lvl_tol or \
       abs(float(eval_F(spec, q_hat)) - c) > 50.0 * lvl_tol:
        return NonSteady("turning values disagree with the sampled energy level")
    if not _containment(spec, u, v, c, p_hat, q_hat, contain_tol):
        return NonSteady("trajectory leaves the closed level curve")
    gaps = np.diff([xz for xz, _ in crossings])
    period = 2.0 * float(np.mean(gaps)) if len(gaps) else math.nan
    _ = orbit_guess  # retained for debugging parity with the level classifier
    return PeriodicNonconstant(period)


# -- verdicts ---------------------------------------------------------------------

def verdict(profiles: list[OmegaProfile], case, hypothesis_ok: bool,
            parameters: dict | None = None) -> OmegaReport:
    """Aggregate verdicts with structural cross-checks.

    quasiconvergent: every cluster classifies as a steady type. convergent:
    exactly one cluster, itself steady. The case tag is then reconciled: an
    eventually monotone run may only produce constants and shifted
    connecting waves; a stabilized-critical-point run under the distinct-
    limits hypothesis must be convergent with a constant or a pulse. Any
    mismatch downgrades the verdicts to undetermined with an explanation.
    """
    classes = [op.classification for op in profiles]
    if any(c is None for c in classes):
        raise DomainError("classify_profile must run before verdict")
    steady = [isinstance(c, STEADY_TYPES) for c in classes]
    quasi = "yes" if all(steady) and steady else "no"
    conv = "yes" if (len(profiles) == 1 and steady[0]) else "no"

    explanation = []
    tag = getattr(case, "tag", "Undetermined")
    if tag == "C1":
        bad = [c for c in classes if not isinstance(c, (Constant, StandingWaveShift))]
        if bad:
            explanation.append(
                f"monotone case produced disallowed profile types: {sorted({type(b).__name__ for b in bad})}")
    elif tag in ("C2", "C3") and hypothesis_ok:
        bad = [c for c in classes if not isinstance(c, (Constant, GroundStateShift))]
        if bad or conv != "yes":
            explanation.append(
                "stabilized-critical-point case under the distinct-limits hypothesis "
                "should converge to a constant or a pulse")
    if any(isinstance(c, PeriodicNonconstant) for c in classes) and hypothesis_ok:
        explanation.append("nonconstant periodic profile despite distinct far-field limits")

    if explanation:
        quasi = "undetermined"
        conv = "undetermined"

    evidence = None
    if len(profiles) >= 2:
        best = None
        for i in range(len(profiles)):
            for j in range(i + 1, len(profiles)):
                d = float(np.max(np.abs(profiles[i].profile.values - profiles[j].profile.values)))
                if best is None or d > best[0]:
                    best = (d, i, j)
        _, i, j = best
        evidence = {
            "cluster_a": {"times": profiles[i].member_times,
                          "mean_value": float(np.mean(profiles[i].profile.values))},
            "cluster_b": {"times": profiles[j].member_times,
                          "mean_value": float(np.mean(profiles[j].profile.values))},
            "sup_distance": best[0],
        }

    return OmegaReport(profiles=profiles, case=case, quasiconvergent=quasi,
                       convergent=conv, hypothesis_ok=hypothesis_ok,
                       oscillation_evidence=evidence,
                       explanation="; ".join(explanation),
                       parameters=parameters or {})


def analyze(result: RunResult, case, window: float, late_fraction: float = 0.3,
            cluster_tol: float | None = None, hypothesis_ok: bool | None = None) -> OmegaReport:
    """extract + classify + verdict in one call."""
    profiles = extract_omega(result, window, late_fraction, cluster_tol)
    for op in profiles:
        op.classification = classify_profile(op, result.spec)
    if hypothesis_ok is None:
        hypothesis_ok = abs(result.alpha - result.beta) > 0.0
    params = {"window": window, "late_fraction": late_fraction,
              "cluster_tol": cluster_tol, "residual_tol": None}
    return verdict(profiles, case, hypothesis_ok, params)
