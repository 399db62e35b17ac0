"""Zero counting, critical-point tracking, reflections, and windowed energy.

Zero numbers of solution differences are the workhorse: for sampled data the
exact notion is replaced by hysteresis-banded sign changes (raw sign tests
chatter at grid precision), and a multiple zero is declared only when both
the value and the centered-difference slope sit below tolerance at the same
node cluster.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nonlinearity import DomainError, NonlinearitySpec, eval_F
from .solver import Profile, RunResult

TOL_V_REL = 1e-9
TOL_D_REL = 1e-6
ENDPOINT_PAD_CELLS = 2


class DegenerateProfileError(RuntimeError):
    """The profile vanishes identically within tolerance on the interval."""


@dataclass
class Segment:
    """A sampled function on an arbitrary uniform x-range."""

    x: np.ndarray
    values: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _as_xy(p) -> tuple[np.ndarray, np.ndarray]:
    return p.x, p.values


@dataclass
class ZeroRecord:
    x: float
    kind: str  # "simple" | "multiple"


@dataclass
class ZeroReport:
    t: float
    interval: tuple[float, float]
    count: int
    zeros: list[ZeroRecord]
    truncated: bool  # some zero sits within 2 dx of an interval endpoint


@dataclass
class TrackSample:
    t: float
    x: float
    u: float
    kind: str  # "max" | "min"


@dataclass
class CriticalTrack:
    id: int
    samples: list[TrackSample] = field(default_factory=list)
    terminated: bool = False

    @property
    def birth(self) -> float:
        return self.samples[0].t

    @property
    def death(self) -> float:
        return self.samples[-1].t

    def alive_through(self, t_lo: float, t_hi: float) -> bool:
        return self.birth <= t_lo + 1e-12 and self.death >= t_hi - 1e-12

    def x_values(self, t_lo: float = -math.inf, t_hi: float = math.inf) -> np.ndarray:
        return np.array([s.x for s in self.samples if t_lo - 1e-12 <= s.t <= t_hi + 1e-12])

    def stabilization(self, late_fraction: float = 0.2) -> float:
        """Total variation of the track position over the last fraction of its life."""
        xs = self.x_values()
        k = max(2, int(math.ceil(late_fraction * len(xs))))
        tail = xs[-k:]
        return float(np.sum(np.abs(np.diff(tail))))


@dataclass
class CaseTag:
    tag: str  # "C1" | "C2" | "C3" | "Undetermined"
    k0: int | None
    evidence: dict[int, int]  # window half-width k -> stable track count N_k


# -- reflection --------------------------------------------------------------

def reflect_diff(p: Profile, lam: float) -> Segment:
    """u(2 lam - x) - u(x) on the maximal symmetric sub-grid around lam.

    lam is snapped to the nearest node; the value at x = lam is exactly 0.
    """
    grid = p.grid
    if not (-grid.L < lam < grid.L):
        raise DomainError("reflection point must lie strictly inside the domain")
    j = grid.node_index(lam)
    k = min(j, grid.N - 1 - j)
    idx = np.arange(j - k, j + k + 1)
    mirrored = p.values[idx[::-1]]
    vals = mirrored - p.values[idx]
    vals[k] = 0.0
    return Segment(p.x[idx], vals)


def snap_to_node(p: Profile, lam: float) -> tuple[float, float]:
    """(snapped lambda, snap distance)."""
    j = p.grid.node_index(lam)
    xj = p.x[j]
    return float(xj), abs(float(xj) - lam)


# -- zero counting ------------------------------------------------------------

def count_zeros(p, interval: tuple[float, float],
                tol_v: float | None = None, tol_d: float | None = None) -> ZeroReport:
    """Hysteresis-banded zero count of p on the open interval.

    A node cluster with |p| < tol_v and centered-difference |p'| < tol_d is
    one multiple zero; sign changes across the band are simple zeros located
    by linear interpolation.
    """
    x, v = _as_xy(p)
    a, b = interval
    if not a < b:
        raise DomainError("count_zeros needs a nonempty interval")
    dx = float(x[1] - x[0])
    mask = (x > a) & (x < b)
    if mask.sum() < 3:
        raise DomainError("interval too narrow for the grid")
    xi = x[mask]
    vi = v[mask]
    scale = float(np.max(np.abs(vi)))
    if scale == 0.0:
        raise DegenerateProfileError("identically zero within tolerance")
    tv = TOL_V_REL * scale if tol_v is None else tol_v
    td = (TOL_D_REL * scale / dx) if tol_d is None else tol_d
    cls = np.zeros(len(vi), dtype=int)
    cls[vi > tv] = 1
    cls[vi < -tv] = -1
    if not np.any(cls != 0):
        raise DegenerateProfileError("identically zero within tolerance")

    dv = np.gradient(vi, xi)
    zeros: list[ZeroRecord] = []

    # simple zeros: consecutive nonzero classifications with opposite sign
    nz = np.nonzero(cls)[0]
    for i1, i2 in zip(nz, nz[1:]):
        if cls[i1] * cls[i2] < 0:
            x1, x2, v1, v2 = xi[i1], xi[i2], vi[i1], vi[i2]
            xz = x1 + (x2 - x1) * (0.0 - v1) / (v2 - v1)
            zeros.append(ZeroRecord(float(xz), "simple"))

    # multiple zeros: banded clusters whose slope also vanishes
    in_band = cls == 0
    i = 0
    while i < len(vi):
        if in_band[i]:
            j = i
            while j + 1 < len(vi) and in_band[j + 1]:
                j += 1
            left = cls[i - 1] if i > 0 else 0
            right = cls[j + 1] if j + 1 < len(vi) else 0
            slope_small = np.min(np.abs(dv[i:j + 1])) < td
            if left != 0 and right != 0 and left == right and slope_small:
                k = i + int(np.argmin(np.abs(dv[i:j + 1])))
                zeros.append(ZeroRecord(float(xi[k]), "multiple"))
            elif left != 0 and right != 0 and left != right and slope_small:
                # sign change buried in a flat band: degenerate crossing
                k = i + int(np.argmin(np.abs(dv[i:j + 1])))
                zeros.append(ZeroRecord(float(xi[k]), "multiple"))
            i = j + 1
        else:
            i += 1

    zeros.sort(key=lambda z: z.x)
    pad = ENDPOINT_PAD_CELLS * dx
    truncated = any(z.x < a + pad or z.x > b - pad for z in zeros)
    return ZeroReport(t=math.nan, interval=(a, b), count=len(zeros), zeros=zeros,
                      truncated=truncated)


@dataclass
class ZeroHistory:
    reports: list[ZeroReport]
    increases: list[tuple[float, float]]       # audited count increases
    endpoint_violations: list[float]           # snapshot times failing nonvanishing
    degenerate: list[float]                    # snapshot times with p == 0
    note: str = ("endpoint nonvanishing is checked at snapshot times only; "
                 "crossings between snapshots are undetectable")

    def counts(self) -> list[tuple[float, int]]:
        return [(r.t, r.count) for r in self.reports]


def _companion_series(result: RunResult, companion):
    """Yield (t, difference values, valid) per snapshot for a companion spec."""
    for i, (t, prof) in enumerate(zip(result.times, result.profiles)):
        if companion == "zero":
            yield t, prof.x, prof.values.copy(), True
        elif companion == "ut":
            if result.ut[i] is None:
                yield t, prof.x, None, False
            else:
                yield t, prof.x, result.ut[i].copy(), True
        elif isinstance(companion, tuple) and companion[0] == "vlambda":
            seg = reflect_diff(prof, companion[1])
            yield t, seg.x, seg.values, True
        elif isinstance(companion, Profile):
            yield t, prof.x, prof.values - companion.values, True
        elif isinstance(companion, RunResult):
            if len(companion.profiles) != len(result.profiles):
                raise DomainError("companion run must share the snapshot schedule")
            yield t, prof.x, prof.values - companion.profiles[i].values, True
        else:
            raise DomainError(f"unknown companion {companion!r}")


def zero_history(result: RunResult, companion, interval: tuple[float, float],
                 tol_v: float | None = None, tol_d: float | None = None) -> ZeroHistory:
    """Per-snapshot zero reports of a solution difference, with an audit.

    companion: "zero", "ut", a fixed Profile, another RunResult, or
    ("vlambda", x). Snapshots where the difference vanishes at an interval
    endpoint are recorded and excluded from the monotonicity audit; the audit
    lists every remaining (t_k, t_{k+1}) pair where the count increased.
    """
    a, b = interval
    reports: list[ZeroReport] = []
    violations: list[float] = []
    degenerate: list[float] = []
    audit_ok: list[bool] = []
    for t, x, vals, valid in _companion_series(result, companion):
        if not valid:
            continue
        seg = Segment(x, vals)
        try:
            rep = count_zeros(seg, interval, tol_v, tol_d)
        except DegenerateProfileError:
            degenerate.append(float(t))
            continue
        rep.t = float(t)
        scale = float(np.max(np.abs(vals)))
        tv = TOL_V_REL * scale if tol_v is None else tol_v
        va = vals[np.argmin(np.abs(x - a))]
        vb = vals[np.argmin(np.abs(x - b))]
        ok = abs(va) > tv and abs(vb) > tv
        if not ok:
            violations.append(float(t))
        reports.append(rep)
        audit_ok.append(ok and not rep.truncated)

    increases = []
    prev = None
    for rep, ok in zip(reports, audit_ok):
        if not ok:
            prev = None
            continue
        if prev is not None and rep.count > prev[1]:
            increases.append((prev[0], rep.t))
        prev = (rep.t, rep.count)
    return ZeroHistory(reports=reports, increases=increases,
                       endpoint_violations=violations, degenerate=degenerate)


# -- critical-point tracking ---------------------------------------------------

def _derivative_zeros(x, v, interval, rel_tol=1e-9):
    """Sub-grid zeros of the centered-difference derivative, with kinds."""
    a, b = interval
    d = np.gradient(v, x)
    mask = (x > a) & (x < b)
    xi = x[mask]
    di = d[mask]
    scale = float(np.max(np.abs(di)))
    out = []
    if scale == 0.0:
        return out
    tol = rel_tol * scale
    cls = np.zeros(len(di), dtype=int)
    cls[di > tol] = 1
    cls[di < -tol] = -1
    nz = np.nonzero(cls)[0]
    for i1, i2 in zip(nz, nz[1:]):
        if cls[i1] * cls[i2] < 0:
            xz = _quad_root(xi, di, i1, i2)
            kind = "max" if cls[i1] > 0 else "min"
            uz = float(np.interp(xz, x, v))
            out.append((float(xz), uz, kind))
    return out


def _quad_root(xi, di, i1, i2):
    """Sub-grid root of the sampled derivative between bracketing nodes:
    quadratic through three neighbors when available, secant otherwise."""
    x1, x2, d1, d2 = xi[i1], xi[i2], di[i1], di[i2]
    secant = x1 + (x2 - x1) * (0.0 - d1) / (d2 - d1)
    i3 = i1 - 1 if i1 > 0 else (i2 + 1 if i2 + 1 < len(xi) else None)
    if i3 is None:
        return secant
    pts = sorted([(xi[i1], d1), (xi[i2], d2), (xi[i3], di[i3])])
    (xa, ya), (xb, yb), (xc, yc) = pts
    denom = (xa - xb) * (xa - xc) * (xb - xc)
    if denom == 0:
        return secant
    A = (xc * (yb - ya) + xb * (ya - yc) + xa * (yc - yb)) / denom
    B = (xc * xc * (ya - yb) + xb * xb * (yc - ya) + xa * xa * (yb - yc)) / denom
    C = (xb * xc * (xb - xc) * ya + xc * xa * (xc - xa) * yb + xa * xb * (xa - xb) * yc) / denom
    if A == 0:
        return secant if B == 0 else -C / B
    disc = B * B - 4 * A * C
    if disc < 0:
        return secant
    r1 = (-B + math.sqrt(disc)) / (2 * A)
    r2 = (-B - math.sqrt(disc)) / (2 * A)
    lo, hi = min(x1, x2), max(x1, x2)
    for r in (r1, r2):
        if lo - 1e-12 <= r <= hi + 1e-12:
            return r
    return secant


def track_critical_points(result: RunResult, interval: tuple[float, float],
                          match_radius: float | None = None) -> list[CriticalTrack]:
    """Continuation-in-time records of the zeros of u_x.

    Per snapshot, derivative zeros are located by sign change and matched to
    live tracks by nearest neighbor within match_radius (default 5 dx);
    unmatched detections are births, unmatched tracks die.
    """
    dx = result.grid.dx
    radius = 5.0 * dx if match_radius is None else match_radius
    tracks: list[CriticalTrack] = []
    live: list[CriticalTrack] = []
    next_id = 0
    for t, prof in zip(result.times, result.profiles):
        found = _derivative_zeros(prof.x, prof.values, interval)
        used = [False] * len(found)
        survivors = []
        for tr in live:
            xp = tr.samples[-1].x
            best, best_d = None, radius
            for i, (xz, uz, kind) in enumerate(found):
                if used[i]:
                    continue
                dist = abs(xz - xp)
                if dist <= best_d:
                    best, best_d = i, dist
            if best is None:
                tr.terminated = True
            else:
                used[best] = True
                xz, uz, kind = found[best]
                tr.samples.append(TrackSample(float(t), xz, uz, kind))
                survivors.append(tr)
        for i, (xz, uz, kind) in enumerate(found):
            if not used[i]:
                tr = CriticalTrack(id=next_id)
                next_id += 1
                tr.samples.append(TrackSample(float(t), xz, uz, kind))
                tracks.append(tr)
                survivors.append(tr)
        live = survivors
    return tracks


def classify_case(tracks: list[CriticalTrack], times: np.ndarray,
                  k_max: int, late_fraction: float = 0.2) -> CaseTag:
    """Count stable critical points in nested windows (-k, k), k = 1..k_max.

    N_k is the number of tracks alive throughout the late window whose
    positions stay inside (-k, k). The tag reads off the eventual count:
    0 -> C1, 1 -> C2, >= 2 -> C3; track births or deaths inside the late
    window mean the counts are still drifting (Undetermined).
    """
    if len(times) < 2:
        return CaseTag("Undetermined", None, {})
    t_lo = times[-1] - late_fraction * (times[-1] - times[0])
    t_hi = float(times[-1])
    evidence: dict[int, int] = {}
    stable = [tr for tr in tracks if tr.alive_through(t_lo, t_hi)]
    drifting = [tr for tr in tracks
                if not tr.alive_through(t_lo, t_hi)
                and (tr.birth > t_lo + 1e-12 or (tr.terminated and tr.death > t_lo + 1e-12))]
    for k in range(1, k_max + 1):
        n = 0
        for tr in stable:
            xs = tr.x_values(t_lo, t_hi)
            if len(xs) and np.all(np.abs(xs) < k):
                n += 1
        evidence[k] = n
    if drifting:
        return CaseTag("Undetermined", None, evidence)
    n_end = evidence[k_max]
    if n_end == 0:
        return CaseTag("C1", 1, evidence)
    k0 = min(k for k, n in evidence.items() if n == n_end)
    if n_end == 1:
        return CaseTag("C2", k0, evidence)
    return CaseTag("C3", k0, evidence)


# -- reflection decay and energy ------------------------------------------------

def vlambda_decay(result: RunResult, lam: float, norm_halfwidth: float = 10.0):
    """Time series of local C1 norms of the reflection difference about lam.

    Returns (series, decayed) where series rows are
    (t, sup |V u|, sup |d/dx V u|) over |x - lam| <= norm_halfwidth and
    decayed means the last combined norm is at most 5% of its peak (an
    identically vanishing series passes trivially).
    """
    rows = []
    for t, prof in zip(result.times, result.profiles):
        seg = reflect_diff(prof, lam)
        mask = np.abs(seg.x - seg.x[len(seg.x) // 2]) <= norm_halfwidth
        vals = seg.values[mask]
        xs = seg.x[mask]
        dv = np.gradient(vals, xs)
        rows.append((float(t), float(np.max(np.abs(vals))), float(np.max(np.abs(dv)))))
    series = np.asarray(rows)
    combined = series[:, 1] + series[:, 2]
    peak = float(np.max(combined))
    scale0 = max(prof.sup() for prof in result.profiles)
    if peak <= 1e-10 * max(scale0, 1.0):
        return series, True
    return series, bool(combined[-1] <= 0.05 * peak)


def energy_window(p, spec: NonlinearitySpec, R: float) -> float:
    """Trapezoidal integral of p'^2/2 - F(p) over (-R, R), centered p'."""
    x, v = _as_xy(p)
    mask = (x >= -R) & (x <= R)
    xi = x[mask]
    vi = v[mask]
    dv = np.gradient(vi, xi)
    integrand = 0.5 * dv * dv - np.asarray(eval_F(spec, vi), dtype=float)
    return float(np.trapezoid(integrand, xi))
