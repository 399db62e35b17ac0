"""Bounded-orbit analysis for the steady-state system u_x = v, v_x = -f(u).

The system is Hamiltonian with H(u, v) = v^2/2 + F(u), so every orbit lives
on a level set of H. Orbits are classified by level-set geometry (turning
points and equilibria adjacent to the start point) rather than by long-time
integration, which cannot separate a homoclinic loop from nearby closed
orbits in finite time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .nonlinearity import (
    DegenerateNonlinearityError,
    DomainError,
    NonlinearitySpec,
    eval_F,
    eval_f,
)

SCAN_CELLS = 10_000
EQ_TOL = 1e-12            # |f| at a refined root
TANGENT_TOL = 1e-9        # |g| local-minimum threshold for no-sign-change roots
POINT_EQ_TOL = 1e-10      # classify a start point as an equilibrium
LEVEL_TOL = 1e-10         # |F(e*) - c| for an endpoint to sit on the level
LEVEL_AMBIG = 1e-7        # band in which endpoint type is declared unresolved
ENDPOINT_POS_TOL = 1e-5   # |turning - equilibrium| coincidence radius


class PreconditionError(ValueError):
    """Operation invoked outside its stated precondition."""


@dataclass(frozen=True)
class PhasePoint:
    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise DomainError("PhasePoint coordinates must be finite")


@dataclass(frozen=True)
class RootInfo:
    """A root of a scanned scalar function; tangential = no sign change."""
    u: float
    tangential: bool = False


@dataclass(frozen=True)
class Equilibrium:
    u_star: float


@dataclass(frozen=True)
class Periodic:
    p: float
    q: float
    level: float
    rho: float


@dataclass(frozen=True)
class Homoclinic:
    base: float       # the equilibrium the orbit limits to
    extremum: float   # the turning value


@dataclass(frozen=True)
class Heteroclinic:
    left: float
    right: float


@dataclass(frozen=True)
class Unresolved:
    reason: str


OrbitClass = Equilibrium | Periodic | Homoclinic | Heteroclinic | Unresolved


def hamiltonian(spec: NonlinearitySpec, pt: PhasePoint) -> float:
    return 0.5 * pt.v * pt.v + float(eval_F(spec, pt.u))


# -- root scanning --------------------------------------------------------

def _scan_roots(g, lo: float, hi: float, cells: int = SCAN_CELLS) -> list[RootInfo]:
    """All roots of g on [lo, hi]: sign-change brackets refined by brentq,
    plus tangential roots found as small local minima of |g|."""
    xs = np.linspace(lo, hi, cells + 1)
    gs = np.asarray(g(xs), dtype=float)
    scale = float(np.max(np.abs(gs)))
    if scale == 0.0:
        raise DegenerateNonlinearityError("identically zero on subinterval")
    roots: list[RootInfo] = []

    def add(u, tangential):
        for r in roots:
            if abs(r.u - u) <= 2.0 * (hi - lo) / cells:
                return
        roots.append(RootInfo(float(u), tangential))

    def node_zero_kind(i):
        # sign context of an exact node zero: same signs on both flanks
        # mean the graph only touches the axis there
        left = next((gs[j] for j in range(i - 1, max(i - 6, -1), -1) if gs[j] != 0.0), None)
        right = next((gs[j] for j in range(i + 1, min(i + 6, cells + 1)) if gs[j] != 0.0), None)
        if left is None or right is None:
            return False
        return left * right > 0.0

    for i in range(cells):
        a, b, ga, gb = xs[i], xs[i + 1], gs[i], gs[i + 1]
        if ga == 0.0:
            add(a, node_zero_kind(i))
        elif ga * gb < 0.0:
            r = brentq(lambda x: float(g(x)), a, b, xtol=1e-15, rtol=8.9e-16)
            add(r, False)
    if gs[-1] == 0.0:
        add(xs[-1], node_zero_kind(cells))

    # tangential roots: interior local minima of |g| below tolerance
    ag = np.abs(gs)
    tol = TANGENT_TOL * max(1.0, scale)
    for i in range(1, cells):
        if ag[i] <= tol and ag[i] <= ag[i - 1] and ag[i] <= ag[i + 1]:
            # parabolic refinement of the |g|^2 minimum
            x0, x1, x2 = xs[i - 1], xs[i], xs[i + 1]
            y0, y1, y2 = ag[i - 1] ** 2, ag[i] ** 2, ag[i + 1] ** 2
            denom = (y0 - 2 * y1 + y2)
            u = x1 if denom == 0 else x1 + 0.5 * (x1 - x0) * (y0 - y2) / denom
            if abs(float(g(u))) <= tol:
                add(u, True)
    roots.sort(key=lambda r: r.u)
    return roots


def find_equilibria(spec: NonlinearitySpec, lo: float, hi: float) -> list[RootInfo]:
    """Roots of f in [lo, hi]; tangential (double) roots are flagged."""
    if not lo < hi:
        raise DomainError("find_equilibria requires lo < hi")
    return _scan_roots(lambda u: eval_f(spec, u), lo, hi)


def turning_points(spec: NonlinearitySpec, c: float, lo: float, hi: float) -> list[RootInfo]:
    """Roots of F(u) = c in [lo, hi], same scanning policy as find_equilibria."""
    if not lo < hi:
        raise DomainError("turning_points requires lo < hi")
    try:
        return _scan_roots(lambda u: np.asarray(eval_F(spec, u)) - c, lo, hi)
    except DegenerateNonlinearityError:
        # F identically equal to c: every point turns; report none and let
        # the caller's degeneracy handling decide
        raise


# -- classification -------------------------------------------------------

def _scan_box(spec: NonlinearitySpec, pt: PhasePoint, c: float) -> tuple[float, float]:
    if spec.kappa is not None:
        edge = spec.kappa + spec.bw
        # beyond the blend F grows like u^2/4, so the level set is confined
        r = edge + 2.0 * math.sqrt(max(4.0 * (c - _min_F_beyond(spec, edge)), 0.0)) + 1.0
        return -r, r
    r = max(10.0, 2.0 * abs(pt.u) + 2.0, 2.0 * math.sqrt(2.0 * abs(c)) + 2.0)
    return -r, r


def _min_F_beyond(spec: NonlinearitySpec, edge: float) -> float:
    return min(float(eval_F(spec, edge)), float(eval_F(spec, -edge)), 0.0)


def _nearest_equilibrium(eqs: list[RootInfo], u: float) -> RootInfo | None:
    if not eqs:
        return None
    return min(eqs, key=lambda r: abs(r.u - u))


def classify_orbit(spec: NonlinearitySpec, start: PhasePoint) -> OrbitClass:
    """Classify the orbit through `start` by F-level analysis.

    Tolerance conflicts (near-separatrix levels, interior tangencies,
    degenerate equilibrium chains) map to Unresolved rather than raising.
    """
    c = hamiltonian(spec, start)
    lo, hi = _scan_box(spec, start, c)

    try:
        eqs = find_equilibria(spec, lo, hi)
    except DegenerateNonlinearityError:
        # flat nonlinearity: every point on the u-axis is an equilibrium
        if abs(start.v) <= POINT_EQ_TOL:
            return Equilibrium(start.u)
        return Unresolved("unbounded: level set of a flat nonlinearity")

    f_at = float(eval_f(spec, start.u))
    if abs(start.v) <= POINT_EQ_TOL and abs(f_at) <= POINT_EQ_TOL:
        near = _nearest_equilibrium(eqs, start.u)
        return Equilibrium(near.u if near is not None else start.u)

    try:
        turns = turning_points(spec, c, lo, hi)
    except DegenerateNonlinearityError:
        return Unresolved("level coincides with a flat stretch of F")

    a, b = _bracket(spec, start, c, turns, lo, hi)
    if a is None or b is None:
        if spec.kappa is not None and max(abs(lo), abs(hi)) >= 10.0 * spec.kappa:
            return Unresolved("unbounded")
        return Unresolved("unbounded: no turning point inside scan box")

    # interior must stay strictly below the level; an interior touch is a
    # degenerate chain (flagged, not resolved)
    us = np.linspace(a, b, 2001)[1:-1]
    if len(us) and np.max(np.asarray(eval_F(spec, us), dtype=float)) >= c - 1e-13 * max(1.0, abs(c)):
        interior = us[np.argmax(np.asarray(eval_F(spec, us), dtype=float))]
        if abs(float(eval_f(spec, interior))) <= 1e-6:
            return Unresolved("interior equilibrium on the level set")
        return Unresolved("interior tangency with the level set")

    kind_a = _endpoint_kind(spec, eqs, a, c)
    kind_b = _endpoint_kind(spec, eqs, b, c)
    if kind_a == "ambiguous" or kind_b == "ambiguous":
        return Unresolved("near-separatrix endpoint within tolerance band")

    if kind_a == "turning" and kind_b == "turning":
        rho = minimal_period_from_interval(spec, a, b, c)
        return Periodic(a, b, c, rho)
    if kind_a == "equilibrium" and kind_b == "equilibrium":
        ea = _nearest_equilibrium(eqs, a).u
        eb = _nearest_equilibrium(eqs, b).u
        return Heteroclinic(min(ea, eb), max(ea, eb))
    if kind_a == "equilibrium":
        return Homoclinic(_nearest_equilibrium(eqs, a).u, b)
    return Homoclinic(_nearest_equilibrium(eqs, b).u, a)


def _bracket(spec, start, c, turns, lo, hi):
    """Adjacent turning values enclosing the start point's u-excursion."""
    u0 = start.u
    t_us = [t.u for t in turns]
    tol = 1e-9 * max(1.0, abs(u0))
    if abs(start.v) <= POINT_EQ_TOL:
        # start sits on a turning point; extend toward the side where F < c
        probe = 1e-4 * max(1.0, abs(hi - lo) / 20.0)
        left_in = float(eval_F(spec, u0 - probe)) < c
        right_in = float(eval_F(spec, u0 + probe)) < c
        if left_in and not right_in:
            b = u0
            cand = [t for t in t_us if t < u0 - tol]
            a = max(cand) if cand else None
            return a, b
        if right_in and not left_in:
            a = u0
            cand = [t for t in t_us if t > u0 + tol]
            b = min(cand) if cand else None
            return a, b
        return None, None
    left = [t for t in t_us if t <= u0 + tol]
    right = [t for t in t_us if t >= u0 - tol]
    a = max(left) if left else None
    b = min(right) if right else None
    if a is not None and b is not None and b - a < tol:
        # u0 itself within tolerance of a turning point despite v != 0
        right2 = [t for t in t_us if t > a + tol]
        b = min(right2) if right2 else None
    return a, b


def _endpoint_kind(spec, eqs, e, c):
    near = _nearest_equilibrium(eqs, e)
    if near is None:
        return "turning"
    lvl = abs(float(eval_F(spec, near.u)) - c)
    lvl_tol = LEVEL_TOL * max(1.0, abs(c))
    if abs(near.u - e) <= ENDPOINT_POS_TOL and lvl <= lvl_tol:
        return "equilibrium"
    if lvl <= LEVEL_AMBIG * max(1.0, abs(c)) and abs(near.u - e) <= 1e-3:
        return "ambiguous"
    return "turning"


# -- period integral ------------------------------------------------------

def minimal_period_from_interval(spec: NonlinearitySpec, p: float, q: float, c: float) -> float:
    """rho = 2 * int_p^q du / sqrt(2 (c - F(u))).

    The inverse-square-root endpoint singularities are removed by the
    substitutions u = p + s^2 and u = q - s^2 about the two turning points;
    each half is then integrated adaptively to relative tolerance 1e-9.
    """
    m = 0.5 * (p + q)

    def left(s):
        w = c - float(eval_F(spec, p + s * s))
        return 2.0 * s / math.sqrt(max(2.0 * w, 1e-300))

    def right(s):
        w = c - float(eval_F(spec, q - s * s))
        return 2.0 * s / math.sqrt(max(2.0 * w, 1e-300))

    sl = math.sqrt(m - p)
    sr = math.sqrt(q - m)
    il, _ = quad(left, 0.0, sl, epsabs=0.0, epsrel=1e-11, limit=200)
    ir, _ = quad(right, 0.0, sr, epsabs=0.0, epsrel=1e-11, limit=200)
    return 2.0 * (il + ir)


def minimal_period(spec: NonlinearitySpec, p: float) -> float:
    """Minimal period of the closed orbit whose left turning point is (p, 0)."""
    cls = classify_orbit(spec, PhasePoint(p, 0.0))
    if not isinstance(cls, Periodic):
        raise PreconditionError(f"(p, 0) does not lie on a closed orbit: {cls}")
    return cls.rho


# -- profile generation ---------------------------------------------------

def _rk4_step(spec, u, v, h):
    def rhs(u, v):
        return v, -float(eval_f(spec, u))
    k1u, k1v = rhs(u, v)
    k2u, k2v = rhs(u + 0.5 * h * k1u, v + 0.5 * h * k1v)
    k3u, k3v = rhs(u + 0.5 * h * k2u, v + 0.5 * h * k2v)
    k4u, k4v = rhs(u + h * k3u, v + h * k3v)
    return (u + h * (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0,
            v + h * (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0)


def _project(spec, u, v, c):
    """Pin (u, v) back onto the level set H = c, preserving the sign of v."""
    w = max(2.0 * (c - float(eval_F(spec, u))), 0.0)
    if v == 0.0:
        return 0.0
    return math.copysign(math.sqrt(w), v)


def _anchor(spec: NonlinearitySpec, cls: OrbitClass) -> tuple[float, float, float]:
    """Start state (u, v) and level c; the anchor is placed at x = 0."""
    if isinstance(cls, Periodic):
        return cls.p, 0.0, cls.level
    if isinstance(cls, Homoclinic):
        c = float(eval_F(spec, cls.base))
        return cls.extremum, 0.0, c
    if isinstance(cls, Heteroclinic):
        c = float(eval_F(spec, cls.left))
        us = np.linspace(cls.left, cls.right, 4001)[1:-1]
        Fs = np.asarray(eval_F(spec, us), dtype=float)
        i = int(np.argmin(Fs))
        u0 = float(us[i])
        v0 = math.sqrt(max(2.0 * (c - Fs[i]), 0.0))
        return u0, v0, c
    raise PreconditionError(f"orbit_profile undefined for {cls}")


def _integrate_orbit(spec, cls, xs, h_target=0.01):
    """Sample (u, v) along the orbit at the given x nodes (0 must be a node
    or the integration start); fourth-order steps with per-substep projection
    onto the Hamiltonian level set."""
    u0, v0, c = _anchor(spec, cls)
    n = len(xs)
    us = np.empty(n)
    vs = np.empty(n)
    i0 = int(np.argmin(np.abs(xs)))

    def sweep(idx_range):
        u, v = u0, v0
        x = xs[i0]
        for j in idx_range:
            target = xs[j]
            span = target - x
            if span != 0.0:
                nsub = max(1, int(math.ceil(abs(span) / h_target)))
                h = span / nsub
                for _ in range(nsub):
                    u, v = _rk4_step(spec, u, v, h)
                    v = _project(spec, u, v, c)
                x = target
            us[j] = u
            vs[j] = v

    # anchor node
    us[i0], vs[i0] = u0, v0
    if abs(xs[i0]) > 1e-12:
        # integrate from x = 0 out to the nearest node first
        u, v = u0, v0
        span = xs[i0]
        nsub = max(1, int(math.ceil(abs(span) / h_target)))
        h = span / nsub
        for _ in range(nsub):
            u, v = _rk4_step(spec, u, v, h)
            v = _project(spec, u, v, c)
        us[i0], vs[i0] = u, v
        u0, v0 = u, v
    sweep(range(i0 + 1, n))
    sweep(range(i0 - 1, -1, -1))
    return us, vs, c


def orbit_profile(spec: NonlinearitySpec, cls: OrbitClass, x_range: tuple[float, float], dx: float):
    """Sampled steady-state profile for a classified orbit.

    Returns a solver Profile on the symmetric grid spanned by x_range; the
    orbit's natural anchor (turning point, extremum, or maximal-slope point)
    sits at x = 0. Along the samples |H - c| stays at projection accuracy.
    """
    from .solver import Grid, Profile  # local import to avoid a cycle

    if isinstance(cls, Unresolved):
        raise PreconditionError(f"cannot sample an unresolved orbit: {cls.reason}")
    xa, xb = x_range
    if not (xa < xb):
        raise DomainError("x_range must be increasing")
    if abs(xa + xb) > 1e-12:
        raise DomainError("orbit_profile expects a symmetric x_range about 0")
    n = int(round((xb - xa) / dx)) + 1
    if n % 2 == 0:
        n += 1
    grid = Grid(L=xb, N=n)
    xs = grid.x()
    if isinstance(cls, Equilibrium):
        return Profile(grid, np.full(grid.N, cls.u_star, dtype=float))
    us, _, _ = _integrate_orbit(spec, cls, xs)
    return Profile(grid, us)


def orbit_samples(spec: NonlinearitySpec, cls: OrbitClass, xs: np.ndarray):
    """(u, v) samples along the orbit at arbitrary nodes (diagnostics/CLI)."""
    if isinstance(cls, Equilibrium):
        return np.full(len(xs), cls.u_star), np.zeros(len(xs))
    if isinstance(cls, Unresolved):
        raise PreconditionError(f"cannot sample an unresolved orbit: {cls.reason}")
    us, vs, _ = _integrate_orbit(spec, cls, np.asarray(xs, dtype=float))
    return us, vs
