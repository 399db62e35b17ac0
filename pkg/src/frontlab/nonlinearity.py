"""Reaction terms f, their exact antiderivatives F, and slope bounds.

A spec bundles one of four base shapes (zero, polynomial, cubic with three
prescribed roots, piecewise linear) with an optional coercive override that
replaces f(u) by u/2 for large |u|, joined by a Lipschitz blend so level sets
of the steady-state energy stay bounded.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import quad

SCAN_CELLS = 10_000


class DomainError(ValueError):
    """Non-finite or out-of-contract argument."""


class DegenerateNonlinearityError(RuntimeError):
    """Operation is ill-posed because f vanishes identically on a subinterval."""


@dataclass(frozen=True)
class NonlinearitySpec:
    """Immutable description of the reaction term.

    variant: "zero" | "polynomial" | "cubic_bistable" | "piecewise_linear".
    coeffs: ascending-degree coefficients (polynomial variant).
    roots: (a, gamma, b) with a < gamma < b; f(u) = -(u-a)(u-gamma)(u-b).
    breakpoints: sorted (u, f(u)) pairs; linear between, constant outside.
    kappa: coercivity radius; f is overridden to u/2 for |u| >= kappa +
        blend_width, with a linear blend on [kappa, kappa + blend_width].
    """

    variant: str
    coeffs: tuple[float, ...] = ()
    roots: tuple[float, float, float] | None = None
    breakpoints: tuple[tuple[float, float], ...] = ()
    kappa: float | None = None
    blend_width: float | None = None

    def __post_init__(self):
        if self.variant not in ("zero", "polynomial", "cubic_bistable", "piecewise_linear"):
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.variant == "cubic_bistable":
            if self.roots is None:
                raise DomainError("cubic_bistable requires roots=(a, gamma, b)")
            a, g, b = self.roots
            if not (a < g < b):
                raise DomainError("cubic_bistable roots must satisfy a < gamma < b")
        if self.variant == "piecewise_linear":
            us = [u for u, _ in self.breakpoints]
            if len(us) < 2:
                raise DomainError("piecewise_linear needs at least two breakpoints")
            if any(u2 <= u1 for u1, u2 in zip(us, us[1:])):
                raise DomainError("piecewise_linear breakpoints must be strictly increasing in u")
        if self.kappa is not None:
            if not (self.kappa > 0):
                raise DomainError("kappa must be positive")
            if self.blend_width is not None and not (self.blend_width > 0):
                raise DomainError("blend_width must be positive")

    @property
    def bw(self) -> float:
        """Effective blend width (default 0.1 * kappa)."""
        if self.kappa is None:
            return 0.0
        return self.blend_width if self.blend_width is not None else 0.1 * self.kappa

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(kappa=None, blend_width=None) -> "NonlinearitySpec":
        return NonlinearitySpec("zero", kappa=kappa, blend_width=blend_width)

    @staticmethod
    def polynomial(coeffs, kappa=None, blend_width=None) -> "NonlinearitySpec":
        return NonlinearitySpec("polynomial", coeffs=tuple(float(c) for c in coeffs),
                                kappa=kappa, blend_width=blend_width)

    @staticmethod
    def cubic_bistable(a, gamma, b, kappa=None, blend_width=None) -> "NonlinearitySpec":
        return NonlinearitySpec("cubic_bistable", roots=(float(a), float(gamma), float(b)),
                                kappa=kappa, blend_width=blend_width)

    @staticmethod
    def piecewise_linear(breakpoints, kappa=None, blend_width=None) -> "NonlinearitySpec":
        pts = tuple((float(u), float(v)) for u, v in breakpoints)
        return NonlinearitySpec("piecewise_linear", breakpoints=pts,
                                kappa=kappa, blend_width=blend_width)

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"variant": self.variant}
        if self.variant == "polynomial":
            d["coeffs"] = list(self.coeffs)
        elif self.variant == "cubic_bistable":
            d["roots"] = list(self.roots)
        elif self.variant == "piecewise_linear":
            d["breakpoints"] = [list(p) for p in self.breakpoints]
        if self.kappa is not None:
            d["kappa"] = self.kappa
            if self.blend_width is not None:
                d["blend_width"] = self.blend_width
        return d

    @staticmethod
    def from_dict(d: dict) -> "NonlinearitySpec":
        variant = d.get("variant")
        kappa = d.get("kappa")
        bw = d.get("blend_width")
        if variant == "zero":
            return NonlinearitySpec.zero(kappa, bw)
        if variant == "polynomial":
            return NonlinearitySpec.polynomial(d["coeffs"], kappa, bw)
        if variant == "cubic_bistable":
            r = d["roots"]
            return NonlinearitySpec.cubic_bistable(r[0], r[1], r[2], kappa, bw)
        if variant == "piecewise_linear":
            return NonlinearitySpec.piecewise_linear(d["breakpoints"], kappa, bw)
        raise DomainError(f"unknown variant {variant!r}")

    @staticmethod
    def from_json(text: str) -> "NonlinearitySpec":
        return NonlinearitySpec.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# -- base shapes (no coercive override) ---------------------------------

def _poly_coeffs(spec: NonlinearitySpec) -> np.ndarray:
    if spec.variant == "polynomial":
        return np.asarray(spec.coeffs if spec.coeffs else (0.0,), dtype=float)
    # -(u-a)(u-g)(u-b), expanded once per call; degree 3 so this is cheap
    return -npoly.polyfromroots(spec.roots)


def _f_base(spec: NonlinearitySpec, u):
    if spec.variant == "zero":
        return np.zeros_like(u, dtype=float) if isinstance(u, np.ndarray) else 0.0
    if spec.variant in ("polynomial", "cubic_bistable"):
        return npoly.polyval(u, _poly_coeffs(spec))
    us = np.array([p[0] for p in spec.breakpoints])
    fs = np.array([p[1] for p in spec.breakpoints])
    return np.interp(u, us, fs)


def _df_base(spec: NonlinearitySpec, u):
    if spec.variant == "zero":
        return np.zeros_like(u, dtype=float) if isinstance(u, np.ndarray) else 0.0
    if spec.variant in ("polynomial", "cubic_bistable"):
        return npoly.polyval(u, npoly.polyder(_poly_coeffs(spec)))
    us = np.array([p[0] for p in spec.breakpoints])
    fs = np.array([p[1] for p in spec.breakpoints])
    slopes = np.diff(fs) / np.diff(us)
    idx = np.clip(np.searchsorted(us, u, side="right") - 1, 0, len(slopes) - 1)
    out = slopes[idx]
    out = np.where((u < us[0]) | (u > us[-1]), 0.0, out)  # constant extension
    return out if isinstance(u, np.ndarray) else float(out)


def _F_base(spec: NonlinearitySpec, u):
    """Exact antiderivative of the base shape with F(0) = 0."""
    if spec.variant == "zero":
        return np.zeros_like(u, dtype=float) if isinstance(u, np.ndarray) else 0.0
    if spec.variant in ("polynomial", "cubic_bistable"):
        F = npoly.polyint(_poly_coeffs(spec))
        return npoly.polyval(u, F)
    return _F_piecewise(spec, u)


def _F_piecewise(spec: NonlinearitySpec, u):
    us = np.array([p[0] for p in spec.breakpoints])
    fs = np.array([p[1] for p in spec.breakpoints])
    knots = us

    def seg_int(a, b):
        # f is linear between breakpoints and constant outside, so the
        # trapezoid over any knot-free stretch is exact
        fa = np.interp(a, us, fs)
        fb = np.interp(b, us, fs)
        return 0.5 * (fa + fb) * (b - a)

    def F1(x):
        x = float(x)
        lo, hi = (0.0, x) if x >= 0 else (x, 0.0)
        sign = 1.0 if x >= 0 else -1.0
        # accumulate piecewise-exact quadratics between lo and hi
        total = 0.0
        pts = [lo] + [k for k in knots if lo < k < hi] + [hi]
        for a, b in zip(pts, pts[1:]):
            total += seg_int(a, b)
        return sign * total

    if isinstance(u, np.ndarray):
        return np.array([F1(x) for x in u.ravel()]).reshape(u.shape)
    return F1(u)


# -- blended / coercified evaluation -------------------------------------

def _blend_weight(spec: NonlinearitySpec, u):
    return np.clip((np.abs(u) - spec.kappa) / spec.bw, 0.0, 1.0)


def eval_f(spec: NonlinearitySpec, u):
    """Reaction term under the variant and the coercive override.

    Accepts scalars or arrays; pure and thread-safe.
    """
    arr = isinstance(u, np.ndarray)
    if arr:
        if not np.all(np.isfinite(u)):
            raise DomainError("non-finite input to eval_f")
    elif not math.isfinite(u):
        raise DomainError("non-finite input to eval_f")
    base = _f_base(spec, u)
    if spec.kappa is None:
        return base
    w = _blend_weight(spec, u)
    out = (1.0 - w) * base + w * (np.asarray(u) / 2.0)
    return out if arr else float(out)


def eval_df(spec: NonlinearitySpec, u):
    """df/du, exact per piece (used by Newton solvers and slope bounds)."""
    base = _f_base(spec, u)
    dbase = _df_base(spec, u)
    if spec.kappa is None:
        return dbase
    w = _blend_weight(spec, u)
    inside = (np.abs(u) > spec.kappa) & (np.abs(u) < spec.kappa + spec.bw)
    dw = np.where(inside, np.sign(u) / spec.bw, 0.0)
    out = (1.0 - w) * dbase + w * 0.5 + dw * (np.asarray(u) / 2.0 - base)
    return out if isinstance(u, np.ndarray) else float(out)


@lru_cache(maxsize=256)
def _F_blend_anchor(spec: NonlinearitySpec, side: int):
    """(F at kappa, F at kappa+bw) on the given side (+1 or -1), blended."""
    k = side * spec.kappa
    ke = side * (spec.kappa + spec.bw)
    Fk = float(_F_base(spec, k))
    val, _ = quad(lambda s: float(eval_f(spec, s)), k, ke, epsabs=0.0, epsrel=1e-12, limit=200)
    return Fk, Fk + val


def _F_scalar(spec: NonlinearitySpec, u: float) -> float:
    if spec.kappa is None or abs(u) <= spec.kappa:
        return float(_F_base(spec, u))
    side = 1 if u > 0 else -1
    Fk, Fke = _F_blend_anchor(spec, side)
    edge = spec.kappa + spec.bw
    if abs(u) <= edge:
        val, _ = quad(lambda s: float(eval_f(spec, s)), side * spec.kappa, u,
                      epsabs=0.0, epsrel=1e-12, limit=200)
        return Fk + val
    return Fke + (u * u - edge * edge) / 4.0


def eval_F(spec: NonlinearitySpec, u):
    """Antiderivative of eval_f with F(0) = 0.

    Exact per piece away from the blend band; the band itself is integrated
    by adaptive quadrature at relative tolerance 1e-12.
    """
    arr = isinstance(u, np.ndarray)
    if arr:
        if not np.all(np.isfinite(u)):
            raise DomainError("non-finite input to eval_F")
        if spec.kappa is None:
            return np.asarray(_F_base(spec, u), dtype=float)
        out = np.asarray(_F_base(spec, u), dtype=float).copy()
        edge = spec.kappa + spec.bw
        au = np.abs(u)
        outer = au >= edge
        if np.any(outer):
            side = np.sign(u[outer])
            anchors = np.array([_F_blend_anchor(spec, 1 if s > 0 else -1)[1] for s in side])
            out[outer] = anchors + (u[outer] ** 2 - edge * edge) / 4.0
        band = (au > spec.kappa) & (au < edge)
        if np.any(band):
            out[band] = [_F_scalar(spec, float(x)) for x in u[band]]
        return out
    if not math.isfinite(u):
        raise DomainError("non-finite input to eval_F")
    return _F_scalar(spec, float(u))


def lipschitz_bound(spec: NonlinearitySpec, lo: float, hi: float) -> float:
    """Upper bound for sup |f'| on [lo, hi].

    Exact slope maximum for piecewise-linear specs; for the others, a scan of
    the exact derivative on a 10^4-point grid (endpoints included) plus a
    curvature margin covering interior extrema between grid nodes.
    """
    if not lo < hi:
        raise DomainError("lipschitz_bound requires lo < hi")
    if spec.variant == "zero" and spec.kappa is None:
        return 0.0
    if spec.variant == "piecewise_linear" and spec.kappa is None:
        us = [p[0] for p in spec.breakpoints]
        fs = [p[1] for p in spec.breakpoints]
        slopes = [0.0]
        for (u1, f1), (u2, f2) in zip(spec.breakpoints, spec.breakpoints[1:]):
            if u2 > lo and u1 < hi:
                slopes.append(abs((f2 - f1) / (u2 - u1)))
        return max(slopes)
    grid = np.linspace(lo, hi, SCAN_CELLS + 1)
    d = np.abs(np.asarray(eval_df(spec, grid), dtype=float))
    margin = float(np.max(np.abs(np.diff(d)))) if len(d) > 1 else 0.0
    return float(np.max(d)) + margin
