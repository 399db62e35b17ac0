"""Named experiment configurations reproducing the verification scenarios."""
from __future__ import annotations

import numpy as np

CUBIC_BALANCED = {"variant": "cubic_bistable", "roots": [-1.0, 0.0, 1.0]}
CUBIC_INVERTED = {"variant": "polynomial", "coeffs": [0.0, -1.0, 0.0, 1.0]}  # f(u) = -u + u^3
HEAT = {"variant": "zero"}


def _sin_gauss_values(L: float, dx: float, envelope: float = 100.0) -> list[float]:
    n = int(round(2.0 * L / dx)) + 1
    if n % 2 == 0:
        n += 1
    x = (np.arange(n) - (n - 1) // 2) * (2.0 * L / (n - 1))
    return [float(v) for v in np.sin(x) * np.exp(-x * x / envelope)]


def front_bistable() -> dict:
    """Decreasing front between the stable wells of the balanced cubic."""
    return {
        "spec": dict(CUBIC_BALANCED),
        "grid": {"L": 60.0, "dx": 0.05},
        "initial": {"family": "front", "alpha": 1.0, "beta": -1.0, "steepness": 0.5},
        "solver": {"dt": 0.01, "t_end": 400.0, "snapshot_every": 2.0},
        "diagnostics": {"interval": [-20.0, 20.0], "companions": ["zero", "ut"], "k_max": 15},
        "omega": {"window": 15.0, "late_fraction": 0.3},
        "seed": 0,
    }


def bump_subcritical() -> dict:
    """Small localized bump decaying to zero under f(u) = -u + u^3."""
    return {
        "spec": dict(CUBIC_INVERTED),
        "grid": {"L": 60.0, "dx": 0.05},
        "initial": {"family": "bump", "height": 0.5, "center": 0.0, "width": 4.0},
        "solver": {"dt": 0.01, "t_end": 200.0, "snapshot_every": 1.0},
        "diagnostics": {"interval": [-20.0, 20.0], "companions": ["zero", "ut"], "k_max": 10},
        "omega": {"window": 10.0, "late_fraction": 0.3},
        "seed": 0,
    }


def heat_sin_gauss() -> dict:
    """Oscillatory localized data under the plain heat equation."""
    return {
        "spec": dict(HEAT),
        "grid": {"L": 40.0, "dx": 0.05},
        "initial": {"family": "samples", "values": _sin_gauss_values(40.0, 0.05)},
        "solver": {"dt": 0.01, "t_end": 50.0, "snapshot_every": 0.5},
        "diagnostics": {"interval": [-20.0, 20.0], "companions": ["zero"], "k_max": 10},
        "omega": {"window": 10.0, "late_fraction": 0.3},
        "seed": 0,
    }


def heat_plateaus() -> dict:
    """Two one-sided unit plateaus on a huge domain under the heat equation."""
    return {
        "spec": dict(HEAT),
        "grid": {"L": 1200.0, "dx": 0.25},
        "initial": {"family": "plateaus", "base": 0.0, "transition_width": 1.0,
                    "intervals": [[16.0, 32.0, 1.0], [256.0, 512.0, 1.0]]},
        "solver": {"dt": 0.25, "t_end": 6000.0, "snapshot_every": 25.0},
        "diagnostics": {"interval": [-50.0, 50.0], "companions": ["zero"], "k_max": 10},
        "omega": {"window": 20.0, "late_fraction": 0.3},
        "seed": 0,
    }


def heat_plateaus_demo() -> dict:
    """Mirror-symmetric plateau pair with a large radius ratio: the probe
    value at the origin rises past 0.6 and decays below 0.2 within the run,
    a desk-scale non-convergence demonstration. Constant classification uses
    a documented loosened flatness tolerance (profiles at these diffusion
    times are flat only to ~1e-3)."""
    return {
        "spec": dict(HEAT),
        "grid": {"L": 400.0, "dx": 0.25},
        "initial": {"family": "plateaus", "base": 0.0, "transition_width": 0.5,
                    "intervals": [[-26.0, -2.0, 1.0], [2.0, 26.0, 1.0]]},
        "solver": {"dt": 0.25, "t_end": 6000.0, "snapshot_every": 25.0},
        "diagnostics": {"interval": [-40.0, 40.0], "companions": ["zero"], "k_max": 8},
        "omega": {"window": 4.0, "late_fraction": 0.99, "const_tol": 5e-3},
        "seed": 0,
    }


def theta_tracking() -> dict:
    """Front with a moving far-field limit: beta = 0.5 relaxes to 1."""
    return {
        "spec": dict(CUBIC_BALANCED),
        "grid": {"L": 40.0, "dx": 0.05},
        "initial": {"family": "front", "alpha": -1.0, "beta": 0.5, "steepness": 0.5},
        "solver": {"dt": 0.01, "t_end": 40.0, "snapshot_every": 0.5},
        "diagnostics": {"interval": [-15.0, 15.0], "companions": ["zero"], "k_max": 8},
        "omega": {"window": 10.0, "late_fraction": 0.3},
        "seed": 0,
    }


def mini_front() -> dict:
    """Small fast run for smoke tests and CLI round-trips."""
    return {
        "spec": dict(CUBIC_BALANCED),
        "grid": {"L": 20.0, "dx": 0.1},
        "initial": {"family": "front", "alpha": 1.0, "beta": -1.0, "steepness": 1.0},
        "solver": {"dt": 0.02, "t_end": 20.0, "snapshot_every": 1.0},
        "diagnostics": {"interval": [-8.0, 8.0], "companions": ["zero", "ut"], "k_max": 6},
        "omega": {"window": 5.0, "late_fraction": 0.3},
        "seed": 0,
    }


PRESETS = {
    "front_bistable": front_bistable,
    "bump_subcritical": bump_subcritical,
    "heat_sin_gauss": heat_sin_gauss,
    "heat_plateaus": heat_plateaus,
    "heat_plateaus_demo": heat_plateaus_demo,
    "theta_tracking": theta_tracking,
    "mini_front": mini_front,
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]()
