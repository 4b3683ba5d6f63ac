"""Smooth cut-off profiles built from the classical exp(-1/x) gluing.

Every cut-off used in the lab (state-space radial cut-offs, the H1-ball
profile, the low-mode damping profile and the time-modulation windows of
the Floquet lab) is an affine image of one C-infinity monotone step, so
plateau values and thresholds are exact and derivatives are available in
closed form.
"""

from __future__ import annotations

import numpy as np

__all__ = ["smooth_step", "smooth_step_deriv", "Plateau", "radial_cutoff"]


def _sigma(x):
    """exp(-1/x) for x > 0, identically 0 for x <= 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def _sigma_deriv(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        xp = x[pos]
        out[pos] = np.exp(-1.0 / xp) / xp**2
    return out


def smooth_step(x):
    """C-infinity monotone step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = _sigma(x)
    b = _sigma(1.0 - x)
    return a / (a + b + (a + b == 0.0))


def smooth_step_deriv(x):
    x = np.asarray(x, dtype=float)
    a, b = _sigma(x), _sigma(1.0 - x)
    da, db = _sigma_deriv(x), -_sigma_deriv(1.0 - x)
    denom = (a + b) ** 2
    safe = denom > 0.0
    out = np.zeros_like(x)
    out[safe] = (da[safe] * b[safe] - a[safe] * db[safe]) / denom[safe]
    return out


class Plateau:
    """Smooth profile equal to ``left`` for z <= z_lo and ``right`` for z >= z_hi.

    Monotone between the two plateaus; infinitely flat at both thresholds.
    """

    def __init__(self, z_lo, z_hi, left=1.0, right=0.0):
        if not z_hi > z_lo:
            raise ValueError(f"need z_hi > z_lo, got [{z_lo}, {z_hi}]")
        self.z_lo = float(z_lo)
        self.z_hi = float(z_hi)
        self.left = float(left)
        self.right = float(right)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        # plateau fast paths (the common case along settled trajectories)
        if z.size and z.max() <= self.z_lo:
            return np.full_like(z, self.left) if z.ndim else self.left
        if z.size and z.min() >= self.z_hi:
            return np.full_like(z, self.right) if z.ndim else self.right
        s = smooth_step((z - self.z_lo) / (self.z_hi - self.z_lo))
        return self.left + (self.right - self.left) * s

    def deriv(self, z):
        z = np.asarray(z, dtype=float)
        if z.size and (z.max() <= self.z_lo or z.min() >= self.z_hi):
            return np.zeros_like(z) if z.ndim else 0.0
        s = smooth_step_deriv((z - self.z_lo) / (self.z_hi - self.z_lo))
        return (self.right - self.left) * s / (self.z_hi - self.z_lo)

    def __repr__(self):
        return (
            f"Plateau([{self.z_lo:g}, {self.z_hi:g}], "
            f"{self.left:g} -> {self.right:g})"
        )


def radial_cutoff(radius):
    """State-space cut-off chi(|u|^2): 1 for |u| <= radius, 0 for |u| >= 2*radius.

    Applied to nonlinearities to realize compact support: u -> f(u)*chi(|u|^2).
    """
    return Plateau(radius**2, (2.0 * radius) ** 2, left=1.0, right=0.0)
