"""Closed-form references: radial p-harmonic profiles and the p = 2 disk."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class RadialSolution:
    """Radial p-harmonic profile ``r**beta`` (or ``log r`` when p = n)."""

    p: float
    n: int

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")

    @property
    def form(self) -> str:
        return "log" if self.p == self.n else "power"

    @property
    def beta(self) -> float | None:
        return None if self.form == "log" else (self.p - self.n) / (self.p - 1)

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return np.log(r) if self.form == "log" else r ** self.beta


def punctured_ball_value(p: float, n: int, r):
    """Value in the unit ball minus the center for data 1 at the center, 0 on the sphere."""
    if not p > n:
        raise ValueError("formula needs p > n")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r > 1):
        raise ValueError("need 0 < r <= 1")
    out = 1.0 - r ** ((p - n) / (p - 1))
    return float(out) if out.ndim == 0 else out


def annulus_value(p: float, n: int, r1: float, r2: float, r):
    """Radial solution on ``r1 < |x| < r2`` with data 0 inside, 1 outside."""
    if not 0 < r1 < r2:
        raise ValueError("need 0 < r1 < r2")
    r = np.asarray(r, dtype=float)
    if np.any(r < r1) or np.any(r > r2):
        raise ValueError("need r1 <= r <= r2")
    s = RadialSolution(p, n)
    out = (s.phi(r) - s.phi(r1)) / (s.phi(r2) - s.phi(r1))
    return float(out) if out.ndim == 0 else out


def radial_ode_residual(p: float, n: int, solution: Callable, r: float, h: float = 1e-4) -> float:
    """Centered difference of the radial flux ``r**(n-1) |u'|**(p-2) u'``."""

    def flux(s, du):
        return s ** (n - 1) * abs(du) ** (p - 2) * du

    u0, up, um = solution(r), solution(r + h), solution(r - h)
    f_hi = flux(r + h / 2, (up - u0) / h)
    f_lo = flux(r - h / 2, (u0 - um) / h)
    return float((f_hi - f_lo) / h)


def _angular(f) -> Callable:
    if hasattr(f, "_eval"):
        return lambda t: f._eval(np.stack([np.cos(t), np.sin(t)], axis=1))
    return f


def p2_disk_value(f, x, nodes: int = 4096) -> float:
    """Poisson integral over the unit circle; ``f`` maps angles to values
    (a BoundaryFunction on the unit disk is also accepted)."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if not r < 1:
        raise ValueError("need |x| < 1")
    phi = math.atan2(x[1], x[0])
    t = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
    vals = np.asarray(_angular(f)(t), dtype=float)
    kernel = (1 - r * r) / (1 - 2 * r * np.cos(t - phi) + r * r)
    return float(np.mean(kernel * vals))
