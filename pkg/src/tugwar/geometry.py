"""Bounded domains in R^2 / R^3 with exact boundary distances.

Every supported domain is an outer region (ball or polygon) minus optional
closed pieces: an inner ball, slit segments and isolated points. All queries
are vectorised over arrays of shape ``(N, n)``; a single point of shape
``(n,)`` is accepted everywhere and returns scalars.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = (
    "ball",
    "punctured_ball",
    "annulus",
    "punctured_annulus",
    "slit_ball",
    "ball_minus_point_sequence",
    "polygon",
)

BOUNDARY_TOL = 1e-9


class DomainError(ValueError):
    pass


def as_points(x, n: int | None = None) -> tuple[np.ndarray, bool]:
    """Return ``(array of shape (N, n), was_single)``."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if n is not None and arr.shape[-1] != n:
        raise DomainError(f"dimension mismatch: point has {arr.shape[-1]} coords, domain has n={n}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite coordinates")
    return arr, single


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float
    outer: bool  # domain lies inside (outer) or outside (inner) of the sphere

    def distance(self, X):
        d = np.linalg.norm(X - self.center, axis=-1)
        return np.abs(d - self.radius)

    def nearest(self, X):
        rel = X - self.center
        d = np.linalg.norm(rel, axis=-1, keepdims=True)
        e1 = np.zeros(X.shape[-1])
        e1[0] = 1.0
        unit = np.where(d > 0, rel / np.where(d > 0, d, 1.0), e1)
        return self.snap(self.center + self.radius * unit)

    def snap(self, C):
        """Nudge rounded sphere points so the open domain excludes them."""
        C = np.array(C, dtype=float)
        for _ in range(8):
            d = np.linalg.norm(C - self.center, axis=-1)
            bad = d < self.radius if self.outer else d > self.radius
            if not np.any(bad):
                break
            step = 1 + 2.0 ** -52 if self.outer else 1 - 2.0 ** -52
            C[bad] = self.center + (C[bad] - self.center) * step
        return C


@dataclass(frozen=True, eq=False)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def _t(self, X):
        L = self.b - self.a
        return np.clip(((X - self.a) @ L) / (L @ L), 0.0, 1.0)

    def nearest(self, X):
        return self.a + self._t(X)[..., None] * (self.b - self.a)

    def distance(self, X):
        return np.linalg.norm(X - self.nearest(X), axis=-1)


def _orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Two unit vectors spanning the plane orthogonal to unit ``u`` (3D)."""
    k = int(np.argmin(np.abs(u)))
    e = np.zeros(3)
    e[k] = 1.0
    a = np.cross(u, e)
    a /= np.linalg.norm(a)
    b = np.cross(u, a)
    return np.stack([a, b])


@dataclass(frozen=True, eq=False)
class Domain:
    """An open bounded domain; build one with the constructors below."""

    kind: str
    params: dict
    n: int
    center: np.ndarray
    bounding_radius: float
    spheres: tuple[Sphere, ...] = ()
    segments: tuple[Segment, ...] = ()
    punctures: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    accumulation: np.ndarray | None = None
    polygon: np.ndarray | None = None

    # -- structure -----------------------------------------------------
    @property
    def point_components(self) -> np.ndarray:
        """Punctures plus the distinguished accumulation point, if any."""
        if self.accumulation is None:
            return self.punctures
        return np.vstack([self.punctures, self.accumulation[None, :]])

    @property
    def smooth_components(self) -> list:
        return list(self.spheres) + list(self.segments)

    def isolated_boundary_points(self) -> np.ndarray:
        return self.punctures.copy()

    # -- queries ---------------------------------------------------------
    def contains(self, x):
        X, single = as_points(x, self.n)
        inside = np.ones(len(X), dtype=bool)
        for s in self.spheres:
            d = np.linalg.norm(X - s.center, axis=-1)
            inside &= (d < s.radius) if s.outer else (d > s.radius)
        if self.polygon is not None:
            inside &= _in_polygon(X, self.polygon)
        for seg in self.segments:
            inside &= seg.distance(X) > 0
        P = self.point_components
        if len(P):
            dmin = np.min(np.linalg.norm(X[:, None, :] - P[None], axis=-1), axis=1)
            inside &= dmin > 0
        return bool(inside[0]) if single else inside

    def boundary_distance(self, x):
        """Distance to the boundary for arbitrary points (inside or not)."""
        X, single = as_points(x, self.n)
        d = np.full(len(X), np.inf)
        for comp in self.smooth_components:
            d = np.minimum(d, comp.distance(X))
        P = self.point_components
        if len(P):
            d = np.minimum(d, np.min(np.linalg.norm(X[:, None, :] - P[None], axis=-1), axis=1))
        return float(d[0]) if single else d

    def dist_boundary(self, x):
        X, single = as_points(x, self.n)
        ok = self.contains(X)
        if not np.all(ok):
            raise DomainError(f"point {X[~ok][0]} is not in the domain")
        out = self.boundary_distance(X)
        return float(out[0]) if single else out

    def on_boundary(self, y, tol: float = BOUNDARY_TOL):
        Y, single = as_points(y, self.n)
        out = self.boundary_distance(Y) <= tol
        return bool(out[0]) if single else out

    def nearest_boundary_point(self, x):
        X, single = as_points(x, self.n)
        best = np.full(len(X), np.inf)
        out = np.zeros_like(X)
        for comp in self.smooth_components:
            y = comp.nearest(X)
            d = np.linalg.norm(X - y, axis=-1)
            better = d < best
            out[better], best[better] = y[better], d[better]
        P = self.point_components
        if len(P):
            D = np.linalg.norm(X[:, None, :] - P[None], axis=-1)
            k = np.argmin(D, axis=1)
            d = D[np.arange(len(X)), k]
            better = d < best
            out[better], best[better] = P[k[better]], d[better]
        return out[0] if single else out

    def candidates_batch(self, x, r: float, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Boundary candidates for many points at once.

        Returns ``(C, mask)`` with ``C`` of shape ``(N, K, n)``; slot 0 is the
        nearest boundary point, then every point component within ``r``, then
        ``m`` samples over each smooth component that meets ``B(x, r)``.
        """
        X, _ = as_points(x, self.n)
        N = len(X)
        blocks = [self.nearest_boundary_point(X)[:, None, :]]
        masks = [self.boundary_distance(X)[:, None] <= r * (1 + 1e-12) + 1e-15]
        P = self.point_components
        if len(P):
            blocks.append(np.broadcast_to(P[None], (N, len(P), self.n)))
            masks.append(np.linalg.norm(X[:, None, :] - P[None], axis=-1) <= r)
        if m > 0:
            for comp in self.smooth_components:
                C, M = _component_samples(comp, X, r, m)
                blocks.append(C)
                masks.append(M)
        C = np.concatenate(blocks, axis=1)
        M = np.concatenate(masks, axis=1)
        # guard against rounding at the window ends
        M &= np.linalg.norm(C - X[:, None, :], axis=-1) <= r + 1e-12
        return C, M

    def boundary_candidates(self, x, r: float, m: int = 16) -> np.ndarray:
        X, _ = as_points(x, self.n)
        if len(X) != 1:
            raise DomainError("boundary_candidates takes a single point")
        if self.boundary_distance(X)[0] > r * (1 + 1e-12) + 1e-15:
            raise DomainError(f"no boundary point within r={r} of {X[0]}")
        C, M = self.candidates_batch(X, r, m)
        return C[0][M[0]]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.bounding_radius, self.center + self.bounding_radius


def _component_samples(comp, X, r, m):
    N, n = X.shape
    if isinstance(comp, Segment):
        L = comp.b - comp.a
        w = X - comp.a
        LL = L @ L
        wL = w @ L
        disc = wL**2 - LL * (np.sum(w * w, axis=1) - r * r)
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t1 = np.clip((wL - sq) / LL, 0, 1)
        t2 = np.clip((wL + sq) / LL, 0, 1)
        ok &= t1 <= t2
        s = np.linspace(0.0, 1.0, m)
        t = t1[:, None] + (t2 - t1)[:, None] * s[None]
        C = comp.a + t[..., None] * L
        return C, np.broadcast_to(ok[:, None], (N, m)).copy()
    # sphere
    rel = X - comp.center
    d = np.linalg.norm(rel, axis=1)
    R = comp.radius
    ok = np.abs(d - R) <= r
    with np.errstate(divide="ignore", invalid="ignore"):
        cosphi = (d * d + R * R - r * r) / (2 * d * R)
    cosphi = np.where(d > 0, cosphi, -1.0)
    phi = np.arccos(np.clip(cosphi, -1.0, 1.0)) * (1 - 1e-12)
    if n == 2:
        theta0 = np.arctan2(rel[:, 1], rel[:, 0])
        s = np.linspace(-1.0, 1.0, m) if m > 1 else np.zeros(1)
        ang = theta0[:, None] + phi[:, None] * s[None]
        C = comp.snap(comp.center + R * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
        return C, np.broadcast_to(ok[:, None], (N, m)).copy()
    # n == 3: spiral samples on the cap around the direction of x
    C = np.zeros((N, m, 3))
    golden = np.pi * (3 - np.sqrt(5))
    frac = np.sqrt((np.arange(m) + 0.5) / m)
    az = golden * np.arange(m)
    for i in range(N):
        u = rel[i] / d[i] if d[i] > 0 else np.array([1.0, 0.0, 0.0])
        a, b = _orthonormal_complement(u)
        pol = phi[i] * frac
        dirs = (np.cos(pol)[:, None] * u
                + np.sin(pol)[:, None] * (np.cos(az)[:, None] * a + np.sin(az)[:, None] * b))
        C[i] = comp.snap(comp.center + R * dirs)
    return C, np.broadcast_to(ok[:, None], (N, m)).copy()


def _in_polygon(X, V):
    x, y = X[:, 0], X[:, 1]
    inside = np.zeros(len(X), dtype=bool)
    xj, yj = V[-1]
    for xi, yi in V:
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < xint)
        xj, yj = xi, yi
    return inside


# -- constructors ----------------------------------------------------------

def _vec(c, n=None):
    v = np.asarray(c, dtype=float).reshape(-1)
    if v.size not in (2, 3):
        raise DomainError("only n = 2 or n = 3 is supported")
    if n is not None and v.size != n:
        raise DomainError("dimension mismatch between parameters")
    return v


def _pts(P, n):
    A = np.asarray(P, dtype=float).reshape(-1, n) if len(P) else np.zeros((0, n))
    return A


def ball(center=(0.0, 0.0), radius: float = 1.0) -> Domain:
    c = _vec(center)
    if radius <= 0:
        raise DomainError("radius must be positive")
    return Domain("ball", {"center": c.tolist(), "radius": radius}, c.size, c, float(radius),
                  spheres=(Sphere(c, float(radius), True),), punctures=np.zeros((0, c.size)))


def punctured_ball(center=(0.0, 0.0), radius: float = 1.0, punctures: Sequence | None = None) -> Domain:
    c = _vec(center)
    P = _pts([c] if punctures is None else punctures, c.size)
    if np.any(np.linalg.norm(P - c, axis=1) >= radius):
        raise DomainError("punctures must lie inside the ball")
    base = ball(c, radius)
    return Domain("punctured_ball",
                  {"center": c.tolist(), "radius": radius, "punctures": P.tolist()},
                  c.size, c, float(radius), spheres=base.spheres, punctures=P)


def annulus(center=(0.0, 0.0), r1: float = 0.5, r2: float = 1.0) -> Domain:
    c = _vec(center)
    if not 0 < r1 < r2:
        raise DomainError("annulus needs 0 < r1 < r2")
    return Domain("annulus", {"center": c.tolist(), "r1": r1, "r2": r2}, c.size, c, float(r2),
                  spheres=(Sphere(c, float(r2), True), Sphere(c, float(r1), False)),
                  punctures=np.zeros((0, c.size)))


def punctured_annulus(center=(0.0, 0.0), r1: float = 0.25, r2: float = 1.0,
                      punctures: Sequence = ((0.5, 0.0),)) -> Domain:
    base = annulus(center, r1, r2)
    c = base.center
    P = _pts(punctures, c.size)
    rad = np.linalg.norm(P - c, axis=1)
    if np.any(rad <= r1) or np.any(rad >= r2):
        raise DomainError("annulus puncture must satisfy r1 < |p - center| < r2")
    return Domain("punctured_annulus",
                  {"center": c.tolist(), "r1": r1, "r2": r2, "punctures": P.tolist()},
                  c.size, c, float(r2), spheres=base.spheres, punctures=P)


def slit_ball(center=(0.0, 0.0), radius: float = 1.0, slit=((0.0, 0.0), (1.0, 0.0))) -> Domain:
    c = _vec(center)
    a, b = _vec(slit[0], c.size), _vec(slit[1], c.size)
    if max(np.linalg.norm(a - c), np.linalg.norm(b - c)) > radius or np.allclose(a, b):
        raise DomainError("slit must be a non-degenerate segment in the closed ball")
    return Domain("slit_ball", {"center": c.tolist(), "radius": radius,
                                "slit": [a.tolist(), b.tolist()]},
                  c.size, c, float(radius), spheres=(Sphere(c, float(radius), True),),
                  segments=(Segment(a, b),), punctures=np.zeros((0, c.size)))


def point_sequence(origin, scale: float, ratio: float, direction, k_max: int) -> np.ndarray:
    """Points ``origin + scale * ratio**k * unit(direction)`` for k = 1..k_max."""
    o = _vec(origin)
    u = _vec(direction, o.size)
    u = u / np.linalg.norm(u)
    k = np.arange(1, k_max + 1)
    return o + (scale * ratio ** k)[:, None] * u


def ball_minus_point_sequence(center=(0.0, 0.0), radius: float = 1.0, origin=None,
                              scale: float = 1.0, ratio: float = 0.25, direction=(1.0, 0.0),
                              k_max: int = 12) -> Domain:
    c = _vec(center)
    o = c.copy() if origin is None else _vec(origin, c.size)
    if not 0 < ratio < 1:
        raise DomainError("point-sequence ratio must be in (0, 1)")
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    P = point_sequence(o, scale, ratio, direction, k_max)
    if np.any(np.linalg.norm(P - c, axis=1) >= radius) or np.linalg.norm(o - c) >= radius:
        raise DomainError("point sequence must lie inside the ball")
    return Domain("ball_minus_point_sequence",
                  {"center": c.tolist(), "radius": radius, "origin": o.tolist(), "scale": scale,
                   "ratio": ratio, "direction": list(map(float, direction)), "k_max": k_max},
                  c.size, c, float(radius), spheres=(Sphere(c, float(radius), True),),
                  punctures=P, accumulation=o)


def polygon(vertices) -> Domain:
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
        raise DomainError("polygon needs >= 3 planar vertices")
    c = V.mean(axis=0)
    R = float(np.max(np.linalg.norm(V - c, axis=1)))
    segs = tuple(Segment(V[i], V[(i + 1) % len(V)]) for i in range(len(V)))
    return Domain("polygon", {"vertices": V.tolist()}, 2, c, R, segments=segs,
                  punctures=np.zeros((0, 2)), polygon=V)


_BUILDERS = {
    "ball": ball,
    "punctured_ball": punctured_ball,
    "annulus": annulus,
    "punctured_annulus": punctured_annulus,
    "slit_ball": slit_ball,
    "ball_minus_point_sequence": ball_minus_point_sequence,
    "polygon": polygon,
}


def make_domain(kind: str, **params) -> Domain:
    if kind not in _BUILDERS:
        raise DomainError(f"unknown domain kind {kind!r}")
    return _BUILDERS[kind](**params)
