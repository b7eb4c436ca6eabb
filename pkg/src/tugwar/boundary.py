"""Boundary sets and payoff functions on the boundary of a domain."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import BOUNDARY_TOL, Domain, DomainError, as_points, point_sequence


class BoundaryError(ValueError):
    pass


# -- boundary sets -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundarySet:
    """A subset E of the boundary, described analytically.

    ``kind`` is one of point, finite_point_set, point_sequence, arc,
    sphere_cap, union.  ``distance`` is exact for every kind.
    """

    kind: str
    params: dict
    members: tuple = ()

    def distance(self, y) -> np.ndarray:
        Y, single = as_points(y)
        d = self._distance(Y)
        return float(d[0]) if single else d

    def _distance(self, Y):
        k, p = self.kind, self.params
        if k in ("point", "finite_point_set", "point_sequence"):
            P = self.points()
            if len(P) == 0:
                return np.full(len(Y), np.inf)
            return np.min(np.linalg.norm(Y[:, None, :] - P[None], axis=-1), axis=1)
        if k == "arc":
            c = np.asarray(p["center"], float)
            rel = Y - c
            d = np.linalg.norm(rel, axis=1)
            psi = np.arctan2(rel[:, 1], rel[:, 0])
            mid = 0.5 * (p["theta1"] + p["theta2"])
            half = 0.5 * (p["theta2"] - p["theta1"])
            off = np.abs(np.angle(np.exp(1j * (psi - mid))))
            gap = np.maximum(0.0, off - half)
            return _chord(d, p["radius"], gap)
        if k == "sphere_cap":
            c = np.asarray(p["center"], float)
            a = np.asarray(p["axis"], float)
            a = a / np.linalg.norm(a)
            rel = Y - c
            d = np.linalg.norm(rel, axis=1)
            cos = np.where(d > 0, (rel @ a) / np.where(d > 0, d, 1), 1.0)
            psi = np.arccos(np.clip(cos, -1, 1))
            gap = np.maximum(0.0, psi - p["half_angle"])
            return _chord(d, p["radius"], gap)
        if k == "union":
            if not self.members:
                return np.full(len(Y), np.inf)
            return np.min(np.stack([m._distance(Y) for m in self.members]), axis=0)
        raise BoundaryError(f"unknown boundary set kind {k!r}")

    def points(self) -> np.ndarray:
        """Member points of a discrete set (empty for continua)."""
        k, p = self.kind, self.params
        if k == "point":
            return np.asarray(p["point"], float)[None, :]
        if k == "finite_point_set":
            return np.asarray(p["points"], float).reshape(len(p["points"]), -1) \
                if len(p["points"]) else np.zeros((0, 2))
        if k == "point_sequence":
            P = point_sequence(p["origin"], p["scale"], p["ratio"], p["direction"], p["k_max"])
            if p.get("include_limit", False):
                P = np.vstack([P, np.asarray(p["origin"], float)[None]])
            return P
        if k == "union":
            blocks = [m.points() for m in self.members if m.is_discrete]
            return np.vstack(blocks) if blocks else np.zeros((0, 2))
        return np.zeros((0, 2))

    @property
    def is_discrete(self) -> bool:
        if self.kind == "union":
            return all(m.is_discrete for m in self.members)
        return self.kind in ("point", "finite_point_set", "point_sequence")

    @property
    def is_empty(self) -> bool:
        if self.kind == "union":
            return all(m.is_empty for m in self.members)
        return self.is_discrete and len(self.points()) == 0

    def check_on(self, domain: Domain, samples: int = 64) -> None:
        """Raise unless every member lies on the boundary of ``domain``."""
        if self.kind == "union":
            for m in self.members:
                m.check_on(domain, samples)
            return
        if self.is_discrete:
            P = self.points()
        elif self.kind == "arc":
            p = self.params
            t = np.linspace(p["theta1"], p["theta2"], samples)
            P = np.asarray(p["center"]) + p["radius"] * np.stack([np.cos(t), np.sin(t)], 1)
        else:
            P = _cap_samples(self.params, samples)
        if len(P) and not np.all(domain.on_boundary(P)):
            raise BoundaryError(f"boundary set {self.kind} has members off the boundary")


def _chord(d, R, gap):
    return np.sqrt(np.maximum(d * d + R * R - 2 * d * R * np.cos(gap), 0.0))


def _cap_samples(p, m):
    from .geometry import _orthonormal_complement
    a = np.asarray(p["axis"], float)
    a /= np.linalg.norm(a)
    e1, e2 = _orthonormal_complement(a)
    pol = p["half_angle"] * np.sqrt((np.arange(m) + 0.5) / m)
    az = np.pi * (3 - np.sqrt(5)) * np.arange(m)
    dirs = (np.cos(pol)[:, None] * a
            + np.sin(pol)[:, None] * (np.cos(az)[:, None] * e1 + np.sin(az)[:, None] * e2))
    return np.asarray(p["center"], float) + p["radius"] * dirs


def point(p) -> BoundarySet:
    return BoundarySet("point", {"point": list(map(float, p))})


def finite_point_set(points) -> BoundarySet:
    return BoundarySet("finite_point_set", {"points": [list(map(float, q)) for q in points]})


def point_sequence_set(origin, scale, ratio, direction, k_max, include_limit=False) -> BoundarySet:
    return BoundarySet("point_sequence", {"origin": list(origin), "scale": scale, "ratio": ratio,
                                          "direction": list(direction), "k_max": k_max,
                                          "include_limit": include_limit})


def arc(center=(0.0, 0.0), radius=1.0, theta1=0.0, theta2=np.pi) -> BoundarySet:
    if not 0 <= theta2 - theta1 <= 2 * np.pi:
        raise BoundaryError("arc needs 0 <= theta2 - theta1 <= 2 pi")
    return BoundarySet("arc", {"center": list(center), "radius": radius,
                               "theta1": float(theta1), "theta2": float(theta2)})


def sphere_cap(center=(0.0, 0.0, 0.0), radius=1.0, axis=(0.0, 0.0, 1.0), half_angle=0.5) -> BoundarySet:
    return BoundarySet("sphere_cap", {"center": list(center), "radius": radius,
                                      "axis": list(axis), "half_angle": float(half_angle)})


def union(*members: BoundarySet) -> BoundarySet:
    return BoundarySet("union", {}, tuple(members))


def empty_set() -> BoundarySet:
    return BoundarySet("finite_point_set", {"points": []})


# -- boundary functions -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Payoff ``f`` on the boundary of a fixed domain.

    Calling the function on an array of boundary points returns the values;
    points farther than ``BOUNDARY_TOL`` from the boundary are rejected.
    """

    domain: Domain

    kind = "abstract"
    continuous = True

    def __call__(self, y):
        Y, single = as_points(y, self.domain.n)
        far = self.domain.boundary_distance(Y) > BOUNDARY_TOL
        if np.any(far):
            raise BoundaryError(f"payoff evaluated off the boundary at {Y[far][0]}")
        v = self._eval(Y)
        return float(v[0]) if single else v

    def evaluate(self, y) -> float:
        return self(y)

    def _eval(self, Y):  # pragma: no cover
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class Constant(BoundaryFunction):
    value: float = 0.0
    kind = "constant"

    def _eval(self, Y):
        return np.full(len(Y), float(self.value))

    def describe(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class LinearCoordinate(BoundaryFunction):
    index: int = 0
    scale: float = 1.0
    offset: float = 0.0
    kind = "linear_coordinate"

    def _eval(self, Y):
        return self.offset + self.scale * Y[:, self.index]

    def describe(self):
        return {"kind": self.kind, "index": self.index, "scale": self.scale, "offset": self.offset}


@dataclass(frozen=True, eq=False)
class AngularProfile(BoundaryFunction):
    """Periodic piecewise-linear table of values at equally spaced angles
    around ``center`` (planar domains)."""

    values: tuple = (0.0,)
    center: tuple = (0.0, 0.0)
    kind = "angular_profile"

    def at_angles(self, theta):
        v = np.asarray(self.values, float)
        M = len(v)
        s = np.mod(np.asarray(theta, float), 2 * np.pi) / (2 * np.pi) * M
        i0 = np.floor(s).astype(int) % M
        t = s - np.floor(s)
        return (1 - t) * v[i0] + t * v[(i0 + 1) % M]

    def _eval(self, Y):
        rel = Y[:, :2] - np.asarray(self.center, float)
        return self.at_angles(np.arctan2(rel[:, 1], rel[:, 0]))

    def describe(self):
        return {"kind": self.kind, "values": list(self.values), "center": list(self.center)}


def angular_profile(domain: Domain, func, samples: int = 4096, center=None) -> AngularProfile:
    """Tabulate ``func(theta)`` on ``samples`` equally spaced angles."""
    theta = 2 * np.pi * np.arange(samples) / samples
    c = tuple(domain.center[:2]) if center is None else tuple(center)
    return AngularProfile(domain, tuple(np.asarray(func(theta), float)), c)


@dataclass(frozen=True, eq=False)
class MollifiedIndicator(BoundaryFunction):
    """Tent ``max(0, 1 - dist(y, E) / delta)``; equals 1 on E."""

    E: BoundarySet = None
    delta: float = 0.1
    kind = "mollified_indicator"

    def __post_init__(self):
        if not self.delta > 0:
            raise BoundaryError("mollifier width must be positive")

    def _eval(self, Y):
        d = self.E._distance(Y)
        return np.maximum(0.0, 1.0 - d / self.delta)

    def describe(self):
        return {"kind": self.kind, "E": _set_dict(self.E), "delta": self.delta}


@dataclass(frozen=True, eq=False)
class PointwiseOverride(BoundaryFunction):
    """``base`` everywhere except at finitely many points (discontinuous)."""

    base: BoundaryFunction = None
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    values: tuple = ()
    match_tol: float = 1e-12
    kind = "pointwise_override"
    continuous = False

    def _eval(self, Y):
        v = self.base._eval(Y)
        P = np.asarray(self.points, float).reshape(len(self.values), -1)
        for p, val in zip(P, self.values):
            hit = np.linalg.norm(Y - p, axis=1) <= self.match_tol
            v = np.where(hit, float(val), v)
        return v

    def describe(self):
        return {"kind": self.kind, "base": self.base.describe(),
                "points": np.asarray(self.points).tolist(), "values": list(self.values)}


@dataclass(frozen=True, eq=False)
class Sum(BoundaryFunction):
    terms: tuple = ()
    kind = "sum"

    @property
    def continuous(self):
        return all(t.continuous for t in self.terms)

    def _eval(self, Y):
        return np.sum([t._eval(Y) for t in self.terms], axis=0)

    def describe(self):
        return {"kind": self.kind, "terms": [t.describe() for t in self.terms]}


def mollified_indicator(domain: Domain, E: BoundarySet, delta: float) -> MollifiedIndicator:
    E.check_on(domain)
    return MollifiedIndicator(domain, E, float(delta))


def pointwise_override(base: BoundaryFunction, points, values) -> PointwiseOverride:
    P = np.asarray(points, float).reshape(len(values), -1) if len(values) else np.zeros((0, base.domain.n))
    if len(P) and not np.all(base.domain.on_boundary(P)):
        raise BoundaryError("override points must lie on the boundary")
    return PointwiseOverride(base.domain, base, P, tuple(float(v) for v in values))


def mollify_sequence(domain: Domain, E: BoundarySet, deltas: Sequence[float]) -> list[MollifiedIndicator]:
    d = np.asarray(deltas, float)
    if d.size == 0:
        raise BoundaryError("empty delta list")
    if np.any(d <= 0) or np.any(np.diff(d) >= 0):
        raise BoundaryError("delta list must be positive and strictly decreasing")
    return [mollified_indicator(domain, E, float(x)) for x in d]


def _set_dict(E: BoundarySet) -> dict:
    out = {"kind": E.kind, **E.params}
    if E.members:
        out["members"] = [_set_dict(m) for m in E.members]
    return out
