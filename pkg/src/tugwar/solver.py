"""Grid value iteration for the eps-step game value.

Unknowns live on interior lattice nodes (distance to the boundary above
alpha*eps).  One sweep is

    u(x) <- 1/2 max_v A_v u(x) + 1/2 min_v A_v u(x),
    A_v u(x) = sum_q w_q u_interp(x + v + z_q(v)),

over a finite move set.  Band nodes hold the exact one-step value
1/2 max f + 1/2 min f over reachable boundary candidates; nodes outside the
domain hold the payoff at the nearest boundary point and only serve as
interpolation stencils.

The fixed point is found by policy iteration (a semismooth Newton method:
freeze both argmax/argmin choices, solve the resulting linear system) with a
Jacobi fallback whenever a Newton step fails to reduce the residual.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundaryFunction
from .game import GameParams, noise_quadrature
from .geometry import Domain, DomainError, as_points

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


class PreconditionError(SolverError, ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    h_ratio: float = 0.25          # lattice spacing h = h_ratio * eps
    directions: int | None = None  # n=2: equally spaced angles (default 16); n=3 ignores
    magnitudes: tuple = (1.0, 0.5)  # fractions of eps; the zero move is always appended
    noise_points: int = 8          # n=3 quadrature on the orthogonal circle
    candidate_samples: int = 16
    tol: float = 1e-6
    max_iterations: int = 50_000
    method: str = "newton"
    max_newton: int = 100
    jacobi_burst: int = 50
    warm_start: bool = True        # start from the solution at 2*eps on large lattices
    warm_start_nodes: int = 20_000

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def move_set(params: GameParams, config: SolverConfig) -> np.ndarray:
    """Candidate moves, zero move last (ties resolve to the lowest index)."""
    if params.n == 2:
        k = config.directions or 16
        ang = 2 * np.pi * np.arange(k) / k
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        dirs = np.array([d for d in itertools.product((-1, 0, 1), repeat=3) if any(d)], float)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        # lattice order with +x first so a linear x_1 field picks index 0 on ties
        order = np.lexsort((-dirs[:, 2], -dirs[:, 1], -dirs[:, 0]))
        dirs = dirs[order]
    moves = [m * params.eps * dirs for m in config.magnitudes if m > 0]
    moves.append(np.zeros((1, params.n)))
    return np.vstack(moves)


def game_regular_guard(domain: Domain, params: GameParams) -> None:
    if params.p > params.n:
        return
    if domain.kind in ("ball", "annulus", "polygon"):
        return  # exterior cone condition / simply connected polygon
    if domain.kind == "slit_ball" and params.n == 2:
        c, R = domain.center, domain.bounding_radius
        ends = [np.linalg.norm(np.asarray(e) - c) for e in domain.params["slit"]]
        if max(ends) >= R - 1e-12:
            return  # simply connected planar
    raise PreconditionError(
        f"game-regular guard: domain kind {domain.kind!r} needs p > n (got p={params.p}, n={params.n})")


@dataclass
class Grid:
    origin: np.ndarray
    h: float
    shape: tuple

    @property
    def strides(self) -> np.ndarray:
        s = np.ones(len(self.shape), dtype=np.int64)
        for a in range(len(self.shape) - 2, -1, -1):
            s[a] = s[a + 1] * self.shape[a + 1]
        return s

    def nodes(self) -> np.ndarray:
        axes = [self.origin[a] + self.h * np.arange(self.shape[a]) for a in range(len(self.shape))]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def stencil(self, offset: np.ndarray) -> tuple[list, list]:
        """Multilinear interpolation at ``node + offset`` as (index shift, weight)."""
        s = offset / self.h
        base = np.floor(s + 1e-12)
        frac = np.clip(s - base, 0.0, 1.0)
        frac[frac < 1e-12] = 0.0
        shifts, weights = [], []
        for corner in itertools.product((0, 1), repeat=len(s)):
            w = 1.0
            for a, c in enumerate(corner):
                w *= frac[a] if c else 1 - frac[a]
            if w > 0:
                shifts.append(tuple(int(base[a]) + c for a, c in enumerate(corner)))
                weights.append(w)
        return shifts, weights


def _merge(shifts, weights):
    acc = {}
    for s, w in zip(shifts, weights):
        acc[s] = acc.get(s, 0.0) + w
    keys = sorted(acc)
    return keys, np.array([acc[k] for k in keys])


@dataclass
class ValueField:
    domain: Domain
    f: BoundaryFunction
    params: GameParams
    config: SolverConfig
    grid: Grid
    values: np.ndarray          # full lattice, shape grid.shape
    interior_mask: np.ndarray
    band_mask: np.ndarray
    moves: np.ndarray
    stencils: list              # per move: (shift tuples, weights)
    noise_nodes: list           # per move: (Q, n) noise offsets, equal weights
    residual: float = math.inf
    iterations: int = 0
    newton_steps: int = 0

    @property
    def tol(self) -> float:
        return self.config.tol

    # -- operator ----------------------------------------------------------
    def _pad(self):
        return max(max(abs(c) for s in st[0] for c in s) for st in self.stencils) + 1

    def move_values(self, U: np.ndarray, j: int, pad=None, Upad=None) -> np.ndarray:
        P = self._pad() if pad is None else pad
        if Upad is None:
            Upad = np.pad(U, P, mode="edge")
        shifts, weights = self.stencils[j]
        out = np.zeros(U.shape)
        for s, w in zip(shifts, weights):
            sl = tuple(slice(P + s[a], P + s[a] + U.shape[a]) for a in range(U.ndim))
            out += w * Upad[sl]
        return out

    def _sweep(self, U: np.ndarray, want_policy: bool = False):
        P = self._pad()
        Upad = np.pad(U, P, mode="edge")
        hi = np.full(U.shape, -np.inf)
        lo = np.full(U.shape, np.inf)
        if want_policy:
            ahi = np.zeros(U.shape, dtype=np.int32)
            alo = np.zeros(U.shape, dtype=np.int32)
        for j in range(len(self.moves)):
            val = self.move_values(U, j, P, Upad)
            up = val > hi
            dn = val < lo
            hi = np.where(up, val, hi)
            lo = np.where(dn, val, lo)
            if want_policy:
                ahi[up] = j
                alo[dn] = j
        new = U.copy()
        m = self.interior_mask
        new[m] = 0.5 * (hi[m] + lo[m])
        if want_policy:
            return new, ahi[m], alo[m]
        return new

    def sweep(self, values: np.ndarray | None = None) -> np.ndarray:
        """One Jacobi sweep applied to ``values`` (defaults to the solution)."""
        return self._sweep(self.values if values is None else values)

    def residual_check(self) -> float:
        new = self._sweep(self.values)
        return float(np.max(np.abs(new - self.values)[self.interior_mask], initial=0.0))

    # -- queries -----------------------------------------------------------
    def interpolate(self, X) -> np.ndarray:
        """Multilinear interpolation of lattice values (no domain check)."""
        X, single = as_points(X, self.params.n)
        g = self.grid
        s = (X - g.origin) / g.h
        hi = np.array(g.shape) - 1
        s = np.clip(s, 0, hi)
        base = np.minimum(np.floor(s).astype(np.int64), hi - 1)
        frac = s - base
        out = np.zeros(len(X))
        for corner in itertools.product((0, 1), repeat=X.shape[1]):
            c = np.array(corner)
            w = np.prod(np.where(c, frac, 1 - frac), axis=1)
            idx = tuple((base + c).T)
            out += w * self.values[idx]
        return float(out[0]) if single else out

    def evaluate(self, x):
        X, single = as_points(x, self.params.n)
        if not np.all(self.domain.contains(X)):
            raise DomainError("evaluate called outside the domain")
        out = self.interpolate(X)
        return float(out[0]) if single else out

    def node_coordinates(self) -> np.ndarray:
        return self.grid.nodes().reshape(*self.grid.shape, self.params.n)

    def to_text(self) -> str:
        """Plain-text dump: '#' header lines, then one 'coords value kind' row per node."""
        lines = [
            f"# domain {self.domain.kind} {self.domain.params}",
            f"# params {self.params.to_dict()}",
            f"# tol {self.tol} residual {self.residual:.6e} iterations {self.iterations}",
            f"# grid origin {self.grid.origin.tolist()} h {self.grid.h} shape {list(self.grid.shape)}",
        ]
        X = self.grid.nodes()
        v = self.values.ravel()
        kind = np.where(self.interior_mask.ravel(), "i", np.where(self.band_mask.ravel(), "b", "x"))
        inside = self.interior_mask.ravel() | self.band_mask.ravel()
        for x, val, k in zip(X[inside], v[inside], kind[inside]):
            lines.append(" ".join(f"{c:.10g}" for c in x) + f" {val:.12g} {k}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations,
                "newton_steps": self.newton_steps, "tol": self.tol, "h": self.grid.h,
                "shape": list(self.grid.shape), "interior_nodes": int(self.interior_mask.sum()),
                "band_nodes": int(self.band_mask.sum()), "moves": len(self.moves)}


# -- construction --------------------------------------------------------------

def build_field(domain: Domain, f: BoundaryFunction, params: GameParams,
                config: SolverConfig = SolverConfig()) -> ValueField:
    """Lattice, masks, fixed values and initial guess, without iterating."""
    params.check_domain(domain)
    if f.domain is not domain and f.domain.n != domain.n:
        raise PreconditionError("payoff and domain dimensions differ")
    if config.h_ratio > 0.25:
        raise PreconditionError("lattice must resolve the move scale: h <= eps/4")
    n = params.n
    h = config.h_ratio * params.eps
    half = int(math.ceil((domain.bounding_radius + 2 * h) / h))
    grid = Grid(domain.center - half * h, h, (2 * half + 1,) * n)
    X = grid.nodes()
    inside = domain.contains(X)
    d = domain.boundary_distance(X)
    band = inside & (d <= params.band)
    interior = inside & ~band
    values = np.empty(len(X))
    values[~interior] = np.nan
    out = ~inside
    values[out] = f._eval(domain.nearest_boundary_point(X[out]))
    values[interior] = f._eval(domain.nearest_boundary_point(X[interior]))
    bidx = np.flatnonzero(band)
    for chunk in np.array_split(bidx, max(1, len(bidx) // 4096)):
        if len(chunk) == 0:
            continue
        C, M = domain.candidates_batch(X[chunk], params.band, config.candidate_samples)
        fv = f._eval(C.reshape(-1, n)).reshape(M.shape)
        hi = np.where(M, fv, -np.inf).max(axis=1)
        lo = np.where(M, fv, np.inf).min(axis=1)
        values[chunk] = 0.5 * (hi + lo)
    moves = move_set(params, config)
    stencils, noise_nodes = [], []
    for v in moves:
        Z = noise_quadrature(v, params.kappa, config.noise_points)
        if np.linalg.norm(v) == 0:
            Z = np.zeros((1, n))
        shifts, weights = [], []
        for z in Z:
            s, w = grid.stencil(v + z)
            shifts += s
            weights += [wi / len(Z) for wi in w]
        stencils.append(_merge(shifts, weights))
        noise_nodes.append(Z)
    return ValueField(domain, f, params, config, grid, values.reshape(grid.shape),
                      interior.reshape(grid.shape), band.reshape(grid.shape), moves,
                      stencils, noise_nodes)


def solve(domain: Domain, f: BoundaryFunction, params: GameParams,
          config: SolverConfig = SolverConfig(), initial: np.ndarray | None = None) -> ValueField:
    """Solve the one-step optimality recursion to ``config.tol`` (sup norm)."""
    if not f.continuous:
        raise PreconditionError("payoff must be continuous for the grid solver")
    game_regular_guard(domain, params)
    field = build_field(domain, f, params, config)
    if initial is not None:
        field.values[field.interior_mask] = initial[field.interior_mask]
    elif config.warm_start and field.interior_mask.sum() > config.warm_start_nodes:
        coarse = solve(domain, f, replace(params, eps=2 * params.eps), config)
        X = field.grid.nodes()[field.interior_mask.ravel()]
        field.values[field.interior_mask] = coarse.interpolate(X)
        field.iterations += coarse.iterations
    if config.method == "jacobi":
        _jacobi(field, config.max_iterations)
    elif config.method == "newton":
        _newton(field)
    else:
        raise ValueError(f"unknown solver method {config.method!r}")
    return field


def _jacobi(field: ValueField, budget: int) -> None:
    m = field.interior_mask
    for _ in range(budget):
        new = field._sweep(field.values)
        res = float(np.max(np.abs(new - field.values)[m], initial=0.0))
        field.values = new
        field.iterations += 1
        field.residual = res
        if res < field.tol:
            return
    raise NonConvergence(field.residual, field.iterations)


def _policy_system(field: ValueField, a: np.ndarray, b: np.ndarray):
    g = field.grid
    strides = g.strides
    m = field.interior_mask.ravel()
    I = np.flatnonzero(m)
    N = len(I)
    lookup = np.full(m.size, -1, dtype=np.int64)
    lookup[I] = np.arange(N)
    u = field.values.ravel()
    rows, cols, data = [np.arange(N)], [np.arange(N)], [np.ones(N)]
    rhs = np.zeros(N)
    for pol in (a, b):
        for j in np.unique(pol):
            r = np.flatnonzero(pol == j)
            shifts, weights = field.stencils[j]
            for s, w in zip(shifts, weights):
                col = I[r] + int(np.dot(s, strides))
                unk = lookup[col]
                known = unk < 0
                if np.any(known):
                    np.add.at(rhs, r[known], 0.5 * w * u[col[known]])
                rows.append(r[~known])
                cols.append(unk[~known])
                data.append(np.full((~known).sum(), -0.5 * w))
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    return A, rhs


def _solve_linear(A, rhs, x0):
    x = None
    if A.shape[0] > 20_000:
        try:
            ml = pyamg.smoothed_aggregation_solver(
                A, symmetry="nonsymmetric", smooth=("jacobi", {"weighting": "local"}))
            x = ml.solve(rhs, x0=x0, tol=1e-13, maxiter=200, accel="gmres")
            if np.max(np.abs(A @ x - rhs)) > 1e-11:
                x = None
        except Exception as exc:
            log.debug("multigrid solve failed: %s", exc)
            x = None
    if x is None:
        try:
            x = spla.spsolve(A.tocsc(), rhs, permc_spec="COLAMD")
        except Exception as exc:  # singular policy system
            log.debug("direct solve failed: %s", exc)
            return None
    if not np.all(np.isfinite(x)):
        return None
    return x


def _newton(field: ValueField) -> None:
    cfg = field.config
    m = field.interior_mask
    if not np.any(m):
        field.residual = 0.0
        return
    best, best_values, stall = math.inf, field.values, 0
    while field.iterations < cfg.max_iterations:
        new, a, b = field._sweep(field.values, want_policy=True)
        res = float(np.max(np.abs(new - field.values)[m]))
        field.residual = res
        if res < cfg.tol:
            return
        if res < best:
            best, best_values, stall = res, field.values, 0
        else:
            stall += 1
        if field.newton_steps >= cfg.max_newton:
            break
        x = None
        if stall < 4:
            A, rhs = _policy_system(field, a, b)
            x = _solve_linear(A, rhs, field.values[m])
            field.newton_steps += 1
            field.iterations += 1
        if x is not None:
            trial = field.values.copy()
            trial[m] = x
            field.values = trial
            continue
        # policy iteration is cycling or singular: contract from the best iterate
        log.debug("newton stalled at residual %.3e; jacobi burst", best)
        field.values = best_values
        for _ in range(cfg.jacobi_burst):
            field.values = field._sweep(field.values)
            field.iterations += 1
        best, stall = math.inf, 0
    _jacobi(field, cfg.max_iterations - field.iterations)


def with_tol(config: SolverConfig, tol: float) -> SolverConfig:
    return replace(config, tol=tol)
