"""Concrete strategies, including the staged strategy that forces the game to
end on a sequence of exterior points accumulating at ``x0``.

Batch convention: one strategy instance serves every game of a batch and
keeps per-game state in arrays indexed by the batch index ``idx``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .boundary import mollified_indicator, point
from .game import GameContext, GameParams, Strategy, noise_quadrature
from .geometry import Domain, as_points, punctured_annulus, punctured_ball
from .solver import SolverConfig, ValueField, move_set, solve

log = logging.getLogger(__name__)


class PlanError(ValueError):
    pass


def _first_best(scores: np.ndarray, sense: str) -> np.ndarray:
    """Row-wise arg-opt with ties resolved to the lowest column."""
    return np.argmax(scores, axis=1) if sense == "maximize" else np.argmin(scores, axis=1)


def noise_table(moves: np.ndarray, kappa: float, Q: int) -> np.ndarray:
    """Quadrature nodes for every move, shape (n_moves, q, n); the zero move
    gets repeated zero rows so all moves share one equal-weight rule."""
    tabs = [noise_quadrature(v, kappa, Q) for v in moves]
    q = max(len(t) for t in tabs)
    return np.stack([t if len(t) == q else np.zeros((q, moves.shape[1])) for t in tabs])


def _scores(interp, X: np.ndarray, moves: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Equal-weight average of ``interp`` over ``X + v + z`` for every move."""
    B, n = X.shape
    M, q, _ = noise.shape
    P = X[:, None, None, :] + moves[None, :, None, :] + noise[None]
    return interp(P.reshape(-1, n)).reshape(B, M, q).mean(axis=2)


# -- simple rules ----------------------------------------------------------------

class PullToward(Strategy):
    """Step straight at ``target``; in the band, end at the candidate nearest to it."""

    name = "pull_toward"

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    def interior_moves(self, X, idx, ctx):
        d = self.target - X
        r = np.linalg.norm(d, axis=1, keepdims=True)
        step = np.minimum(r, ctx.params.eps)
        with np.errstate(invalid="ignore", divide="ignore"):
            V = np.where(r > 0, d / np.where(r > 0, r, 1.0) * step, 0.0)
        return V

    def terminal_points(self, X, idx, ctx):
        C, M = ctx.domain.candidates_batch(X, ctx.params.band, ctx.candidate_samples)
        dist = np.where(M, np.linalg.norm(C - self.target, axis=-1), np.inf)
        k = np.argmin(dist, axis=1)
        return C[np.arange(len(X)), k]

    def describe(self):
        return {"name": self.name, "target": self.target.tolist()}


def pull_toward(target) -> PullToward:
    return PullToward(target)


class RandomMoves(Strategy):
    """Uniform move in the eps-ball and a uniformly chosen reachable candidate."""

    name = "random"

    def interior_moves(self, X, idx, ctx):
        n, eps = ctx.params.n, ctx.params.eps
        G = ctx.rng.standard_normal((len(X), n))
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        r = eps * ctx.rng.random(len(X)) ** (1.0 / n)
        return G * r[:, None]

    def terminal_points(self, X, idx, ctx):
        C, M = ctx.domain.candidates_batch(X, ctx.params.band, ctx.candidate_samples)
        u = ctx.rng.random(len(X))
        counts = M.sum(axis=1)
        pick = np.minimum((u * counts).astype(int), counts - 1)
        # index of the pick-th valid slot
        k = np.argmax(np.cumsum(M, axis=1) > pick[:, None], axis=1)
        return C[np.arange(len(X)), k]


class DPPGreedy(Strategy):
    """Greedy policy read off a solved value field.

    Interior: the move maximizing (or minimizing) the noise-averaged
    interpolated value; band: the candidate optimizing the payoff.
    """

    name = "dpp_greedy"

    def __init__(self, field: ValueField, sense: str = "maximize", rescale: bool = False):
        if sense not in ("maximize", "minimize"):
            raise ValueError("sense must be 'maximize' or 'minimize'")
        if not field.residual <= field.tol:
            raise ValueError(f"field residual {field.residual:.3e} exceeds its tolerance {field.tol:.3e}")
        self.field = field
        self.sense = sense
        self.rescale = rescale
        self._own = None

    def _moves(self, ctx):
        """Move set and noise nodes for the game's eps.

        Without ``rescale`` the game must use the field's own parameters;
        with it, a field solved at a coarser eps guides moves at the game's eps.
        """
        fp, gp = self.field.params, ctx.params
        same = gp.n == fp.n and gp.p == fp.p and math.isclose(gp.eps, fp.eps)
        if not same and (not self.rescale or gp.n != fp.n):
            raise ValueError("field was solved for different game parameters")
        if self._own is None or self._own[0] != gp:
            M = self.field.moves if same else move_set(gp, self.field.config)
            self._own = (gp, M, noise_table(M, gp.kappa, self.field.config.noise_points))
        return self._own[1], self._own[2]

    def move_scores(self, X: np.ndarray, moves=None, noise=None) -> np.ndarray:
        """Noise-averaged interpolated values, shape (len(X), n_moves)."""
        fd = self.field
        if moves is None:
            moves = fd.moves
            noise = noise_table(moves, fd.params.kappa, fd.config.noise_points)
        return _scores(fd.interpolate, X, moves, noise)

    def interior_moves(self, X, idx, ctx):
        moves, noise = self._moves(ctx)
        j = _first_best(self.move_scores(X, moves, noise), self.sense)
        return moves[j]

    def terminal_points(self, X, idx, ctx):
        C, M = ctx.domain.candidates_batch(X, ctx.params.band, ctx.candidate_samples)
        fv = self.field.f._eval(C.reshape(-1, X.shape[1])).reshape(M.shape)
        fill = -np.inf if self.sense == "maximize" else np.inf
        k = _first_best(np.where(M, fv, fill), self.sense)
        return C[np.arange(len(X)), k]

    def describe(self):
        return {"name": self.name, "sense": self.sense, "field": self.field.summary()}


def dpp_greedy(field: ValueField, sense: str = "maximize", rescale: bool = False) -> DPPGreedy:
    return DPPGreedy(field, sense, rescale)


# -- plans -----------------------------------------------------------------------

def _sq_radius(y, x0) -> Fraction:
    return sum((Fraction(float(a)) - Fraction(float(b))) ** 2 for a, b in zip(y, x0))


def _ratio_ok(s0: Fraction, s1: Fraction, s2: Fraction) -> bool:
    """|y0|/|y1| <= |y1|/|y2| on squared radii, exactly."""
    return s0 * s2 <= s1 * s1


@dataclass
class PerturbationPlan:
    """Targets ``y_1, y_2, ...`` (stored 0-based) converging to ``x0``.

    Stage ``k`` (1-based) lives on ``{|y_{k+2}| < |x - x0| < |y_k|}`` minus
    ``y_{k+1}`` and tries to end the game at ``y_{k+1}``.  The last stage,
    lacking ``y_{k+2}``, is the ball ``|x - x0| < |y_k|`` minus ``x0`` and
    ``y_{k+1}``.
    """

    x0: np.ndarray
    target_sequence: np.ndarray
    ratios_ok: bool
    i: int | None = None
    j: int | None = None
    N: int | None = None
    delta: float | None = None
    delta_x: float | None = None
    start_stage: int | None = None
    notes: list = dc_field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.target_sequence)

    @property
    def n(self) -> int:
        return len(self.x0)

    def y(self, k: int) -> np.ndarray:
        return self.target_sequence[k - 1]

    def radius(self, k: int) -> float:
        """``|y_k - x0|``; beyond the stored targets the sequence is continued
        by the extremal rule ``r_{k+1} = r_k**2 / r_{k-1}``."""
        if "_r" not in self.__dict__:
            self.__dict__["_r"] = [float(np.linalg.norm(y - self.x0)) for y in self.target_sequence]
        r = list(self.__dict__["_r"])
        while len(r) < k:
            r.append(r[-1] ** 2 / r[-2])
        return r[k - 1]

    @property
    def stages(self) -> range:
        return range(1, self.K)

    def stage_domain(self, k: int) -> Domain:
        """Stage domain in the original coordinates."""
        if k not in self.stages:
            raise PlanError(f"stage {k} outside 1..{self.K - 1}")
        yk1 = self.y(k + 1)
        if k + 2 <= self.K:
            return punctured_annulus(self.x0, self.radius(k + 2), self.radius(k), [yk1])
        return punctured_ball(self.x0, self.radius(k), [self.x0, yk1])

    @property
    def stage_domains(self) -> list:
        return [self.stage_domain(k) for k in self.stages]

    # normalized frame: x0 -> 0, |y_k| -> 1, y_{k+1} onto the +x axis
    def frame(self, k: int) -> tuple[np.ndarray, float]:
        u = self.y(k + 1) - self.x0
        u = u / np.linalg.norm(u)
        e = np.zeros(self.n)
        e[0] = 1.0
        w = u - e
        H = np.eye(self.n)
        if np.linalg.norm(w) > 1e-15:
            H -= 2 * np.outer(w, w) / np.dot(w, w)
        return H, self.radius(k)

    def to_stage(self, k: int, X) -> np.ndarray:
        H, s = self.frame(k)
        return (np.atleast_2d(X) - self.x0) @ H.T / s

    def stage_shape(self, k: int) -> tuple:
        """Scale-free description of stage ``k``: (inner radius, target radius, last)."""
        last = k + 2 > self.K
        rin = 0.0 if last else self.radius(k + 2) / self.radius(k)
        return (round(rin, 12), round(self.radius(k + 1) / self.radius(k), 12), last)

    def normalized_stage(self, k: int) -> tuple[Domain, np.ndarray]:
        rin, ry, last = self.stage_shape(k)
        z = np.zeros(self.n)
        yk = z.copy()
        yk[0] = ry
        if last:
            return punctured_ball(z, 1.0, [z, yk]), yk
        return punctured_annulus(z, rin, 1.0, [yk]), yk

    def stage_of_radius(self, r: float, k: int | None = None) -> int | None:
        """Stage whose open shell contains radius ``r``, starting from ``k``.

        Without ``k`` the start rule applies: ``r`` in ``[|y_m|, |y_{m-1}|)``
        gives stage ``m - 1``, so a start exactly on a target sphere is
        assigned to the outer shell.
        """
        R = [self.radius(q) for q in range(1, self.K + 1)]
        if r >= R[0]:
            return None
        if k is None:
            m = next((q for q in range(2, self.K + 1) if r >= R[q - 1]), self.K)
            return m - 1
        while k > 1 and r >= R[k - 1]:
            k -= 1
        if r >= R[k - 1]:
            return None
        while k + 2 <= self.K and r <= R[k + 1]:
            k += 1
        return k

    def with_bookkeeping(self, i: int, delta: float, x_start) -> "PerturbationPlan":
        """Fill in ``i, j, N`` and the inner exclusion radius for a start point."""
        if i < 1:
            raise PlanError("i must be >= 1")
        rs = float(np.linalg.norm(np.asarray(x_start, float) - self.x0))
        j = next((q for q in range(1, self.K + 1) if self.radius(q) < delta), None)
        if j is None:
            raise PlanError(f"no target inside radius {delta}")
        if i + j > self.K:
            raise PlanError(f"plan too short for i={i}, j={j}")
        if not 0 < rs < self.radius(i + j):
            raise PlanError("start must satisfy 0 < |x - x0| < |y_{i+j}|")
        N = 1
        while i + j + N <= self.K and rs < self.radius(i + j + N):
            N += 1
        if i + j + N > self.K:
            raise PlanError("start lies inside the innermost target sphere")
        notes = list(self.notes)
        if any(math.isclose(rs, self.radius(q), rel_tol=1e-12) for q in range(1, self.K + 1)):
            notes.append("start on a target sphere: assigned to the outer shell")
        dx = self.radius(2 * i + j + N + 1)
        if 2 * i + j + N + 1 > self.K:
            notes.append("inner exclusion radius continued past the stored targets "
                         "by the extremal ratio rule")
        return PerturbationPlan(self.x0, self.target_sequence, self.ratios_ok, i, j, N, delta, dx,
                                i + j + N - 1, notes)

    def to_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "targets": self.target_sequence.tolist(),
                "radii": [self.radius(k) for k in range(1, self.K + 1)],
                "ratios_ok": self.ratios_ok, "i": self.i, "j": self.j, "N": self.N,
                "delta": self.delta, "delta_x": self.delta_x, "start_stage": self.start_stage,
                "stage_shapes": [list(self.stage_shape(k)) for k in self.stages],
                "notes": self.notes}


def check_ratios(targets, x0) -> bool:
    s = [_sq_radius(y, x0) for y in targets]
    if any(b >= a for a, b in zip(s, s[1:])) or any(q == 0 for q in s):
        return False
    return all(_ratio_ok(s[k], s[k + 1], s[k + 2]) for k in range(len(s) - 2))


def select_subsequence(candidates, x0, K: int | None = None) -> PerturbationPlan:
    """Greedy scan keeping the first admissible candidate at each stage."""
    x0 = np.asarray(x0, dtype=float)
    C, _ = as_points(candidates, len(x0))
    kept, sq = [], []
    for c in C:
        s = _sq_radius(c, x0)
        if s == 0:
            continue
        if len(kept) == 0 or (len(kept) == 1 and s < sq[0]) or (
                len(kept) >= 2 and s < sq[-1] and _ratio_ok(sq[-2], sq[-1], s)):
            kept.append(c)
            sq.append(s)
            if K is not None and len(kept) == K:
                break
    need = 3 if K is None else K
    if len(kept) < need:
        raise PlanError(f"candidates exhausted after {len(kept)} targets (needed {need})")
    T = np.array(kept)
    return PerturbationPlan(x0, T, check_ratios(T, x0))


# -- stage fields ----------------------------------------------------------------

@dataclass
class StageSolution:
    k: int
    field: ValueField
    target: np.ndarray          # target in the normalized frame
    delta: float                # tent width of the stage payoff


def solve_stage(plan: PerturbationPlan, k: int, p: float, eps: float,
                config: SolverConfig = SolverConfig(), _cache: dict | None = None) -> StageSolution:
    """Value of the tent payoff at ``y_{k+1}`` on the normalized stage ``k``."""
    key = plan.stage_shape(k) + (p, eps, config)
    if _cache is not None and key in _cache:
        s = _cache[key]
        return StageSolution(k, s.field, s.target, s.delta)
    D, yk = plan.normalized_stage(k)
    params = GameParams(plan.n, p, eps)
    f = mollified_indicator(D, point(yk), params.band)
    field = solve(D, f, params, config)
    sol = StageSolution(k, field, yk, params.band)
    if _cache is not None:
        _cache[key] = sol
    return sol


def solve_stages(plan: PerturbationPlan, p: float, eps: float,
                 config: SolverConfig = SolverConfig()) -> dict:
    """Stage solutions for every stage; stages with the same shape share a field."""
    cache: dict = {}
    return {k: solve_stage(plan, k, p, eps, config, cache) for k in plan.stages}


def _sphere_sample(n: int, r: float, m: int) -> np.ndarray:
    if n == 2:
        a = 2 * np.pi * (np.arange(m) + 0.5) / m
        return r * np.stack([np.cos(a), np.sin(a)], axis=1)
    i = np.arange(m) + 0.5
    z = 1 - 2 * i / m
    phi = np.pi * (1 + 5 ** 0.5) * i
    s = np.sqrt(1 - z * z)
    return r * np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def stage_infimum(sol: StageSolution, samples: int = 720) -> float:
    """Infimum of the stage value over the sphere through the stage target."""
    D = sol.field.domain
    S = _sphere_sample(D.n, float(np.linalg.norm(sol.target)), samples)
    S = S[D.contains(S)]
    return float(np.min(sol.field.interpolate(S)))


def theta(plan: PerturbationPlan, k: int, p: float, eps: float,
          config: SolverConfig = SolverConfig(), samples: int = 720) -> float:
    """``inf`` over ``|x - x0| = |y_{k+1}|`` of the stage-``k`` value."""
    if p <= plan.n:
        raise ValueError("theta is defined in the regime p > n")
    return stage_infimum(solve_stage(plan, k, p, eps, config), samples)


# -- the staged strategy ----------------------------------------------------------

class PerturbationStrategy(Strategy):
    """Player I's staged strategy.

    Each game carries an active stage ``k``.  Inside the stage, play greedily
    on the stage value (moves restricted to the closed stage domain).  When
    the position leaves the stage shell it switches to the stage whose shell
    now contains it: outward exits lower ``k``, inward exits raise it.  In
    the band it ends on a plan target whenever one is reachable, otherwise on
    the candidate with the largest stage payoff.
    """

    name = "perturbation"

    def __init__(self, plan: PerturbationPlan, stage_fields: dict):
        missing = [k for k in plan.stages if k not in stage_fields]
        if missing:
            raise PlanError(f"missing stage fields for stages {missing}")
        for sol in stage_fields.values():
            if not sol.field.residual <= sol.field.tol:
                raise ValueError("stage field is not converged")
        self.plan = plan
        self.stage_fields = stage_fields
        self._radii = np.array([plan.radius(q) for q in range(1, plan.K + 1)])
        self.stage = np.zeros(0, dtype=int)
        self.failed = np.zeros(0, dtype=bool)
        self.switches = 0

    # per-game state ------------------------------------------------------
    def start(self, X0, ctx):
        r = np.linalg.norm(X0 - self.plan.x0, axis=1)
        self.stage = np.array([self.plan.stage_of_radius(x) or 0 for x in r], dtype=int)
        self.failed = self.stage == 0
        self._moves = move_set(ctx.params, SolverConfig())
        self._noise = noise_table(self._moves, ctx.params.kappa, 8)

    def observe(self, X, idx, ctx):
        R = self._radii
        K = len(R)
        r = np.linalg.norm(X - self.plan.x0, axis=1)
        k = self.stage[idx].copy()
        live = k > 0
        while True:  # outward exits: r >= |y_k|
            out = live & (k > 1) & (r >= R[np.maximum(k, 1) - 1])
            if not np.any(out):
                break
            k[out] -= 1
        lost = live & (r >= R[np.maximum(k, 1) - 1])
        while True:  # inward exits: r <= |y_{k+2}|
            inn = live & ~lost & (k + 2 <= K) & (r <= R[np.minimum(k + 1, K - 1)])
            if not np.any(inn):
                break
            k[inn] += 1
        k[lost] = 0
        self.failed[idx[lost]] = True
        self.switches += int(np.sum(k != self.stage[idx]))
        self.stage[idx] = k

    @property
    def failures(self) -> int:
        return int(self.failed.sum())

    # decisions --------------------------------------------------------------
    def interior_moves(self, X, idx, ctx):
        V = np.zeros_like(X)
        ks = self.stage[idx]
        nomove = ks == 0
        if np.any(nomove):
            V[nomove] = PullToward(self.plan.y(1)).interior_moves(X[nomove], idx[nomove], ctx)
        for k in np.unique(ks[~nomove]):
            sel = ks == k
            V[sel] = self._stage_moves(int(k), X[sel])
        return V

    def _stage_moves(self, k, X):
        sol = self.stage_fields[k]
        H, s = self.plan.frame(k)
        Dn = sol.field.domain
        n = X.shape[1]
        Xn = self.plan.to_stage(k, X)
        # the frame map is affine, so score in normalized coordinates directly
        Vn = self._moves @ H.T / s
        Zn = self._noise @ H.T / s
        scores = _scores(sol.field.interpolate, Xn, Vn, Zn)
        # stay in the closed stage domain (the zero move, last, always qualifies)
        Yn = (Xn[:, None, :] + Vn[None, :-1]).reshape(-1, n)
        ok = (Dn.contains(Yn) | Dn.on_boundary(Yn, 1e-12)).reshape(len(X), -1)
        scores[:, :-1] = np.where(ok, scores[:, :-1], -np.inf)
        return self._moves[_first_best(scores, "maximize")]

    def terminal_points(self, X, idx, ctx):
        C, M = ctx.domain.candidates_batch(X, ctx.params.band, ctx.candidate_samples)
        B, Kc, n = C.shape
        T = self.plan.target_sequence
        is_target = np.min(np.linalg.norm(C[:, :, None, :] - T[None, None], axis=-1), axis=-1) <= 1e-12
        score = 2.0 * is_target
        ks = self.stage[idx]
        for k in np.unique(ks[ks > 0]):
            sel = ks == k
            sol = self.stage_fields[int(k)]
            Cn = self.plan.to_stage(int(k), C[sel].reshape(-1, n))
            tent = np.maximum(0.0, 1 - np.linalg.norm(Cn - sol.target, axis=1) / sol.delta)
            score[sel] += tent.reshape(-1, Kc)
        score = np.where(M, score, -np.inf)
        return C[np.arange(B), np.argmax(score, axis=1)]

    def describe(self):
        return {"name": self.name, "plan": self.plan.to_dict(),
                "stage_fields": {int(k): s.field.summary() for k, s in self.stage_fields.items()}}


def perturbation_strategy(plan: PerturbationPlan, stage_fields: dict) -> PerturbationStrategy:
    return PerturbationStrategy(plan, stage_fields)
