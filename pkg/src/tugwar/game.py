"""Tug-of-war with noise: rules, strategies interface and a batch simulator.

One step of the game: a fair coin picks the mover.  Far from the boundary
(distance > alpha*eps) the mover picks ``v`` with ``|v| <= eps`` and the
position becomes ``x + v + z`` where ``z`` is uniform on the sphere of radius
``kappa*|v|`` in the hyperplane orthogonal to ``v``.  Inside the band the
mover must end the game at a boundary point within ``alpha*eps``.

All games of a batch are advanced together; ``play`` is a batch of one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryFunction
from .geometry import BOUNDARY_TOL, Domain, _orthonormal_complement

PROTOCOL_RTOL = 1e-9


class ProtocolViolation(RuntimeError):
    """A strategy returned an illegal move or terminal point."""

    def __init__(self, player: str, message: str):
        super().__init__(f"player {player}: {message}")
        self.player = player


@dataclass(frozen=True)
class GameParams:
    n: int
    p: float
    eps: float
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("n must be 2 or 3")
        if not 1 < self.p < math.inf:
            raise ValueError("p must satisfy 1 < p < inf")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def kappa(self) -> float:
        return math.sqrt((self.n - 1) / (self.p - 1))

    @property
    def alpha(self) -> float:
        return 1.0 + self.kappa

    @property
    def band(self) -> float:
        return self.alpha * self.eps

    def check_domain(self, domain: Domain) -> None:
        if domain.n != self.n:
            raise ValueError(f"params are for n={self.n}, domain has n={domain.n}")
        if not self.eps < domain.bounding_radius:
            raise ValueError("eps must be smaller than the domain's bounding radius")

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "eps": self.eps, "max_steps": self.max_steps,
                "kappa": self.kappa, "alpha": self.alpha}


@dataclass
class GameContext:
    """What a strategy may consult besides the positions it is asked about."""

    domain: Domain
    params: GameParams
    rng: np.random.Generator
    candidate_samples: int = 16
    step: int = 0


class Strategy:
    """Decision rule for one player over a batch of games.

    ``interior_moves`` and ``terminal_points`` receive the current positions
    of the games where this player won the coin, plus their batch indices.
    ``observe`` is called after every step with all still-running games, so
    history-dependent strategies can keep per-game state.
    """

    name = "strategy"

    def start(self, X0: np.ndarray, ctx: GameContext) -> None:
        pass

    def interior_moves(self, X: np.ndarray, idx: np.ndarray, ctx: GameContext) -> np.ndarray:
        raise NotImplementedError

    def terminal_points(self, X: np.ndarray, idx: np.ndarray, ctx: GameContext) -> np.ndarray:
        raise NotImplementedError

    def observe(self, X: np.ndarray, idx: np.ndarray, ctx: GameContext) -> None:
        pass

    def describe(self) -> dict:
        return {"name": self.name}


# -- noise ---------------------------------------------------------------------

def noise_from_draws(V: np.ndarray, kappa: float, draws: np.ndarray) -> np.ndarray:
    """Map uniform draws in [0, 1) to orthogonal noise vectors for moves ``V``.

    n = 2: the orthogonal sphere is two points, chosen by ``draws < 1/2``.
    n = 3: ``draws`` is the angle fraction on the orthogonal circle.
    """
    V = np.atleast_2d(V)
    n = V.shape[1]
    if n == 2:
        sign = np.where(draws < 0.5, 1.0, -1.0)
        perp = np.stack([-V[:, 1], V[:, 0]], axis=1)
        return (kappa * sign)[:, None] * perp
    norm = np.linalg.norm(V, axis=1)
    Z = np.zeros_like(V)
    nz = norm > 0
    if np.any(nz):
        U = V[nz] / norm[nz, None]
        k = np.argmin(np.abs(U), axis=1)
        E = np.eye(3)[k]
        A = np.cross(U, E)
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        B = np.cross(U, A)
        phi = 2 * np.pi * draws[nz]
        Z[nz] = (kappa * norm[nz])[:, None] * (np.cos(phi)[:, None] * A + np.sin(phi)[:, None] * B)
    return Z


def sample_noise(v, params: GameParams, rng: np.random.Generator) -> np.ndarray:
    v = np.asarray(v, float)
    if np.linalg.norm(v) > params.eps * (1 + PROTOCOL_RTOL):
        raise ValueError("|v| exceeds eps")
    return noise_from_draws(v[None], params.kappa, rng.random(1))[0]


def noise_quadrature(v: np.ndarray, kappa: float, Q: int) -> np.ndarray:
    """Deterministic quadrature nodes for the noise of move ``v`` (shape (Q, n)),
    equal weights 1/Q; n = 2 always uses the exact two-point rule."""
    n = v.shape[0]
    if n == 2:
        perp = np.array([-v[1], v[0]])
        return np.stack([kappa * perp, -kappa * perp])
    nv = np.linalg.norm(v)
    if nv == 0:
        return np.zeros((Q, 3))
    a, b = _orthonormal_complement(v / nv)
    phi = 2 * np.pi * np.arange(Q) / Q
    return kappa * nv * (np.cos(phi)[:, None] * a + np.sin(phi)[:, None] * b)


# -- transcripts and state -------------------------------------------------------

@dataclass
class Transcript:
    positions: np.ndarray
    coins: list
    moves: np.ndarray
    noises: np.ndarray
    terminated: bool
    terminal_point: np.ndarray | None
    payoff: float
    steps: int
    seed_tag: str

    def to_record(self) -> dict:
        return {
            "seed_tag": self.seed_tag,
            "steps": self.steps,
            "terminated": self.terminated,
            "payoff": self.payoff,
            "terminal_point": None if self.terminal_point is None else self.terminal_point.tolist(),
            "coins": self.coins,
            "positions": self.positions.tolist(),
        }


def transcripts_to_jsonl(transcripts) -> str:
    """One JSON record per line (positions, coins, payoff, seed_tag, ...)."""
    return "".join(json.dumps(t.to_record()) + "\n" for t in transcripts)


@dataclass
class GameState:
    """A single game in progress (used by ``step``)."""

    position: np.ndarray
    steps: int = 0
    terminated: bool = False
    terminal_point: np.ndarray | None = None
    history: list = field(default_factory=list)
    started: bool = False


@dataclass
class BatchResult:
    terminal: np.ndarray        # (B, n), NaN where not terminated
    terminated: np.ndarray      # (B,)
    steps: np.ndarray           # (B,)
    payoff: np.ndarray          # (B,)
    seed_tag: str
    transcripts: list | None = None

    @property
    def termination_rate(self) -> float:
        return float(np.mean(self.terminated))


def streams(seed: int, block: int = 0) -> tuple[np.random.Generator, np.random.Generator]:
    """Disjoint (game, strategy) generators for one block of trajectories."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    g, s = ss.spawn(2)
    return np.random.default_rng(g), np.random.default_rng(s)


def _advance(X, A, sI, sII, ctx: GameContext, game_rng):
    """Advance the games with indices ``A``; returns per-game step records.

    Returns ``(coins, V, Z, term_mask, Y)`` aligned with ``A``.
    """
    params, domain = ctx.params, ctx.domain
    x = X[A]
    k = len(A)
    coin_I = game_rng.random(k) < 0.5
    draws = game_rng.random(k)
    d = domain.boundary_distance(x)
    band = d <= params.band
    V = np.zeros((k, params.n))
    Y = np.full((k, params.n), np.nan)
    for player, strat, mask in (("I", sI, coin_I), ("II", sII, ~coin_I)):
        sel = mask & ~band
        if np.any(sel):
            v = np.asarray(strat.interior_moves(x[sel], A[sel], ctx), float).reshape(-1, params.n)
            norms = np.linalg.norm(v, axis=1)
            if np.any(norms > params.eps * (1 + PROTOCOL_RTOL)):
                raise ProtocolViolation(player, f"move of length {norms.max():.6g} exceeds eps={params.eps}")
            V[sel] = v
        sel = mask & band
        if np.any(sel):
            y = np.asarray(strat.terminal_points(x[sel], A[sel], ctx), float).reshape(-1, params.n)
            if np.any(domain.boundary_distance(y) > BOUNDARY_TOL):
                raise ProtocolViolation(player, "terminal point is not on the boundary")
            jump = np.linalg.norm(y - x[sel], axis=1)
            if np.any(jump > params.band * (1 + PROTOCOL_RTOL)):
                raise ProtocolViolation(player, f"terminal jump {jump.max():.6g} exceeds alpha*eps")
            Y[sel] = y
    Z = noise_from_draws(V, params.kappa, draws)
    Z[band] = 0.0
    inner = A[~band]
    X[inner] = x[~band] + V[~band] + Z[~band]
    X[A[band]] = Y[band]
    V[band] = np.nan
    Z[band] = np.nan
    return coin_I, V, Z, band, Y


def run_games(domain: Domain, f: BoundaryFunction | None, sI: Strategy, sII: Strategy, X0,
              params: GameParams, seed: int = 0, block: int = 0, *, record: bool = False,
              candidate_samples: int = 16) -> BatchResult:
    """Play ``len(X0)`` independent games to termination or ``max_steps``."""
    params.check_domain(domain)
    X = np.array(np.atleast_2d(X0), dtype=float)
    B = len(X)
    if not np.all(domain.contains(X)):
        raise ValueError("starting points must lie in the domain")
    game_rng, strat_rng = streams(seed, block)
    ctx = GameContext(domain, params, strat_rng, candidate_samples)
    sI.start(X.copy(), ctx)
    sII.start(X.copy(), ctx)
    alive = np.ones(B, dtype=bool)
    terminated = np.zeros(B, dtype=bool)
    steps = np.zeros(B, dtype=int)
    log = [] if record else None
    start = X.copy()
    for t in range(params.max_steps):
        A = np.flatnonzero(alive)
        if len(A) == 0:
            break
        ctx.step = t
        coins, V, Z, term, _ = _advance(X, A, sI, sII, ctx, game_rng)
        steps[A] += 1
        done = A[term]
        alive[done] = False
        terminated[done] = True
        if record:
            log.append((A, coins, V, Z, X[A].copy()))
        rest = A[~term]
        if len(rest):
            sI.observe(X[rest], rest, ctx)
            sII.observe(X[rest], rest, ctx)
    terminal = np.where(terminated[:, None], X, np.nan)
    payoff = np.zeros(B)
    if f is not None and np.any(terminated):
        payoff[terminated] = f(X[terminated])
    tag = f"{int(seed)}:{int(block)}"
    result = BatchResult(terminal, terminated, steps, payoff, tag)
    if record:
        result.transcripts = _assemble(log, start, terminated, terminal, payoff, steps, tag)
    return result


def _assemble(log, start, terminated, terminal, payoff, steps, tag):
    B, n = start.shape
    pos = [[start[b]] for b in range(B)]
    coins = [[] for _ in range(B)]
    moves = [[] for _ in range(B)]
    noises = [[] for _ in range(B)]
    for A, c, V, Z, XA in log:
        for j, b in enumerate(A):
            pos[b].append(XA[j])
            coins[b].append("I" if c[j] else "II")
            moves[b].append(V[j])
            noises[b].append(Z[j])
    out = []
    for b in range(B):
        out.append(Transcript(
            positions=np.array(pos[b]),
            coins=coins[b],
            moves=np.array(moves[b]).reshape(-1, n),
            noises=np.array(noises[b]).reshape(-1, n),
            terminated=bool(terminated[b]),
            terminal_point=terminal[b].copy() if terminated[b] else None,
            payoff=float(payoff[b]),
            steps=int(steps[b]),
            seed_tag=tag if B == 1 else f"{tag}/{b}",
        ))
    return out


def play(domain: Domain, f: BoundaryFunction, sI: Strategy, sII: Strategy, x0, params: GameParams,
         seed: int = 0, index: int = 0, candidate_samples: int = 16) -> Transcript:
    """Play one game from ``x0``; the stream is keyed by ``(seed, index)``."""
    res = run_games(domain, f, sI, sII, np.asarray(x0, float)[None], params, seed, index,
                    record=True, candidate_samples=candidate_samples)
    return res.transcripts[0]


def step(state: GameState, sI: Strategy, sII: Strategy, params: GameParams, domain: Domain,
         rng: np.random.Generator, strategy_rng: np.random.Generator | None = None,
         candidate_samples: int = 16) -> GameState:
    """Advance a single game by one coin toss (in place; also returned)."""
    if state.terminated:
        raise ValueError("game already terminated")
    if not domain.contains(state.position):
        raise ValueError("current position is not in the domain")
    ctx = GameContext(domain, params, strategy_rng if strategy_rng is not None else rng,
                      candidate_samples, state.steps)
    X = np.asarray(state.position, float)[None].copy()
    if not state.started:
        sI.start(X.copy(), ctx)
        sII.start(X.copy(), ctx)
        state.started = True
    A = np.array([0])
    coins, V, Z, term, _ = _advance(X, A, sI, sII, ctx, rng)
    state.position = X[0]
    state.steps += 1
    state.history.append(("I" if coins[0] else "II", V[0], Z[0], X[0].copy()))
    if term[0]:
        state.terminated = True
        state.terminal_point = X[0].copy()
    else:
        sI.observe(X, A, ctx)
        sII.observe(X, A, ctx)
    return state
