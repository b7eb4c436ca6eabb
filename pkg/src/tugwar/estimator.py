"""Monte Carlo and solver-based estimates built on the game and the DPP solver.

Randomness: trajectories are split into fixed-size blocks and block ``b``
draws from ``streams(seed, b)``, so a result depends only on the seed, the
block size and the sample count, never on how the work is scheduled.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .boundary import (BoundaryFunction, BoundarySet, _set_dict, mollified_indicator,
                       pointwise_override, union)
from .game import GameParams, Strategy, run_games
from .geometry import Domain
from .solver import SolverConfig, solve
from .strategies import (DPPGreedy, perturbation_strategy, pull_toward,
                         select_subsequence, solve_stages, stage_infimum)

log = logging.getLogger(__name__)

BLOCK_SIZE = 1000
Z95 = 1.96


# -- reports -------------------------------------------------------------------------

@dataclass
class EstimateReport:
    mean: float
    stderr: float
    n_samples: int
    termination_rate: float
    seed: int
    config_echo: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 <= self.termination_rate <= 1.0:
            raise ValueError("termination_rate must lie in [0, 1]")

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "ci95": list(self.ci95),
                "n_samples": self.n_samples, "termination_rate": self.termination_rate,
                "seed": self.seed, "config_echo": self.config_echo}


def _stats(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    if len(x) < 2 or np.all(x == x[0]):
        return mean, 0.0
    return mean, float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _play_blocks(domain, f, sI, sII, x0, params, n_samples, seed, block_size):
    """Terminal points, termination flags and payoffs for ``n_samples`` games from ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    terms, done, pay, steps = [], [], [], []
    for b, start in enumerate(range(0, n_samples, block_size)):
        m = min(block_size, n_samples - start)
        res = run_games(domain, f, sI, sII, np.repeat(x0[None], m, axis=0), params, seed, b)
        terms.append(res.terminal)
        done.append(res.terminated)
        pay.append(res.payoff)
        steps.append(res.steps)
    return (np.concatenate(terms), np.concatenate(done), np.concatenate(pay),
            np.concatenate(steps))


def _warn_termination(rate: float) -> None:
    if rate < 0.99:
        warnings.warn(f"only {rate:.3%} of games terminated within max_steps", RuntimeWarning,
                      stacklevel=3)


def estimate_value(domain: Domain, f: BoundaryFunction, sI: Strategy, sII: Strategy, x0,
                   params: GameParams, n_samples: int = 1000, seed: int = 0,
                   block_size: int = BLOCK_SIZE) -> EstimateReport:
    """Sample mean of the payoff under a fixed strategy pair."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    _, done, pay, steps = _play_blocks(domain, f, sI, sII, x0, params, n_samples, seed, block_size)
    mean, se = _stats(pay)
    rate = float(np.mean(done))
    _warn_termination(rate)
    echo = {"domain": {"kind": domain.kind, **domain.params}, "payoff": f.describe(),
            "player_I": sI.describe(), "player_II": sII.describe(), "x0": list(map(float, x0)),
            "params": params.to_dict(), "n_samples": n_samples, "block_size": block_size,
            "mean_steps": float(np.mean(steps))}
    return EstimateReport(mean, se, n_samples, rate, seed, echo)


# -- measures ---------------------------------------------------------------------------

@dataclass
class MeasureRow:
    eps: float
    delta: float
    estimate: float
    stderr: float
    source: str     # "dpp" or "mc"


@dataclass
class MeasureTable:
    rows: list
    extrapolated: float | None = None
    method: str | None = None
    config_echo: dict = dc_field(default_factory=dict)

    def eps_values(self) -> list:
        out = []
        for r in self.rows:
            if r.eps not in out:
                out.append(r.eps)
        return out

    def block(self, eps: float) -> list:
        return [r for r in self.rows if r.eps == eps]

    def estimates(self, eps: float | None = None) -> np.ndarray:
        eps = self.eps_values()[-1] if eps is None else eps
        return np.array([r.estimate for r in self.block(eps)])

    def check_deltas(self) -> None:
        for e in self.eps_values():
            d = [r.delta for r in self.block(e)]
            if any(b >= a for a, b in zip(d, d[1:])):
                raise ValueError("delta column must be strictly decreasing within each eps block")

    def is_monotone(self, tol: float = 1e-6) -> bool:
        """Estimates nonincreasing as delta shrinks, within ``tol`` plus stderr."""
        for e in self.eps_values():
            rows = self.block(e)
            for a, b in zip(rows, rows[1:]):
                if b.estimate > a.estimate + tol + 2 * (a.stderr + b.stderr):
                    return False
        return True

    def trends_to_zero(self, factor: float = 0.8, tol: float = 0.0, eps: float | None = None) -> bool:
        """Each delta step shrinks the estimate: ``est[k+1] <= factor*est[k] + tol``."""
        eps = self.eps_values()[-1] if eps is None else eps
        rows = self.block(eps)
        return all(b.estimate <= factor * a.estimate + tol + 2 * (a.stderr + b.stderr)
                   for a, b in zip(rows, rows[1:]))

    def to_csv(self) -> str:
        lines = ["eps,delta,estimate,stderr,source"]
        lines += [f"{r.eps!r},{r.delta!r},{r.estimate!r},{r.stderr!r},{r.source}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"rows": [r.__dict__.copy() for r in self.rows], "extrapolated": self.extrapolated,
                "method": self.method, "config_echo": self.config_echo}


def geometric_extrapolation(values, agree: float = 0.2) -> float | None:
    """Limit of a sequence whose successive differences shrink geometrically.

    Needs the last three ratios of successive differences to agree within
    ``agree`` (relative) and lie in (0, 1); otherwise returns None.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 5:
        return None
    d = np.diff(v)
    if np.any(d[-4:] == 0):
        return None
    q = d[-3:] / d[-4:-1]
    qm = float(np.mean(q))
    if not 0 < qm < 1 or np.any(np.abs(q - qm) > agree * abs(qm)):
        return None
    return float(v[-1] + d[-1] * qm / (1 - qm))


def _lattice_nodes(domain: Domain, eps: float, h_ratio: float) -> int:
    h = h_ratio * eps
    half = math.ceil((domain.bounding_radius + 2 * h) / h)
    return (2 * half + 1) ** domain.n


def estimate_measure(domain: Domain, E: BoundarySet, x0, eps_list, delta_list, n_samples: int = 0,
                     seed: int = 0, *, p: float, config: SolverConfig = SolverConfig(),
                     max_nodes: int = 2_000_000, block_size: int = BLOCK_SIZE) -> MeasureTable:
    """Mollified-indicator values of ``E`` at ``x0`` over ``eps_list x delta_list``.

    Rows come from the DPP solver when the lattice fits in ``max_nodes``;
    otherwise from Monte Carlo with both players greedy on the finest field
    that fits (needs ``n_samples > 0``).
    """
    deltas = [float(d) for d in delta_list]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta_list must be strictly decreasing")
    E.check_on(domain)
    x0 = np.asarray(x0, dtype=float)
    rows = []
    for eps in eps_list:
        params = GameParams(domain.n, p, float(eps))
        for delta in deltas:
            if delta < 2 * params.band * (1 - 1e-12):
                raise ValueError(f"delta={delta} is below 2*alpha*eps={2 * params.band:.6g}")
        for delta in deltas:
            f = mollified_indicator(domain, E, delta)
            if _lattice_nodes(domain, eps, config.h_ratio) <= max_nodes:
                fld = solve(domain, f, params, config)
                rows.append(MeasureRow(float(eps), delta, float(fld.evaluate(x0)), 0.0, "dpp"))
                continue
            if n_samples <= 0:
                raise ValueError(f"lattice for eps={eps} exceeds max_nodes and n_samples=0")
            coarse = float(eps)
            while _lattice_nodes(domain, coarse, config.h_ratio) > max_nodes:
                coarse *= 2
            fld = solve(domain, f, replace(params, eps=coarse), config)
            rep = estimate_value(domain, f, DPPGreedy(fld, "maximize", rescale=True),
                                 DPPGreedy(fld, "minimize", rescale=True), x0, params,
                                 n_samples, seed, block_size)
            rows.append(MeasureRow(float(eps), delta, rep.mean, rep.stderr, "mc"))
    table = MeasureTable(rows, config_echo={
        "domain": {"kind": domain.kind, **domain.params}, "E": _set_dict(E),
        "x0": x0.tolist(), "p": p, "eps_list": list(map(float, eps_list)), "delta_list": deltas,
        "n_samples": n_samples, "seed": seed, "solver": config.to_dict()})
    table.check_deltas()
    ext = geometric_extrapolation(table.estimates())
    if ext is not None:
        table.extrapolated, table.method = ext, "geometric-richardson"
    return table


# -- perturbation and escape experiments ------------------------------------------------

@dataclass
class PerturbationReport:
    mean_f: float
    mean_g: float
    difference: float
    stderr: float
    hit_rate: float          # games ending exactly on an override point
    near_rate: float         # games ending within alpha*eps of an override point
    n_samples: int
    termination_rate: float
    seed: int
    config_echo: dict = dc_field(default_factory=dict)

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.difference - Z95 * self.stderr, self.difference + Z95 * self.stderr)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ci95"] = list(self.ci95)
        return d


def perturbation_experiment(domain: Domain, f: BoundaryFunction, overrides, x0, params: GameParams,
                            n_samples: int, seed: int, sI: Strategy, sII: Strategy,
                            block_size: int = BLOCK_SIZE) -> PerturbationReport:
    """Payoffs of ``f`` and of ``f`` overridden at finitely many points on the same games.

    ``overrides`` is a sequence of ``(point, value)`` pairs.  Both payoffs are
    read off one set of transcripts, so the pairing is exact.
    """
    pts = [np.asarray(q, float) for q, _ in overrides]
    vals = [float(v) for _, v in overrides]
    g = pointwise_override(f, pts, vals) if pts else f
    T, done, _, _ = _play_blocks(domain, None, sI, sII, x0, params, n_samples, seed, block_size)
    pf = np.zeros(n_samples)
    pg = np.zeros(n_samples)
    if np.any(done):
        pf[done] = f(T[done])
        pg[done] = g(T[done])
    diff = pg - pf
    _, se = _stats(diff)
    if pts:
        P = np.array(pts)
        dist = np.full(n_samples, np.inf)
        dist[done] = np.min(np.linalg.norm(T[done][:, None, :] - P[None], axis=-1), axis=1)
        hit = float(np.mean(dist <= g.match_tol))
        near = float(np.mean(dist <= params.band))
    else:
        hit = near = 0.0
    rate = float(np.mean(done))
    _warn_termination(rate)
    echo = {"domain": {"kind": domain.kind, **domain.params}, "payoff": f.describe(),
            "overrides": [[q.tolist(), v] for q, v in zip(pts, vals)],
            "player_I": sI.describe(), "player_II": sII.describe(),
            "x0": list(map(float, x0)), "params": params.to_dict(), "n_samples": n_samples,
            "block_size": block_size}
    return PerturbationReport(float(pf.mean()), float(pg.mean()), float(diff.mean()), se, hit, near,
                              n_samples, rate, seed, echo)


def escape_probability(domain: Domain, strategy: Strategy, opponent: Strategy, x0, x_target, delta: float,
                       delta_x: float, params: GameParams, n_samples: int, seed: int,
                       block_size: int = BLOCK_SIZE) -> EstimateReport:
    """Fraction of games ending on the boundary inside ``delta_x <= |y - x_target| < delta``."""
    if not 0 < delta_x < delta:
        raise ValueError("need 0 < delta_x < delta")
    xt = np.asarray(x_target, dtype=float)
    T, done, _, steps = _play_blocks(domain, None, strategy, opponent, x0, params, n_samples, seed,
                                     block_size)
    hit = np.zeros(n_samples)
    r = np.linalg.norm(T[done] - xt, axis=1)
    hit[done] = (r < delta) & (r >= delta_x)
    mean, se = _stats(hit)
    echo = {"domain": {"kind": domain.kind, **domain.params}, "player_I": strategy.describe(),
            "player_II": opponent.describe(), "x0": list(map(float, x0)),
            "x_target": xt.tolist(), "delta": delta, "delta_x": delta_x,
            "params": params.to_dict(), "n_samples": n_samples, "block_size": block_size,
            "mean_steps": float(np.mean(steps))}
    if hasattr(strategy, "failures"):
        echo["strategy_failures"] = strategy.failures
    return EstimateReport(mean, se, n_samples, float(np.mean(done)), seed, echo)


@dataclass
class StagedEscapeReport:
    escape: EstimateReport
    theta1: float
    c: float
    i: int
    bound: float
    plan: dict
    stage_eps: float
    game_eps: float

    @property
    def margin(self) -> float:
        """Observed rate minus (bound - 3 stderr); nonnegative when the bound holds."""
        return self.escape.mean - (self.bound - 3 * self.escape.stderr)

    def to_dict(self) -> dict:
        return {"escape": self.escape.to_dict(), "theta1": self.theta1, "c": self.c, "i": self.i,
                "bound": self.bound, "margin": self.margin, "plan": self.plan,
                "stage_eps": self.stage_eps, "game_eps": self.game_eps}


def staged_escape_experiment(domain: Domain, candidates, x0, x_start, *, p: float, i: int, delta: float,
                             stage_eps: float = 0.02, n_samples: int = 20_000, seed: int = 0,
                             config: SolverConfig = SolverConfig(), max_steps: int = 20_000,
                             opponent: Strategy | None = None,
                             block_size: int = BLOCK_SIZE) -> StagedEscapeReport:
    """Staged strategy against an opponent pulling toward ``x0``.

    Stage values are solved once in normalized coordinates at ``stage_eps``.
    The game's eps is ``stage_eps`` times the outer radius of the starting
    stage, so the first stage is played at the resolution it was solved at.
    Reports the observed escape rate next to ``1 - (1 - c/2)(1 - theta_1/2)**i``.
    """
    plan = select_subsequence(candidates, x0).with_bookkeeping(i, delta, x_start)
    sols = solve_stages(plan, p, stage_eps, config)
    th1 = stage_infimum(sols[1])
    k0 = plan.start_stage
    c = float(sols[k0].field.evaluate(plan.to_stage(k0, np.asarray(x_start, float))[0]))
    game_eps = stage_eps * plan.radius(k0)
    params = GameParams(domain.n, p, game_eps, max_steps)
    strat = perturbation_strategy(plan, sols)
    opp = opponent if opponent is not None else pull_toward(plan.x0)
    rep = escape_probability(domain, strat, opp, x_start, plan.x0, delta, plan.delta_x, params,
                             n_samples, seed, block_size)
    bound = 1 - (1 - c / 2) * (1 - th1 / 2) ** i
    return StagedEscapeReport(rep, th1, c, i, bound, plan.to_dict(), stage_eps, game_eps)


# -- unions -------------------------------------------------------------------------------

@dataclass
class UnionReport:
    union_E: MeasureTable | None
    F: MeasureTable | None
    E_and_F: MeasureTable | None
    gap: float
    union_trends_to_zero: bool | None
    within_tolerance: bool
    tolerance: float

    def to_dict(self) -> dict:
        t = lambda m: None if m is None else m.to_dict()  # noqa: E731
        return {"union_E": t(self.union_E), "F": t(self.F), "E_and_F": t(self.E_and_F),
                "gap": self.gap, "union_trends_to_zero": self.union_trends_to_zero,
                "within_tolerance": self.within_tolerance, "tolerance": self.tolerance}


def _zero_table(eps_list, deltas) -> MeasureTable:
    return MeasureTable([MeasureRow(float(e), float(d), 0.0, 0.0, "empty")
                         for e in eps_list for d in deltas])


def union_experiments(domain: Domain, E_list: list, F: BoundarySet | None, x0, *, p: float,
                      eps_list, delta_list, tolerance: float = 0.05, factor: float = 0.8,
                      trend_tol: float = 1e-6, config: SolverConfig = SolverConfig(),
                      n_samples: int = 0, seed: int = 0) -> UnionReport:
    """Compare the measure of ``F`` with that of ``F`` plus finitely many
    non-isolated points, on a shared schedule."""
    iso = domain.isolated_boundary_points()
    for E in E_list:
        if not E.is_discrete:
            raise ValueError("each E must be a finite point set")
        P = E.points()
        if len(iso) and len(P):
            d = np.min(np.linalg.norm(P[:, None, :] - iso[None], axis=-1))
            if d <= 1e-12:
                raise ValueError("E contains an isolated boundary point; the invariance "
                                 "statement requires every point of E to be non-isolated")
    kw = dict(p=p, config=config, n_samples=n_samples, seed=seed)
    UE = union(*E_list) if E_list else None
    F_empty = F is None or F.is_empty
    tE = estimate_measure(domain, UE, x0, eps_list, delta_list, **kw) if UE is not None else None
    tF = _zero_table(eps_list, delta_list) if F_empty else \
        estimate_measure(domain, F, x0, eps_list, delta_list, **kw)
    if UE is None:
        tEF = tF
    elif F_empty:
        tEF = tE
    else:
        tEF = estimate_measure(domain, union(UE, F), x0, eps_list, delta_list, **kw)
    gap = float(abs(tEF.estimates()[-1] - tF.estimates()[-1]))
    se = tEF.rows[-1].stderr + tF.rows[-1].stderr
    trend = None if tE is None else tE.trends_to_zero(factor, trend_tol)
    return UnionReport(tE, tF, tEF, gap, trend, gap <= tolerance + 3 * se, tolerance)
