from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.game import GameContext, GameParams, run_games
from tugwar.solver import SolverConfig, solve
from tugwar.strategies import (DPPGreedy, PlanError, RandomMoves, check_ratios, dpp_greedy,
                               perturbation_strategy, pull_toward, select_subsequence,
                               solve_stages, stage_infimum, theta)

DISK = geo.ball()


def ctx(domain, eps=0.1, p=4.0, seed=0):
    return GameContext(domain, GameParams(domain.n, p, eps), np.random.default_rng(seed))


def on_line(radii):
    return np.array([[r, 0.0] for r in radii])


@pytest.fixture(scope="module")
def geometric_plan():
    return select_subsequence(on_line(0.5 * 0.25 ** np.arange(6)), (0.0, 0.0))


@pytest.fixture(scope="module")
def geometric_stages(geometric_plan):
    return solve_stages(geometric_plan, 4.0, 0.08)


# -- pull_toward ----------------------------------------------------------------

def test_pull_toward_examples():
    c = ctx(DISK)
    s = pull_toward((0.3, 0.0))
    V = s.interior_moves(np.array([[0.3, 0.0], [0.0, 0.0], [0.3, 0.05]]), np.arange(3), c)
    assert np.array_equal(V[0], [0.0, 0.0])
    assert np.allclose(V[1], [0.1, 0.0])
    assert np.allclose(V[2], [0.0, -0.05])


def test_pull_toward_band_hits_target():
    pd = geo.punctured_ball()
    c = ctx(pd)
    Y = pull_toward((0, 0)).terminal_points(np.array([[0.1, 0.05]]), np.arange(1), c)
    assert np.array_equal(Y[0], [0.0, 0.0])
    Y = pull_toward((1, 0)).terminal_points(np.array([[0.95, 0.0]]), np.arange(1), ctx(DISK))
    assert np.allclose(Y[0], [1.0, 0.0])


# -- dpp_greedy -----------------------------------------------------------------

def test_greedy_constant_field_picks_first_move():
    params = GameParams(2, 4.0, 0.1)
    field = solve(DISK, bd.Constant(DISK, 0.5), params, SolverConfig())
    s = dpp_greedy(field)
    c = GameContext(DISK, params, np.random.default_rng(0))
    V = s.interior_moves(np.array([[0.0, 0.0], [0.3, -0.2]]), np.arange(2), c)
    assert np.array_equal(V, np.tile(field.moves[0], (2, 1)))


def test_greedy_linear_field_moves_right(linear_field):
    c = GameContext(DISK, linear_field.params, np.random.default_rng(0))
    X = np.array([[0.0, 0.0], [0.2, 0.3], [-0.4, 0.1]])
    V = dpp_greedy(linear_field).interior_moves(X, np.arange(3), c)
    assert np.allclose(V, np.tile([linear_field.params.eps, 0.0], (3, 1)))
    V = dpp_greedy(linear_field, "minimize").interior_moves(X, np.arange(3), c)
    assert np.allclose(V, np.tile([-linear_field.params.eps, 0.0], (3, 1)))


def test_greedy_moves_toward_puncture(puncture_field):
    c = GameContext(puncture_field.domain, puncture_field.params, np.random.default_rng(0))
    v = dpp_greedy(puncture_field).interior_moves(np.array([[0.5, 0.0]]), np.arange(1), c)[0]
    assert v[0] < 0
    grad = puncture_field.interpolate([0.49, 0.0]) - puncture_field.interpolate([0.51, 0.0])
    assert grad > 0


def test_greedy_rejects_unconverged_field(linear_field):
    from dataclasses import replace
    with pytest.raises(ValueError):
        DPPGreedy(replace(linear_field, residual=1.0))


def test_greedy_rejects_other_params(linear_field):
    s = dpp_greedy(linear_field)
    with pytest.raises(ValueError):
        s.interior_moves(np.zeros((1, 2)), np.arange(1), ctx(DISK, eps=0.05))
    V = dpp_greedy(linear_field, rescale=True).interior_moves(
        np.zeros((1, 2)), np.arange(1), ctx(DISK, eps=0.05))
    assert np.allclose(V, [[0.05, 0.0]])


# -- protocol checks over random states -------------------------------------------

def _random_states(domain, eps, m, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (4 * m, 2))
    X = X[domain.contains(X)][:m]
    return X


def _check_strategy(s, domain, params, m=10_000, seed=0):
    c = GameContext(domain, params, np.random.default_rng(seed))
    X = _random_states(domain, params.eps, m, seed)
    s.start(X, c)
    d = domain.boundary_distance(X)
    inner, band = d > params.band, d <= params.band
    V = s.interior_moves(X[inner], np.flatnonzero(inner), c)
    assert np.all(np.linalg.norm(V, axis=1) <= params.eps * (1 + 1e-9))
    Y = s.terminal_points(X[band], np.flatnonzero(band), c)
    assert np.all(domain.on_boundary(Y))
    assert np.all(np.linalg.norm(Y - X[band], axis=1) <= params.band * (1 + 1e-9))


def test_protocol_simple_strategies():
    pd = geo.punctured_ball()
    params = GameParams(2, 4.0, 0.1)
    _check_strategy(pull_toward((0, 0)), pd, params)
    _check_strategy(pull_toward((1, 0)), DISK, params)
    _check_strategy(RandomMoves(), pd, params)


def test_protocol_greedy(linear_field, puncture_field):
    _check_strategy(dpp_greedy(linear_field), DISK, linear_field.params)
    _check_strategy(dpp_greedy(puncture_field, "minimize"), puncture_field.domain, puncture_field.params)


def test_protocol_perturbation(geometric_plan, geometric_stages):
    D = geo.ball_minus_point_sequence(scale=2.0, k_max=6)
    assert np.allclose(D.point_components[:6], geometric_plan.target_sequence)
    _check_strategy(perturbation_strategy(geometric_plan, geometric_stages), D, GameParams(2, 4.0, 0.01))


# -- plans ---------------------------------------------------------------------

def test_select_squares_plan():
    radii = [2.0 ** -(2 ** k) for k in range(5)]
    plan = select_subsequence(on_line(radii), (0.0, 0.0))
    assert plan.K == 5 and plan.ratios_ok
    r = [plan.radius(k) for k in range(1, 5)]
    assert np.allclose([r[0] / r[1], r[1] / r[2], r[2] / r[3]], [2, 4, 16])


def test_select_geometric_equality():
    plan = select_subsequence(on_line(4.0 ** -np.arange(1, 7)), (0.0, 0.0))
    assert plan.K == 6 and plan.ratios_ok
    s = [Fraction(float(plan.radius(k))) ** 2 for k in (1, 2, 3)]
    assert s[0] * s[2] == s[1] ** 2


def test_select_skips_junk():
    pts = []
    for k in range(1, 10):
        pts.append([2.0 ** -k, 0.0])
        if k >= 2:
            pts.append([0.0, 0.3])
    plan = select_subsequence(pts, (0.0, 0.0))
    assert plan.ratios_ok and check_ratios(plan.target_sequence, (0.0, 0.0))
    assert np.allclose(plan.target_sequence[:, 1], 0.0)
    assert plan.K == 9


def test_select_exhausted():
    with pytest.raises(PlanError):
        select_subsequence(on_line([0.5, 0.25]), (0.0, 0.0))
    with pytest.raises(PlanError):
        select_subsequence(on_line(2.0 ** -np.arange(1, 5)), (0.0, 0.0), K=6)


@given(st.lists(st.floats(1e-6, 1.0), min_size=3, max_size=40))
def test_selected_plans_satisfy_ratio_condition(radii):
    try:
        plan = select_subsequence(on_line(radii), (0.0, 0.0))
    except PlanError:
        return
    s = [Fraction(float(y[0])) ** 2 for y in plan.target_sequence]
    assert all(a > b for a, b in zip(s, s[1:]))
    assert all(s[k] * s[k + 2] <= s[k + 1] ** 2 for k in range(len(s) - 2))


def test_ratio_check_is_exact():
    # ratios 4 and 4 up to one ulp; rational comparison sees the difference
    a, b = 1.0, 0.25
    c = np.nextafter(0.0625, 0.0)
    assert check_ratios(on_line([a, b, c]), (0, 0))
    assert not check_ratios(on_line([a, b, np.nextafter(0.0625, 1.0)]), (0, 0))


def test_stage_rule(geometric_plan):
    plan = geometric_plan
    R = [plan.radius(k) for k in range(1, plan.K + 1)]
    assert plan.stage_of_radius(0.5 * (R[1] + R[2])) == 2
    assert plan.stage_of_radius(R[2]) == 2          # on a sphere: outer shell
    assert plan.stage_of_radius(1e-9) == plan.K - 1
    assert plan.stage_of_radius(R[0]) is None
    # entering B(x0, |y_{k+2}|) from stage k activates stage k + 1
    assert plan.stage_of_radius(0.9 * R[3], k=2) == 3
    assert plan.stage_of_radius(0.9 * R[2], k=2) == 2
    assert plan.stage_of_radius(1.01 * R[1], k=2) == 1


def test_stage_domains(geometric_plan):
    plan = geometric_plan
    D = plan.stage_domain(1)
    assert D.kind == "punctured_annulus"
    assert not D.contains(plan.y(2)) and D.contains(0.5 * (plan.y(1) + plan.y(2)))
    assert plan.stage_domain(plan.K - 1).kind == "punctured_ball"
    with pytest.raises(PlanError):
        plan.stage_domain(plan.K)


def test_bookkeeping(geometric_plan):
    plan = geometric_plan
    b = plan.with_bookkeeping(1, 0.2, (0.5 * plan.radius(3), 0.0))
    assert b.j == 2 and b.N == 1 and b.start_stage == 3
    assert b.delta_x == pytest.approx(plan.radius(6))
    assert not b.notes
    on = plan.with_bookkeeping(1, 0.2, (plan.radius(4), 0.0))
    assert on.N == 1
    assert any("outer shell" in n for n in on.notes)
    with pytest.raises(PlanError):
        plan.with_bookkeeping(10, 0.1, (1e-6, 0.0))


# -- stage values ------------------------------------------------------------------

def test_theta_positive_and_geometric_equality(geometric_plan):
    t1 = theta(geometric_plan, 1, 4.0, 0.04)
    t2 = theta(geometric_plan, 2, 4.0, 0.04)
    assert t1 > 0
    assert abs(t2 - t1) <= 1e-6


def test_theta_requires_p_above_n(geometric_plan):
    with pytest.raises(ValueError):
        theta(geometric_plan, 1, 2.0, 0.08)


@pytest.mark.slow
def test_theta_monotone_on_squares_plan():
    plan = select_subsequence(on_line([2.0 ** -(2 ** k) for k in range(5)]), (0.0, 0.0))
    t = [theta(plan, k, 4.0, 0.04) for k in (1, 2)]
    assert t[0] > 0 and t[1] >= t[0] - 2e-6


def test_perturbation_moves_stay_in_stage_closure(geometric_plan, geometric_stages):
    plan = geometric_plan
    params = GameParams(2, 4.0, 0.004)
    D = geo.ball_minus_point_sequence(scale=2.0, k_max=6)
    s = perturbation_strategy(plan, geometric_stages)
    c = GameContext(D, params, np.random.default_rng(0))
    rng = np.random.default_rng(5)
    for k in (1, 2, 3):
        Dk = plan.stage_domain(k)
        r = rng.uniform(plan.radius(k + 2), plan.radius(k), 3000)
        a = rng.uniform(0, 2 * np.pi, 3000)
        X = np.stack([r * np.cos(a), r * np.sin(a)], 1)
        X = X[Dk.contains(X) & (D.boundary_distance(X) > params.band)]
        s.start(X, c)
        s.stage[:] = k
        V = s.interior_moves(X, np.arange(len(X)), c)
        Y = X + V
        assert np.all(Dk.contains(Y) | Dk.on_boundary(Y, 1e-9))


def test_single_stage_success_rate():
    """Greedy play on one stage ends at its target at least about as often
    as the stage value at the worst point of the target sphere."""
    plan = select_subsequence(on_line(0.5 * 0.25 ** np.arange(4)), (0.0, 0.0))
    sol = solve_stages(plan, 4.0, 0.04)[1]
    field = sol.field
    D = field.domain
    th = stage_infimum(sol)
    ry = float(np.linalg.norm(sol.target))
    S = ry * np.stack([np.cos(a := 2 * np.pi * (np.arange(720) + 0.5) / 720), np.sin(a)], 1)
    S = S[D.contains(S)]
    x = S[np.argmin(field.interpolate(S))]
    hit = bd.mollified_indicator(D, bd.point(sol.target), 1e-9)
    res = run_games(D, hit, dpp_greedy(field), dpp_greedy(field, "minimize"),
                    np.tile(x, (4000, 1)), field.params, seed=3)
    rate = res.payoff.mean()
    stderr = res.payoff.std(ddof=1) / np.sqrt(len(res.payoff))
    assert th > 0
    assert rate >= th - 3 * stderr, (rate, th, stderr)
