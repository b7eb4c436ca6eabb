"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the
measured numbers before asserting.  Expect roughly fifteen minutes in total.
"""
import numpy as np
import pytest

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.estimator import estimate_measure, estimate_value, staged_escape_experiment, union_experiments
from tugwar.game import GameParams, noise_from_draws, play, run_games
from tugwar.oracles import (annulus_value, p2_disk_value, punctured_ball_value,
                            radial_ode_residual)
from tugwar.solver import SolverConfig, solve
from tugwar.strategies import RandomMoves, dpp_greedy, select_subsequence, theta

pytestmark = pytest.mark.acceptance

DISK = geo.ball()
PDISK = geo.punctured_ball()
EXACT = punctured_ball_value(4.0, 2, 0.5)
TOL = SolverConfig().tol


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def _puncture_value(eps):
    params = GameParams(2, 4.0, eps)
    f = bd.mollified_indicator(PDISK, bd.point((0, 0)), params.band)
    return solve(PDISK, f, params).evaluate((0.5, 0.0))


def test_punctured_disk_reproduction(say):
    vals = [_puncture_value(e) for e in (0.08, 0.04, 0.02)]
    errs = [abs(v - EXACT) for v in vals]
    ok = errs[2] <= 0.05 and errs[0] > errs[1] > errs[2]
    say(1, ok, f"values {np.round(vals, 5).tolist()} vs {EXACT:.5f}, errors {np.round(errs, 5).tolist()}")
    assert ok


def test_perturbation_point_contrast(say):
    deltas = [0.4, 0.2, 0.1]
    disk = estimate_measure(DISK, bd.point((1, 0)), (0, 0), [0.02], deltas, p=4.0).estimates()
    punct = estimate_measure(PDISK, bd.point((0, 0)), (0.5, 0.0), [0.02], deltas, p=4.0).estimates()
    factors = disk[:-1] / disk[1:]
    ok = bool(np.all(factors >= 1.25) and np.all(np.abs(punct - EXACT) <= 0.05))
    say(2, ok, f"disk {np.round(disk, 5).tolist()} (factors {np.round(factors, 3).tolist()}), "
               f"punctured {np.round(punct, 5).tolist()}")
    assert ok


def _on_line(radii):
    return np.array([[r, 0.0] for r in radii])


def test_theta_machinery(say):
    geometric = select_subsequence(_on_line(0.25 ** np.arange(6)), (0.0, 0.0))
    squares = select_subsequence(_on_line([2.0 ** -(2 ** k) for k in range(5)]), (0.0, 0.0))
    g1, g2 = (theta(geometric, k, 4.0, 0.02) for k in (1, 2))
    s1, s2 = (theta(squares, k, 4.0, 0.02) for k in (1, 2))
    fine = theta(geometric, 1, 4.0, 0.01)
    ok = abs(g2 - g1) <= 2 * TOL and s2 >= s1 - 2 * TOL and fine > 0.01
    say(3, ok, f"geometric theta1={g1:.6f} theta2={g2:.6f}; squares theta1={s1:.5f} "
               f"theta2={s2:.5f}; theta1 at eps=0.01: {fine:.5f}")
    assert ok


def test_staged_strategy_bound(say):
    D = geo.ball_minus_point_sequence(ratio=0.25, k_max=8)
    x_start = 5e-4 * np.array([np.cos(2.0), np.sin(2.0)])
    rep = staged_escape_experiment(D, D.punctures, (0.0, 0.0), x_start, p=4.0, i=4, delta=0.3,
                                   stage_eps=0.02, n_samples=20_000, seed=0)
    esc = rep.escape
    ok = esc.mean >= rep.bound - 3 * esc.stderr
    say(4, ok, f"escape {esc.mean:.4f} +- {esc.stderr:.4f} vs bound {rep.bound:.4f} "
               f"(theta1={rep.theta1:.4f}, c={rep.c:.4f}, failures "
               f"{esc.config_echo.get('strategy_failures')}, termination {esc.termination_rate:.4f})")
    assert ok


def test_p2_cross_validation(say):
    params = GameParams(2, 2.0, 0.02)
    fld = solve(DISK, bd.angular_profile(DISK, np.cos), params)
    X = fld.node_coordinates()[fld.interior_mask]
    X = X[DISK.boundary_distance(X) > 3 * params.band]
    V = fld.interpolate(X)
    oracle = np.array([p2_disk_value(np.cos, x) for x in X])
    sup = float(np.max(np.abs(V - oracle)))
    half = bd.mollified_indicator(DISK, bd.arc(theta1=0.0, theta2=np.pi), 2 * params.band)
    mid = solve(DISK, half, params).evaluate((0.0, 0.0))
    ok = sup <= 0.05 and abs(mid - 0.5) <= 0.03
    say(5, ok, f"sup error {sup:.5f} on {len(X)} nodes; half-circle value at origin {mid:.5f}")
    assert ok


def test_countable_perturbation_invariance(say):
    ang = np.array([np.pi, 1.25 * np.pi, 1.5 * np.pi])
    E = bd.finite_point_set(np.stack([np.cos(ang), np.sin(ang)], 1))
    F = bd.arc(theta1=0.0, theta2=np.pi / 2)
    rep = union_experiments(DISK, [E], F, (0.0, 0.0), p=4.0, eps_list=[0.01], delta_list=[0.05])
    ok = rep.gap <= 0.05
    say(6, ok, f"omega(F)={rep.F.estimates()[-1]:.5f} omega(E u F)={rep.E_and_F.estimates()[-1]:.5f} "
               f"gap {rep.gap:.5f}; omega(E)={rep.union_E.estimates()[-1]:.5f}")
    assert ok


def test_property_suites(say):
    checks = {}
    rng = np.random.default_rng(0)

    # transcripts of 10^4 random games
    g = GameParams(2, 4.0, 0.1)
    f = bd.LinearCoordinate(PDISK, 0)
    X0 = rng.uniform(-0.6, 0.6, (10_000, 2))
    res = run_games(PDISK, f, RandomMoves(), RandomMoves(), X0, g, seed=1, record=True)
    bad = 0
    for t in res.transcripts:
        k = t.steps - 1 if t.terminated else t.steps
        V, Z, P = t.moves[:k], t.noises[:k], t.positions
        bad += not np.allclose(P[1:k + 1], P[:k] + V + Z, atol=1e-14)
        bad += bool(np.any(np.abs(np.sum(V * Z, axis=1)) > 1e-12))
        if t.terminated:
            bad += not (PDISK.on_boundary(t.terminal_point) and t.payoff == f(t.terminal_point)
                        and np.linalg.norm(t.terminal_point - P[-2]) <= g.band * (1 + 1e-9))
        else:
            bad += t.payoff != 0.0
    checks["transcripts"] = bad == 0

    # noise orthogonality and magnitude
    V = rng.standard_normal((10_000, 3)) * 0.01
    Z = noise_from_draws(V, 0.7, rng.random(10_000))
    checks["noise"] = bool(np.max(np.abs(np.sum(V * Z, 1))) <= 1e-12 and
                           np.max(np.abs(np.linalg.norm(Z, axis=1) - 0.7 * np.linalg.norm(V, axis=1))) <= 1e-12)

    # linear fixed point, bounds and monotonicity
    p4 = GameParams(2, 4.0, 0.08)
    lin = solve(DISK, bd.LinearCoordinate(DISK, 0), p4)
    m = lin.interior_mask | lin.band_mask
    checks["linear"] = bool(np.max(np.abs(lin.values[m] - lin.node_coordinates()[m][:, 0])) <= 2 * p4.band)
    checks["bounds"] = bool(lin.values[m].min() >= -1 - 1e-9 and lin.values[m].max() <= 1 + 1e-9)
    up = solve(DISK, bd.LinearCoordinate(DISK, 0, offset=0.1), p4)
    checks["monotone"] = bool(np.all(up.values[lin.interior_mask] >= lin.values[lin.interior_mask] - 2 * TOL))

    # solver against Monte Carlo at 10 points
    worst = -np.inf
    for k in range(10):
        x = rng.uniform(-0.55, 0.55, 2)
        rep = estimate_value(DISK, lin.f, dpp_greedy(lin), dpp_greedy(lin, "minimize"), x, p4,
                             n_samples=2000, seed=k)
        worst = max(worst, abs(lin.evaluate(x) - rep.mean) - (3 * rep.stderr + 2 * TOL))
    checks["solver_vs_mc"] = worst <= 0

    # oracle residuals
    radii = rng.uniform(0.3, 0.95, 20)
    res_max = max(max(abs(radial_ode_residual(4.0, 2, lambda s: punctured_ball_value(4.0, 2, s), r)),
                      abs(radial_ode_residual(4.0, 2, lambda s: annulus_value(4.0, 2, 0.25, 1.0, s), r)))
                  for r in radii)
    checks["oracle_ode"] = res_max < 1e-5

    # replay determinism
    a = play(DISK, lin.f, RandomMoves(), RandomMoves(), (0.1, 0.1), g, seed=7, index=3)
    b = play(DISK, lin.f, RandomMoves(), RandomMoves(), (0.1, 0.1), g, seed=7, index=3)
    checks["replay"] = bool(np.array_equal(a.positions, b.positions) and a.coins == b.coins)

    ok = all(checks.values())
    say(7, ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok
