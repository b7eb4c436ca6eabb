import numpy as np
import pytest
from hypothesis import given, strategies as st

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.oracles import (RadialSolution, annulus_value, p2_disk_value, punctured_ball_value,
                            radial_ode_residual)

# frozen from 30-digit evaluations of the closed forms
PUNCTURED_P4_N2_HALF = 0.370039475052563
ANNULUS_P4_N2_QUARTER_HALF = 0.386488209564309
PUNCTURED_P5_N3_R03 = 0.452277442494834


def test_radial_solution_forms():
    assert RadialSolution(2.0, 2).form == "log" and RadialSolution(2.0, 2).beta is None
    s = RadialSolution(4.0, 2)
    assert s.form == "power" and s.beta == pytest.approx(2 / 3)
    assert 0 < RadialSolution(7.5, 3).beta < 1


def test_punctured_ball_examples():
    assert punctured_ball_value(4.0, 2, 1.0) == 0.0
    assert punctured_ball_value(4.0, 2, 1e-12) == pytest.approx(1.0, abs=1e-7)
    assert punctured_ball_value(4.0, 2, 0.5) == pytest.approx(PUNCTURED_P4_N2_HALF, abs=1e-14)
    assert punctured_ball_value(5.0, 3, 0.3) == pytest.approx(PUNCTURED_P5_N3_R03, abs=1e-14)


@pytest.mark.parametrize("args", [(2.0, 2, 0.5), (1.5, 2, 0.5), (4.0, 2, 0.0), (4.0, 2, 1.5)])
def test_punctured_ball_rejects(args):
    with pytest.raises(ValueError):
        punctured_ball_value(*args)


def test_annulus_examples():
    assert annulus_value(4.0, 2, 0.25, 1.0, 0.25) == 0.0
    assert annulus_value(4.0, 2, 0.25, 1.0, 1.0) == 1.0
    assert annulus_value(2.0, 2, 0.2, 0.8, np.sqrt(0.16)) == pytest.approx(0.5, abs=1e-14)
    assert annulus_value(4.0, 2, 0.25, 1.0, 0.5) == pytest.approx(ANNULUS_P4_N2_QUARTER_HALF, abs=1e-14)


@pytest.mark.parametrize("args", [(4.0, 2, 0.5, 0.25, 0.3), (4.0, 2, 0.0, 1.0, 0.5),
                                  (4.0, 2, 0.25, 1.0, 0.1)])
def test_annulus_rejects(args):
    with pytest.raises(ValueError):
        annulus_value(*args)


def test_ode_residual_examples():
    assert radial_ode_residual(4.0, 2, lambda r: 0.3, 0.5) == 0.0
    good = abs(radial_ode_residual(4.0, 2, lambda r: punctured_ball_value(4.0, 2, r), 0.5))
    assert good < 1e-5
    bad = abs(radial_ode_residual(4.0, 2, lambda r: 1 - r ** (2 / 3 + 0.1), 0.5))
    assert bad > 10 * good


@pytest.mark.parametrize("p,n", [(4.0, 2), (3.0, 2), (2.0, 2), (1.5, 2), (5.0, 3), (3.0, 3)])
def test_ode_residual_at_random_radii(p, n):
    radii = np.random.default_rng(0).uniform(0.3, 0.95, 20)
    for r in radii:
        u = lambda s: annulus_value(p, n, 0.25, 1.0, s)
        assert abs(radial_ode_residual(p, n, u, r)) < 1e-5
        if p > n:
            v = lambda s: punctured_ball_value(p, n, s)
            assert abs(radial_ode_residual(p, n, v, r)) < 1e-5


@given(st.floats(2.1, 20.0), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_radial_monotonicity(p, r, dr):
    assert punctured_ball_value(p, 2, r + dr) < punctured_ball_value(p, 2, r)
    assert annulus_value(p, 2, 0.005, 1.0, r + dr) > annulus_value(p, 2, 0.005, 1.0, r)


def test_poisson_examples():
    assert p2_disk_value(lambda t: np.full_like(t, 0.4), (0.3, -0.2)) == pytest.approx(0.4, abs=1e-12)
    for r in (0.0, 0.3, 0.8):
        assert p2_disk_value(np.cos, (r, 0.0)) == pytest.approx(r, abs=1e-12)
    half = lambda t: (np.sin(t) > 0).astype(float)
    assert p2_disk_value(half, (0.0, 0.0)) == pytest.approx(0.5, abs=1e-12)


def test_poisson_accepts_boundary_function():
    disk = geo.ball()
    f = bd.LinearCoordinate(disk, 1)
    assert p2_disk_value(f, (0.2, 0.5)) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        p2_disk_value(f, (1.0, 0.0))


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=12))
def test_mean_value_property(coeffs):
    f = lambda t: sum(c * np.cos(k * t + 0.3 * k) for k, c in enumerate(coeffs))
    t = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
    assert p2_disk_value(f, (0.0, 0.0)) == pytest.approx(np.mean(f(t)), abs=1e-6)
