import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambert_sb.grid import SpaceTimeGrid
from lambert_sb.potential import PotentialModel
from lambert_sb.rdsolve import (
    DivergenceError,
    HeatKernel,
    ReactionDiffusionProblem,
    SolverStats,
    heat_kernel_1d,
    heat_propagate,
    solve_backward,
    solve_forward,
)


def gaussian(grid, var, mean=(0.0, 0.0, 0.0)):
    x, y, z = np.meshgrid(*grid.axes, indexing="ij")
    d2 = (x - mean[0]) ** 2 + (y - mean[1]) ** 2 + (z - mean[2]) ** 2
    return np.exp(-d2 / (2 * var)) / (2 * np.pi * var) ** 1.5


def rel_l1(u, v):
    return np.abs(u - v).sum() / np.abs(v).sum()


def test_heat_gaussian_oracle():
    # sigma 0.5 in, sigma 1 out; box covers +-6 sigma of the output
    a, elapsed = 0.25, 1.5
    grid = SpaceTimeGrid.cube(-6.0, 6.0, 24)
    u = heat_propagate(gaussian(grid, 0.25, (0.3, 0, -0.2)), elapsed, a, grid)
    assert rel_l1(u, gaussian(grid, 0.25 + 2 * a * elapsed, (0.3, 0, -0.2))) < 0.03


def test_heat_constant_interior():
    grid = SpaceTimeGrid.cube(-6.0, 6.0, 24)
    u = heat_propagate(np.ones(grid.shape), 0.5, 1.0, grid)
    assert u[12, 12, 12] == pytest.approx(1.0, abs=0.01)
    np.testing.assert_array_equal(heat_propagate(np.zeros(grid.shape), 0.5, 1.0, grid), 0.0)


def test_kernel_rows_and_symmetry():
    xs = np.linspace(-3, 3, 31)
    k = heat_kernel_1d(xs, 0.2, 1.0)
    np.testing.assert_allclose(k, k.T)
    assert k[15].sum() == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        heat_kernel_1d(xs, 0.0, 1.0)


def test_zero_reaction_matches_heat_slices():
    grid = SpaceTimeGrid.cube(-4.0, 4.0, 12, t=(0.0, 0.5), nt=5)
    u0 = gaussian(grid, 0.5)
    series = solve_forward(u0, ReactionDiffusionProblem(1.0, 0.0, grid))
    assert series.shape == (6, 13, 13, 13)
    np.testing.assert_array_equal(series[0], u0)
    for k in range(1, 6):
        np.testing.assert_allclose(series[k], heat_propagate(u0, k * grid.dt, 1.0, grid), rtol=1e-12)


def test_constant_reaction_oracle():
    grid = SpaceTimeGrid.cube(-4 * np.sqrt(3), 4 * np.sqrt(3), 40, t=(0.0, 1.0), nt=16)
    u0 = gaussian(grid, 1.0)
    u = solve_forward(u0, ReactionDiffusionProblem(1.0, 1.0, grid))[-1]
    assert rel_l1(u, np.e * gaussian(grid, 3.0)) < 0.05


def test_constant_reaction_is_explicit_euler_in_time():
    # spatially uniform b commutes with the kernel: mass grows as (1 + beta dt)^k
    grid = SpaceTimeGrid.cube(-6.0, 6.0, 24, t=(0.0, 0.5), nt=10)
    u0 = gaussian(grid, 0.2)
    beta = -0.8
    s = solve_forward(u0, ReactionDiffusionProblem(1.0, beta, grid))
    h = solve_forward(u0, ReactionDiffusionProblem(1.0, 0.0, grid))
    # exact up to the lattice semigroup error H(s)H(t) ~ H(s + t)
    for k in range(11):
        assert rel_l1(s[k], (1 + beta * grid.dt) ** k * h[k]) < 2e-3


def test_semigroup():
    a = 0.5
    full = SpaceTimeGrid.cube(-6.0, 6.0, 24, t=(0.0, 1.0), nt=4)
    half = SpaceTimeGrid.cube(-6.0, 6.0, 24, t=(0.0, 0.5), nt=2)
    u0 = gaussian(full, 0.3)
    one = solve_forward(u0, ReactionDiffusionProblem(a, 0.0, full))[-1]
    mid = solve_forward(u0, ReactionDiffusionProblem(a, 0.0, half))[-1]
    two = solve_forward(mid, ReactionDiffusionProblem(a, 0.0, half))[-1]
    assert rel_l1(two, one) < 0.02


def test_backward_smooths_toward_t0():
    grid = SpaceTimeGrid.cube(-6.0, 6.0, 24, t=(0.0, 1.0), nt=4)
    u1 = gaussian(grid, 0.3)
    series = solve_backward(u1, ReactionDiffusionProblem(0.5, 0.0, grid))
    np.testing.assert_array_equal(series[-1], u1)
    assert rel_l1(series[0], gaussian(grid, 0.3 + 2 * 0.5 * 1.0)) < 0.03
    np.testing.assert_array_equal(
        solve_backward(np.zeros(grid.shape), ReactionDiffusionProblem(0.5, 0.0, grid)), 0.0
    )


def test_backward_is_reversed_forward():
    grid = SpaceTimeGrid.cube(-2.0, 2.0, 6, t=(0.0, 0.3), nt=6)
    rng = np.random.default_rng(3)
    b = rng.normal(size=grid.shape)
    u = rng.uniform(0.5, 1.5, grid.shape)
    p = ReactionDiffusionProblem(0.7, b, grid)
    np.testing.assert_array_equal(solve_backward(u, p)[::-1], solve_forward(u, p))


def test_positivity_clamp_counts():
    grid = SpaceTimeGrid.cube(-2.0, 2.0, 6, t=(0.0, 1.0), nt=4)
    stats = SolverStats()
    # a strongly negative reaction drives explicit Euler below zero
    out = solve_forward(np.ones(grid.shape), ReactionDiffusionProblem(1.0, -20.0, grid), positive=True, stats=stats)
    assert stats.clamped > 0
    assert np.all(out[1:] > 0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_error():
    grid = SpaceTimeGrid.cube(-1.0, 1.0, 3, t=(0.0, 1.0), nt=3)
    with pytest.raises(DivergenceError):
        solve_forward(np.ones(grid.shape), ReactionDiffusionProblem(1.0, 1e308, grid))


def test_problem_validation():
    grid = SpaceTimeGrid.cube(-1.0, 1.0, 3)
    with pytest.raises(ValueError):
        ReactionDiffusionProblem(0.0, 0.0, grid)
    with pytest.raises(ValueError):
        ReactionDiffusionProblem(1.0, np.inf, grid)


def test_from_potential_finite_on_origin_lattice():
    R = 6600.0
    grid = SpaceTimeGrid(-30000 / R, 10000 / R, -5000 / R, 25000 / R, -5000 / R, 25000 / R, 0, 3600 / 5399, 12, 12, 12, 50)
    p = ReactionDiffusionProblem.from_potential(grid, PotentialModel(), 15000.0)
    assert np.all(np.isfinite(p.b))
    assert p.a == pytest.approx(15000 * 5399 / R**2)
    off = ReactionDiffusionProblem.from_potential(grid, PotentialModel(), 15000.0, potential_off=True)
    assert not np.any(off.b)


def test_mass_deficit_diagnostic():
    grid = SpaceTimeGrid.cube(-1.0, 1.0, 8, t=(0.0, 1.0), nt=4)
    k = HeatKernel(grid, 1.0)
    worst = max(np.max(1 - k.row_mass(j * grid.dt)) for j in range(1, 5))
    assert k.mass_deficit() == pytest.approx(worst)
    assert 0 < k.mass_deficit() < 1
    wide = HeatKernel(SpaceTimeGrid.cube(-20, 20, 80, t=(0, 0.1), nt=2), 1.0)
    assert wide.row_mass(0.1)[40, 40, 40] == pytest.approx(1.0, abs=1e-5)
    assert wide.row_mass(0.1)[0, 0, 0] < 0.5


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_heat_is_positive_and_linear(a, elapsed, seed):
    grid = SpaceTimeGrid.cube(-1.0, 1.0, 5)
    rng = np.random.default_rng(seed)
    u, v = rng.uniform(0, 1, (2, *grid.shape))
    hu, hv = heat_propagate(u, elapsed, a, grid), heat_propagate(v, elapsed, a, grid)
    assert np.all(hu >= 0)
    np.testing.assert_allclose(heat_propagate(2 * u + v, elapsed, a, grid), 2 * hu + hv, rtol=1e-12, atol=1e-300)
