from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from mfcontagion.core import (
    Density,
    DomainError,
    Drift,
    InitialCondition,
    LossPath,
    LossTransform,
    ModelParams,
    SaturationError,
    SpaceGrid,
    TimeGrid,
    ValidationError,
    cdf,
    eval_transform,
    shift_density,
    total_mass,
)


def indicator(grid, lo, hi, height=1.0):
    # nodes sitting on a jump take the midpoint value
    x = grid.nodes
    inside = np.where((x > lo + 1e-12) & (x < hi - 1e-12), height, 0.0)
    edge = (np.abs(x - lo) < 1e-12) | (np.abs(x - hi) < 1e-12)
    v = np.where(edge, 0.5 * height, inside)
    if abs(lo) < 1e-12:
        v[0] = height
    return Density(grid, v)


# -- grids --------------------------------------------------------------------


def test_time_grid_points_are_index_products():
    g = TimeGrid.from_horizon(1.0, 1e-3)
    assert g.n_steps == 1000
    assert g.t(437) == 437 * 1e-3
    assert g.times[-1] == 1000 * 1e-3
    assert g.refined().dt == 5e-4 and g.refined().n_steps == 2000


@pytest.mark.parametrize("dt,n", [(0.0, 10), (-1.0, 10), (0.1, 0)])
def test_time_grid_rejects_bad_input(dt, n):
    with pytest.raises(ValidationError):
        TimeGrid(dt, n)


def test_space_grid_node_count_and_weights():
    g = SpaceGrid(0.3, 1.0)
    assert g.n_points == 4
    assert g.nodes[-1] <= 1.0
    np.testing.assert_allclose(g.weights(), [0.15, 0.3, 0.3, 0.15])
    assert SpaceGrid(1e-3, 8.0).n_points == 8001


# -- quadrature -------------------------------------------------------------


def test_cdf_of_unit_uniform_at_half():
    g = SpaceGrid(1e-3, 1.0)
    d = Density(g, np.ones(g.n_points))
    assert cdf(d, 0.5) == pytest.approx(0.5, abs=1e-6)


def test_cdf_at_zero_is_zero():
    g = SpaceGrid(1e-2, 3.0)
    d = Density(g, np.random.default_rng(0).random(g.n_points))
    assert cdf(d, 0.0) == 0.0


def test_cdf_of_step_density():
    g = SpaceGrid(1e-3, 2.0)
    d = indicator(g, 0.0, 0.5, 2.0)
    assert cdf(d, 0.25) == pytest.approx(0.5, abs=g.dx)
    assert total_mass(d) == pytest.approx(1.0, abs=g.dx)


def test_cdf_clamps_above_upper_and_matches_total_mass():
    g = SpaceGrid(0.01, 2.0)
    d = Density(g, np.exp(-g.nodes))
    assert cdf(d, 2.0) == pytest.approx(total_mass(d), rel=1e-14)
    assert cdf(d, 50.0) == cdf(d, 2.0)


def test_total_mass_half_normal():
    g = SpaceGrid(1e-3, 8.0)
    d = Density(g, 2.0 * norm.pdf(g.nodes))
    assert total_mass(d) == pytest.approx(1.0, abs=1e-4)


def test_total_mass_of_zero_density():
    assert total_mass(Density.zeros(SpaceGrid(0.1, 1.0))) == 0.0


def test_cdf_between_nodes_integrates_linear_interpolant():
    g = SpaceGrid(0.5, 2.0)
    d = Density(g, [0.0, 1.0, 1.0, 0.0, 0.0])
    # hand integral of the hat-shaped interpolant up to 0.25: 0.5 * 0.25 * 0.5
    assert cdf(d, 0.25) == pytest.approx(0.0625, abs=1e-15)


densities = st.lists(st.floats(0, 10), min_size=3, max_size=60).map(
    lambda v: Density(SpaceGrid(0.1, 0.1 * (len(v) - 1) + 1e-12), np.array(v))
)


@settings(max_examples=200, deadline=None)
@given(densities, st.lists(st.floats(0, 8), min_size=2, max_size=20))
def test_cdf_nondecreasing(d, xs):
    xs = sorted(xs)
    vals = [cdf(d, x) for x in xs]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# -- shifts -----------------------------------------------------------------


def test_shift_by_zero_is_identity():
    g = SpaceGrid(0.01, 3.0)
    d = Density(g, np.sin(g.nodes) ** 2)
    assert np.array_equal(shift_density(d, 0.0).values, d.values)


def test_shift_uniform_by_quarter():
    g = SpaceGrid(1e-3, 2.0)
    d = indicator(g, 0.0, 1.0)
    s = shift_density(d, 0.25)
    assert total_mass(s) == pytest.approx(0.75, abs=g.dx)
    assert s.values[g.nodes < 0.74].min() == 1.0
    assert s.values[g.nodes > 0.76].max() == 0.0


def test_shift_moves_gaussian_bump():
    g = SpaceGrid(1e-3, 5.0)
    d = Density(g, norm.pdf(g.nodes, 2.0, 0.2))
    s = shift_density(d, 0.5)
    assert g.nodes[np.argmax(s.values)] == pytest.approx(1.5, abs=g.dx)
    assert total_mass(s) == pytest.approx(total_mass(d), abs=1e-4)


def test_shift_rejects_negative():
    with pytest.raises(ValueError):
        shift_density(Density.zeros(SpaceGrid(0.1, 1.0)), -0.1)


@settings(max_examples=100, deadline=None)
@given(densities, st.floats(0, 3), st.floats(0, 3))
def test_shift_composition_and_mass(d, a, b):
    two = shift_density(shift_density(d, a), b)
    one = shift_density(d, a + b)
    # each linear interpolation is off by at most the largest node-to-node jump
    tol = 2 * np.max(np.abs(np.diff(d.values))) + 1e-12
    assert np.max(np.abs(two.values - one.values)) <= tol
    assert total_mass(one) <= total_mass(d) + 1e-12


# -- loss paths ---------------------------------------------------------------


def test_loss_path_invariants():
    g = TimeGrid(0.1, 4)
    lp = LossPath.from_increments(g, [0.0, 0.2, 0.0, 0.1], ["diffusion-step", "cascade", "diffusion-step", "x"])
    assert lp.final == pytest.approx(0.3)
    assert [j.time_index for j in lp.jumps] == [2, 4]
    assert sum(j.size for j in lp.jumps) <= lp.final + 1e-15
    with pytest.raises(ValidationError):
        LossPath(g, [0.0, 0.5, 0.4])
    with pytest.raises(ValidationError):
        LossPath(g, [0.0, 1.5])


# -- transforms ---------------------------------------------------------------


def test_eval_transform_examples():
    assert eval_transform(LossTransform.linear(), 0.3) == 0.3
    assert eval_transform(LossTransform.neglog(), 0.0) == 0.0
    assert eval_transform(LossTransform.reciprocal(), 0.5) == 2.0


@pytest.mark.parametrize("kind", ["neglog", "reciprocal"])
def test_singular_transform_capped(kind):
    with pytest.raises(DomainError, match=kind):
        eval_transform(LossTransform(kind), 1.0 - 1e-7)


@pytest.mark.parametrize("kind", ["linear", "neglog", "reciprocal"])
def test_antiderivative_matches_quadrature(kind):
    tr = LossTransform(kind)
    for L in (0.1, 0.5, 0.9):
        want, _ = integrate.quad(lambda x: tr.f(x), 0, L)
        assert tr.antiderivative(L) == pytest.approx(want, rel=1e-10)


def test_tabulated_transform_antiderivative():
    tr = LossTransform.tabulated([0.0, 0.5, 1.0], [0.0, 1.0, 3.0])
    want, _ = integrate.quad(lambda x: np.interp(x, [0, 0.5, 1], [0, 1, 3]), 0, 0.8, points=[0.5])
    assert tr.antiderivative(0.8) == pytest.approx(want, rel=1e-12)


# -- parameters -------------------------------------------------------------


def test_params_reject_degenerate_correlation():
    with pytest.raises(ValidationError, match="non-degeneracy"):
        ModelParams(alpha=1.0, rho=1.0)
    with pytest.raises(ValidationError):
        ModelParams(alpha=1.0, sigma=0.0)
    with pytest.raises(ValidationError):
        ModelParams(alpha=-1.0)


def test_params_time_functions_checked_on_grid():
    p = ModelParams(alpha=1.0, rho=lambda t: t)
    with pytest.raises(ValidationError, match="rho"):
        p.validate(TimeGrid.from_horizon(2.0, 0.1))
    p.validate(TimeGrid.from_horizon(0.5, 0.1))


def test_custom_drift_growth_is_checked():
    p = ModelParams(alpha=1.0, drift=Drift.custom(lambda t, x: x * x, growth=1.0))
    with pytest.raises(ValidationError, match="growth"):
        p.validate(TimeGrid(0.1, 3))


def test_shift_saturates_singular_transform():
    p = ModelParams(alpha=1.0, transform=LossTransform.reciprocal())
    assert p.shift(0.0, 0.5) == pytest.approx(1.0)
    with pytest.raises(SaturationError):
        p.shift(0.5, 0.5)


def test_drift_spec_round_trip():
    for s in ["zero", "const:0.5", "linear:-1.0:0.25", "ou:2.0:1.0"]:
        assert Drift.parse(Drift.parse(s).spec()) == Drift.parse(s)
    assert Drift.parse("linear:-1:0")(0.0, np.array([1.0])) == -1.0


# -- initial conditions -------------------------------------------------------


@pytest.mark.parametrize(
    "spec", ["dirac:-1", "dirac:0", "uniform:0:1", "uniform:0.5:0.2", "nonsense:1", "uniform:a:b"]
)
def test_initial_condition_rejects(spec):
    with pytest.raises(ValidationError):
        InitialCondition.parse(spec)


def test_truncated_gaussian_moments():
    ic = InitialCondition.truncated_gaussian(0.5, 1.0)
    mass, _ = integrate.quad(ic.pdf, 0, 20)
    mean, _ = integrate.quad(lambda x: x * ic.pdf(x), 0, 20)
    assert mass == pytest.approx(1.0, rel=1e-9)
    assert ic.mean() == pytest.approx(mean, rel=1e-9)
    assert ic.sup_density() == pytest.approx(ic.pdf(0.5), rel=1e-12)
    u = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose([integrate.quad(ic.pdf, 0, q)[0] for q in ic.ppf(u)], u, rtol=1e-8)


def test_density_on_grid_has_unit_mass():
    g = SpaceGrid(0.01, 4.0)
    d = InitialCondition.uniform(0.5, 1.5).density_on(g)
    assert total_mass(d) == pytest.approx(1.0, abs=1e-14)
    assert d.sup_norm() == pytest.approx(1.0, abs=0.02)


def test_tabulated_initial_condition(tmp_path):
    p = tmp_path / "init.csv"
    p.write_text("x,value\n0.5,0\n1.0,2\n1.5,0\n")
    ic = InitialCondition.parse(f"table:{p}")
    assert ic.mean() == pytest.approx(1.0)
    assert ic.sup_density() == pytest.approx(2.0)
    assert ic.support() == (0.5, 1.5)
    assert math.isinf(InitialCondition.dirac(1.0).sup_density())
