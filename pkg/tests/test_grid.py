import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modwave.grid import (TorusGrid, PeriodicField, fourier_diff,
                          periodic_quadrature, trig_eval, trig_refine,
                          dealiased_product)


@pytest.fixture
def grid():
    return TorusGrid(64)


def test_grid_invariants():
    with pytest.raises(ValueError):
        TorusGrid(6)
    with pytest.raises(ValueError):
        TorusGrid(33)
    g = TorusGrid(16)
    assert np.allclose(g.nodes[3], 2 * np.pi * 3 / 16)


def test_diff_sin_is_cos(grid):
    f = PeriodicField(grid, np.sin(grid.nodes))
    df = fourier_diff(f, 1)
    assert np.max(np.abs(df.values - np.cos(grid.nodes))) < 1e-12


def test_diff_constant_is_zero(grid):
    f = PeriodicField(grid, np.full(grid.n_theta, 2.7))
    assert np.max(np.abs(fourier_diff(f, 1).values)) < 1e-13


def test_diff_second_order_eigenfunction(grid):
    f = PeriodicField(grid, np.exp(3j * grid.nodes))
    d2 = fourier_diff(f, 2)
    assert np.max(np.abs(d2.values + 9 * f.values)) < 1e-11


def test_diff_rejects_bad_order(grid):
    f = PeriodicField(grid, np.sin(grid.nodes))
    with pytest.raises(ValueError):
        fourier_diff(f, 3)


def test_quadrature_cos_squared(grid):
    f = PeriodicField(grid, np.cos(grid.nodes) ** 2)
    assert abs(periodic_quadrature(f)[0] - np.pi) < 1e-13


def test_quadrature_constant(grid):
    f = PeriodicField(grid, np.full(grid.n_theta, 1.5))
    assert abs(periodic_quadrature(f)[0] - 3 * np.pi) < 1e-13


def test_quadrature_orthogonality(grid):
    f = PeriodicField(grid, np.cos(grid.nodes) * np.sin(grid.nodes))
    assert abs(periodic_quadrature(f)[0]) < 1e-14


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3),
       shift=st.integers(min_value=0, max_value=63))
def test_diff_linear_and_translation_equivariant(a, b, shift):
    g = TorusGrid(64)
    th = g.nodes
    u = np.cos(2 * th) + 0.3 * np.sin(5 * th)
    v = np.sin(th) - 0.2 * np.cos(7 * th)
    lin = fourier_diff(PeriodicField(g, a * u + b * v), 1).values
    sep = a * fourier_diff(PeriodicField(g, u), 1).values \
        + b * fourier_diff(PeriodicField(g, v), 1).values
    assert np.max(np.abs(lin - sep)) < 1e-11
    rolled = fourier_diff(PeriodicField(g, np.roll(u, shift)), 1).values
    assert np.max(np.abs(rolled - np.roll(
        fourier_diff(PeriodicField(g, u), 1).values, shift))) < 1e-11


def test_trig_eval_matches_nodes(grid):
    vals = np.cos(3 * grid.nodes) + 0.5 * np.sin(grid.nodes)
    out = trig_eval(vals, grid.nodes)
    assert np.max(np.abs(out - vals)) < 1e-12
    # off-node evaluation is exact on resolved modes
    th = np.array([0.1234, 2.2, 5.9])
    assert np.max(np.abs(trig_eval(vals, th)
                         - (np.cos(3 * th) + 0.5 * np.sin(th)))) < 1e-12


def test_trig_refine_exact(grid):
    vals = np.cos(2 * grid.nodes) - 0.4 * np.sin(6 * grid.nodes)
    fine = trig_refine(vals, 3)
    th = 2 * np.pi * np.arange(3 * 64) / (3 * 64)
    assert np.max(np.abs(fine - (np.cos(2 * th) - 0.4 * np.sin(6 * th)))) < 1e-12


def test_dealiased_product_bandlimited(grid):
    th = grid.nodes
    a = np.cos(5 * th)
    b = np.sin(4 * th)
    prod = dealiased_product(a, b)
    exact = 0.5 * (np.sin(9 * th) - np.sin(th))
    assert np.max(np.abs(prod - exact)) < 1e-12
