import numpy as np
import pytest

from modwave.grid import TorusGrid, PeriodicField, quad_inner
from modwave.fredholm import (assemble_L, adjoint_null, PartialInverse,
                              partial_inverse_apply, verify_bounded_on_Cm,
                              LinearizedOperator, TransversalityError)
from modwave.wavetrain import _diff_matrix
from modwave.systems import make_lambda_omega, analytic_wavetrain
from modwave.wavetrain import solve_profile


@pytest.fixture(scope="module")
def operator(wt_05):
    return assemble_L(wt_05)


@pytest.fixture(scope="module")
def partial(operator):
    return PartialInverse.build(operator)


def _random_field(grid, n, seed, max_mode=6):
    rng = np.random.default_rng(seed)
    th = grid.nodes
    out = np.zeros((n, grid.n_theta))
    for j in range(1, max_mode + 1):
        amp = rng.standard_normal((n, 2)) / j
        out += amp[:, :1] * np.cos(j * th) + amp[:, 1:] * np.sin(j * th)
    return out


def test_kernel_property(operator):
    assert np.max(np.abs(operator.apply(operator.dtheta_p))) < 1e-9


def test_constant_coefficient_toy_eigenvalues():
    """Scalar operator with constant reaction coefficient diagonalizes on
    Fourier modes."""
    g = TorusGrid(32)
    omega, g0, k = 0.7, 0.4, 0.6
    d1 = _diff_matrix(32, 1)
    d2 = _diff_matrix(32, 2)
    mat = omega * d1 + g0 * np.eye(32) - k * k * d2
    evals = np.sort_complex(np.linalg.eigvals(mat))
    modes = np.fft.fftfreq(32, 1 / 32)
    modes_odd = modes.copy()
    modes_odd[16] = 0.0   # unpaired Nyquist mode carries no first derivative
    expect = np.sort_complex(omega * 1j * modes_odd + g0 + k * k * modes ** 2)
    assert np.max(np.abs(evals - expect)) < 1e-8


def test_zero_eigenvalue_small(operator):
    evals = np.linalg.eigvals(operator.matrix)
    assert np.min(np.abs(evals)) < 1e-8


def test_adjoint_normalization(operator):
    null = adjoint_null(operator)
    assert abs(null.normalization - 1.0) < 1e-10


def test_adjoint_self_adjoint_toy():
    """Second-order operator with potential from a known positive kernel:
    the adjoint null vector is the kernel vector itself."""
    g = TorusGrid(64)
    th = g.nodes
    w = np.exp(np.cos(th))
    potential = np.sin(th) ** 2 - np.cos(th)   # w'' / w
    d2 = _diff_matrix(64, 2)
    mat = -d2 + np.diag(potential)
    op = LinearizedOperator(grid=g, n=1, k=1.0, omega=0.0, matrix=mat,
                            dtheta_p=w[None, :])
    null = adjoint_null(op)
    hv = null.h.values[0]
    cosang = abs(np.dot(hv, w)) / (np.linalg.norm(hv) * np.linalg.norm(w))
    assert cosang > 1 - 1e-9


def test_range_condition(operator, partial):
    rng = np.random.default_rng(12)
    for i in range(20):
        wfield = _random_field(operator.grid, operator.n, 100 + i)
        val = quad_inner(operator.grid, partial.h.values,
                         operator.apply(wfield))
        assert abs(val) < 1e-9


def test_partial_inverse_kills_kernel(partial, wt_05):
    out = partial.apply(wt_05.profile.deriv(1).values)
    assert np.max(np.abs(out)) < 1e-9


def test_partial_inverse_right_inverse(operator, partial):
    f = _random_field(operator.grid, operator.n, 13)
    f = partial.project_out_kernel(f)
    w = partial.apply(f)
    assert np.max(np.abs(operator.apply(w) - f)) < 1e-9


def test_partial_inverse_general_rhs(operator, partial):
    f = _random_field(operator.grid, operator.n, 14)
    w = partial.apply(f)
    target = f - partial.spectral_projection(f)
    assert np.max(np.abs(operator.apply(w) - target)) < 1e-9


def test_projection_idempotent(partial):
    f = _random_field(partial.L.grid, partial.L.n, 15)
    once = partial.spectral_projection(f)
    twice = partial.spectral_projection(once)
    assert np.max(np.abs(once - twice)) < 1e-12


def test_partial_inverse_linear(partial):
    f = _random_field(partial.L.grid, partial.L.n, 16)
    g = _random_field(partial.L.grid, partial.L.n, 17)
    lhs = partial.apply(2.0 * f - 3.0 * g)
    rhs = 2.0 * partial.apply(f) - 3.0 * partial.apply(g)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_bordered_rank_matches_transversality(operator):
    null = adjoint_null(operator)
    size = operator.matrix.shape[0]
    bordered = np.zeros((size + 1, size + 1))
    bordered[:size, :size] = operator.matrix
    bordered[:size, size] = operator.kernel_vector()
    bordered[size, :size] = operator.grid.spacing * null.h.values.reshape(-1)
    s = np.linalg.svd(bordered, compute_uv=False)
    assert s[-1] > 1e-6 * s[0]


def test_partial_inverse_apply_field(partial, wt_05):
    f = PeriodicField(wt_05.grid, _random_field(wt_05.grid, 2, 18))
    out = partial_inverse_apply(partial, f)
    assert out.values.shape == f.values.shape


def test_bounded_on_cm(partial, wt_05):
    rep = verify_bounded_on_Cm(partial, 0)
    assert rep["ratio"] < 1e3
    # ratio stays stable under grid refinement
    grid2 = TorusGrid(128)
    sys1 = wt_05.system
    aw = analytic_wavetrain(sys1, 0.5)
    wt2 = solve_profile(sys1, 0.5, aw.profile(grid2), aw.omega)
    rep2 = verify_bounded_on_Cm(PartialInverse.build(assemble_L(wt2)), 0)
    assert abs(rep2["ratio"] - rep["ratio"]) < 0.2 * max(rep["ratio"], 1.0)
    for m in (1, 2):
        repm = verify_bounded_on_Cm(partial, m)
        assert np.isfinite(repm["ratio"])
    with pytest.raises(ValueError):
        verify_bounded_on_Cm(partial, 5)
