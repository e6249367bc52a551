import numpy as np
import pytest

from modwave.grid import TAU, TorusGrid, PeriodicField
from modwave.systems import (make_lambda_omega, make_polynomial,
                             analytic_wavetrain, lambda_omega_dispersion)
from modwave.wavetrain import solve_profile, WaveTrain, continue_family
from modwave.fredholm import assemble_L
from modwave.bloch import (assemble_bloch, bloch_eigenvalues,
                           first_order_symbol, EvansEngine, monodromy, evans,
                           locate_evans_roots, neutral_curve,
                           verify_diffusive_stability, whitham_flux_check)


def _toy_wavetrain(g0=0.4, omega=0.7, k=0.6, n_theta=32):
    """Constant-coefficient scalar surrogate for Fourier-diagonal checks."""
    system = make_polynomial("linear_toy", 1, [(0, g0, (1,))])
    grid = TorusGrid(n_theta)
    profile = PeriodicField(grid, 0.5 + 0.05 * np.cos(grid.nodes))
    return WaveTrain(k=k, omega=omega, profile=profile, system=system)


def test_eta_shift_identity(wt_04):
    base = assemble_bloch(wt_04, 0.3, 0.0)
    shifted = assemble_bloch(wt_04, 0.3, 0.7)
    diff = shifted - base
    assert np.max(np.abs(diff + 0.49 * np.eye(diff.shape[0]))) < 1e-12


def test_bloch_at_origin_reproduces_linearization(wt_04):
    L = assemble_L(wt_04)
    B = assemble_bloch(wt_04, 0.0, 0.0)
    assert np.max(np.abs(B - L.matrix)) < 1e-12


def test_bloch_constant_toy_eigenvalues():
    wt = _toy_wavetrain()
    xi, eta = 0.2, 0.3
    evals = np.sort_complex(np.linalg.eigvals(assemble_bloch(wt, xi, eta)))
    modes = np.fft.fftfreq(32, 1 / 32)
    modes_odd = modes.copy()
    modes_odd[16] = 0.0   # unpaired Nyquist mode carries no odd derivative
    expect = np.sort_complex(
        wt.omega * 1j * (modes_odd + xi) + 0.4
        + wt.k ** 2 * (modes ** 2 + 2 * xi * modes_odd + xi ** 2)
        - eta ** 2)
    assert np.max(np.abs(evals - expect)) < 1e-8


def test_translation_eigenvalue_every_k(family_main):
    for wt in family_main.members[::6]:
        lam = bloch_eigenvalues(wt, 0.0)
        assert np.min(np.abs(lam)) < 1e-8


def test_eckhaus_verdicts():
    system = make_lambda_omega(1.0, 0.0)
    grid = TorusGrid(64)
    for k, expect in ((0.4, True), (0.65, False)):
        aw = analytic_wavetrain(system, k)
        wt = solve_profile(system, k, aw.profile(grid), aw.omega)
        verdict = verify_diffusive_stability(wt)
        assert verdict.condition_i
        assert verdict.condition_ii is expect
        assert verdict.stable is expect
        if expect:
            assert verdict.margin_c > 0
        else:
            assert any(abs(f["xi"]) < 0.25 for f in verdict.failing)


def test_symbol_structure(wt_04):
    lam = 0.17 + 0.05j
    a = first_order_symbol(wt_04, lam)
    n = 2
    assert np.max(np.abs(a[:, :n, n:] - np.eye(n) / wt_04.k)) < 1e-14
    trace = np.trace(a, axis1=-2, axis2=-1)
    assert np.max(np.abs(trace - n * wt_04.omega / wt_04.k ** 2)) < 1e-12


def test_symbol_scalar_characteristic():
    wt = _toy_wavetrain()
    lam = 0.3 + 0.1j
    a = first_order_symbol(wt, lam)[0]
    mu = np.linalg.eigvals(a)
    for m in mu:
        val = m * m - (wt.omega / wt.k ** 2) * m - (lam + 0.4) / wt.k ** 2
        assert abs(val) < 1e-12


def test_monodromy_constant_coefficients():
    import scipy.linalg as sla
    wt = _toy_wavetrain()
    lam = 0.2 + 0.3j
    a = first_order_symbol(wt, lam)[0]
    rec = monodromy(wt, lam, steps=2048)
    ref = sla.expm(TAU * a)
    assert np.linalg.norm(rec.X - ref) / np.linalg.norm(ref) < 1e-9
    assert np.linalg.norm(rec.M1 - a) < 1e-8


def test_monodromy_neutral_multiplier(wt_04):
    rec = monodromy(wt_04, 0.0, steps=4096)
    assert np.min(np.abs(rec.multipliers - 1.0)) < 1e-7
    mu = np.log(rec.multipliers[np.argmin(np.abs(rec.multipliers - 1.0))]) / TAU
    assert abs(mu) < 1e-8


def test_monodromy_liouville(wt_04):
    engine = EvansEngine(wt_04, steps=2048)
    data = engine.evans_data([0.05 + 0.02j])
    # char-poly constant term against the quadrature of the symbol trace
    a = first_order_symbol(wt_04, 0.0)
    tr_int = (TAU / a.shape[0]) * np.sum(np.trace(a, axis1=-2, axis2=-1)).real
    assert abs(data.e_log[0, -1] - tr_int) < 1e-8 * abs(tr_int)


def test_log_defect_relative(wt_04):
    import scipy.linalg as sla
    rec = monodromy(wt_04, 0.08 + 0.12j, steps=4096)
    defect = np.linalg.norm(sla.expm(TAU * rec.M1) - rec.X)
    assert defect / np.linalg.norm(rec.X) < 1e-8


def test_evans_zero_at_origin(wt_04):
    engine = EvansEngine(wt_04, steps=4096)
    scale = abs(engine.evans_data([0.3]).evans(0.0)[0])
    val = abs(engine.evans_data([0.0]).evans(0.0)[0])
    assert val < 1e-7 * scale


def test_evans_periodic_in_xi(wt_04):
    val1 = evans(wt_04, 0.1 + 0.05j, 0.23)
    val2 = evans(wt_04, 0.1 + 0.05j, 1.23)
    assert val1 == pytest.approx(val2, rel=1e-12)


def test_evans_conjugate_symmetry(wt_04):
    lam = 0.07 + 0.11j
    d1 = evans(wt_04, lam, 0.2)
    d2 = evans(wt_04, np.conj(lam), -0.2)
    assert abs(np.conj(d1) - d2) / abs(d1) < 1e-10


def test_roots_match_bloch_eigenvalues(wt_04):
    xi = 0.2
    dyn = bloch_eigenvalues(wt_04, xi)
    seeds = dyn[np.abs(dyn) < 0.55]
    roots = locate_evans_roots(wt_04, xi, radius=0.5, steps=4096, seeds=seeds)
    inside = np.sort_complex(dyn[np.abs(dyn) <= 0.5])
    got = np.sort_complex(np.array(roots))
    assert len(got) == len(inside)
    assert np.max(np.abs(got - inside)) < 1e-5


def test_winding_counts_match_eigenvalue_counts(wt_04):
    from modwave.bloch import _winding
    engine = EvansEngine(wt_04, steps=1024)
    for xi in (0.15, 0.35):
        dyn = bloch_eigenvalues(wt_04, xi)
        count = _winding(engine, xi, ((-0.45, 0.45), (-0.45, 0.45)))
        expect = int(np.sum((np.abs(dyn.real) <= 0.45)
                            & (np.abs(dyn.imag) <= 0.45)))
        assert count == expect


def test_conjugation_periodicity():
    """W = exp(theta M1) X(theta)^{-1} closes up over one period."""
    import scipy.linalg as sla
    from modwave.linalg import integrate_linear_ode
    system = make_lambda_omega(1.0, 0.0)
    grid = TorusGrid(64)
    aw = analytic_wavetrain(system, 0.7)
    wt = solve_profile(system, 0.7, aw.profile(grid), aw.omega)
    lam = 0.1 + 0.2j
    rec = monodromy(wt, lam, steps=4096)
    w_end = sla.expm(TAU * rec.M1) @ np.linalg.inv(rec.X)
    assert np.linalg.norm(w_end - np.eye(4)) < 1e-7


def test_neutral_curve_fits(wt_04, lo_system):
    _, domega, eckhaus_b = lambda_omega_dispersion(lo_system)
    curve = neutral_curve(wt_04, xi_max=0.08, n_samples=21)
    assert abs(curve.lam[10]) < 1e-8          # curve passes through 0
    assert abs(curve.omega_prime_fit - domega(0.4)) < 1e-3
    assert abs(curve.b_fit - eckhaus_b(0.4)) < 1e-3
    assert curve.b_fit > 0
    assert np.all(curve.lam.real <= 1e-8)


def test_neutral_curve_sign_flips_with_coupling(grid64):
    for w1 in (0.5, -0.5):
        system = make_lambda_omega(1.0, w1)
        aw = analytic_wavetrain(system, 0.4)
        wt = solve_profile(system, 0.4, aw.profile(grid64), aw.omega)
        curve = neutral_curve(wt, xi_max=0.06, n_samples=15)
        assert np.sign(curve.omega_prime_fit) == -np.sign(w1)


def test_whitham_flux_check(family_main):
    rep = whitham_flux_check(family_main, 0.45)
    assert rep["difference"] < 1e-3
    assert rep["b_fit"] > 0


def test_exponent_pairing_at_roots(wt_04):
    """At an Evans root the period map carries the multiplier e^{2 pi i xi}."""
    xi = 0.2
    dyn = bloch_eigenvalues(wt_04, xi)
    lam = dyn[np.argmin(np.abs(dyn))]
    rec = monodromy(wt_04, lam, steps=4096)
    target = np.exp(2j * np.pi * xi)
    assert np.min(np.abs(rec.multipliers - target)) < 1e-6
