import numpy as np
import pytest

from modwave.grid import TorusGrid, PeriodicField
from modwave.systems import (make_lambda_omega, make_brusselator,
                             analytic_wavetrain, lambda_omega_dispersion)
from modwave.wavetrain import (solve_profile, continue_family,
                               check_transversality, omega_derivatives,
                               transversality_from_matrix, family_to_csv,
                               brusselator_family_seed, TrivialSolutionError,
                               FamilyTable)


def test_solve_from_exact_guess(lo_system, grid64):
    aw = analytic_wavetrain(lo_system, 0.6)
    wt = solve_profile(lo_system, 0.6, aw.profile(grid64), aw.omega)
    assert abs(wt.omega - 1.32) < 1e-12
    assert wt.residual < 1e-11


def test_solve_from_perturbed_guess(lo_system, grid64):
    aw = analytic_wavetrain(lo_system, 0.6)
    rng = np.random.default_rng(11)
    smooth = (rng.standard_normal((2, 3)) @ np.array(
        [np.cos(grid64.nodes), np.sin(grid64.nodes),
         np.cos(2 * grid64.nodes)]))
    vals = aw.profile(grid64).values + 0.05 * smooth / np.max(np.abs(smooth))
    wt = solve_profile(lo_system, 0.6, PeriodicField(grid64, vals), aw.omega)
    assert abs(wt.omega - 1.32) < 1e-10


def test_trivial_solution_rejected(lo_system, grid64):
    const = PeriodicField(grid64, np.zeros((2, 64)))
    with pytest.raises(TrivialSolutionError):
        solve_profile(lo_system, 0.6, const, 1.0)


def test_continuation_against_dispersion(family_main, lo_system):
    omega_fn, _, _ = lambda_omega_dispersion(lo_system)
    for wt in family_main.members:
        assert abs(wt.omega - omega_fn(wt.k)) < 1e-9
        assert abs(wt.r0() - np.sqrt(1 - wt.k ** 2)) < 1e-9


def test_single_step_family(lo_system, grid64):
    fam = continue_family(lo_system, 0.4, 0.5, 1, grid=grid64)
    assert len(fam.members) == 2
    assert abs(fam.members[0].k - 0.4) < 1e-14
    assert abs(fam.members[1].k - 0.5) < 1e-14


def test_brusselator_family_near_hopf():
    system = make_brusselator(1.0, 2.2)
    grid = TorusGrid(64)
    seed = brusselator_family_seed(system, 0.08, grid)
    fam = continue_family(system, 0.08, 0.22, 7, seed=seed, grid=grid)
    for wt in fam.members:
        assert wt.residual < 1e-10
        assert wt.r0() > 0.01


def test_transversality_simple(lo_system_glancing, grid64):
    aw = analytic_wavetrain(lo_system_glancing, 0.3)
    wt = solve_profile(lo_system_glancing, 0.3, aw.profile(grid64), aw.omega)
    v = check_transversality(wt)
    assert v["simple"]
    assert abs(v["zero_eig"]) < 1e-8
    assert v["eigvec_angle"] < 1e-5


def test_transversality_doubled_kernel(wt_05):
    from modwave.fredholm import assemble_L
    import scipy.linalg as sla
    L = assemble_L(wt_05)
    doubled = sla.block_diag(L.matrix, L.matrix)
    kern = np.concatenate([L.kernel_vector(), L.kernel_vector()])
    v = transversality_from_matrix(doubled, kern)
    assert not v["simple"]


def test_omega_derivatives(family_main):
    d1, d2 = omega_derivatives(family_main, 0.5)
    assert abs(d1 - (-0.5)) < 1e-6
    assert abs(d2 - (-1.0)) < 1e-5


def test_omega_derivatives_constant_dispersion(lo_system_glancing, grid64):
    fam = continue_family(lo_system_glancing, 0.3, 0.6, 15, grid=grid64)
    for k in (0.35, 0.45, 0.55):
        d1, _ = omega_derivatives(fam, k)
        assert abs(d1) < 1e-8


def test_omega_derivatives_out_of_range(family_main):
    with pytest.raises(ValueError):
        omega_derivatives(family_main, 0.9)


def test_phase_invariance(lo_system, grid64):
    aw = analytic_wavetrain(lo_system, 0.5)
    base = solve_profile(lo_system, 0.5, aw.profile(grid64), aw.omega)
    shift = 7
    vals = np.roll(aw.profile(grid64).values, shift, axis=1)
    moved = solve_profile(lo_system, 0.5, PeriodicField(grid64, vals),
                          aw.omega)
    assert abs(moved.omega - base.omega) < 1e-10
    assert np.max(np.abs(np.roll(base.profile.values, shift, axis=1)
                         - moved.profile.values)) < 1e-9


def test_residual_spectral_refinement(lo_system):
    """Profile residual drops spectrally from 32 to 64 nodes (analytic
    profiles are exactly band limited here, so the drop is to round-off)."""
    from modwave.wavetrain import profile_residual
    for n in (32, 64):
        grid = TorusGrid(n)
        aw = analytic_wavetrain(lo_system, 0.5)
        wt = solve_profile(lo_system, 0.5, aw.profile(grid), aw.omega)
        assert wt.residual < 5e-12


def test_omega_grid_independence(lo_system):
    oms = []
    for n in (48, 96):
        fam = continue_family(lo_system, 0.35, 0.55, 10, grid=TorusGrid(n))
        oms.append(fam.omega(0.452))
    assert abs(oms[0] - oms[1]) < 1e-8


def test_family_table_interpolation(family_main, lo_system):
    table = family_main.table()
    omega_fn, domega_fn, _ = lambda_omega_dispersion(lo_system)
    for k in (0.271, 0.39, 0.533, 0.648):
        assert abs(table.omega(k) - omega_fn(k)) < 1e-10
        assert abs(table.domega(k) - domega_fn(k)) < 1e-8
        prof = table.profile(k)
        assert abs(np.max(np.linalg.norm(prof, axis=0))
                   - np.sqrt(1 - k * k)) < 1e-9
        dp = table.dk_profile(k)
        fd = (table.profile(k + 1e-5) - table.profile(k - 1e-5)) / 2e-5
        assert np.max(np.abs(dp - fd)) < 1e-5


def test_family_csv_export(tmp_path, family_main):
    path = tmp_path / "family.csv"
    family_to_csv(family_main, path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "k,omega,r0,residual,transversality_gap"
    assert len(rows) == len(family_main.members) + 1
