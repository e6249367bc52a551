"""Wave trains of reaction-diffusion systems: profiles, Bloch/Evans spectra,
symmetrizer certificates, modulation expansions, direct validation."""

__version__ = "0.1.0"

from .grid import TorusGrid, PeriodicField, fourier_diff, periodic_quadrature
from .jets import EpsJet, jet_compose
from .linalg import (integrate_linear_ode, matrix_log_normalized,
                     ordered_schur_split, lyapunov_symmetrizer)
from .systems import (ReactionSystem, make_lambda_omega, make_brusselator,
                      make_polynomial, analytic_wavetrain)
from .wavetrain import (WaveTrain, WaveFamily, solve_profile, continue_family,
                        check_transversality, omega_derivatives)
from .fredholm import (assemble_L, adjoint_null, PartialInverse,
                       partial_inverse_apply, verify_bounded_on_Cm)
from .bloch import (assemble_bloch, bloch_eigenvalues, first_order_symbol,
                    monodromy, evans, locate_evans_roots, neutral_curve,
                    verify_diffusive_stability, whitham_flux_check)
from .symmetrizer import (FrequencyPoint, averaged_symbol,
                          medium_frequency_symmetrizer, extract_neutral_block,
                          case_i_symmetrizer, case_ii_symmetrizer,
                          verify_certificate, full_certificate,
                          high_frequency_check)
from .modulation import (solve_eikonal, blowup_time_estimate, build_expansion,
                         evaluate_ansatz, residual_order_study, bump_profile)
from .simulate import (simulate_direct, hseps_norm, convergence_study,
                       initial_layer_probe, quantized_eps)
from .config import RunConfig, load_config
