"""Numerical laboratory for rough-coefficient parabolic equations.

Builds and stress-tests the constructive side of a well-posedness theory:
weighted space-time norms on dyadic Whitney structures, homogeneous Besov
norms, causal Duhamel solution operators with hypercontractivity probes, a
Picard solver for the semilinear reaction-diffusion problem with blowup
estimation, and reverse Holder self-improvement checks.
"""

__version__ = "0.1.0"

from .coefficients import (CoefficientField, EllipticityBounds,
                           ellipticity_bounds, generate_field, load_field,
                           save_field)
from .duhamel import (ProbeReport, SIOSpec, decay_rate_probe, duhamel_div,
                      duhamel_gradient, duhamel_source, fractional_integral,
                      hyper_probe, restricted_fractional_integral)
from .elliptic import (DiscreteOperator, KernelSlice, assemble_operator,
                       gradient, kernel_column, offdiagonal_probe,
                       semigroup_apply, verify_gaussian_bound)
from .exponents import (ExponentReport, RHParams, admissible_region,
                        duhamel_table_check, exponent_report, p_critical,
                        rd_interval, rd_wellposed_check, rh_exponents,
                        scaling_params, sobolev_indices)
from .geometry import (GridSpec, ParabolicBox, SpaceTimeField, TimeLadder,
                       box_average, parabolic_annulus, parabolic_distance,
                       whitney_box)
from .pipeline import (ScenarioConfig, linear_cauchy_scenario,
                       rd_wellposedness_scenario)
from .solver import (LifespanEstimate, MildSolution, NonlinearitySpec,
                     apply_nonlinearity, bootstrap_table, estimate_lifespan,
                     free_evolution, picard_solve, uniqueness_probe)
from .spaces import (BesovParams, LPLadder, ZParams, besov_norm,
                     change_of_angle_probe, embedding_probe, lp_project,
                     vanishing_profile, weighted_lp_norm, z_norm)
from .verify import (RHReport, TestFunctionBank, initial_trace_error,
                     rh_check, rh_improved_check, weak_residual)
