"""Relaxed and accelerated ADMM variants and their continuous-time limits."""

from .numerics import (DegenerateMatrixError, DimensionError, GramSolveCache, SVDResult,
                       read_matrix, second_difference_matrix, solve_shifted_gram,
                       spectral_bounds, svd, write_matrix)
from .prox import (NonsmoothTerm, SubgradientOracle, composite_oracle, moreau_envelope,
                   moreau_gradient, nuclear_norm, prox_l1, prox_nuclear, prox_sq_norm,
                   prox_zero, singular_value_threshold, soft_threshold)
from .solvers import (SCHEDULES, ConfigError, DivergenceError, IterateState, LinearMap,
                      ProblemSpec, SolverConfig, SolverTrace, TraceRecord, read_trace_csv,
                      residuals, run, step)
from .flows import (DAMPINGS, Certificate, FlowSpec, IntegrationError, LyapunovKind, RateFit,
                    Trajectory, certificate, conformal_dissipation, discrete_flow_gap,
                    hamiltonian_energy, integrate, integrate_first_order,
                    integrate_second_order, limit_alpha, lyapunov, max_relative_increase,
                    phi_dot_residual, rate_fit, stationary_point)
from .problems import (CounterRNG, QuadInstance, RpcaInstance, TrendInstance,
                       gen_rpca_instance, gen_trend_series, make_trend_instance,
                       quad_l1_problem, recovery_error, rpca_problem, standard_quadratic,
                       trend_filter_problem)

__version__ = "0.1.0"
