"""Symbolic models and controller synthesis for nonlinear control systems with disturbances."""

from .abstraction import (
    BisimCheckReport,
    ParameterVector,
    SymbolicModel,
    build_model,
    check_params,
    load_model,
    model_counts,
    successors,
    suggest_params,
)
from .altbisim import FiniteTS, is_aea_bisim, largest_aea_bisim, reduce_to_approx_bisim
from .errors import (
    BlowUpError,
    CapExceededError,
    DegenerateClassError,
    InvalidInputError,
    InvalidSignalError,
    NumericDomainError,
    ParseError,
    RefinementError,
    SymctlError,
    SynthesisFailure,
)
from .flow import FlowConfig, integrate, integrate_trace
from .games import GameGraph, GameResult, solve_reach, solve_safety
from .geometry import Box, Lattice, enumerate_lattice, mu_hat, nearest_lattice_point
from .lyapunov import (
    KFunction,
    LyapunovCert,
    check_a2,
    check_condition_i,
    check_condition_ii,
    gamma_sup,
    pendulum_cert,
    pendulum_contraction_cert,
    quadratic_cert,
)
from .splines import (
    ApproxParams,
    SplineBasis,
    SplineSeq,
    approximate_disturbance,
    enumerate_approx,
    eval_seq,
    eval_spline,
    rho_theta,
    search_params,
)
from .synthesis import Controller, SpecMonitor, pendulum_spec, simulate_closed_loop, synthesize, verify_closed_loop
from .system import (
    DisturbanceSignal,
    SystemDef,
    cosine_disturbance,
    eval_field,
    parse_system,
    pendulum_preset,
)

__version__ = "0.1.0"
