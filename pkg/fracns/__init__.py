"""
fracns - time-fractional Navier-Stokes on the periodic torus

A pseudospectral mild-solution solver with Mittag-Leffler propagators,
fractional time operators, and executable checks of the estimates used in
uniqueness arguments for the time-fractional equations.
"""

__version__ = "0.1.0"

from .exceptions import *
from .specfun import (EvalPolicy, MLParams, mainardi, mainardi_moment, mittag_leffler,
                      mittag_leffler_values)
from .fracops import (caputo_derivative, frac_laplacian_apply, frac_laplacian_constant,
                      rl_integral, singular_integral_laplacian_1d)
from .spectral import (SpectralField, TorusGrid, Trajectory, leray_project, nonlinear_term,
                       norm_pqT, pressure_recover, transform_forward, transform_inverse)
from .solver import (MildSolution, SolverConfig, classical_reference, linear_propagate,
                     memory_weights, picard_pair, solve_forced, solve_mild)
from .analysis import (GronwallInput, gns_ratio, gronwall_check, maximal_regularity_ratio,
                       power_inequality_check, uniqueness_metric)
from .utils import EstimateReport, NormSpec, RunResult, SampledSignal, TimeGrid
from .config import ExperimentConfig, load_config
from .experiment_runner import ExperimentRunner
from .main import run_experiment

__all__ = [
    "EvalPolicy",
    "MLParams",
    "mittag_leffler",
    "mittag_leffler_values",
    "mainardi",
    "mainardi_moment",
    "rl_integral",
    "caputo_derivative",
    "frac_laplacian_constant",
    "frac_laplacian_apply",
    "singular_integral_laplacian_1d",
    "TorusGrid",
    "SpectralField",
    "Trajectory",
    "transform_forward",
    "transform_inverse",
    "leray_project",
    "nonlinear_term",
    "pressure_recover",
    "norm_pqT",
    "SolverConfig",
    "MildSolution",
    "linear_propagate",
    "memory_weights",
    "solve_mild",
    "solve_forced",
    "picard_pair",
    "classical_reference",
    "GronwallInput",
    "gronwall_check",
    "power_inequality_check",
    "gns_ratio",
    "maximal_regularity_ratio",
    "uniqueness_metric",
    "TimeGrid",
    "SampledSignal",
    "NormSpec",
    "EstimateReport",
    "RunResult",
    "ExperimentConfig",
    "load_config",
    "ExperimentRunner",
    "run_experiment",
]
