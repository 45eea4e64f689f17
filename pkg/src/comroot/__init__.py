"""Global root finding through the centre of mass of a singular density.

The root of ``f`` on a box is the limit of the centre of mass of the density
``1 / (f^2 + eta^2)^k``; the centre of mass is estimated by Monte Carlo with
uniform or adaptive Gaussian sampling.
"""

__version__ = "0.1.0"

from .density import DensityParams, default_k, log_g
from .errors import (ArityExceeded, ArityMismatch, BudgetExhausted, EmptyEstimator,
                     ExclusionSaturated, ExpressionSyntaxError, InsufficientData,
                     NonFiniteValue, RootFinderError, UnknownIdentifier)
from .estimator import RatioAccumulator, WeightedSample
from .expr import parse, to_field
from .field import ScalarField, TestProblem, builtin_catalog, get_builtin
from .geometry import Domain, ExclusionBall, parse_domain
from .harness import (ConvergenceTrace, RateFit, SolverConfig, eta_floor, fit_rate,
                      read_trace_csv, run_experiment, solve, write_trace_csv)
from .multiroot import MultiRootConfig, RootRecord, find_all
from .samplers import (AdaptiveConfig, AdaptiveState, UniformStrategy, adaptive_run,
                       initial_state, uniform_run)
