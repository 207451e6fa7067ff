"""rareflow: spectral calculus, controlled skeleton dynamics, small-noise
simulation, and minimum-action optimization on finite weighted point sets."""

__version__ = "0.1.0"

from .diffusion import NoiseCoefficient, validate_hypotheses
from .generator import SpectralGenerator, SubMarkovReport
from .ldp import (
    ActionResult,
    OracleResult,
    RateProblem,
    WeakConvergenceReport,
    linear_oracle,
    minimize_action,
    rate_evaluate,
    weak_convergence_test,
)
from .measure import DualField, Field, MeasureGrid, inner_l2, norm_l2
from .nonlinearity import (
    Nonlinearity,
    check_monotone_inequality,
    validate_drift_hypothesis,
)
from .skeleton import (
    Control,
    PathSolution,
    RateStudyReport,
    lambda_rate_study,
    nu_rate_study,
    solve_regularized,
    solve_skeleton,
)
from .spde import (
    McConditionReport,
    SdeRun,
    WienerConfig,
    exact_terminal_second_moment,
    mc_condition_a,
    simulate,
)
from .triple import TripleContext

__all__ = [
    "__version__",
    "MeasureGrid",
    "Field",
    "DualField",
    "inner_l2",
    "norm_l2",
    "SpectralGenerator",
    "SubMarkovReport",
    "TripleContext",
    "Nonlinearity",
    "check_monotone_inequality",
    "validate_drift_hypothesis",
    "NoiseCoefficient",
    "validate_hypotheses",
    "Control",
    "PathSolution",
    "RateStudyReport",
    "solve_skeleton",
    "solve_regularized",
    "lambda_rate_study",
    "nu_rate_study",
    "WienerConfig",
    "SdeRun",
    "simulate",
    "mc_condition_a",
    "McConditionReport",
    "exact_terminal_second_moment",
    "RateProblem",
    "rate_evaluate",
    "minimize_action",
    "linear_oracle",
    "ActionResult",
    "OracleResult",
    "weak_convergence_test",
    "WeakConvergenceReport",
]
