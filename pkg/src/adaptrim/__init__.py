"""Outlier rejection by adaptive trimming, with a-posteriori sub-optimality bounds."""
from .adapt import AdaptConfig, AdaptResult, Termination, adapt_run, tie_break_largest_g
from .baselines import (
    OracleConfig,
    RansacConfig,
    brute_force_mts,
    brute_force_rstar_k,
    greedy_trim,
    greedy_trim_auto,
    ransac_run,
)
from .bounds import UNBOUNDED, BoundReport, bound_report, chi_bound
from .core import MtsProblem, OutlierFreeBound, OutlierSet, residual_vector, total_residual
from .datagen import (
    LinearScenario,
    RegistrationScenario,
    chi2_bound,
    chi2_quantile,
    downsample,
    gen_linear,
    gen_registration,
    load_ply,
)
from .estimators import AdaptiveTrimmingRegistration, AdaptiveTrimmingRegressor
from .exceptions import *  # noqa: F401,F403
from .metrics import TrialRecord, classification_rates, rotation_error, translation_error
from .solvers import (
    LinearProblem,
    RegistrationProblem,
    RigidTransform,
    horn_fit,
    linear_fit,
    registration_residual,
)

__version__ = "0.1.0"
