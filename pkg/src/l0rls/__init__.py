"""Zero-attracting (l0-regularized) recursive least squares.

Three layers: exact filter recursions (:mod:`l0rls.filters`),
closed-form steady-state predictions (:mod:`l0rls.theory`), and a
seeded Monte Carlo harness that verifies one against the other
(:mod:`l0rls.simulate`).  The ``l0rls`` command line front end lives in
:mod:`l0rls.cli`.
"""

from .filters import (FilterParams, FilterState, NumericalBreakdownError,
                      StepOutput, g_scalar, g_vector, init_state, l0_norm_approx,
                      l0_rls_cost, l0_rls_step, rls_step)
from .simulate import (ALGORITHMS, DEFAULT_SEED, ClassMsd, ComparisonReport,
                       ComparisonRow, EnsembleStats, ExperimentConfig, SystemSpec,
                       Tolerances, TrueSystem, compare, gen_signals, gen_system,
                       run_ensemble, run_single, tap_input_matrix)
from .theory import (InstabilityError, PriceMoments, SignalModel, TapPartition,
                     TheoryPrediction, beta_prime, classify_taps, is_stable,
                     lambda_prime, mean_deviation_limit, msd_large, msd_small,
                     msd_total, msd_zero, one_minus_lambda_prime_sq, price_moments,
                     zero_tap_mean_bound)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "DEFAULT_SEED",
    "ClassMsd",
    "ComparisonReport",
    "ComparisonRow",
    "EnsembleStats",
    "ExperimentConfig",
    "FilterParams",
    "FilterState",
    "InstabilityError",
    "NumericalBreakdownError",
    "PriceMoments",
    "SignalModel",
    "StepOutput",
    "SystemSpec",
    "TapPartition",
    "TheoryPrediction",
    "Tolerances",
    "TrueSystem",
    "beta_prime",
    "classify_taps",
    "compare",
    "g_scalar",
    "g_vector",
    "gen_signals",
    "gen_system",
    "init_state",
    "is_stable",
    "l0_norm_approx",
    "l0_rls_cost",
    "l0_rls_step",
    "lambda_prime",
    "mean_deviation_limit",
    "msd_large",
    "msd_small",
    "msd_total",
    "msd_zero",
    "one_minus_lambda_prime_sq",
    "price_moments",
    "rls_step",
    "run_ensemble",
    "run_single",
    "tap_input_matrix",
    "zero_tap_mean_bound",
]
