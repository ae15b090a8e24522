"""Sequential testing of log-concavity with a batched universal likelihood
ratio e-process."""

from .density import GaussianMixture1D, QuadratureGrid, hellinger, mixture_logpdf, sample_mixture
from .eprocess import (
    BatchSchedule,
    EProcessState,
    TestOutcome,
    eprocess_step,
    regret_diagnostic,
    rejection_time,
    run_test,
    sigma_diagnostic,
)
from .estimators import EstimatorSpec, Variant, gmm2_fit, kde_fit, oracle_density
from .lcmle import (
    DegenerateSampleError,
    MleFitReport,
    PiecewiseLogLinearDensity,
    WeightedSortedSample,
    evaluate_logpdf,
    fit_lcmle,
    log_integral_exp_segment,
    loglik,
)
from .simlab import ExperimentConfig, batching_study, compare_estimators, run_experiment

__version__ = "0.1.0"
