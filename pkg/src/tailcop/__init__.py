"""Bivariate tail copula estimation, multiplier bootstrap and tests.

The package estimates the lower (or upper) tail copula of a bivariate
sample nonparametrically, approximates the law of the estimation error
by multiplier and resampling bootstraps, and builds on those ensembles
a two-sample equality test, minimum-distance parameter fits with
confidence intervals, and a goodness-of-fit test.  Hot counting kernels
run under numba when available; set ``TAILCOP_KERNELS=numpy`` to force
the pure numpy fallback.
"""

__version__ = "0.1.0"

from . import _kernels
from .bootstrap import (
    KINDS,
    TWO_POINT,
    BootstrapEnsemble,
    MultiplierScheme,
    build_ensemble,
    default_point_set,
    process_beta,
    process_dm,
    process_known_margins,
    process_pdm,
    process_resample,
)
from .estimators import (
    BivariateSample,
    DataError,
    EmpiricalTailCopula,
    TiesError,
    generalized_inverse,
    known_margins_tail_copula,
    partial_derivatives,
    rank_thresholds,
    read_sample,
)
from .harness import (
    CAMPAIGNS,
    CampaignConfig,
    CampaignResult,
    ConfigError,
    load_config,
    run_campaign,
)
from .inference import (
    AngularGrid,
    MDEstimate,
    TestReport,
    analytic_md_variance,
    angular_distance,
    empirical_quantile,
    gof_test,
    md_bootstrap,
    md_confidence_interval,
    md_estimate,
    true_cov_Ghat,
    true_cov_Gtilde,
    true_cov_matrix,
    two_sample_test,
)
from .models import (
    FAMILIES,
    THETA_BOUNDS,
    AsymNegLogistic,
    Clayton,
    ConvexClayton,
    Mixed,
    TailCopulaModel,
    make_model,
    model_from_config,
    solve_theta,
)
from .rng import as_generator, spawn_streams, stream

__all__ = [
    "__version__",
    "_kernels",
    # models
    "FAMILIES",
    "THETA_BOUNDS",
    "TailCopulaModel",
    "Clayton",
    "ConvexClayton",
    "AsymNegLogistic",
    "Mixed",
    "make_model",
    "model_from_config",
    "solve_theta",
    # estimators
    "BivariateSample",
    "EmpiricalTailCopula",
    "DataError",
    "TiesError",
    "read_sample",
    "rank_thresholds",
    "partial_derivatives",
    "generalized_inverse",
    "known_margins_tail_copula",
    # bootstrap
    "KINDS",
    "TWO_POINT",
    "MultiplierScheme",
    "BootstrapEnsemble",
    "build_ensemble",
    "default_point_set",
    "process_beta",
    "process_pdm",
    "process_dm",
    "process_resample",
    "process_known_margins",
    # inference
    "AngularGrid",
    "angular_distance",
    "empirical_quantile",
    "TestReport",
    "two_sample_test",
    "MDEstimate",
    "md_estimate",
    "md_bootstrap",
    "md_confidence_interval",
    "analytic_md_variance",
    "gof_test",
    "true_cov_Gtilde",
    "true_cov_Ghat",
    "true_cov_matrix",
    # harness
    "CAMPAIGNS",
    "CampaignConfig",
    "CampaignResult",
    "ConfigError",
    "load_config",
    "run_campaign",
    # rng
    "stream",
    "as_generator",
    "spawn_streams",
]
