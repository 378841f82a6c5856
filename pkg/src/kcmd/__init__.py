"""Kernel-based significance tests for covariate subsets in nonparametric
regression with scalar, vector, functional or categorical data.

The main entry point is :func:`run_significance_test`, which tests
``E[Y | X, W] = E[Y | X]`` for a response ``Y``, conditioning covariates
``X`` (continuous and/or categorical) and covariates under test ``W``.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .bootstrap import BootstrapRun, boot_stat, mammen_sample, p_value_and_quantile, run_bootstrap
from .data import (
    Categorical,
    CategoricalColumn,
    Curve,
    Dataset,
    FunctionalColumn,
    ScalarColumn,
    VectorColumn,
    as_column,
    inner_product,
    response_gram,
    validate,
)
from .errors import (
    BandwidthError,
    ConfigError,
    DegenerateCovariateError,
    DegenerateDensityError,
    GcvDegenerateError,
    KcmdError,
    ShapeError,
    StageError,
    ValidationError,
)
from .kernels import (
    BandwidthSet,
    CharKernelParams,
    SmoothingKernel,
    characteristic_gram,
    epanechnikov,
    gaussian_c,
    poly4,
    product_kernel,
    smoothing_gram,
)
from .pipeline import (
    TestConfig,
    TestReport,
    backward_eliminate,
    independence_test,
    resolve_bandwidths,
    run_significance_test,
)
from .preprocessing import scale_covariates, sigma_c_quantile
from .simulation import DgpSpec, gen_gaussian_process, gen_upsilon, generate, monte_carlo
from .smoothing import (
    density_hat,
    density_hat_abs,
    gcv_score,
    modified_residuals,
    nw_fit,
    nw_fit_abs,
    select_bandwidth,
)
from .statistic import d_matrix, independence_gram, kcmd_known, u_stat, u_stat_bruteforce, v_stat
