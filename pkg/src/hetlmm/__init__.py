"""hetlmm: inference for doubly high-dimensional linear mixed models.

Library layers: dataset containers, low-rank proxy covariances, decorrelated
LASSO with cross-validation, de-biased coordinate inference, moment-based
variance components, graphical-model assembly, a mixed-effect VAR(1)
adapter, and a reproducible Monte Carlo engine.
"""

__version__ = "0.1.0"

from .dataset import (
    LmmDataset,
    SubjectBlock,
    SubjectPartition,
    center_columns,
    load_dataset,
    load_manifest,
    make_neighborhood_dataset,
    partition_subjects,
    save_dataset,
)
from .errors import DataError, NumericalError
from .graph import GraphConfig, GraphEstimate, compare_groups, downsample_series, fit_graph
from .inference import (
    InferenceRecord,
    ProjectionFit,
    debias,
    fit_projection,
    holm_adjust,
    oracle_variance,
)
from .lasso import (
    CvReport,
    LassoFit,
    LassoProblem,
    build_problem,
    cross_validate,
    fit_cv,
    lambda_max,
    solve_lasso,
    solve_path,
)
from .mevar import MevarConfig, MevarResult, build_row_problem, fit_mevar
from .proxy import ProxyFactor, apply_inv, apply_inv_sqrt, factor_proxy, quad_form_theta, trace_inv
from .simulate import MethodSpec, SimConfig, SimReport, mcc, run_monte_carlo
from .varcomp import (
    MomentSystem,
    VarCompEstimate,
    build_moment_system,
    estimate_sigma_e2,
    run_varcomp_pipeline,
    solve_psi,
)

__all__ = [
    "__version__",
    "DataError", "NumericalError",
    "SubjectBlock", "LmmDataset", "SubjectPartition",
    "load_dataset", "load_manifest", "save_dataset",
    "make_neighborhood_dataset", "center_columns", "partition_subjects",
    "ProxyFactor", "factor_proxy", "apply_inv", "apply_inv_sqrt", "trace_inv",
    "quad_form_theta",
    "LassoProblem", "LassoFit", "CvReport", "build_problem", "lambda_max",
    "solve_lasso", "solve_path", "cross_validate", "fit_cv",
    "ProjectionFit", "InferenceRecord", "fit_projection", "debias",
    "oracle_variance", "holm_adjust",
    "MomentSystem", "VarCompEstimate", "build_moment_system", "solve_psi",
    "estimate_sigma_e2", "run_varcomp_pipeline",
    "GraphConfig", "GraphEstimate", "fit_graph", "downsample_series", "compare_groups",
    "MevarConfig", "MevarResult", "build_row_problem", "fit_mevar",
    "MethodSpec", "SimConfig", "SimReport", "mcc", "run_monte_carlo",
]
