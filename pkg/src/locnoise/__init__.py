"""Hypothesis tests for class-conditional versus uniform label noise."""
from ._kernels import BACKEND
from .anchors import AnchorSet, bayes_posterior, bayes_posteriors, draw_anchors, find_strict_anchor
from .asymptotics import CovarianceReport, VarianceReport, cross_covariance, sandwich_variance
from .bootstrap import BootstrapReport, bootstrap_nonparametric, bootstrap_parametric
from .dataset import (
    GaussianMixtureSpec,
    LabeledDataset,
    NoiseSpec,
    Standardizer,
    asymmetric_xor,
    gen_mixture,
    inject_noise,
    load_csv,
    save_csv,
    symmetric_xor,
)
from .errors import (
    AnchorFitError,
    AnchorSearchError,
    InsufficientDataError,
    LocNoiseError,
    NonConvergenceError,
    ParseError,
    PooledVarianceError,
    SingularMatrixError,
    ValidationError,
)
from .hypothesis import (
    TestReport,
    pooled_variance_relaxed,
    pooled_variance_strict,
    test_multi,
    test_single_strict,
    two_sided_p,
)
from .kernel_basis import BasisSpec, KernelSpec
from .local_mle import FitOptions, LocalFit, fit_local, loocv_score, select_bandwidth
from .parametric import GlobalFit, fit_global_logistic, test_parametric

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AnchorSet",
    "bayes_posterior",
    "bayes_posteriors",
    "draw_anchors",
    "find_strict_anchor",
    "CovarianceReport",
    "VarianceReport",
    "cross_covariance",
    "sandwich_variance",
    "BootstrapReport",
    "bootstrap_nonparametric",
    "bootstrap_parametric",
    "GaussianMixtureSpec",
    "LabeledDataset",
    "NoiseSpec",
    "Standardizer",
    "asymmetric_xor",
    "gen_mixture",
    "inject_noise",
    "load_csv",
    "save_csv",
    "symmetric_xor",
    "AnchorFitError",
    "AnchorSearchError",
    "InsufficientDataError",
    "LocNoiseError",
    "NonConvergenceError",
    "ParseError",
    "PooledVarianceError",
    "SingularMatrixError",
    "ValidationError",
    "TestReport",
    "pooled_variance_relaxed",
    "pooled_variance_strict",
    "test_multi",
    "test_single_strict",
    "two_sided_p",
    "BasisSpec",
    "KernelSpec",
    "FitOptions",
    "LocalFit",
    "fit_local",
    "loocv_score",
    "select_bandwidth",
    "GlobalFit",
    "fit_global_logistic",
    "test_parametric",
]
