"""Coxian phase-type models: simulation, fitting and equivalent representations."""

from .enumerator import (
    PermutationCandidate,
    RepresentationSet,
    candidate_superdiag,
    diag_permutations,
    enumerate_representations,
    moment_residual,
)
from .equivalence import (
    DimensionMismatchError,
    EquivalenceReport,
    TransformMatrix,
    build_transform,
    check_equivalent,
    mu1,
)
from .fitter import FitOptions, FitResult, InvalidDataError, fit_mle, loglik, select_order
from .model import (
    CoxianError,
    CoxianParams,
    Generator,
    InvalidGeneratorError,
    InvalidParamsError,
    OrderTooLargeError,
    SummaryStats,
    absorbing_vector,
    build_generator,
    density,
    exit_probabilities,
    laplace,
    moment,
    moments,
    params_from_generator,
    summary,
    survival,
)
from .sampler import PathRecord, sample_dataset, sample_path, stream

__version__ = "0.1.0"
