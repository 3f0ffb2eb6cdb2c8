"""Reflective asymmetric spatial and space-time Gaussian process covariances."""

from .data import Dataset, PointSet
from .errors import AsymcovError, DomainError, NumericalError, ValidationError
from .fitting import FitOptions, FitResult, aic, fit_mle, lrt_symmetry
from .likelihood import (
    assemble_cov_dense,
    assemble_cov_kronecker,
    build_neighbor_plan,
    loglik_dense,
    loglik_vecchia,
)
from .predict import PredictionRequest, conditional_sim, crps_gaussian, krige, rolling_prediction
from .spacetime import SpaceTimeSpec, separability_measure, st_cov
from .spatial import (
    CrossCovParams,
    SigmaMatrix,
    SpatialClass,
    assemble_multivariate_cov,
    cc_im,
    cc_im_fft,
    cc_re,
    validate_sigma,
)
from .spectral import (
    SimRequest,
    SpectralProposal,
    halfspectral_gneiting,
    hilbert_oracle_1d,
    simulate_unconditional,
)

__version__ = "0.1.0"
