"""Joint time-vertex ARMA modelling of graph time series with missing data."""

from .errors import (
    DegenerateModelError,
    DivergenceError,
    NumericalError,
    PoleError,
    SingularCovarianceError,
    StageError,
)
from .estimation import estimate_jpsd, initial_jpsd, lag_covariances
from .fit import FitConfig, FitResult, SolverSettings, WeightSpec, fit_arma
from .graph import Graph, build_knn_graph, eigendecompose, graph_spectrum, knn_graph_from_distances, laplacian
from .imputation import covariance_from_jpsd, jwss_baseline, mmse_impute, nme
from .pipeline import PipelineConfig, SyntheticProcess, make_basis, run_pipeline
from .simulate import MaskedRealizations, generate_mask, simulate_arma, simulate_spectral
from .spectral import ArmaParams, JointBasis, Jpsd, ModelOrders, dft_basis, jpsd_of

__version__ = "0.1.0"
