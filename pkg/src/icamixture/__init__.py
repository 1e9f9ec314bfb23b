"""Model-based clustering with nonparametric ICA mixture models.

Each mixture component is an invertible linear transform of a latent
vector with independent coordinates, and every coordinate density is a
weighted kernel density estimate rather than a parametric family. Fitting
interleaves posterior responsibilities, weighted FastICA per component,
and weighted KDE updates with an adaptive bandwidth.
"""

from .data import Dataset, SynthSpec, fixture_path, load_csv, pca_project, standardize, synth
from .evaluate import best_permutation_error, kmeans, weighted_ls
from .exceptions import (
    DataError,
    DegenerateCovarianceError,
    DyingComponentError,
    EmptyComponentError,
    IcamixtureError,
    InvalidInputError,
    NumericalError,
    SingularMatrixError,
)
from .ica import Nonlinearity, amari_distance
from .kde import WeightedKde1D, bandwidth_update
from .mixture import (
    Component,
    FitConfig,
    FitReport,
    MixtureModel,
    fit,
    log_likelihood,
    posterior,
    predict,
)
from .model_io import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "Component",
    "DataError",
    "Dataset",
    "DegenerateCovarianceError",
    "DyingComponentError",
    "EmptyComponentError",
    "FitConfig",
    "FitReport",
    "IcamixtureError",
    "InvalidInputError",
    "MixtureModel",
    "Nonlinearity",
    "NumericalError",
    "SingularMatrixError",
    "SynthSpec",
    "WeightedKde1D",
    "amari_distance",
    "bandwidth_update",
    "best_permutation_error",
    "fit",
    "fixture_path",
    "kmeans",
    "load_csv",
    "load_model",
    "log_likelihood",
    "pca_project",
    "posterior",
    "predict",
    "save_model",
    "standardize",
    "synth",
    "weighted_ls",
]
