"""Joint Bayesian estimation of semantic classes and physical properties.

The package fuses two measurement modalities over a spatial belief map:
categorical label images update per-voxel Dirichlet beliefs in closed
form, and scalar property measurements (friction ratios, opening forces)
update a Dirichlet Normal-Inverse-Gamma product prior over the
class-conditional property mixture through an exact branch posterior and
a moment-matched projection back onto the prior family.
"""

from .conjugate import (
    CategoricalDist,
    DirichletParams,
    GaussianMixture,
    GaussianParams,
    NIGParams,
    ProductPrior,
    categorical_pmf,
    dirichlet_pdf,
    dirichlet_update,
    expected_mixture,
    mixture_pdf,
    nig_pdf,
    predictive_class,
    product_prior_pdf,
)
from .diagnostics import Diagnostics
from .frames import CameraModel, LabeledFrame, Pose, SemanticPointCloud, project_labels
from .mapping import CellState, MeasurementUpdate, RegionMask, VoxelGrid
from .moments import (
    ExactPosterior,
    PosteriorBranch,
    SufficientMoments,
    analytic_moments,
    branch_responsibilities,
    exact_posterior,
    match_moments,
    prior_moments,
    sequential_update,
)
from .property_model import (
    ForceSample,
    LowPassState,
    MeasurementEvent,
    PropertyTable,
    build_likelihood,
    friction_from_forces,
    init_product_prior,
    lowpass,
    nearest_class,
)

__version__ = "0.1.0"

__all__ = [
    "CategoricalDist",
    "DirichletParams",
    "GaussianMixture",
    "GaussianParams",
    "NIGParams",
    "ProductPrior",
    "categorical_pmf",
    "dirichlet_pdf",
    "dirichlet_update",
    "expected_mixture",
    "mixture_pdf",
    "nig_pdf",
    "predictive_class",
    "product_prior_pdf",
    "Diagnostics",
    "CameraModel",
    "LabeledFrame",
    "Pose",
    "SemanticPointCloud",
    "project_labels",
    "CellState",
    "MeasurementUpdate",
    "RegionMask",
    "VoxelGrid",
    "ExactPosterior",
    "PosteriorBranch",
    "SufficientMoments",
    "analytic_moments",
    "branch_responsibilities",
    "exact_posterior",
    "match_moments",
    "prior_moments",
    "sequential_update",
    "ForceSample",
    "LowPassState",
    "MeasurementEvent",
    "PropertyTable",
    "build_likelihood",
    "friction_from_forces",
    "init_product_prior",
    "lowpass",
    "nearest_class",
    "__version__",
]
