"""Numerical laboratory for the generalization error of the Gibbs algorithm."""

from gibbslab._backend import BACKEND
from gibbslab.core import (
    DataModel,
    EstimateWithError,
    FiniteData,
    FinitePrior,
    GaussianData,
    GaussianPrior,
    GibbsSpec,
    LossFunction,
    MixtureData,
    SequenceData,
    empirical_risk,
    gibbs_log_density,
    log_partition,
    population_risk,
    squared_loss,
    substream,
    table_loss,
    zero_one_loss,
)
from gibbslab.gaussian_mean import GaussianMeanProblem, InfoTriple

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DataModel",
    "EstimateWithError",
    "FiniteData",
    "FinitePrior",
    "GaussianData",
    "GaussianMeanProblem",
    "GaussianPrior",
    "GibbsSpec",
    "InfoTriple",
    "LossFunction",
    "MixtureData",
    "SequenceData",
    "empirical_risk",
    "gibbs_log_density",
    "log_partition",
    "population_risk",
    "squared_loss",
    "substream",
    "table_loss",
    "zero_one_loss",
]
