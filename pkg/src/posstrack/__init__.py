"""Possibilistic multi-object smoothing with annealed MCMC over data associations."""

from .baseline import run_baseline
from .consistency import ConsistencyIndex, build_index
from .errors import DataError, DegenerateBeliefError, InvalidAssociationError, UsageError
from .filtering import BirthPrior, LinearGaussianModel, ParticleBelief, predict, update
from .hisp import evaluate_filter, run_filter
from .mcmc import AnnealSchedule, ChainConfig, ProposalConfig, propose, run_chain
from .model import MultiObjectParams, Path, PathScorer, Scenario, Track
from .possibility import GaussianPossibility, max_entropy_pmf, max_entropy_weights, probability_bounds
from .simulation import SimParams, inference_params, preset, simulate

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "BirthPrior",
    "ChainConfig",
    "ConsistencyIndex",
    "DataError",
    "DegenerateBeliefError",
    "GaussianPossibility",
    "InvalidAssociationError",
    "LinearGaussianModel",
    "MultiObjectParams",
    "ParticleBelief",
    "Path",
    "PathScorer",
    "ProposalConfig",
    "Scenario",
    "SimParams",
    "Track",
    "UsageError",
    "build_index",
    "evaluate_filter",
    "inference_params",
    "max_entropy_pmf",
    "max_entropy_weights",
    "predict",
    "preset",
    "probability_bounds",
    "propose",
    "run_baseline",
    "run_chain",
    "run_filter",
    "simulate",
    "update",
]
