"""Tournament rank probability scores for full-tournament predictions."""

from .ensemble import EnsembleWeights, TournamentHistory, combine, fit_weights, grid_oracle
from .scoring import (
    collapse,
    cumulative,
    doubling_relative_weights,
    flat_prediction,
    inverse_capacity_relative_weights,
    log_loss,
    normalize_relative_weights,
    outcome_cumulative,
    rps_single,
    trps,
    wtrps,
)
from .structures import (
    AlignmentError,
    CategoryLogLossWeights,
    Outcome,
    PredictionError,
    PredictionMatrix,
    RankStructure,
    RankWeights,
    TRPSError,
    validate_prediction,
)

__version__ = "0.1.0"
