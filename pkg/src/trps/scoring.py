"""Scoring rules for full-tournament predictions.

All functions are pure and operate on immutable inputs.  Teams are always
aligned by label: an outcome is looked up in the prediction's column order.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .structures import (
    AlignmentError,
    CategoryLogLossWeights,
    Outcome,
    PredictionMatrix,
    RankStructure,
    RankWeights,
    TRPSError,
    validate_prediction,
)

DEFAULT_FLOOR = 1e-10

# 2018 World Cup contest log-loss weights for the 7 collapsed categories.
FIFA2018_LOGLOSS_WEIGHTS = (1.0, 1.0, 0.5, 0.5, 0.25, 0.125, 0.0625)
FIFA2018_CAPACITIES = (1, 1, 1, 1, 4, 8, 16)


def cumulative(X: PredictionMatrix) -> np.ndarray:
    """Probability that each team finishes in category r or better."""
    c = np.cumsum(X.probs, axis=0)
    c.setflags(write=False)
    return c


def outcome_cumulative(O: Outcome, team_labels: Sequence[str] | None = None) -> np.ndarray:
    """0/1 step columns that switch on at each team's observed category."""
    labels = O.team_labels if team_labels is None else team_labels
    c = np.cumsum(O.indicator(labels), axis=0)
    c.setflags(write=False)
    return c


def _check_aligned(O: Outcome, X: PredictionMatrix) -> None:
    if not O.structure.same_shape(X.structure):
        raise AlignmentError(
            f"rank structures differ: outcome {O.structure.capacities} vs prediction {X.structure.capacities}"
        )


def _mean_cumulative_sq(obs_cum: np.ndarray, pred_cum: np.ndarray, weights=None) -> float:
    # Last row is 1 for both and drops out.
    d2 = (obs_cum[:-1] - pred_cum[:-1]) ** 2
    if weights is not None:
        d2 = d2 * np.asarray(weights)[:, None]
    R = obs_cum.shape[0]
    return float(d2.sum() / ((R - 1) * obs_cum.shape[1]))


def trps(O: Outcome, X: PredictionMatrix) -> float:
    """Tournament rank probability score; 0 is a perfect prediction."""
    _check_aligned(O, X)
    return _mean_cumulative_sq(outcome_cumulative(O, X.team_labels), cumulative(X))


def wtrps(O: Outcome, X: PredictionMatrix, w) -> float:
    """Weighted TRPS.

    ``w`` is either a :class:`RankWeights` or a sequence of R-1 relative
    weights, which is normalized to sum to R-1 first.
    """
    _check_aligned(O, X)
    R = X.structure.n_categories
    if not isinstance(w, RankWeights):
        w = normalize_relative_weights(w)
    if len(w.values) != R - 1:
        raise TRPSError(f"expected {R - 1} rank weights, got {len(w.values)}")
    return _mean_cumulative_sq(outcome_cumulative(O, X.team_labels), cumulative(X), w.as_array())


def normalize_relative_weights(relative: Sequence[float]) -> RankWeights:
    rel = np.asarray(relative, dtype=float)
    if rel.ndim != 1 or rel.size == 0:
        raise TRPSError("relative weights must be a non-empty vector")
    if np.any(rel < 0) or not np.all(np.isfinite(rel)):
        raise TRPSError(f"relative weights must be finite and non-negative, got {rel.tolist()}")
    total = rel.sum()
    if total <= 0:
        raise TRPSError("relative weights are all zero")
    return RankWeights(tuple(rel * (rel.size / total)))


def doubling_relative_weights(structure: RankStructure) -> list[float]:
    """Worst category weighs 1 and each better category doubles it.

    Only the R-1 leading weights are returned since the last category never
    enters the score.
    """
    R = structure.n_categories
    return [float(2 ** (R - 1 - r)) for r in range(R - 1)]


def inverse_capacity_relative_weights(structure: RankStructure) -> list[float]:
    return [1.0 / c for c in structure.capacities[:-1]]


def log_loss(
    O: Outcome,
    X: PredictionMatrix,
    w: CategoryLogLossWeights | Sequence[float] | None = None,
    floor: float = DEFAULT_FLOOR,
    return_clamped: bool = False,
):
    """Weighted natural-log loss of the probability put on each observed category.

    Probabilities below ``floor`` are raised to ``floor`` before the log.
    With ``return_clamped=True`` returns ``(score, n_clamped)`` where
    ``n_clamped`` counts the observed entries that were clamped.
    """
    _check_aligned(O, X)
    if not floor > 0:
        raise TRPSError("floor must be positive")
    R = X.structure.n_categories
    if w is None:
        w = CategoryLogLossWeights.ones(R)
    elif not isinstance(w, CategoryLogLossWeights):
        w = CategoryLogLossWeights(tuple(w))
    if len(w.values) != R:
        raise TRPSError(f"expected {R} log-loss weights, got {len(w.values)}")

    cats = O.categories(X.team_labels)
    p = X.probs[cats, np.arange(X.n_teams)]
    clamped = int(np.count_nonzero(p < floor))
    score = float(-(w.as_array()[cats] * np.log(np.maximum(p, floor))).sum() / X.n_teams)
    return (score, clamped) if return_clamped else score


def rps_single(x: Sequence[float], observed: int) -> float:
    """Ranked probability score of one forecast over ordered outcomes.

    ``observed`` is the 0-based index of the outcome that happened.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise TRPSError("need a probability vector over at least 2 outcomes")
    if not 0 <= observed < x.size:
        raise TRPSError(f"observed outcome {observed} outside 0..{x.size - 1}")
    o = np.zeros_like(x)
    o[observed] = 1.0
    return _mean_cumulative_sq(np.cumsum(o)[:, None], np.cumsum(x)[:, None])


def flat_prediction(structure: RankStructure, team_labels: Sequence[str] | None = None) -> PredictionMatrix:
    col = np.asarray(structure.capacities, dtype=float) / structure.n_teams
    probs = np.repeat(col[:, None], structure.n_teams, axis=1)
    return validate_prediction(probs, structure, team_labels)


def flat_trps(structure: RankStructure) -> float:
    """TRPS of the flat prediction; identical for every outcome."""
    caps = np.asarray(structure.capacities, dtype=float)
    T, R = caps.sum(), caps.size
    pred = np.cumsum(caps)[:-1] / T
    # a team in category k has observed cumulative 1 from row k on
    steps = np.tril(np.ones((R - 1, R)))  # steps[r, k] = 1 if r >= k
    per_cat = ((steps - pred[:, None]) ** 2).sum(axis=0)
    return float((caps * per_cat).sum() / (T * (R - 1)))


def collapse(X: PredictionMatrix, coarse: RankStructure, mapping: Sequence[int]) -> PredictionMatrix:
    """Merge rows of ``X`` into the categories of ``coarse``.

    ``mapping[i]`` is the coarse category (0-based) that fine category ``i``
    falls into; it must be non-decreasing, hit every coarse category, and
    the merged fine capacities must equal the coarse ones.
    """
    mapping = np.asarray(mapping, dtype=int)
    R_fine = X.structure.n_categories
    if mapping.shape != (R_fine,):
        raise TRPSError(f"mapping needs one entry per fine category ({R_fine}), got {mapping.size}")
    if np.any(np.diff(mapping) < 0):
        raise TRPSError("mapping must be monotone (best categories first)")
    if mapping[0] != 0 or np.any(np.diff(mapping) > 1) or mapping[-1] != coarse.n_categories - 1:
        raise TRPSError("mapping must cover every coarse category")
    merged = np.bincount(mapping, weights=np.asarray(X.structure.capacities, dtype=float))
    if tuple(int(c) for c in merged) != coarse.capacities:
        raise TRPSError(f"merged capacities {tuple(merged.astype(int))} differ from {coarse.capacities}")

    probs = np.zeros((coarse.n_categories, X.n_teams))
    np.add.at(probs, mapping, X.probs)
    return PredictionMatrix(coarse, np.clip(probs, 0.0, 1.0), X.team_labels)


def mapping_by_capacity(fine: RankStructure, coarse: RankStructure) -> list[int]:
    """Monotone fine->coarse mapping implied by cumulative capacities."""
    fine_end = np.cumsum(fine.capacities)
    coarse_end = np.cumsum(coarse.capacities)
    if fine_end[-1] != coarse_end[-1]:
        raise TRPSError("structures hold a different number of teams")
    mapping = np.searchsorted(coarse_end, fine_end, side="left")
    return mapping.tolist()
