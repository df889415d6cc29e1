"""Data model for tournament predictions: rank structures, prediction
matrices, observed outcomes and rank weights.

Rank categories are ordered best first and indexed from 0 internally
(category 0 is the champion).  Prediction matrices are stored as R x T
numpy arrays with rows = rank categories and columns = teams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

SUM_TOL = 1e-9


class TRPSError(ValueError):
    """Base class for all input errors raised by this package."""


class AlignmentError(TRPSError):
    """Raised when a prediction and an outcome cannot be lined up."""

    def __init__(self, message: str, only_left: Iterable[str] = (), only_right: Iterable[str] = ()):
        self.only_left = sorted(only_left)
        self.only_right = sorted(only_right)
        detail = ""
        if self.only_left or self.only_right:
            detail = f" (only in prediction: {self.only_left}; only in outcome: {self.only_right})"
        super().__init__(message + detail)


@dataclass(frozen=True)
class Violation:
    """One violated constraint of a prediction matrix.

    ``kind`` is one of ``shape``, ``nan``, ``range``, ``column_sum`` or
    ``row_sum``; ``index`` is the offending row/column (0-based) and
    ``observed``/``expected`` carry the numbers involved.
    """

    kind: str
    index: int | tuple[int, int] | None
    observed: float
    expected: float | None = None

    def __str__(self) -> str:
        if self.kind == "column_sum":
            return f"column {self.index} sums to {self.observed!r}, expected 1"
        if self.kind == "row_sum":
            return f"row {self.index} sums to {self.observed!r}, expected {self.expected!r}"
        if self.kind == "range":
            return f"entry {self.index} = {self.observed!r} outside [0, 1]"
        if self.kind == "nan":
            return f"entry {self.index} is NaN"
        return f"shape mismatch: observed {self.observed!r}, expected {self.expected!r}"


class PredictionError(TRPSError):
    """A prediction matrix failed validation.  ``violations`` lists every
    problem found, not just the first."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:10])
        more = f" (+{len(self.violations) - 10} more)" if len(self.violations) > 10 else ""
        super().__init__(f"invalid prediction: {lines}{more}")

    @property
    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


@dataclass(frozen=True)
class RankStructure:
    """Ordered rank categories (best first) and how many teams each holds."""

    labels: tuple[str, ...]
    capacities: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        caps = tuple(int(c) for c in self.capacities)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "capacities", caps)
        if len(labels) != len(caps):
            raise TRPSError("labels and capacities differ in length")
        if len(set(labels)) != len(labels):
            raise TRPSError(f"duplicate rank labels in {labels}")
        if any(c < 1 for c in caps):
            raise TRPSError(f"capacities must be positive integers, got {caps}")
        if len(caps) < 2:
            raise TRPSError("a rank structure needs at least 2 categories")

    @classmethod
    def from_capacities(cls, capacities: Sequence[int], labels: Sequence[str] | None = None) -> RankStructure:
        """Build a structure, generating place-range labels ("1", "3-4", ...) if none given."""
        capacities = [int(c) for c in capacities]
        if labels is None:
            labels, start = [], 1
            for c in capacities:
                end = start + c - 1
                labels.append(str(start) if c == 1 else f"{start}-{end}")
                start = end + 1
        return cls(tuple(labels), tuple(capacities))

    @classmethod
    def full_ranking(cls, n_teams: int) -> RankStructure:
        return cls.from_capacities([1] * n_teams)

    @classmethod
    def knockout(cls, n_rounds: int) -> RankStructure:
        """Winner, runner-up, semifinal losers, ... first-round losers."""
        if n_rounds < 1:
            raise TRPSError("a knockout needs at least one round")
        return cls.from_capacities([1] + [2 ** i for i in range(n_rounds)])

    @property
    def n_categories(self) -> int:
        return len(self.capacities)

    @property
    def n_teams(self) -> int:
        return sum(self.capacities)

    def category_of_position(self, position: int) -> int:
        """Category holding overall finishing position ``position`` (0-based)."""
        bounds = np.cumsum(self.capacities)
        if not 0 <= position < bounds[-1]:
            raise TRPSError(f"position {position} outside 0..{bounds[-1] - 1}")
        return int(np.searchsorted(bounds, position, side="right"))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise TRPSError(f"unknown rank label {label!r}; known: {list(self.labels)}") from None

    def same_shape(self, other: RankStructure) -> bool:
        return self.capacities == other.capacities


def default_team_labels(n: int) -> tuple[str, ...]:
    return tuple(f"team{i + 1}" for i in range(n))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """A validated R x T matrix of rank probabilities.

    Construct through :func:`validate_prediction`; the constructor itself
    only checks shapes.
    """

    structure: RankStructure
    probs: np.ndarray
    team_labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        object.__setattr__(self, "team_labels", tuple(str(t) for t in self.team_labels))
        shape = (self.structure.n_categories, self.structure.n_teams)
        if self.probs.shape != shape:
            raise PredictionError([Violation("shape", None, self.probs.shape, shape)])
        if len(self.team_labels) != shape[1] or len(set(self.team_labels)) != shape[1]:
            raise TRPSError("team labels must be distinct and match the number of columns")

    @property
    def n_teams(self) -> int:
        return self.structure.n_teams

    def column_order(self, labels: Sequence[str]) -> np.ndarray:
        """Column indices that reorder this matrix to ``labels``."""
        pos = {t: i for i, t in enumerate(self.team_labels)}
        missing = set(labels) - set(pos)
        if missing or len(labels) != len(pos):
            raise AlignmentError("team sets differ", set(pos) - set(labels), missing)
        return np.array([pos[t] for t in labels])

    def reorder(self, labels: Sequence[str]) -> PredictionMatrix:
        idx = self.column_order(labels)
        return PredictionMatrix(self.structure, self.probs[:, idx], tuple(labels))


def validate_prediction(
    probs,
    structure: RankStructure,
    team_labels: Sequence[str] | None = None,
    tol: float = SUM_TOL,
    renormalize: bool = False,
) -> PredictionMatrix:
    """Check a raw matrix against ``structure`` and wrap it.

    Every violated constraint is collected and raised together as a
    :class:`PredictionError`.  Entries may stray outside [0, 1] by at most
    ``tol`` (rounding noise) and are clipped.  With ``renormalize=True`` every column with a
    positive sum is first rescaled to sum to 1, and the row sums are then
    checked at ``tol``.
    """
    a = np.array(probs, dtype=float)
    R, T = structure.n_categories, structure.n_teams
    if a.ndim != 2 or a.shape != (R, T):
        raise PredictionError([Violation("shape", None, a.shape, (R, T))])
    if team_labels is None:
        team_labels = default_team_labels(T)

    violations = []
    for r, t in zip(*np.nonzero(np.isnan(a))):
        violations.append(Violation("nan", (int(r), int(t)), float("nan")))
    bad = ~np.isnan(a) & ((a < -tol) | (a > 1 + tol))
    for r, t in zip(*np.nonzero(bad)):
        violations.append(Violation("range", (int(r), int(t)), float(a[r, t])))
    if violations:
        raise PredictionError(violations)
    # rounding noise within the tolerance is snapped back into [0, 1]
    a = np.clip(a, 0.0, 1.0)

    col = a.sum(axis=0)
    if renormalize:
        for t in np.nonzero(col <= 0)[0]:
            violations.append(Violation("column_sum", int(t), float(col[t]), 1.0))
        if violations:
            raise PredictionError(violations)
        a = a / col
        col = a.sum(axis=0)
    for t in np.nonzero(np.abs(col - 1.0) > tol)[0]:
        violations.append(Violation("column_sum", int(t), float(col[t]), 1.0))

    rows = a.sum(axis=1)
    caps = np.asarray(structure.capacities, dtype=float)
    for r in np.nonzero(np.abs(rows - caps) > tol)[0]:
        violations.append(Violation("row_sum", int(r), float(rows[r]), float(caps[r])))
    if violations:
        raise PredictionError(violations)
    return PredictionMatrix(structure, a, tuple(team_labels))


@dataclass(frozen=True, eq=False)
class Outcome:
    """Observed final ranking: every team mapped to a 0-based category."""

    structure: RankStructure
    assignment: Mapping[str, int]

    def __post_init__(self):
        assignment = {str(k): int(v) for k, v in dict(self.assignment).items()}
        object.__setattr__(self, "assignment", assignment)
        s = self.structure
        if len(assignment) != s.n_teams:
            raise TRPSError(f"outcome lists {len(assignment)} teams, structure holds {s.n_teams}")
        counts = np.zeros(s.n_categories, dtype=int)
        for team, cat in assignment.items():
            if not 0 <= cat < s.n_categories:
                raise TRPSError(f"team {team!r} assigned to unknown category {cat}")
            counts[cat] += 1
        if tuple(counts) != s.capacities:
            raise TRPSError(f"category counts {tuple(counts)} do not match capacities {s.capacities}")

    @classmethod
    def from_categories(cls, structure: RankStructure, categories: Sequence[int],
                        team_labels: Sequence[str] | None = None) -> Outcome:
        if team_labels is None:
            team_labels = default_team_labels(len(categories))
        return cls(structure, dict(zip(team_labels, categories, strict=True)))

    @property
    def team_labels(self) -> tuple[str, ...]:
        return tuple(self.assignment)

    def categories(self, team_labels: Sequence[str]) -> np.ndarray:
        """Category index of each team in ``team_labels`` order."""
        missing = set(team_labels) - set(self.assignment)
        extra = set(self.assignment) - set(team_labels)
        if missing or extra:
            raise AlignmentError("team sets differ", missing, extra)
        return np.array([self.assignment[t] for t in team_labels], dtype=int)

    def indicator(self, team_labels: Sequence[str]) -> np.ndarray:
        """R x T 0/1 matrix with a single 1 per column at the observed category."""
        cats = self.categories(team_labels)
        out = np.zeros((self.structure.n_categories, len(cats)))
        out[cats, np.arange(len(cats))] = 1.0
        return out


@dataclass(frozen=True)
class RankWeights:
    """Weights for the first R-1 categories, summing to R-1."""

    values: tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "values", v)
        if not v:
            raise TRPSError("rank weights must not be empty")
        if any(not np.isfinite(x) or x < 0 for x in v):
            raise TRPSError(f"rank weights must be finite and non-negative, got {v}")
        if abs(sum(v) - len(v)) > SUM_TOL:
            raise TRPSError(f"rank weights must sum to {len(v)}, got {sum(v)!r}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class CategoryLogLossWeights:
    """One non-negative log-loss weight per category, including the last."""

    values: tuple[float, ...] = field(default=())

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "values", v)
        if any(not np.isfinite(x) or x < 0 for x in v):
            raise TRPSError(f"log-loss weights must be finite and non-negative, got {v}")

    @classmethod
    def ones(cls, n: int) -> CategoryLogLossWeights:
        return cls((1.0,) * n)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)
