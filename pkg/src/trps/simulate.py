"""Bradley-Terry Monte Carlo for knockout and round-robin tournaments.

Every replicate of an experiment draws from its own RNG substream derived
from ``(seed, replicate index)``, so results do not depend on how
replicates are spread across worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .scoring import flat_prediction, flat_trps, trps
from .structures import (
    Outcome,
    PredictionMatrix,
    RankStructure,
    TRPSError,
    default_team_labels,
)

KNOCKOUT = "knockout"
SINGLE_RR = "single_round_robin"
DOUBLE_RR = "double_round_robin"
FORMATS = (KNOCKOUT, SINGLE_RR, DOUBLE_RR)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for substream ``stream`` of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


@dataclass(frozen=True)
class TournamentFormat:
    kind: str
    n_teams: int

    def __post_init__(self):
        if self.kind not in FORMATS:
            raise TRPSError(f"unknown tournament format {self.kind!r}; choose from {FORMATS}")
        if self.n_teams < 2:
            raise TRPSError("a tournament needs at least 2 teams")
        if self.kind == KNOCKOUT and self.n_teams & (self.n_teams - 1):
            raise TRPSError(f"knockout needs a power-of-two team count, got {self.n_teams}")

    @property
    def rounds(self) -> int:
        """Knockout rounds N, or round-robin legs (1 or 2)."""
        if self.kind == KNOCKOUT:
            return self.n_teams.bit_length() - 1
        return 1 if self.kind == SINGLE_RR else 2

    @property
    def structure(self) -> RankStructure:
        if self.kind == KNOCKOUT:
            return RankStructure.knockout(self.rounds)
        return RankStructure.full_ranking(self.n_teams)


@dataclass(frozen=True)
class SimulationConfig:
    format: TournamentFormat
    sigma: float
    replicates: int = 1000
    inner_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise TRPSError("sigma must be positive")
        if self.replicates < 1 or self.inner_samples < 1:
            raise TRPSError("replicates and inner_samples must be >= 1")


@dataclass(frozen=True)
class ExperimentRow:
    kind: str
    n_teams: int
    sigma: float
    tsp_mean: float
    tsp_sd: float
    flat: float
    cp_mean: float
    cp_sd: float
    p_tsp_lt_fp: float
    p_tsp_lt_cp: float
    replicates: int
    inner_samples: int
    seed: int

    def as_dict(self) -> dict:
        return asdict(self)


def bt_win_prob(beta_a: float, beta_b: float) -> float:
    """Bradley-Terry probability that A beats B."""
    if not (beta_a > 0 and beta_b > 0):
        raise TRPSError(f"strengths must be positive, got {beta_a}, {beta_b}")
    return beta_a / (beta_a + beta_b)


def sample_strengths(n_teams: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Log-normal strengths with median 1 and log-scale SD ``sigma``."""
    if n_teams < 2:
        raise TRPSError("need at least 2 teams")
    return np.exp(sigma * rng.standard_normal(n_teams))


def _check_strengths(strengths) -> np.ndarray:
    beta = np.asarray(strengths, dtype=float)
    if beta.ndim != 1 or beta.size < 2:
        raise TRPSError("need a vector of at least 2 strengths")
    if not np.all(beta > 0):
        raise TRPSError("strengths must be strictly positive")
    return beta


def random_bracket(n_teams: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random first-round draw: slots (0, 1), (2, 3), ... meet."""
    return rng.permutation(n_teams)


def knockout_categories(strengths, rng: np.random.Generator, n_sims: int = 1, bracket=None) -> np.ndarray:
    """Simulate ``n_sims`` knockouts; returns an (n_sims, T) array of categories.

    ``bracket`` lists team indices in draw order and is shared by every
    simulation; without one, each simulation draws its own uniformly random
    bracket.  A team that wins w matches finishes in category N - w
    (0 = champion).
    """
    beta = _check_strengths(strengths)
    T = beta.size
    if T & (T - 1):
        raise TRPSError(f"knockout needs a power-of-two team count, got {T}")
    N = T.bit_length() - 1
    if bracket is None:
        alive = rng.permuted(np.broadcast_to(np.arange(T), (n_sims, T)), axis=1)
    else:
        bracket = np.asarray(bracket, dtype=np.int64)
        if sorted(bracket.tolist()) != list(range(T)):
            raise TRPSError("bracket must be a permutation of the team indices")
        alive = np.broadcast_to(bracket, (n_sims, T))
    wins = np.zeros((n_sims, T), dtype=np.int64)
    rows = np.arange(n_sims)[:, None]
    for _ in range(N):
        a, b = alive[:, 0::2], alive[:, 1::2]
        pa = beta[a] / (beta[a] + beta[b])
        a_wins = rng.random(pa.shape) < pa
        alive = np.where(a_wins, a, b)
        wins[rows, alive] += 1
    return N - wins


def round_robin_categories(strengths, rounds: int, rng: np.random.Generator, n_sims: int = 1) -> np.ndarray:
    """Simulate ``n_sims`` round robins; returns (n_sims, T) final positions.

    One point per win, no draws.  Teams level on points are put in a
    uniformly random order.
    """
    beta = _check_strengths(strengths)
    if rounds not in (1, 2):
        raise TRPSError("rounds must be 1 or 2")
    T = beta.size
    i, j = np.triu_indices(T, k=1)
    p = beta[i] / (beta[i] + beta[j])
    i_wins = (rng.random((n_sims, rounds, p.size)) < p).sum(axis=1)
    # points = wins of i as home side + wins of j as away side
    inc_i = np.zeros((p.size, T))
    inc_i[np.arange(p.size), i] = 1.0
    inc_j = np.zeros((p.size, T))
    inc_j[np.arange(p.size), j] = 1.0
    points = i_wins @ inc_i + (rounds - i_wins) @ inc_j
    key = points + rng.random((n_sims, T))
    order = np.argsort(-key, axis=1, kind="stable")
    positions = np.empty_like(order)
    positions[np.arange(n_sims)[:, None], order] = np.arange(T)
    return positions


def simulate_categories(strengths, fmt: TournamentFormat, rng: np.random.Generator, n_sims: int = 1,
                        bracket=None) -> np.ndarray:
    """``bracket`` only applies to knockouts."""
    if len(strengths) != fmt.n_teams:
        raise TRPSError(f"format expects {fmt.n_teams} teams, got {len(strengths)} strengths")
    if fmt.kind == KNOCKOUT:
        return knockout_categories(strengths, rng, n_sims, bracket)
    return round_robin_categories(strengths, fmt.rounds, rng, n_sims)


def play_knockout(strengths, rng: np.random.Generator, team_labels: Sequence[str] | None = None,
                  bracket=None) -> Outcome:
    beta = _check_strengths(strengths)
    fmt = TournamentFormat(KNOCKOUT, beta.size)
    cats = knockout_categories(beta, rng, 1, bracket)[0]
    return Outcome.from_categories(fmt.structure, cats, team_labels)


def play_round_robin(strengths, rounds: int, rng: np.random.Generator,
                     team_labels: Sequence[str] | None = None) -> Outcome:
    beta = _check_strengths(strengths)
    cats = round_robin_categories(beta, rounds, rng)[0]
    return Outcome.from_categories(RankStructure.full_ranking(beta.size), cats, team_labels)


def play(strengths, fmt: TournamentFormat, rng: np.random.Generator,
         team_labels: Sequence[str] | None = None, bracket=None) -> Outcome:
    cats = simulate_categories(strengths, fmt, rng, 1, bracket)[0]
    return Outcome.from_categories(fmt.structure, cats, team_labels)


def frequency_matrix(categories: np.ndarray, n_categories: int) -> np.ndarray:
    """R x T fraction of simulations in which team t landed in category r."""
    n_sims, T = categories.shape
    flat = (categories * T + np.arange(T)).ravel()
    counts = np.bincount(flat, minlength=n_categories * T).reshape(n_categories, T)
    return counts / n_sims


def true_strength_prediction(strengths, fmt: TournamentFormat, n_sims: int, rng: np.random.Generator,
                             team_labels: Sequence[str] | None = None, bracket=None) -> PredictionMatrix:
    """Empirical rank frequencies over ``n_sims`` tournaments played with the true strengths."""
    if n_sims < 1:
        raise TRPSError("need at least one simulation")
    cats = simulate_categories(strengths, fmt, rng, n_sims, bracket)
    probs = frequency_matrix(cats, fmt.structure.n_categories)
    labels = default_team_labels(fmt.n_teams) if team_labels is None else team_labels
    return PredictionMatrix(fmt.structure, probs, labels)


def confident_prediction(strengths, structure: RankStructure,
                         team_labels: Sequence[str] | None = None) -> PredictionMatrix:
    """Certain prediction that teams finish in order of strength.

    Equal strengths are ordered by team index.
    """
    beta = _check_strengths(strengths)
    if beta.size != structure.n_teams:
        raise TRPSError("strength count does not match the structure")
    order = np.argsort(-beta, kind="stable")
    probs = np.zeros((structure.n_categories, beta.size))
    for position, team in enumerate(order):
        probs[structure.category_of_position(position), team] = 1.0
    labels = default_team_labels(beta.size) if team_labels is None else team_labels
    return PredictionMatrix(structure, probs, labels)


def run_replicate(config: SimulationConfig, index: int) -> tuple[float, float, float]:
    """TRPS of the true-strength, flat and confident predictions for one replicate.

    Knockouts draw one random bracket per replicate; the true-strength
    prediction knows it and the actual tournament is played on it.  The
    actual tournament is a fresh draw, not one of the inner simulations.
    """
    fmt = config.format
    rng = rng_for(config.seed, index)
    beta = sample_strengths(fmt.n_teams, config.sigma, rng)
    bracket = random_bracket(fmt.n_teams, rng) if fmt.kind == KNOCKOUT else None
    tsp = true_strength_prediction(beta, fmt, config.inner_samples, rng, bracket=bracket)
    cp = confident_prediction(beta, fmt.structure)
    outcome = play(beta, fmt, rng, bracket=bracket)
    return trps(outcome, tsp), trps(outcome, flat_prediction(fmt.structure)), trps(outcome, cp)


def _run_chunk(args) -> list[tuple[float, float, float]]:
    config, indices = args
    return [run_replicate(config, i) for i in indices]


def replicate_scores(config: SimulationConfig, workers: int = 1) -> np.ndarray:
    """(replicates, 3) array of TSP, flat and confident scores in replicate order."""
    indices = range(config.replicates)
    if workers <= 1 or config.replicates == 1:
        return np.array(_run_chunk((config, indices)))
    n_chunks = min(config.replicates, workers * 4)
    chunks = [(config, list(indices[k::n_chunks])) for k in range(n_chunks)]
    out = np.empty((config.replicates, 3))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for (_, idx), scores in zip(chunks, pool.map(_run_chunk, chunks)):
            out[idx] = scores
    return out


def summarize(config: SimulationConfig, scores: np.ndarray) -> ExperimentRow:
    tsp, fp, cp = scores.T
    ddof = 1 if len(scores) > 1 else 0
    fmt = config.format
    return ExperimentRow(
        kind=fmt.kind,
        n_teams=fmt.n_teams,
        sigma=config.sigma,
        tsp_mean=float(tsp.mean()),
        tsp_sd=float(tsp.std(ddof=ddof)),
        flat=flat_trps(fmt.structure),
        cp_mean=float(cp.mean()),
        cp_sd=float(cp.std(ddof=ddof)),
        p_tsp_lt_fp=float(np.mean(tsp < fp)),
        p_tsp_lt_cp=float(np.mean(tsp < cp)),
        replicates=config.replicates,
        inner_samples=config.inner_samples,
        seed=config.seed,
    )


def run_experiment(config: SimulationConfig, workers: int = 1) -> ExperimentRow:
    return summarize(config, replicate_scores(config, workers))


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


FLAT_CURVE_KINDS = ("full_ranking", "top_two_then_rest", "knockout_doubling")


def curve_structure(kind: str, n_teams: int) -> RankStructure:
    if kind == "full_ranking":
        return RankStructure.full_ranking(n_teams)
    if kind == "top_two_then_rest":
        if n_teams < 3:
            raise TRPSError("top_two_then_rest needs at least 3 teams")
        return RankStructure.from_capacities([1, 1, n_teams - 2])
    if kind == "knockout_doubling":
        if n_teams < 2 or n_teams & (n_teams - 1):
            raise TRPSError(f"knockout_doubling needs a power-of-two team count, got {n_teams}")
        return RankStructure.knockout(n_teams.bit_length() - 1)
    raise TRPSError(f"unknown curve kind {kind!r}; choose from {FLAT_CURVE_KINDS}")


def flat_curve(kind: str, team_counts: Sequence[int]) -> list[tuple[int, float]]:
    return [(int(T), flat_trps(curve_structure(kind, int(T)))) for T in team_counts]


def valid_team_counts(kind: str, max_teams: int, min_teams: int = 2) -> list[int]:
    if kind == "knockout_doubling":
        return [2 ** n for n in range(1, int(math.log2(max_teams)) + 1) if 2 ** n >= min_teams]
    lo = max(min_teams, 3 if kind == "top_two_then_rest" else 2)
    return list(range(lo, max_teams + 1))
