"""Independent reference computations used as test oracles.

Plain-Python loops over exact fractions, written straight from the score
definitions and sharing no code with the package.
"""

from fractions import Fraction


def trps_exact(probs, observed, weights=None):
    """probs: R rows of T Fractions; observed: category (0-based) per team."""
    R, T = len(probs), len(probs[0])
    weights = weights or [1] * (R - 1)
    total = Fraction(0)
    for t in range(T):
        cum_pred = Fraction(0)
        for r in range(R - 1):
            cum_pred += Fraction(probs[r][t])
            cum_obs = 1 if observed[t] <= r else 0
            total += Fraction(weights[r]) * (cum_obs - cum_pred) ** 2
    return total / (T * (R - 1))


def flat_trps_exact(capacities):
    T = sum(capacities)
    probs = [[Fraction(c, T)] * T for c in capacities]
    observed = [k for k, c in enumerate(capacities) for _ in range(c)]
    return trps_exact(probs, observed)


def fr(rows):
    return [[Fraction(x).limit_denominator(10**6) for x in row] for row in rows]


def random_valid_probs(capacities, rng, n_perms=4):
    """Convex mix of random 0/1 assignments: always satisfies both marginals."""
    import numpy as np

    R, T = len(capacities), sum(capacities)
    base = np.repeat(np.arange(R), capacities)
    lam = rng.dirichlet(np.ones(n_perms))
    probs = np.zeros((R, T))
    for weight in lam:
        probs[rng.permutation(base), np.arange(T)] += weight
    return probs


def random_histories(rng, n_models, n_tournaments, max_teams=8):
    """Small ensemble-fitting instances over random rank structures."""
    import numpy as np

    from trps.structures import Outcome, RankStructure, validate_prediction
    from trps.ensemble import TournamentHistory

    histories = []
    for _ in range(n_tournaments):
        T = int(rng.integers(3, max_teams + 1))
        cuts = np.sort(rng.choice(np.arange(1, T), size=int(rng.integers(1, T)), replace=False))
        caps = np.diff(np.concatenate([[0], cuts, [T]])).tolist()
        s = RankStructure.from_capacities(caps)
        preds = tuple(validate_prediction(random_valid_probs(caps, rng), s) for _ in range(n_models))
        outcome = Outcome.from_categories(s, rng.permutation(np.repeat(np.arange(len(caps)), caps)))
        histories.append(TournamentHistory(outcome, preds))
    return histories
