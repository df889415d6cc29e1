import numpy as np
import pytest

from trps.scoring import flat_prediction, flat_trps, trps
from trps.simulate import (
    DOUBLE_RR,
    KNOCKOUT,
    SINGLE_RR,
    SimulationConfig,
    TournamentFormat,
    bt_win_prob,
    confident_prediction,
    curve_structure,
    flat_curve,
    knockout_categories,
    play,
    play_knockout,
    play_round_robin,
    replicate_scores,
    rng_for,
    round_robin_categories,
    run_experiment,
    sample_strengths,
    true_strength_prediction,
    valid_team_counts,
)
from trps.structures import Outcome, RankStructure, TRPSError, validate_prediction


def test_bt_examples():
    assert bt_win_prob(1, 1) == 0.5
    assert bt_win_prob(3, 1) == 0.75
    assert bt_win_prob(1, 3) == 0.25
    for k in (0.5, 2.0, 1024.0):
        assert bt_win_prob(3 * k, 1 * k) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(TRPSError):
        bt_win_prob(0, 1)


def test_strength_distribution():
    rng = rng_for(1)
    np.testing.assert_allclose(sample_strengths(10, 1e-12, rng), 1.0, atol=1e-9)
    logs = np.log(sample_strengths(200_000, 2.0, rng))
    assert abs(logs.std() - 2.0) < 0.02
    assert abs(np.median(np.exp(logs)) - 1.0) < 0.02


def test_format_checks():
    assert TournamentFormat(KNOCKOUT, 32).rounds == 5
    assert TournamentFormat(KNOCKOUT, 8).structure.capacities == (1, 1, 2, 4)
    assert TournamentFormat(DOUBLE_RR, 5).structure.capacities == (1,) * 5
    with pytest.raises(TRPSError):
        TournamentFormat(KNOCKOUT, 12)
    with pytest.raises(TRPSError):
        TournamentFormat("swiss", 8)
    with pytest.raises(TRPSError):
        SimulationConfig(TournamentFormat(KNOCKOUT, 8), sigma=0)


def test_knockout_category_sizes_every_replicate():
    rng = rng_for(2)
    beta = sample_strengths(32, 1.0, rng)
    cats = knockout_categories(beta, rng, n_sims=500)
    for row in cats:
        assert tuple(np.bincount(row, minlength=6)) == (1, 1, 2, 4, 8, 16)
    O = play_knockout(beta, rng)
    assert O.structure.capacities == (1, 1, 2, 4, 8, 16)


def test_two_team_knockout_with_dominant_team():
    cats = knockout_categories([1e12, 1.0], rng_for(3), n_sims=200)
    assert (cats[:, 0] == 0).all() and (cats[:, 1] == 1).all()


def test_round_robin_positions_are_permutations():
    cats = round_robin_categories(sample_strengths(9, 1.0, rng_for(4)), 2, rng_for(5), n_sims=300)
    assert (np.sort(cats, axis=1) == np.arange(9)).all()


def test_round_robin_equal_teams_are_coin_flips():
    cats = round_robin_categories([1.0, 1.0], 1, rng_for(6), n_sims=20_000)
    assert abs(np.mean(cats[:, 0] == 0) - 0.5) < 0.02


def test_round_robin_strong_team_wins():
    beta = [1e9, 1, 1, 1, 1, 1]
    cats = round_robin_categories(beta, 1, rng_for(7), n_sims=2000)
    assert np.mean(cats[:, 0] == 0) >= 0.999


def test_knockout_bracket_is_shared():
    beta = np.array([1e12, 1e6, 1.0, 1.0])
    # the two favourites meet in round one, so the weaker one never finishes second
    cats = knockout_categories(beta, rng_for(8), n_sims=500, bracket=[0, 1, 2, 3])
    assert (cats[:, 1] == 2).all()
    with pytest.raises(TRPSError):
        knockout_categories(beta, rng_for(8), bracket=[0, 0, 1, 2])


def test_true_strength_prediction_is_valid():
    fmt = TournamentFormat(KNOCKOUT, 8)
    beta = sample_strengths(8, 1.0, rng_for(9))
    X = true_strength_prediction(beta, fmt, 3000, rng_for(10))
    validate_prediction(X.probs, X.structure)
    one = true_strength_prediction(beta, fmt, 1, rng_for(11))
    assert set(np.unique(one.probs)) <= {0.0, 1.0}
    assert (one.probs.sum(axis=0) == 1).all()


def test_true_strength_converges_to_flat_for_equal_teams():
    fmt = TournamentFormat(SINGLE_RR, 6)
    n = 40_000
    X = true_strength_prediction(np.ones(6), fmt, n, rng_for(12))
    se = np.sqrt(1 / 6 * 5 / 6 / n)
    assert np.abs(X.probs - 1 / 6).max() < 4 * se


def test_confident_prediction_examples():
    s = RankStructure.from_capacities([1, 1, 2])
    X = confident_prediction([4, 3, 2, 1], s)
    np.testing.assert_array_equal(X.probs, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1]])
    Xr = confident_prediction([1, 2, 3, 4], s)
    np.testing.assert_array_equal(Xr.probs, X.probs[:, ::-1])
    np.testing.assert_array_equal(X.probs.sum(axis=1), s.capacities)
    # ties go to the lower team index
    tie = confident_prediction([1, 1, 1, 1], RankStructure.full_ranking(4))
    np.testing.assert_array_equal(tie.probs, np.eye(4))


def test_play_dispatch():
    rng = rng_for(13)
    O = play(np.ones(5), TournamentFormat(DOUBLE_RR, 5), rng, team_labels=list("abcde"))
    assert O.team_labels == tuple("abcde")
    O2 = play_round_robin(np.ones(4), 1, rng)
    assert O2.structure.capacities == (1, 1, 1, 1)


def test_seed_reproducibility_and_worker_invariance():
    cfg = SimulationConfig(TournamentFormat(KNOCKOUT, 8), sigma=1.0, replicates=24, inner_samples=50, seed=77)
    a = replicate_scores(cfg, workers=1)
    b = replicate_scores(cfg, workers=1)
    c = replicate_scores(cfg, workers=3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)
    other = replicate_scores(SimulationConfig(cfg.format, 1.0, 24, 50, seed=78))
    assert not np.array_equal(a, other)


def test_experiment_row_shape():
    cfg = SimulationConfig(TournamentFormat(SINGLE_RR, 6), sigma=2.0, replicates=40, inner_samples=100, seed=1)
    row = run_experiment(cfg)
    assert row.flat == pytest.approx(flat_trps(RankStructure.full_ranking(6)))
    assert 0 <= row.p_tsp_lt_fp <= 1 and 0 <= row.p_tsp_lt_cp <= 1
    assert row.tsp_mean < row.flat
    assert row.as_dict()["replicates"] == 40


def test_flat_score_is_paired_with_same_outcome():
    cfg = SimulationConfig(TournamentFormat(KNOCKOUT, 8), sigma=1.0, replicates=30, inner_samples=20, seed=5)
    scores = replicate_scores(cfg)
    # flat scores are outcome-invariant, so every replicate sees the same value
    np.testing.assert_allclose(scores[:, 1], flat_trps(cfg.format.structure), atol=1e-12)


def test_small_sigma_tsp_matches_flat():
    cfg = SimulationConfig(TournamentFormat(KNOCKOUT, 8), sigma=1e-6, replicates=200, inner_samples=4000, seed=9)
    scores = replicate_scores(cfg)
    se = scores[:, 0].std(ddof=1) / np.sqrt(len(scores))
    assert abs(scores[:, 0].mean() - scores[:, 1].mean()) < 3 * se + 2e-3


@pytest.mark.slow
@pytest.mark.parametrize("kind, T", [(KNOCKOUT, 8), (SINGLE_RR, 8)])
def test_tsp_decreases_with_sigma(kind, T):
    means, ses = [], []
    for sigma in (0.5, 1.0, 2.0, 3.0):
        cfg = SimulationConfig(TournamentFormat(kind, T), sigma, replicates=1000, inner_samples=300, seed=11)
        tsp = replicate_scores(cfg)[:, 0]
        means.append(tsp.mean())
        ses.append(tsp.std(ddof=1) / np.sqrt(len(tsp)))
    for k in range(len(means) - 1):
        assert means[k + 1] < means[k] + 2 * max(ses[k], ses[k + 1])
    assert means[-1] < means[0]


def test_flat_curve_examples():
    assert dict(flat_curve("full_ranking", [4]))[4] == pytest.approx(5 / 24, abs=1e-9)
    assert dict(flat_curve("knockout_doubling", [8]))[8] == pytest.approx(4.375 / 24, abs=1e-9)
    assert dict(flat_curve("top_two_then_rest", [4]))[4] == pytest.approx(7 / 32, abs=1e-9)
    assert dict(flat_curve("full_ranking", [8]))[8] == pytest.approx(21 / 112, abs=1e-9)
    for kind, T in [("full_ranking", 7), ("knockout_doubling", 16), ("top_two_then_rest", 9)]:
        s = curve_structure(kind, T)
        O = Outcome.from_categories(s, np.repeat(np.arange(s.n_categories), s.capacities))
        assert dict(flat_curve(kind, [T]))[T] == pytest.approx(trps(O, flat_prediction(s)), abs=1e-12)


def test_flat_curve_team_counts():
    assert valid_team_counts("knockout_doubling", 64) == [2, 4, 8, 16, 32, 64]
    assert valid_team_counts("top_two_then_rest", 6) == [3, 4, 5, 6]
    with pytest.raises(TRPSError):
        curve_structure("knockout_doubling", 12)
    with pytest.raises(TRPSError):
        curve_structure("nope", 8)
