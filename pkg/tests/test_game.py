"""Tests for the two-player game loop, attacker policies, and simulations."""

import math

import numpy as np
import pytest

from vpbandit.analysis import corollary11_eta, equilibrium_values
from vpbandit.bandit_core import WeightState, exp3mvp_round
from vpbandit.environments import BernoulliEnv, PayoffProfile, synthesize_intrusion_trace
from vpbandit.errors import InvalidConfigError
from vpbandit.game import (
    Exp3Attacker,
    Exp3MVPLearner,
    GameConfig,
    GreedyAttacker,
    ScanEstimate,
    SinglePlayerSpec,
    greedy_attacker_select,
    make_attacker,
    play_round,
    run_game,
    run_game_replicas,
    run_single_player,
)
from vpbandit.scaling import ScalingSpec


class _FixedAttacker:
    """Stub that always hides in one location."""

    def __init__(self, arm):
        self.arm = arm

    def select(self, rng):
        return self.arm

    def update(self, arm, reward):
        pass


class _FixedDefender:
    """Stub that always scans one fixed set."""

    def __init__(self, chosen, n_arms):
        self._chosen = np.asarray(chosen)
        self._probs = np.zeros(n_arms)
        self._probs[self._chosen] = 1.0

    def play(self, m, rng):
        return self._chosen, self._probs, None

    def update(self, chosen, rewards, probs, capped):
        pass


class TestCoupling:
    def test_homogeneous_hit(self):
        payoff = PayoffProfile.homogeneous(4)
        rng = np.random.default_rng(0)
        i, chosen, r, s = play_round(
            _FixedAttacker(2), _FixedDefender([0, 2], 4), 2, payoff, rng, rng
        )
        assert (i, r, s) == (2, 0.0, 1.0)

    def test_homogeneous_miss(self):
        payoff = PayoffProfile.homogeneous(4)
        rng = np.random.default_rng(0)
        i, chosen, r, s = play_round(
            _FixedAttacker(1), _FixedDefender([0, 2], 4), 2, payoff, rng, rng
        )
        assert (i, r, s) == (1, 1.0, 0.0)

    def test_heterogeneous_hit_scores_the_hit_location(self):
        payoff = PayoffProfile(mu=np.array([0.9, 0.4, 0.2]))
        rng = np.random.default_rng(0)
        i, chosen, r, s = play_round(
            _FixedAttacker(1), _FixedDefender([1, 2], 3), 2, payoff, rng, rng
        )
        assert (r, s) == (0.0, pytest.approx(0.4))

    def test_homogeneous_rewards_sum_to_one_pointwise(self):
        config = GameConfig(
            n_arms=5, horizon=500, scaling=ScalingSpec.uniform(1, 2), seed=3
        )
        trace = run_game(config)
        np.testing.assert_array_equal(
            trace.attacker_reward + trace.defender_reward, np.ones(500)
        )


class TestExp3MVPLearner:
    def test_matches_functional_round_exactly(self):
        # the in-place learner and the functional operation consume the same
        # randomness and must produce bit-identical weights and choices
        rng1, rng2 = np.random.default_rng(42), np.random.default_rng(42)
        state = WeightState(weights=np.ones(8), eta=0.2)
        learner = Exp3MVPLearner(8, 0.2)
        rewards_rng = np.random.default_rng(5)
        for t in range(2000):
            m = 1 + t % 3
            y = (rewards_rng.random(8) < 0.4).astype(float)
            out, state = exp3mvp_round(
                state, m, lambda ch: {int(i): y[i] for i in ch}, rng1
            )
            chosen, probs, capped = learner.play(m, rng2)
            learner.update(chosen, y[chosen], probs, capped)
            assert out.chosen == set(int(i) for i in chosen)
            np.testing.assert_array_equal(state.weights, learner.weights)

    def test_rejects_bad_eta(self):
        with pytest.raises(InvalidConfigError):
            Exp3MVPLearner(4, 0.0)
        with pytest.raises(InvalidConfigError):
            Exp3MVPLearner(4, 1.0)


class TestGreedyAttacker:
    def test_full_tie_is_uniform(self):
        att = GreedyAttacker(4)
        rng = np.random.default_rng(0)
        counts = np.bincount([att.select(rng) for _ in range(40_000)], minlength=4)
        freq = counts / 40_000
        sigma = math.sqrt(0.25 * 0.75 / 40_000)
        assert np.all(np.abs(freq - 0.25) <= 4 * sigma)

    def test_argmin_selection(self):
        est = ScanEstimate(values=np.array([0.9, 0.1, 0.5]))
        assert greedy_attacker_select(est, np.random.default_rng(0)) == 1

    def test_beats_a_fixed_scanning_set(self):
        # defender always scans {0, 1} out of 10; the attacker's long-run
        # average must reach at least (N - b) / N = 0.8
        n = 10
        att = GreedyAttacker(n)
        defender = _FixedDefender([0, 1], n)
        payoff = PayoffProfile.homogeneous(n)
        rng = np.random.default_rng(1)
        horizon = 2000
        total = 0.0
        for _ in range(horizon):
            _, _, r, _ = play_round(att, defender, 2, payoff, rng, rng)
            total += r
        assert total / horizon >= 0.8


class TestGameRuns:
    def test_two_arm_single_play_game_splits_evenly(self):
        # a = b = 1 with two locations: both averages converge to 1/2
        config = GameConfig(
            n_arms=2, horizon=30_000, scaling=ScalingSpec.constant(1), seed=5
        )
        trace = run_game(config)
        r_avg, s_avg = trace.running_averages()
        assert r_avg[-1] == pytest.approx(0.5, abs=0.05)
        assert s_avg[-1] == pytest.approx(0.5, abs=0.05)
        assert equilibrium_values(2, 1) == (0.5, 0.5)

    def test_attacker_decisions_replay_from_own_feedback(self):
        # information hygiene: the attacker's move at round t is a function
        # of its private random stream and its own past feedback only, so it
        # replays exactly from the recorded game trace
        config = GameConfig(
            n_arms=6,
            horizon=800,
            scaling=ScalingSpec.uniform(1, 3),
            attacker_kind="exp3",
            seed=9,
        )
        trace = run_game(config)
        att_rng = np.random.default_rng(config.seed).spawn(3)[0]
        attacker = make_attacker(config)
        for t in range(config.horizon):
            arm = attacker.select(att_rng)
            assert arm == trace.attacker_arm[t]
            attacker.update(arm, float(trace.attacker_reward[t]))

    def test_greedy_attacker_replay(self):
        config = GameConfig(
            n_arms=6,
            horizon=800,
            scaling=ScalingSpec.uniform(1, 3),
            attacker_kind="greedy",
            seed=10,
        )
        trace = run_game(config)
        att_rng = np.random.default_rng(config.seed).spawn(3)[0]
        attacker = make_attacker(config)
        for t in range(config.horizon):
            arm = attacker.select(att_rng)
            assert arm == trace.attacker_arm[t]
            attacker.update(arm, bool(trace.scanned[t, arm]))

    def test_replicas_deterministic_and_worker_independent(self):
        config = GameConfig(
            n_arms=5, horizon=300, scaling=ScalingSpec.uniform(1, 2), seed=21
        )
        a = run_game_replicas(config, 3, workers=1)
        b = run_game_replicas(config, 3, workers=1)
        c = run_game_replicas(config, 3, workers=2)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.attacker_reward, y.attacker_reward)
        for x, y in zip(a, c):
            np.testing.assert_array_equal(x.attacker_reward, y.attacker_reward)
            np.testing.assert_array_equal(x.scanned, y.scanned)

    def test_config_validation(self):
        with pytest.raises(InvalidConfigError):
            GameConfig(n_arms=5, horizon=10, scaling=ScalingSpec.uniform(1, 2),
                       attacker_kind="nope")
        from vpbandit.errors import InvalidSpecError

        with pytest.raises(InvalidSpecError):
            GameConfig(n_arms=3, horizon=10, scaling=ScalingSpec.uniform(1, 3))
        with pytest.raises(InvalidConfigError):
            GameConfig(
                n_arms=5,
                horizon=10,
                scaling=ScalingSpec.uniform(1, 2),
                payoff=PayoffProfile.homogeneous(4),
            )


class TestSinglePlayer:
    def test_eta_resolution(self):
        spec = SinglePlayerSpec(
            env=BernoulliEnv.harmonic(10),
            scaling=ScalingSpec.uniform(1, 3),
            horizon=100_000,
        )
        eta, _ = corollary11_eta(10, 1, 3, 100_000)
        assert spec.resolve_eta() == pytest.approx(eta)
        spec2 = SinglePlayerSpec(
            env=BernoulliEnv.harmonic(10),
            scaling=ScalingSpec.uniform(1, 3),
            eta=0.1,
            horizon=100,
        )
        assert spec2.resolve_eta() == 0.1

    def test_trace_env_sets_horizon(self):
        tr = synthesize_intrusion_trace(
            6, attacked=(1,), horizon=120, n_bursts=4, rng=np.random.default_rng(0)
        )
        spec = SinglePlayerSpec(env=tr, scaling=ScalingSpec.uniform(1, 2))
        assert spec.horizon == 120

    def test_run_records_consistent_curves(self):
        spec = SinglePlayerSpec(
            env=BernoulliEnv.harmonic(6),
            scaling=ScalingSpec.uniform(1, 3),
            eta=0.1,
            horizon=400,
        )
        run = run_single_player(spec, np.random.default_rng(7), record_weights=True)
        assert run.reward_matrix.shape == (400, 6)
        assert np.all(run.play_counts >= 1) and np.all(run.play_counts <= 3)
        np.testing.assert_allclose(
            run.cumulative_reward, np.cumsum(run.round_rewards)
        )
        # recorded marginal rows sum to that round's play count
        np.testing.assert_allclose(
            run.marginals.sum(axis=1), run.play_counts, atol=1e-9
        )
        # normalized weight rows sum to 1
        np.testing.assert_allclose(run.normalized_weights.sum(axis=1), 1.0)
