"""Adversarial multi-play bandits with variable plays, and the
pursuit-evasion game built on them."""

from .analysis import (
    BoundInterval,
    RegretReport,
    corollary11_eta,
    equilibrium_values,
    g_max,
    g_max_curve,
    kstar_interval,
    pseudo_regret,
    theorem1_bound,
    theorem2_bounds,
)
from .bandit_core import (
    HedgeState,
    Marginals,
    RoundOutcome,
    WeightState,
    cap_threshold,
    dep_round,
    exp3_round,
    exp3mvp_round,
    hedge_distribution,
    marginals_from_weights,
)
from .baselines import FrequentistState, epsilon_greedy_select, ucb1_select
from .environments import (
    BernoulliEnv,
    IntrusionTrace,
    PayoffProfile,
    bernoulli_rewards,
    heterogeneous_payoff,
    ingest_can_log,
    synthesize_intrusion_trace,
)
from .game import (
    Exp3Attacker,
    Exp3MVPLearner,
    GameConfig,
    GameTrace,
    GreedyAttacker,
    ScanEstimate,
    SinglePlayerSpec,
    greedy_attacker_select,
    play_round,
    run_comparison,
    run_game,
    run_game_replicas,
    run_single_player,
)
from .scaling import MovingAverage, ScalingSpec, sample_arm_count, update_moving_average

__version__ = "0.1.0"
