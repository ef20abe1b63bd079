"""Repeated pursuit-evasion game and simulation loops.

One attacker picks a single location per round; the defender scans a
varying-size subset.  With homogeneous payoffs the round rewards couple as
a constant-sum game: the attacker scores 1 exactly when its location is not
scanned.  Both players see only their own bandit feedback; their actions
are drawn from separate pre-committed random streams, so neither move can
depend on the other's current choice.

The learner classes here mutate in place for speed; their arithmetic
matches the functional round operations in ``bandit_core`` step for step
(a parity test pins this down).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import corollary11_eta
from .bandit_core import cap_threshold, dep_round
from .baselines import FrequentistState, epsilon_greedy_select, ucb1_select
from .environments import BernoulliEnv, IntrusionTrace, PayoffProfile, bernoulli_rewards
from .errors import InvalidConfigError
from .scaling import MovingAverage, ScalingSpec, sample_arm_count, sample_arm_counts

DEFAULT_IOTA = math.e - 1.0  # makes the hedge exponent match exp(estimate)
DEFAULT_SCAN_DISCOUNT = 0.01


# ---------------------------------------------------------------------------
# learner wrappers (select/update split so simultaneous moves are possible)


class Exp3MVPLearner:
    """In-place variable-play learner; same math as ``exp3mvp_round``."""

    def __init__(self, n_arms, eta):
        if not 0.0 < eta < 1.0:
            raise InvalidConfigError(f"eta must be in (0, 1), got {eta}")
        self.n_arms = n_arms
        self.eta = eta
        self.weights = np.ones(n_arms)

    def play(self, m, rng):
        """Draw the scan set for this round; returns (chosen, probs, capped)."""
        w = self.weights
        n = self.n_arms
        eta = self.eta
        c = (1.0 / m - eta / n) / (1.0 - eta)
        total = w.sum()
        if w.max() >= c * total:
            kappa, capped = cap_threshold(w, c)
            wp = w.copy()
            wp[capped] = kappa
            total = wp.sum()
        else:
            wp = w
            capped = None
        probs = wp * (m * (1.0 - eta) / total)
        probs += m * eta / n
        if capped is not None:
            probs[capped] = 1.0
        chosen = dep_round(m, probs, rng, validate=False)
        return chosen, probs, capped

    def update(self, chosen, rewards, probs, capped):
        """Importance-weighted multiplicative update, then rescale max to 1.

        The rescale is skipped when no weight moved: the previous rescale
        left the maximum at exactly 1.0, so dividing again is a no-op.
        """
        w = self.weights
        coef = len(chosen) * self.eta / self.n_arms
        capped_set = None
        moved = False
        for j, y in zip(chosen, rewards):
            if y:
                if capped is not None:
                    if capped_set is None:
                        capped_set = set(capped.tolist())
                    if j in capped_set:
                        continue
                w[j] *= math.exp(coef * (y / probs[j]))
                moved = True
        if moved:
            w /= w.max()

    def normalized_weights(self):
        return self.weights / self.weights.sum()


class Exp3Attacker:
    """Single-play exponential-weight learner with exploration mixing.

    Keeps weights ``(1 + iota) ** cumulative_estimate`` directly and samples
    the mixture (1 - eta) * weight-proportional + eta * uniform exactly, so
    a round costs O(N) with no exponentiation of the whole vector.
    """

    def __init__(self, n_arms, eta, iota=DEFAULT_IOTA):
        if not 0.0 < eta <= 1.0:
            raise InvalidConfigError(f"eta must be in (0, 1], got {eta}")
        self.n_arms = n_arms
        self.eta = eta
        self._log1p_iota = math.log1p(iota)
        self.weights = np.ones(n_arms)
        self._max = 1.0

    def select(self, rng):
        n = self.n_arms
        if rng.random() < self.eta:
            return int(rng.integers(n))
        cs = np.cumsum(self.weights)
        arm = int(np.searchsorted(cs, rng.random() * cs[-1]))
        return min(arm, n - 1)

    def selection_probability(self, arm):
        total = float(self.weights.sum())
        return (1.0 - self.eta) * self.weights[arm] / total + self.eta / self.n_arms

    def update(self, arm, reward):
        p = self.selection_probability(arm)
        xhat = (self.eta / self.n_arms) * reward / p
        self.weights[arm] *= math.exp(xhat * self._log1p_iota)
        if self.weights[arm] > self._max:
            self._max = self.weights[arm]
            if self._max > 1e100:
                self.weights /= self._max
                self._max = 1.0


@dataclass
class ScanEstimate:
    """Discounted importance-weighted estimate of per-arm scan frequency."""

    values: np.ndarray
    discount: float = DEFAULT_SCAN_DISCOUNT

    @classmethod
    def initial(cls, n_arms, discount=DEFAULT_SCAN_DISCOUNT):
        return cls(values=np.zeros(n_arms), discount=discount)


class GreedyAttacker:
    """Attacks the location it believes is scanned least often.

    The scan-frequency estimate only uses the attacker's own feedback: an
    importance-weighted scan indicator with exponential discounting, with
    uniform tie-breaking over the current argmin set.
    """

    def __init__(self, n_arms, discount=DEFAULT_SCAN_DISCOUNT):
        self.n_arms = n_arms
        self.estimate = ScanEstimate.initial(n_arms, discount)
        self._rho = 1.0

    def select(self, rng):
        v = self.estimate.values
        ties = np.flatnonzero(v == v.min())
        self._rho = 1.0 / ties.size
        if ties.size == 1:
            return int(ties[0])
        return int(ties[rng.integers(ties.size)])

    def update(self, arm, scanned):
        lam = self.estimate.discount
        v = self.estimate.values
        v *= 1.0 - lam
        v[arm] += lam * (float(scanned) / self._rho)


def greedy_attacker_select(estimate, rng):
    """Argmin of the scan estimate, ties broken uniformly at random."""
    v = estimate.values
    ties = np.flatnonzero(v == v.min())
    if ties.size == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


# ---------------------------------------------------------------------------
# single-player simulation


@dataclass
class SinglePlayerSpec:
    """A variable-play learner against a fixed reward process."""

    env: object  # BernoulliEnv or IntrusionTrace
    scaling: ScalingSpec
    eta: object = "corollary_1_1"  # float or the tuning-rule name
    horizon: int = None
    budget: int = None  # only read by budget_threshold scaling

    def __post_init__(self):
        if self.horizon is None:
            if isinstance(self.env, IntrusionTrace):
                self.horizon = self.env.n_rounds
            else:
                raise InvalidConfigError("horizon required for non-trace environments")
        self.scaling.validate_for(self.n_arms)

    @property
    def n_arms(self):
        return self.env.n_arms

    def resolve_eta(self):
        if self.eta == "corollary_1_1":
            eta, _ = corollary11_eta(self.n_arms, self.scaling.a, self.scaling.b, self.horizon)
            return min(eta, 1.0 - 1e-6)
        return float(self.eta)


@dataclass
class SinglePlayerRun:
    """Raw per-round record of one replica."""

    reward_matrix: np.ndarray  # realized rewards of all arms, (T, N)
    play_counts: np.ndarray
    round_rewards: np.ndarray  # learner's reward per round
    cumulative_reward: np.ndarray  # G(t) curve
    eta: float
    normalized_weights: np.ndarray = None  # (T, N) if recorded
    marginals: np.ndarray = None  # (T, N) selection marginals if recorded


def _round_rewards(env, t, rng):
    if isinstance(env, IntrusionTrace):
        return env.indicators[t].astype(float)
    return bernoulli_rewards(env, t, rng)


def run_single_player(spec, rng, record_weights=False):
    """Simulate the variable-play learner over one reward realization."""
    n = spec.n_arms
    horizon = spec.horizon
    eta = spec.resolve_eta()
    env_rng, scale_rng, learner_rng = rng.spawn(3)
    learner = Exp3MVPLearner(n, eta)
    needs_ma = spec.scaling.kind == "budget_threshold"
    ma = MovingAverage(n, window=10) if needs_ma else None
    budget = spec.budget if spec.budget is not None else spec.scaling.b
    rewards = np.empty((horizon, n))
    play_counts = np.empty(horizon, dtype=int)
    round_rewards = np.empty(horizon)
    weights = np.empty((horizon, n)) if record_weights else None
    margs = np.empty((horizon, n)) if record_weights else None
    counts = None if needs_ma else sample_arm_counts(spec.scaling, horizon, scale_rng).tolist()
    for t in range(horizon):
        m = counts[t] if counts is not None else sample_arm_count(spec.scaling, ma, budget, scale_rng)
        y = _round_rewards(spec.env, t, env_rng)
        chosen, probs, capped = learner.play(m, learner_rng)
        obs = y[chosen]
        if record_weights:
            weights[t] = learner.normalized_weights()
            margs[t] = probs
        learner.update(chosen, obs, probs, capped)
        rewards[t] = y
        play_counts[t] = m
        round_rewards[t] = obs.sum()
        if needs_ma:
            est = np.zeros(n)
            est[chosen] = obs / probs[chosen]
            ma.push(est)
    return SinglePlayerRun(
        reward_matrix=rewards,
        play_counts=play_counts,
        round_rewards=round_rewards,
        cumulative_reward=np.cumsum(round_rewards),
        eta=eta,
        normalized_weights=weights,
        marginals=margs,
    )


# ---------------------------------------------------------------------------
# algorithm comparison on a fixed trace


def run_comparison(trace, rng, epsilon=0.1, vp_scaling=None, fixed_m=3, eta=None):
    """Cumulative average reward of five learners replaying one trace.

    Returns a dict name -> curve of length T.  The multi-play learners score
    the sum of indicators over their scan set; single-play learners score
    the indicator of their one arm.  ``eta`` overrides the exploration rate
    of every exponential-weights learner; by default each uses the
    horizon-tuned rule for its own play-count bounds.
    """
    horizon = trace.n_rounds
    n = trace.n_arms
    if vp_scaling is None:
        vp_scaling = ScalingSpec.truncated_gaussian(1, 3, mean=2.0, std=0.8)
    curves = {}
    t_axis = np.arange(1, horizon + 1)
    eta_spec = "corollary_1_1" if eta is None else eta

    vp_spec = SinglePlayerSpec(env=trace, scaling=vp_scaling, eta=eta_spec)
    curves["exp3mvp"] = run_single_player(vp_spec, rng.spawn(1)[0]).cumulative_reward / t_axis

    m_spec = SinglePlayerSpec(env=trace, scaling=ScalingSpec.constant(fixed_m), eta=eta_spec)
    curves["exp3m"] = run_single_player(m_spec, rng.spawn(1)[0]).cumulative_reward / t_axis

    if eta is None:
        eta1, _ = corollary11_eta(n, 1, 1, horizon)
    else:
        eta1 = eta
    exp3 = Exp3Attacker(n, eta=min(eta1, 1.0 - 1e-6))
    r3 = rng.spawn(1)[0]
    rewards = np.empty(horizon)
    for t in range(horizon):
        arm = exp3.select(r3)
        x = float(trace.indicators[t, arm])
        exp3.update(arm, x)
        rewards[t] = x
    curves["exp3"] = np.cumsum(rewards) / t_axis

    for name, pick in (
        ("ucb1", lambda st, r: ucb1_select(st)),
        ("epsilon_greedy", lambda st, r: epsilon_greedy_select(st, epsilon, r)),
    ):
        st = FrequentistState(n)
        rb = rng.spawn(1)[0]
        rewards = np.empty(horizon)
        for t in range(horizon):
            arm = pick(st, rb)
            x = float(trace.indicators[t, arm])
            st.update(arm, x)
            rewards[t] = x
        curves[name] = np.cumsum(rewards) / t_axis
    return curves


# ---------------------------------------------------------------------------
# two-player game


@dataclass
class GameConfig:
    n_arms: int
    horizon: int
    scaling: ScalingSpec
    attacker_kind: str = "exp3"
    defender_eta: float = None  # default: horizon-tuned rule with (a, b)
    attacker_eta: float = None  # default: horizon-tuned rule with a = b = 1
    payoff: PayoffProfile = None
    scan_discount: float = DEFAULT_SCAN_DISCOUNT
    seed: int = 0

    def __post_init__(self):
        if self.attacker_kind not in ("exp3", "greedy"):
            raise InvalidConfigError(f"unknown attacker kind {self.attacker_kind!r}")
        if self.horizon < 1:
            raise InvalidConfigError("horizon must be >= 1")
        self.scaling.validate_for(self.n_arms)
        if self.payoff is None:
            self.payoff = PayoffProfile.homogeneous(self.n_arms)
        elif self.payoff.n_arms != self.n_arms:
            raise InvalidConfigError("payoff profile size must match n_arms")

    def resolve_defender_eta(self):
        if self.defender_eta is not None:
            return float(self.defender_eta)
        eta, _ = corollary11_eta(self.n_arms, self.scaling.a, self.scaling.b, self.horizon)
        return min(eta, 1.0 - 1e-6)

    def resolve_attacker_eta(self):
        if self.attacker_eta is not None:
            return float(self.attacker_eta)
        eta, _ = corollary11_eta(self.n_arms, 1, 1, self.horizon)
        return min(eta, 1.0 - 1e-6)


@dataclass
class GameTrace:
    """Per-round record of one game run."""

    attacker_arm: np.ndarray
    play_counts: np.ndarray
    scanned: np.ndarray  # (T, N) 0/1
    attacker_reward: np.ndarray
    defender_reward: np.ndarray

    @property
    def n_rounds(self):
        return self.attacker_arm.size

    def running_averages(self):
        t = np.arange(1, self.n_rounds + 1)
        return np.cumsum(self.attacker_reward) / t, np.cumsum(self.defender_reward) / t


def make_attacker(config):
    if config.attacker_kind == "greedy":
        return GreedyAttacker(config.n_arms, discount=config.scan_discount)
    return Exp3Attacker(config.n_arms, eta=config.resolve_attacker_eta())


def play_round(attacker, defender, m, payoff, attacker_rng, defender_rng):
    """One simultaneous round; mutates both learner states.

    Returns ``(attacker_arm, chosen, attacker_reward, defender_reward)``.
    """
    i = attacker.select(attacker_rng)
    chosen, probs, capped = defender.play(m, defender_rng)
    chosen_list = chosen.tolist()
    hit = i in chosen_list
    mu_i = float(payoff.mu[i])
    r = 0.0 if hit else mu_i
    s = mu_i if hit else 0.0
    obs = [mu_i if j == i else 0.0 for j in chosen_list]
    if isinstance(attacker, GreedyAttacker):
        attacker.update(i, hit)
    else:
        attacker.update(i, r)
    defender.update(chosen_list, obs, probs, capped)
    return i, chosen, r, s


def run_game(config, rng=None):
    """Play the full game for ``config.horizon`` rounds."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    att_rng, def_rng, scale_rng = rng.spawn(3)
    attacker = make_attacker(config)
    defender = Exp3MVPLearner(config.n_arms, config.resolve_defender_eta())
    horizon = config.horizon
    attacker_arm = np.empty(horizon, dtype=int)
    play_counts = np.empty(horizon, dtype=int)
    scanned = np.zeros((horizon, config.n_arms), dtype=np.int8)
    r_arr = np.empty(horizon)
    s_arr = np.empty(horizon)
    counts = sample_arm_counts(config.scaling, horizon, scale_rng).tolist()
    for t in range(horizon):
        m = counts[t]
        i, chosen, r, s = play_round(
            attacker, defender, m, config.payoff, att_rng, def_rng
        )
        attacker_arm[t] = i
        play_counts[t] = m
        scanned[t, chosen] = 1
        r_arr[t] = r
        s_arr[t] = s
    return GameTrace(
        attacker_arm=attacker_arm,
        play_counts=play_counts,
        scanned=scanned,
        attacker_reward=r_arr,
        defender_reward=s_arr,
    )


def _game_replica(config, seed_seq):
    return run_game(config, np.random.default_rng(seed_seq))


def run_game_replicas(config, replicas, workers=1):
    """Independent game replicas with disjoint seed streams.

    Results are aggregated in replica order and do not depend on ``workers``.
    """
    children = np.random.SeedSequence(config.seed).spawn(replicas)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_game_replica, [config] * replicas, children))
    return [_game_replica(config, child) for child in children]
