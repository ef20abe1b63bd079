"""Single-play stochastic baselines: UCB1 and epsilon-greedy.

Both keep simple frequentist statistics (pull counts and empirical means).
Ties are always broken toward the lowest index so runs are reproducible.
"""

import math

import numpy as np

from .errors import InvalidParameterError


class FrequentistState:
    """Pull counts and incrementally updated empirical means."""

    def __init__(self, n_arms):
        self.n_arms = n_arms
        self.counts = np.zeros(n_arms, dtype=int)
        self.means = np.zeros(n_arms)
        self.t = 0

    def update(self, arm, reward):
        self.t += 1
        self.counts[arm] += 1
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm]


def ucb1_select(state):
    """Arm with the largest mean + sqrt(2 ln t / n) index.

    Each arm is pulled once first, in index order.
    """
    unpulled = np.flatnonzero(state.counts == 0)
    if unpulled.size:
        return int(unpulled[0])
    bonus = np.sqrt(2.0 * math.log(state.t) / state.counts)
    return int(np.argmax(state.means + bonus))


def epsilon_greedy_select(state, epsilon, rng):
    """Uniform arm with probability epsilon, otherwise the empirical best."""
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidParameterError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(state.n_arms))
    return int(np.argmax(state.means))
