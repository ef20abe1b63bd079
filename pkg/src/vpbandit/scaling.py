"""Rules that decide how many arms the defender plays each round.

The play count is produced by a pluggable rule bounded by integers
``a <= M_t <= b``; the built-in kinds cover everything the experiments use.
The ``budget_threshold`` kind is our own illustrative rule (the contract
only requires boundedness), combining a resource budget with the number of
arms whose recent reward average looks active.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError

KINDS = ("constant", "uniform_discrete", "truncated_gaussian", "budget_threshold")


@dataclass
class MovingAverage:
    """Per-arm mean of the last ``window`` reward estimates.

    Arms with no history yet average to 0 by convention, so unexplored arms
    do not inflate the play-count budget.
    """

    n_arms: int
    window: int
    _buf: np.ndarray = field(init=False, repr=False)
    _count: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, repr=False)
    _sums: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        self._buf = np.zeros((self.window, self.n_arms))
        self._count = np.zeros(self.n_arms, dtype=int)
        self._pos = 0
        self._sums = np.zeros(self.n_arms)

    @property
    def averages(self):
        out = np.zeros(self.n_arms)
        seen = self._count > 0
        out[seen] = self._sums[seen] / self._count[seen]
        return out

    def push(self, estimates):
        estimates = np.asarray(estimates, dtype=float)
        if estimates.shape != (self.n_arms,):
            raise ValueError(f"expected {self.n_arms} estimates")
        self._sums += estimates - self._buf[self._pos]
        self._buf[self._pos] = estimates
        self._count = np.minimum(self._count + 1, self.window)
        self._pos = (self._pos + 1) % self.window
        return self


def update_moving_average(ma, outcome):
    """Push one round's estimate vector (0 for unplayed arms) into ``ma``."""
    return ma.push(outcome.estimates)


@dataclass
class ScalingSpec:
    """Declarative description of a play-count rule with bounds [a, b]."""

    kind: str
    a: int
    b: int
    m: int = None  # constant kind
    mean: float = None  # truncated_gaussian
    std: float = None
    threshold: float = 0.1  # budget_threshold

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpecError(f"unknown scaling kind {self.kind!r}")
        if not 1 <= self.a <= self.b:
            raise InvalidSpecError(f"need 1 <= a <= b, got a={self.a} b={self.b}")
        if self.kind == "constant":
            if self.m is None:
                self.m = self.a
            if not self.a <= self.m <= self.b:
                raise InvalidSpecError(f"constant m={self.m} outside [{self.a}, {self.b}]")
        if self.kind == "truncated_gaussian":
            if self.mean is None or self.std is None or self.std <= 0:
                raise InvalidSpecError("truncated_gaussian needs mean and std > 0")

    def validate_for(self, n_arms):
        if self.b >= n_arms:
            raise InvalidSpecError(f"b={self.b} must be < number of arms {n_arms}")

    @classmethod
    def constant(cls, m):
        return cls(kind="constant", a=m, b=m, m=m)

    @classmethod
    def uniform(cls, a, b):
        return cls(kind="uniform_discrete", a=a, b=b)

    @classmethod
    def truncated_gaussian(cls, a, b, mean, std):
        return cls(kind="truncated_gaussian", a=a, b=b, mean=mean, std=std)


def sample_arm_count(spec, ma, budget, rng):
    """Draw this round's play count; always an integer in {a, ..., b}.

    The truncated Gaussian rejects samples outside [a - 0.5, b + 0.5] and
    rounds to the nearest integer, which keeps the integer mean equal to the
    Gaussian mean when the interval is symmetric about it.
    """
    a, b = spec.a, spec.b
    if spec.kind == "constant":
        return spec.m
    if spec.kind == "uniform_discrete":
        return int(a + rng.integers(0, b - a + 1))
    if spec.kind == "truncated_gaussian":
        lo, hi = a - 0.5, b + 0.5
        while True:
            x = rng.normal(spec.mean, spec.std)
            if lo <= x <= hi:
                break
        return int(min(b, max(a, int(np.floor(x + 0.5)))))
    # budget_threshold: cap by the environment budget, aim at the number of
    # arms whose recent average exceeds the threshold
    cap = min(b, max(a, int(budget)))
    hot = int(np.count_nonzero(ma.averages > spec.threshold)) if ma is not None else a
    return min(cap, max(a, hot))


def sample_arm_counts(spec, count, rng):
    """Vectorized batch of play counts for the stateless kinds.

    Same distribution per draw as ``sample_arm_count``; used by simulation
    loops to pre-commit the whole play-count sequence.  ``budget_threshold``
    is state-dependent and must be sampled round by round.
    """
    a, b = spec.a, spec.b
    if spec.kind == "constant":
        return np.full(count, spec.m, dtype=int)
    if spec.kind == "uniform_discrete":
        return a + rng.integers(0, b - a + 1, size=count)
    if spec.kind == "truncated_gaussian":
        lo, hi = a - 0.5, b + 0.5
        out = np.empty(count, dtype=int)
        filled = 0
        while filled < count:
            x = rng.normal(spec.mean, spec.std, size=max(count - filled, 64))
            x = x[(x >= lo) & (x <= hi)]
            take = min(x.size, count - filled)
            out[filled : filled + take] = np.clip(
                np.floor(x[:take] + 0.5).astype(int), a, b
            )
            filled += take
        return out
    raise InvalidSpecError(f"kind {spec.kind!r} cannot be batch-sampled")
