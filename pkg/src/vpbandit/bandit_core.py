"""Exponential-weight learners with variable plays.

The multi-play learner keeps one positive weight per arm, caps the largest
weights so that no selection marginal exceeds 1, samples a subset of arms by
dependent rounding, and updates weights multiplicatively from
importance-weighted reward estimates.  A single-play exponential-weight
learner (weights kept as cumulative rewards, "hedge" form) is included for
the opponent side.

All randomness comes from an explicitly passed ``numpy.random.Generator``;
there is no global RNG use anywhere in this module.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidMarginalsError,
    InvalidPlayCountError,
    InvalidRewardError,
    InvalidTargetError,
    NumericPathologyError,
)

MARGINAL_SUM_TOL = 1e-9

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional speedup
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco if not (args and callable(args[0])) else args[0]


# ---------------------------------------------------------------------------
# state containers


@dataclass
class WeightState:
    """Per-arm weights of the multi-play learner plus its exploration rate."""

    weights: np.ndarray
    eta: float
    round: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.validate()

    def validate(self):
        w = self.weights
        if w.ndim != 1 or w.size < 2:
            raise ValueError("need at least 2 arms")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be strictly positive and finite")
        # eta = 0 (no exploration mixing) is a legitimate edge: the marginals
        # reduce to pure weight proportions and the update becomes the identity
        if not (0.0 <= self.eta < 1.0):
            raise ValueError("eta must lie in [0, 1)")
        if self.round < 0:
            raise ValueError("round must be nonnegative")

    @property
    def n_arms(self):
        return self.weights.size

    @classmethod
    def initial(cls, n_arms, eta):
        return cls(weights=np.ones(n_arms), eta=eta)


@dataclass
class Marginals:
    """Selection marginals for one round: sum to ``m``, capped arms at 1."""

    probs: np.ndarray
    capped: frozenset
    m: int

    def validate(self):
        if abs(float(self.probs.sum()) - self.m) > MARGINAL_SUM_TOL:
            raise InvalidMarginalsError(
                f"marginals sum to {self.probs.sum()!r}, expected {self.m}"
            )
        for i in self.capped:
            if self.probs[i] != 1.0:
                raise InvalidMarginalsError(f"capped arm {i} has prob {self.probs[i]!r}")


@dataclass
class RoundOutcome:
    """Chosen arms, their observed rewards, and the full estimate vector."""

    chosen: frozenset
    observed: dict
    estimates: np.ndarray


@dataclass
class HedgeState:
    """Cumulative (estimated) rewards of the single-play learner."""

    cumulative: np.ndarray
    iota: float

    def __post_init__(self):
        self.cumulative = np.asarray(self.cumulative, dtype=float)
        if self.iota <= 0:
            raise ValueError("iota must be positive")

    @property
    def n_arms(self):
        return self.cumulative.size

    @classmethod
    def initial(cls, n_arms, iota):
        return cls(cumulative=np.zeros(n_arms), iota=iota)


# ---------------------------------------------------------------------------
# weight capping


def cap_threshold(weights, target):
    """Find the cap value kappa and the set of arms at or above it.

    kappa solves  kappa / (sum_capped kappa + sum_rest w_i) = target,
    where the capped set is {i : w_i >= kappa}.  Scans cap-set sizes in
    decreasing weight order and accepts the unique consistent size.

    Returns ``(kappa, capped_indices)`` with indices into the original order.
    """
    if not (0.0 < target < 1.0):
        raise InvalidTargetError(f"target must be in (0, 1), got {target}")
    w = np.asarray(weights, dtype=float)
    order = np.argsort(-w, kind="stable")
    ws = w[order]
    n = ws.size
    # suffix[m] = sum of ws[m:]
    suffix = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])
    for m in range(1, n + 1):
        if m * target >= 1.0:
            break
        kappa = target * suffix[m] / (1.0 - m * target)
        below = ws[m] if m < n else -math.inf
        if ws[m - 1] >= kappa > below:
            capped = np.sort(order[:m])
            return kappa, capped
    raise NumericPathologyError(
        "no consistent cap size found; check the capping precondition and weights"
    )


def marginals_from_weights(state, m):
    """Selection marginals for playing ``m`` of the ``N`` arms.

    Large weights are capped so every marginal stays at most 1; the
    remaining probability mass is mixed with uniform exploration eta/N.
    """
    n = state.n_arms
    if not 1 <= m < n:
        raise InvalidPlayCountError(f"m must satisfy 1 <= m < {n}, got {m}")
    w = state.weights
    eta = state.eta
    total = float(w.sum())
    c = (1.0 / m - eta / n) / (1.0 - eta)
    if float(w.max()) >= c * total:
        kappa, capped_idx = cap_threshold(w, c)
        wp = w.copy()
        wp[capped_idx] = kappa
        capped = frozenset(int(i) for i in capped_idx)
    else:
        wp = w
        capped = frozenset()
    probs = wp * (m * (1.0 - eta) / float(wp.sum()))
    probs += m * eta / n
    if capped:
        # algebraically exactly 1; pin it so downstream code can rely on it
        probs[list(capped)] = 1.0
    return Marginals(probs=probs, capped=capped, m=m)


# ---------------------------------------------------------------------------
# dependent rounding

_SNAP = 1e-11


@njit(cache=True)
def _next_fractional(p, start):
    i = start
    while i < p.shape[0] and (p[i] <= 0.0 or p[i] >= 1.0):
        i += 1
    return i


@njit(cache=True)
def _depround_kernel(p, u):
    """Pair-fixing loop; mutates p to a 0/1 vector with the same sum."""
    n = p.shape[0]
    for k in range(n):
        if p[k] < _SNAP:
            p[k] = 0.0
        elif p[k] > 1.0 - _SNAP:
            p[k] = 1.0
    i = _next_fractional(p, 0)
    j = _next_fractional(p, i + 1) if i < n else n
    k = 0
    while i < n and j < n and k < u.shape[0]:
        rho = min(1.0 - p[i], p[j])
        zeta = min(p[i], 1.0 - p[j])
        if u[k] * (rho + zeta) < zeta:
            p[i] += rho
            p[j] -= rho
        else:
            p[i] -= zeta
            p[j] += zeta
        k += 1
        if p[i] < _SNAP:
            p[i] = 0.0
        elif p[i] > 1.0 - _SNAP:
            p[i] = 1.0
        if p[j] < _SNAP:
            p[j] = 0.0
        elif p[j] > 1.0 - _SNAP:
            p[j] = 1.0
        i_frac = 0.0 < p[i] < 1.0
        j_frac = 0.0 < p[j] < 1.0
        if i_frac and j_frac:
            continue  # numerically possible only in pathological cases
        if i_frac:
            j = _next_fractional(p, j + 1)
        elif j_frac:
            i = j
            j = _next_fractional(p, j + 1)
        else:
            i = _next_fractional(p, j + 1)
            j = _next_fractional(p, i + 1) if i < n else n
    # at most one fractional entry can survive (floating-point drift); round it
    for k in range(n):
        if 0.0 < p[k] < 1.0:
            p[k] = 1.0 if p[k] >= 0.5 else 0.0


def dep_round(m, probs, rng, validate=True):
    """Sample exactly ``m`` distinct arm indices with the given marginals.

    ``probs`` must lie in [0, 1] and sum to ``m``.  Each arm lands in the
    output with probability exactly ``probs[i]``; arms at 1 are always
    included and arms at 0 never.  Pairs are always the two lowest-indexed
    fractional entries, so the draw is a deterministic function of the
    supplied generator.

    ``validate=False`` skips the input checks for callers that constructed
    the marginals themselves (the learner's inner loop).
    """
    p = np.array(probs, dtype=float)
    n = p.size
    if validate:
        if m >= n:
            raise InvalidPlayCountError(f"m must be < {n}, got {m}")
        if abs(float(p.sum()) - m) > MARGINAL_SUM_TOL:
            raise InvalidMarginalsError(f"marginals sum to {p.sum()!r}, expected {m}")
        if np.any(p < -MARGINAL_SUM_TOL) or np.any(p > 1.0 + MARGINAL_SUM_TOL):
            raise InvalidMarginalsError("marginals must lie in [0, 1]")
    _depround_kernel(p, rng.random(n - 1))
    out = np.flatnonzero(p == 1.0)
    if out.size != m:
        raise InvalidMarginalsError(
            f"dependent rounding produced {out.size} arms instead of {m}"
        )
    return out


def dep_round_many(m, probs, draws, rng):
    """Repeated ``dep_round`` draws as a (draws, N) 0/1 matrix.

    Runs the same pair-fixing kernel on a batch of uniform rows, consuming
    randomness exactly as ``draws`` sequential calls would.
    """
    p = np.asarray(probs, dtype=float)
    if abs(float(p.sum()) - m) > MARGINAL_SUM_TOL:
        raise InvalidMarginalsError(f"marginals sum to {p.sum()!r}, expected {m}")
    u = rng.random((draws, p.size - 1))
    out = np.empty((draws, p.size))
    _depround_batch(p, u, out)
    counts = out.sum(axis=1)
    if np.any(counts != m):
        raise InvalidMarginalsError("dependent rounding produced a wrong-size set")
    return out


@njit(cache=True)
def _depround_batch(p, u, out):
    for r in range(u.shape[0]):
        row = p.copy()
        _depround_kernel(row, u[r])
        out[r] = row


# ---------------------------------------------------------------------------
# multi-play round


def exp3mvp_round(state, m, reward_oracle, rng):
    """One full round of the variable-play learner.

    Computes marginals, draws the arm set, queries ``reward_oracle`` (a
    callable mapping the chosen index array to a dict arm -> reward in
    [0, 1]), forms importance-weighted estimates, and applies the
    multiplicative update to the uncapped arms.  Weights are rescaled so the
    maximum is 1 to keep them bounded over long horizons (the marginals are
    scale invariant, so this does not change behavior).

    Returns ``(RoundOutcome, new WeightState)``.
    """
    marg = marginals_from_weights(state, m)
    chosen = dep_round(m, marg.probs, rng)
    observed = reward_oracle(chosen)
    n = state.n_arms
    estimates = np.zeros(n)
    new_w = state.weights.copy()
    coef = m * state.eta / n
    for i in chosen:
        i = int(i)
        y = float(observed[i])
        if not 0.0 <= y <= 1.0:
            raise InvalidRewardError(f"reward {y} for arm {i} outside [0, 1]")
        yhat = y / marg.probs[i]
        estimates[i] = yhat
        if i not in marg.capped:
            new_w[i] *= math.exp(coef * yhat)
    new_w /= new_w.max()
    out = RoundOutcome(
        chosen=frozenset(int(i) for i in chosen),
        observed={int(i): float(observed[int(i)]) for i in chosen},
        estimates=estimates,
    )
    return out, WeightState(weights=new_w, eta=state.eta, round=state.round + 1)


# ---------------------------------------------------------------------------
# single-play learner (hedge form)


def hedge_distribution(state):
    """Sampling distribution proportional to (1 + iota) ** cumulative_reward.

    The maximum cumulative reward is subtracted before exponentiation so the
    result is stable for arbitrarily large cumulative values.
    """
    g = state.cumulative * math.log1p(state.iota)
    g = g - g.max()
    e = np.exp(g)
    return e / e.sum()


def exp3_round(hedge, eta, reward_oracle, rng):
    """One round of the single-play learner with exploration mixing.

    Samples an arm from ``(1 - eta) * beta + eta / N``, observes its reward
    via ``reward_oracle(arm)``, and feeds the scaled one-hot estimate
    ``(eta / N) * x / p`` back into the cumulative rewards.

    Returns ``(RoundOutcome, new HedgeState)``.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    n = hedge.n_arms
    beta = hedge_distribution(hedge)
    beta_hat = (1.0 - eta) * beta + eta / n
    arm = int(np.searchsorted(np.cumsum(beta_hat), rng.random()))
    arm = min(arm, n - 1)
    x = float(reward_oracle(arm))
    if not 0.0 <= x <= 1.0:
        raise InvalidRewardError(f"reward {x} outside [0, 1]")
    xhat = (eta / n) * x / beta_hat[arm]
    cumulative = hedge.cumulative.copy()
    cumulative[arm] += xhat
    estimates = np.zeros(n)
    estimates[arm] = xhat
    out = RoundOutcome(chosen=frozenset([arm]), observed={arm: x}, estimates=estimates)
    return out, HedgeState(cumulative=cumulative, iota=hedge.iota)
