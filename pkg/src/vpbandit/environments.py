"""Reward processes the learners face.

Three kinds: i.i.d. Bernoulli arms, replayed intrusion traces (either
ingested from a CAN-style CSV log or synthesized with the same burst
structure), and location-dependent payoff weights for the heterogeneous
game setting.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInputError,
    InvalidConfigError,
    RowParseError,
    SchemaError,
)

DEFAULT_ROUND_WINDOW = 0.25  # seconds per round when bucketing CAN logs

#: Column mapping for the common car-hacking CSV layout. All names can be
#: remapped; ``injected_value`` is the flag value marking injected messages.
CAR_HACKING_COLUMNS = {
    "timestamp": "Timestamp",
    "identity": "CAN_ID",
    "flag": "Flag",
    "injected_value": "T",
}


@dataclass
class BernoulliEnv:
    """Independent Bernoulli reward per arm per round."""

    means: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        if np.any(self.means < 0) or np.any(self.means > 1):
            raise InvalidConfigError("Bernoulli means must lie in [0, 1]")

    @property
    def n_arms(self):
        return self.means.size

    @classmethod
    def harmonic(cls, n_arms=10, top=0.75):
        """The decaying-means instance: mean of arm k is top / k."""
        return cls(means=top / np.arange(1, n_arms + 1))


def bernoulli_rewards(env, t, rng):
    """Reward vector for round ``t``: one independent draw per arm."""
    return (rng.random(env.n_arms) < env.means).astype(float)


@dataclass
class IntrusionTrace:
    """Binary attack indicators per round and arm, with arm identities."""

    indicators: np.ndarray  # (T, N) of 0/1
    arm_labels: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.indicators = np.asarray(self.indicators)
        if self.indicators.ndim != 2:
            raise InvalidConfigError("indicators must be a (rounds, arms) matrix")
        if len(self.arm_labels) != self.indicators.shape[1]:
            raise InvalidConfigError("arm_labels length must match indicator columns")
        if len(set(self.arm_labels)) != len(self.arm_labels):
            raise InvalidConfigError("arm_labels must be distinct")

    @property
    def n_rounds(self):
        return self.indicators.shape[0]

    @property
    def n_arms(self):
        return self.indicators.shape[1]

    def attack_density(self):
        """Fraction of rounds each arm is under attack."""
        return self.indicators.mean(axis=0)

    def save(self, matrix_path, sidecar_path):
        """Write the indicator matrix as CSV plus a key=value sidecar."""
        with open(matrix_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["round"] + [f"arm_{i}" for i in range(self.n_arms)])
            for t in range(self.n_rounds):
                writer.writerow([t] + [int(v) for v in self.indicators[t]])
        with open(sidecar_path, "w") as f:
            f.write(f"rounds={self.n_rounds}\n")
            f.write(f"arms={self.n_arms}\n")
            f.write("arm_labels=" + ";".join(str(s) for s in self.arm_labels) + "\n")
            for k in sorted(self.metadata):
                f.write(f"{k}={self.metadata[k]}\n")


def synthesize_intrusion_trace(
    n_arms,
    attacked,
    horizon,
    burst_length_range=(3.0, 5.0),
    round_window=DEFAULT_ROUND_WINDOW,
    n_bursts=300,
    rng=None,
):
    """Generate a trace with intermittent attack bursts on selected arms.

    Bursts (uniform length within ``burst_length_range`` seconds) are laid
    out per attacked arm with randomized gaps sized so roughly ``n_bursts``
    bursts in total fill the horizon.  ``n_bursts`` may also be a sequence
    with one count per attacked arm, for traces where one identity is hit
    much more often than another.  Only the attacked arms ever carry a
    nonzero indicator.
    """
    attacked = sorted(int(k) for k in attacked)
    if not attacked:
        raise InvalidConfigError("attacked arm set must be nonempty")
    if attacked[0] < 0 or attacked[-1] >= n_arms:
        raise InvalidConfigError("attacked arms must be valid indices")
    lo, hi = burst_length_range
    if lo <= 0 or hi < lo:
        raise InvalidConfigError("burst length range must be positive and ordered")
    duration = horizon * round_window
    if np.isscalar(n_bursts):
        per_arm_counts = [max(1, int(n_bursts) // len(attacked))] * len(attacked)
    else:
        per_arm_counts = [int(c) for c in n_bursts]
        if len(per_arm_counts) != len(attacked) or min(per_arm_counts) < 1:
            raise InvalidConfigError("need one positive burst count per attacked arm")
    mean_burst = 0.5 * (lo + hi)
    indicators = np.zeros((horizon, n_arms), dtype=np.int8)
    for arm, per_arm in zip(attacked, per_arm_counts):
        mean_gap = max(0.0, duration - per_arm * mean_burst) / per_arm
        t = rng.uniform(0.0, 1.0) * mean_gap
        while t < duration:
            length = rng.uniform(lo, hi)
            first = int(t / round_window)
            last = min(horizon - 1, int((t + length) / round_window))
            indicators[first : last + 1, arm] = 1
            t += length + rng.uniform(0.5, 1.5) * mean_gap
    meta = {
        "source": "synthetic",
        "round_window_s": round_window,
        "burst_length_s": f"{lo}-{hi}",
        "attacked_arms": ";".join(str(a) for a in attacked),
    }
    return IntrusionTrace(
        indicators=indicators,
        arm_labels=[f"arm_{i}" for i in range(n_arms)],
        metadata=meta,
    )


def ingest_can_log(path, column_map=None, round_window=DEFAULT_ROUND_WINDOW):
    """Bucket a CAN-style CSV log into fixed-width rounds.

    The file must have a header row; ``column_map`` names the timestamp,
    identity, and flag columns plus the flag value marking injected rows.
    One arm per distinct identity (sorted lexicographically); a round's
    indicator is 1 iff it contains at least one injected row for that
    identity.
    """
    cmap = dict(CAR_HACKING_COLUMNS)
    if column_map:
        cmap.update(column_map)
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for key in ("timestamp", "identity", "flag"):
            if cmap[key] not in header:
                raise SchemaError(f"missing column {cmap[key]!r} (for {key})")
        for line_no, row in enumerate(reader, start=2):
            raw_ts = row[cmap["timestamp"]]
            try:
                ts = float(raw_ts)
            except (TypeError, ValueError):
                raise RowParseError(line_no, f"unparseable timestamp {raw_ts!r}")
            ident = row[cmap["identity"]]
            injected = row[cmap["flag"]] == cmap["injected_value"]
            rows.append((ts, ident, injected))
    if not rows:
        raise EmptyInputError(f"{path} contains no data rows")
    t0 = min(ts for ts, _, _ in rows)
    labels = sorted({ident for _, ident, _ in rows})
    col = {ident: i for i, ident in enumerate(labels)}
    n_rounds = int((max(ts for ts, _, _ in rows) - t0) / round_window) + 1
    indicators = np.zeros((n_rounds, len(labels)), dtype=np.int8)
    for ts, ident, injected in rows:
        if injected:
            indicators[int((ts - t0) / round_window), col[ident]] = 1
    meta = {
        "source": str(path),
        "round_window_s": round_window,
        "n_rows": len(rows),
        "attack_density_mean": float(indicators.mean()),
    }
    return IntrusionTrace(indicators=indicators, arm_labels=labels, metadata=meta)


@dataclass
class PayoffProfile:
    """Location-dependent payoff weights, canonicalized to non-increasing order.

    ``order[k]`` maps the canonical position k back to the original arm index.
    """

    mu: np.ndarray
    order: np.ndarray = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if np.any(mu <= 0) or np.any(mu > 1):
            raise InvalidConfigError("payoffs must lie in (0, 1]")
        if self.order is None:
            self.order = np.argsort(-mu, kind="stable")
            mu = mu[self.order]
        self.mu = mu

    @property
    def n_arms(self):
        return self.mu.size

    @classmethod
    def homogeneous(cls, n_arms, value=1.0):
        return cls(mu=np.full(n_arms, float(value)))


def heterogeneous_payoff(profile, base_reward, arm):
    """Payoff-weighted reward for one arm (canonical index)."""
    return float(profile.mu[arm]) * float(base_reward)


def defender_round_payoff(profile, chosen, base_rewards):
    """Sum of payoff-weighted rewards over the scanned set."""
    chosen = list(chosen)
    return float(np.sum(profile.mu[chosen] * np.asarray(base_rewards)[chosen]))
