"""Acceptance suite: one end-to-end check per delivery criterion.

Heavier than the unit tests (the equilibrium run plays two million rounds);
everything is seeded, so each check is deterministic.
"""

import itertools
import json
import math
import os

import mpmath
import numpy as np
import pytest

from vpbandit import cli
from vpbandit.analysis import (
    corollary11_eta,
    equilibrium_values,
    g_max,
    kstar_interval,
    pseudo_regret,
    theorem1_bound,
    theorem2_bounds,
)
from vpbandit.bandit_core import WeightState, dep_round_many, marginals_from_weights
from vpbandit.environments import BernoulliEnv, PayoffProfile, synthesize_intrusion_trace
from vpbandit.game import GameConfig, SinglePlayerSpec, run_comparison, run_game, run_game_replicas
from vpbandit.scaling import ScalingSpec

mpmath.mp.dps = 50


# ---------------------------------------------------------------------------
# equilibrium of the two-player game


def test_equilibrium_of_the_two_player_game():
    # ten locations, truncated-Gaussian play counts on [1, 3] with mean 2:
    # long-run averages must settle at (N - nu)/N = 0.8 for the attacker and
    # nu/N = 0.2 for the defender
    config = GameConfig(
        n_arms=10,
        horizon=100_000,
        scaling=ScalingSpec.truncated_gaussian(1, 3, mean=2.0, std=0.8),
        seed=2024,
    )
    traces = run_game_replicas(config, 20)
    att = float(np.mean([t.attacker_reward[-20_000:].mean() for t in traces]))
    dfd = float(np.mean([t.defender_reward[-20_000:].mean() for t in traces]))
    d_eq, a_eq = equilibrium_values(10, 2)
    assert abs(att - a_eq) <= 0.03
    assert abs(dfd - d_eq) <= 0.03


# ---------------------------------------------------------------------------
# regret stays under the closed-form ceiling; weights concentrate


@pytest.fixture(scope="module")
def harmonic_regret_report():
    spec = SinglePlayerSpec(
        env=BernoulliEnv.harmonic(10),
        scaling=ScalingSpec.uniform(1, 3),
        eta=0.1,
        horizon=20_000,
    )
    return pseudo_regret(
        spec, 10, np.random.default_rng(7), record_weights=True
    )


def test_mean_regret_stays_below_the_bound(harmonic_regret_report):
    report = harmonic_regret_report
    assert np.all(report.regret_mean <= report.bound + 1e-9)


def test_weights_concentrate_on_the_top_arms(harmonic_regret_report):
    report = harmonic_regret_report
    top_share = report.weights_mean[:, :3].sum(axis=1)
    assert np.all(top_share[15_000:] >= 0.8)


# ---------------------------------------------------------------------------
# fixed-play and variable-play learners on an intrusion trace


def test_variable_play_matches_fixed_play_on_a_trace():
    rng = np.random.default_rng(3)
    trace = synthesize_intrusion_trace(
        n_arms=26,
        attacked=(3, 17),
        horizon=7_000,
        n_bursts=(280, 12),
        rng=rng,
    )
    curves = run_comparison(trace, rng, eta=0.2)
    finals = {name: float(c[-1]) for name, c in curves.items()}
    vp, fixed = finals["exp3mvp"], finals["exp3m"]
    assert abs(vp - fixed) / max(vp, fixed) < 0.10
    single_best = max(finals["exp3"], finals["ucb1"], finals["epsilon_greedy"])
    assert min(vp, fixed) > single_best


# ---------------------------------------------------------------------------
# dependent rounding marginals


def test_dependent_rounding_marginals_match():
    rng = np.random.default_rng(11)
    draws = 100_000
    for _ in range(50):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(1, n))
        weights = rng.uniform(0.05, 5.0, size=n)
        eta = float(rng.uniform(0.0, 0.5))
        p = marginals_from_weights(WeightState(weights=weights, eta=eta), m).probs
        sets = dep_round_many(m, p, draws, rng)
        assert np.all(sets.sum(axis=1) == m)
        freq = sets.mean(axis=0)
        sigma = np.sqrt(p * (1.0 - p) / draws)
        assert np.all(np.abs(freq - p) <= 3.0 * sigma + 1e-12)


# ---------------------------------------------------------------------------
# marginal sums over random weight states


def test_marginals_sum_to_the_play_count():
    rng = np.random.default_rng(13)
    for _ in range(10_000):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(1, n))
        weights = np.exp(rng.uniform(-8.0, 8.0, size=n))
        eta = float(rng.uniform(0.0, 0.95))
        marg = marginals_from_weights(WeightState(weights=weights, eta=eta), m)
        assert abs(marg.probs.sum() - m) <= 1e-9
        for i in marg.capped:
            assert marg.probs[i] == 1.0


# ---------------------------------------------------------------------------
# hindsight optimum against exhaustive search


def test_hindsight_optimum_equals_brute_force():
    # integer rewards keep both sides' sums exact, so the comparison can be
    # an equality rather than a tolerance
    rng = np.random.default_rng(17)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        horizon = int(rng.integers(1, 9))
        b = int(rng.integers(1, min(3, n - 1) + 1))
        y = rng.integers(0, 4, size=(horizon, n)).astype(float)
        m = rng.integers(1, b + 1, size=horizon)
        value, _ = g_max(y, m)
        best = -1.0
        for ranking in itertools.permutations(range(n), int(m.max())):
            total = sum(y[t, list(ranking[: m[t]])].sum() for t in range(horizon))
            best = max(best, total)
        assert value == best


# ---------------------------------------------------------------------------
# support-size optimum against a simplex grid


def _grid_objective(d, mu, c):
    """Attack value of mixed strategies d: payoff mass minus what the best
    fixed c-subset of scanners takes back.  d has shape (batch, N)."""
    g = d * mu
    top_c = np.sort(g, axis=1)[:, -c:].sum(axis=1)
    return g.sum(axis=1) - top_c


def _grid_oracle_upper(mu, c, final_step=1e-4):
    """Maximize the attack value over the probability simplex by zooming
    grids: a coarse pass, then finer passes in a box around the incumbent.
    The objective is concave (a minimum of linear functions), so the zoom
    cannot get trapped away from the optimum."""
    n = mu.size
    step = 1.0 / 25.0
    center = np.full(n, 1.0 / n)
    radius = 1.0  # first pass covers the whole simplex
    while True:
        lo = np.maximum(center - radius, 0.0)
        hi = np.minimum(center + radius, 1.0)
        axes = [np.arange(lo[k], hi[k] + step / 2, step) for k in range(n - 1)]
        mesh = np.meshgrid(*axes, indexing="ij")
        d = np.stack([g.ravel() for g in mesh], axis=1)
        last = 1.0 - d.sum(axis=1)
        keep = last >= -1e-12
        d = np.column_stack([d[keep], np.clip(last[keep], 0.0, None)])
        vals = _grid_objective(d, mu, c)
        best = int(np.argmax(vals))
        center = d[best]
        if step <= final_step:
            return float(vals[best])
        radius = 4.0 * step
        step = max(final_step, step / 5.0)


def test_support_size_optimum_matches_grid_search():
    rng = np.random.default_rng(19)
    for _ in range(50):
        n = int(rng.integers(3, 6))
        mu = np.sort(rng.uniform(0.1, 1.0, size=n))[::-1]
        a = int(rng.integers(1, n - 1))
        b = int(rng.integers(a, n))
        prof = PayoffProfile(mu=mu)
        interval = kstar_interval(prof, a, b)
        assert abs(interval.upper - _grid_oracle_upper(mu, a)) <= 2e-3
    # homogeneous payoffs collapse to the flat-interval formulas exactly
    for n, a, b in ((10, 1, 3), (6, 2, 4), (4, 1, 2)):
        flat = kstar_interval(PayoffProfile.homogeneous(n, 1.0), a, b)
        lo, hi = theorem2_bounds(n, a, b)
        assert flat.lower == lo and flat.upper == hi


# ---------------------------------------------------------------------------
# heterogeneous game rewards stay inside the predicted interval


def test_heterogeneous_game_reward_containment():
    rng = np.random.default_rng(23)
    for k in range(10):
        mu = np.sort(rng.uniform(0.4, 1.0, size=10))[::-1]
        prof = PayoffProfile(mu=mu)
        interval = kstar_interval(prof, 1, 3)
        config = GameConfig(
            n_arms=10,
            horizon=60_000,
            scaling=ScalingSpec.truncated_gaussian(1, 3, mean=2.0, std=0.8),
            payoff=prof,
            seed=500 + k,
        )
        trace = run_game(config)
        measured = float(trace.attacker_reward[-20_000:].mean())
        assert interval.lower - 0.02 <= measured <= interval.upper + 0.02


# ---------------------------------------------------------------------------
# closed forms against 50-digit arithmetic


def test_closed_forms_match_high_precision_evaluation():
    rng = np.random.default_rng(29)
    e = mpmath.e
    for _ in range(100):
        n = int(rng.integers(3, 40))
        a = int(rng.integers(1, n - 1))
        b = int(rng.integers(a, n))
        nu = int(rng.integers(1, n))
        horizon = int(rng.integers(10, 10**7))
        eta = float(rng.uniform(0.001, 1.0))
        gmax = float(rng.uniform(0.0, 1e5))
        mn, ma, mb, mt = mpmath.mpf(n), mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(horizon)

        ref = (1 + (e - 2) * mb / ma) * mpmath.mpf(eta) * mpmath.mpf(gmax) + (
            mn / mpmath.mpf(eta)
        ) * mpmath.log(mn / mb)
        got = theorem1_bound(gmax, n, a, b, eta)
        assert abs(got - float(ref)) <= 1e-12 * max(1.0, abs(float(ref)))

        ref_eta = min(
            mpmath.mpf(1),
            mpmath.sqrt(mn * ma * mpmath.log(mn / mb) / ((ma + (e - 2) * mb) * mb * mt)),
        )
        ref_ceiling = 2 * mpmath.sqrt(1 + (e - 2) * mb / ma) * mpmath.sqrt(
            mb * mt * mn * mpmath.log(mn / mb)
        )
        got_eta, got_ceiling = corollary11_eta(n, a, b, horizon)
        assert abs(got_eta - float(ref_eta)) <= 1e-12 * max(1.0, float(ref_eta))
        assert abs(got_ceiling - float(ref_ceiling)) <= 1e-12 * float(ref_ceiling)

        got_d, got_a = equilibrium_values(n, nu)
        assert abs(got_d - float(mpmath.mpf(nu) / mn)) <= 1e-12
        assert abs(got_a - float((mn - nu) / mn)) <= 1e-12

        lo, hi = theorem2_bounds(n, a, b)
        assert abs(lo - float((mn - mb) / mn)) <= 1e-12
        assert abs(hi - float((mn - ma) / mn)) <= 1e-12


# ---------------------------------------------------------------------------
# experiment runs are reproducible byte for byte


def test_experiments_rerun_byte_identically(tmp_path):
    configs = [
        {
            "schema_version": 1,
            "kind": "game",
            "seed": 99,
            "n": 8,
            "horizon": 600,
            "scaling": {"kind": "truncated_gaussian", "a": 1, "b": 3, "mean": 2.0, "std": 0.8},
            "replicas": 2,
        },
        {
            "schema_version": 1,
            "kind": "single_player",
            "seed": 99,
            "environment": {"type": "harmonic_bernoulli", "n_arms": 6},
            "scaling": {"kind": "uniform_discrete", "a": 1, "b": 3},
            "eta": 0.1,
            "horizon": 400,
            "replicas": 2,
            "record_weights": True,
        },
    ]
    for idx, cfg in enumerate(configs):
        outs = []
        for rep in ("x", "y"):
            out = tmp_path / f"{idx}_{rep}"
            assert cli.run_experiment(cfg, str(out)) == 0
            data = {}
            for name in sorted(os.listdir(out)):
                if name.endswith(".csv"):
                    with open(out / name, "rb") as f:
                        data[name] = f.read()
            outs.append(data)
        assert outs[0].keys() == outs[1].keys()
        assert outs[0] == outs[1]
