import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from envopt.metrics import (
    MetricsReport, RewardConfig, agent_progress_reward, discounted_return, local_reward, obstacle_reward,
    obstacle_rewards, pct_speed, spl, team_reward_offline, trial_metrics,
)
from envopt.trace import EpisodeTrace


def line_trace(speeds, steps=10, arrive=None, shortest=None):
    """Agents moving along +x at constant speed; ``arrive[i]`` is the arrival step or -1."""
    n = len(speeds)
    v = np.zeros((steps, n, 2))
    v[:, :, 0] = speeds
    pos = np.concatenate([np.zeros((1, n, 2)), np.cumsum(v, 0)])
    arrive = np.array(arrive if arrive is not None else [steps] * n)
    travel = np.array([speeds[i] * (arrive[i] if arrive[i] >= 0 else steps) for i in range(n)])
    short = np.array(shortest if shortest is not None else np.maximum(travel, 1e-9))
    return EpisodeTrace(pos, v, pos[-1], np.full(n, 0.3), np.full(n, 0.1), np.zeros((steps + 1, 0, 4)), arrive,
                        short)


def test_progress_reward_examples():
    assert agent_progress_reward((0, 0), (1, 0), (0.1, 0)) == pytest.approx(0.1)
    assert agent_progress_reward((0, 0), (1, 0), (0, 0.1)) == 0.0
    assert agent_progress_reward((0, 0), (1, 0), (-0.1, 0)) == pytest.approx(-0.1)
    assert agent_progress_reward((2, 2), (2, 2), (0.1, 0)) == 0.0


def test_team_reward_offline_examples():
    assert team_reward_offline(line_trace([0.1, 0.1])) == pytest.approx(2.0)
    assert team_reward_offline(line_trace([0.0, 0.0], arrive=[-1, -1], shortest=[3, 3])) == 0.0
    mixed = line_trace([0.1, 0.0], arrive=[10, -1], shortest=[1.0, 2.0])
    assert team_reward_offline(mixed) == pytest.approx(1.0)


def test_obstacle_reward_examples():
    cfg = RewardConfig(beta=0.5)
    assert obstacle_reward([0.2, 0.4], 0, -1.0, cfg) == pytest.approx(-0.2)
    assert obstacle_reward([0.2, 0.4], 0, -1.0, RewardConfig(beta=0.0)) == pytest.approx(0.3)
    assert obstacle_reward([0.0, 0.0], 0, 0.0, cfg) == 0.0
    per = RewardConfig(beta=[0.0, 1.0])
    np.testing.assert_allclose(obstacle_rewards([1.0], [-1.0, -1.0], per), [1.0, 0.0])


def test_discounted_return_examples():
    assert discounted_return([1, 1, 1], 0.5) == 1.75
    assert discounted_return([3, 5, 7], 0.0) == 3
    rng = np.random.default_rng(0)
    r = rng.normal(size=100)
    brute = sum(r[t] * 0.97 ** t for t in range(100))
    assert abs(discounted_return(r, 0.97) - brute) <= 1e-12
    with pytest.raises(ValueError):
        discounted_return([1], 1.5)


def test_spl_examples():
    assert spl([(True, 10, 10)]) == 1.0
    assert spl([(False, 10, 10)]) == 0.0
    assert spl([(True, 10, 20)]) == 0.5
    assert spl([(True, 10, 20), (False, 3, 1)]) == 0.25
    with pytest.raises(ValueError):
        spl([(True, 1, -1)])


def test_pct_speed_examples():
    assert pct_speed(line_trace([0.1])) == pytest.approx(1.0)
    assert pct_speed(line_trace([0.0], arrive=[-1], shortest=[1])) == 0.0
    assert pct_speed(line_trace([0.05, 0.05])) == pytest.approx(0.5)
    # speed is averaged only until arrival
    v = np.zeros((10, 1, 2))
    v[:4, 0, 0] = 0.1
    pos = np.concatenate([np.zeros((1, 1, 2)), np.cumsum(v, 0)])
    tr = EpisodeTrace(pos, v, pos[4], np.full(1, 0.3), np.full(1, 0.1), np.zeros((11, 0, 4)), np.array([4]),
                      np.array([0.4]))
    assert pct_speed(tr) == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.floats(0.01, 50), st.floats(0, 100)), min_size=1, max_size=20))
def test_spl_bounded_by_success_rate(trials):
    s = spl(trials)
    assert 0.0 <= s <= 1.0
    assert s <= np.mean([t[0] for t in trials]) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 0.1), min_size=1, max_size=5), st.integers(1, 30), st.data())
def test_trial_metrics_ranges(speeds, steps, data):
    arrive = [data.draw(st.integers(-1, steps)) for _ in speeds]
    m = trial_metrics(line_trace(speeds, steps, arrive, shortest=[0.5] * len(speeds)))
    assert 0 <= m["spl"] <= m["success_rate"] + 1e-12 <= 1 + 1e-12
    assert 0 <= m["pct_speed"] <= 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1), max_size=6), st.floats(0, 1), st.floats(-5, 5), st.floats(-5, 5))
def test_obstacle_reward_is_linear_in_local(agents, beta, a, b):
    cfg = RewardConfig(beta=beta)
    ra, rb = obstacle_reward(agents, 0, a, cfg), obstacle_reward(agents, 0, b, cfg)
    assert ra - rb == pytest.approx(beta * (a - b), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), max_size=50))
def test_undiscounted_return_is_sum(r):
    assert discounted_return(r, 1.0) == pytest.approx(math.fsum(r), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.booleans(), st.floats(0, 0.1), st.floats(0.001, 5))
def test_energy_saving_local_reward_never_exceeds_vanilla(hit, speed, w):
    vanilla = local_reward(hit, speed, RewardConfig())
    saving = local_reward(hit, speed, RewardConfig(energy_saving=True, speed_penalty_weight=w))
    assert saving <= vanilla


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(beta=1.5)
    with pytest.raises(ValueError):
        RewardConfig(gamma=-0.1)
    with pytest.raises(ValueError):
        RewardConfig(collision_penalty=1.0)


def test_metrics_report_serialisation():
    trials = [{"spl": 1.0, "pct_speed": 0.5, "success_rate": 1.0, "obstacle_travel": 0.0},
              {"spl": 0.5, "pct_speed": 0.7, "success_rate": 0.5, "obstacle_travel": 2.0}]
    rep = MetricsReport.from_trials(trials, m_obstacles=10)
    row = rep.get("spl", m_obstacles=10)
    assert row["mean"] == 0.75 and row["std"] == 0.25 and row["n_trials"] == 2
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert list(rows[0]) == ["m_obstacles", "metric", "mean", "std", "n_trials"]
    assert len(rows) == 4
    assert MetricsReport.from_json(rep.to_json()).rows == rep.rows
