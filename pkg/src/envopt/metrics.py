"""Rewards, evaluation metrics and the shortest-path oracle they rely on."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import EnvironmentLayout
from .roadmap import Roadmap, path_length
from .trace import EpisodeTrace


@dataclass
class RewardConfig:
    beta: float | Sequence[float] = 0.5
    gamma: float = 0.99
    collision_penalty: float = -1.0
    energy_saving: bool = False
    speed_penalty_weight: float = 0.1

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta, float))
        if np.any((b < 0) | (b > 1)):
            raise ValueError("beta must lie in [0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.collision_penalty > 0 or self.speed_penalty_weight < 0:
            raise ValueError("penalties must be non-positive / weights non-negative")

    def beta_for(self, j: int) -> float:
        b = np.atleast_1d(np.asarray(self.beta, float))
        return float(b[0] if b.size == 1 else b[j])


def agent_progress_reward(position, goal, velocity) -> float:
    """Projection of the velocity on the unit vector pointing at the goal."""
    d = np.asarray(goal, float) - np.asarray(position, float)
    n = float(np.hypot(*d))
    if n == 0.0:
        return 0.0
    return float(d @ np.asarray(velocity, float)) / n


def local_reward(collided: bool, speed: float, cfg: RewardConfig) -> float:
    r = cfg.collision_penalty if collided else 0.0
    if cfg.energy_saving:
        r -= cfg.speed_penalty_weight * speed
    return r


def obstacle_reward(agent_rewards: Sequence[float], j: int, local: float, cfg: RewardConfig) -> float:
    team = float(np.mean(agent_rewards)) if len(agent_rewards) else 0.0
    return team + cfg.beta_for(j) * local


def obstacle_rewards(agent_rewards: Sequence[float], local: Sequence[float], cfg: RewardConfig) -> np.ndarray:
    """``obstacle_reward`` for every obstacle j at once (local[j] is obstacle j's term)."""
    team = float(np.mean(agent_rewards)) if len(agent_rewards) else 0.0
    beta = np.array([cfg.beta_for(j) for j in range(len(local))])
    return team + beta * np.asarray(local, float)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    g = 0.0
    for r in reversed(list(rewards)):
        g = r + gamma * g
    return g


def spl(trials) -> float:
    """Success weighted by path length over (success, shortest, traveled) triples."""
    trials = list(trials)
    if not trials:
        return 0.0
    total = 0.0
    for success, shortest, traveled in trials:
        if traveled < 0:
            raise ValueError("traveled distance cannot be negative")
        if success:
            total += shortest / max(traveled, shortest) if shortest > 0 else 1.0
    return total / len(trials)


def _agent_speed_ratios(trace: EpisodeTrace) -> np.ndarray:
    speeds = np.hypot(*np.moveaxis(trace.velocities, -1, 0))  # (T, n)
    out = np.empty(trace.n_agents)
    for i in range(trace.n_agents):
        k = trace.active_steps(i)
        out[i] = 1.0 if k == 0 else speeds[:k, i].mean() / trace.v_max[i]
    return np.clip(out, 0.0, 1.0)


def pct_speed(trace: EpisodeTrace) -> float:
    if trace.n_agents == 0:
        raise ValueError("empty trace")
    return float(_agent_speed_ratios(trace).mean())


def trial_tuples(trace: EpisodeTrace):
    traveled = trace.traveled()
    return [(bool(trace.success[i]), float(trace.shortest[i]), float(traveled[i])) for i in range(trace.n_agents)]


def team_reward_offline(trace: EpisodeTrace) -> float:
    """PCTSpeed plus the mean shortest/traveled ratio (failed agents add 0)."""
    return pct_speed(trace) + spl(trial_tuples(trace))


def shortest_path_length(
    layout: EnvironmentLayout, start, goal, radius: float, smooth: bool = True, spacing=None, roadmap=None
) -> float:
    """Shortest clearance-respecting path on the octile roadmap; inf if disconnected.

    With ``smooth`` the roadmap path is shortened by line-of-sight pulling.
    """
    rm = roadmap or Roadmap(layout.bounds, radius, spacing)
    if not smooth:
        return float(rm.distances(layout.obstacles, [(start, goal)])[0])
    (path,) = rm.paths(layout.obstacles, [(start, goal)])
    return math.inf if path is None else path_length(path)


def shortest_lengths(layout: EnvironmentLayout, starts, goals, radius: float, roadmap=None) -> np.ndarray:
    """Smoothed shortest lengths for every (start, goal); straight line when disconnected."""
    rm = roadmap or Roadmap(layout.bounds, radius)
    paths = rm.paths(layout.obstacles, list(zip(starts, goals)))
    out = []
    for s, g, p in zip(starts, goals, paths):
        out.append(path_length(p) if p is not None else float(np.hypot(*(np.asarray(g) - np.asarray(s)))))
    return np.array(out)


def trial_metrics(trace: EpisodeTrace) -> dict:
    return {
        "spl": spl(trial_tuples(trace)),
        "pct_speed": pct_speed(trace),
        "success_rate": float(trace.success.mean()),
        "obstacle_travel": trace.obstacle_travel(),
    }


METRICS = ("spl", "pct_speed", "success_rate", "obstacle_travel")


@dataclass
class MetricsReport:
    """Mean/std per metric across trials, optionally split by obstacle count."""

    rows: list[dict] = field(default_factory=list)

    @classmethod
    def from_trials(cls, trials: Sequence[dict], **keys) -> "MetricsReport":
        rep = cls()
        rep.add(trials, **keys)
        return rep

    def add(self, trials: Sequence[dict], **keys) -> None:
        for m in METRICS:
            vals = np.array([t[m] for t in trials], float)
            self.rows.append(
                {**keys, "metric": m, "mean": float(vals.mean()), "std": float(vals.std()), "n_trials": len(vals)}
            )

    def get(self, metric: str, **keys) -> dict:
        for r in self.rows:
            if r["metric"] == metric and all(r.get(k) == v for k, v in keys.items()):
                return r
        raise KeyError((metric, keys))

    def to_csv(self) -> str:
        extra = [k for k in (self.rows[0] if self.rows else {}) if k not in ("metric", "mean", "std", "n_trials")]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=[*extra, "metric", "mean", "std", "n_trials"], lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(json.loads(text)["rows"])
