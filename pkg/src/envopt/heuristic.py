"""Centralized heuristic: move obstacles that lie on agents' shortest paths.

Obstacle j blocks agent i when deleting j strictly shortens agent i's
roadmap shortest path (or makes an unreachable goal reachable).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discrete_env import AGENT_RADIUS, GridAction, GridWorld, apply_move
from .geometry import EnvironmentLayout, Rect, overlaps, Disk
from .roadmap import get_roadmap

_TOL = 1e-9


@dataclass
class RoundInfo:
    checks: int = 0
    moved: list = field(default_factory=list)
    stuck: list = field(default_factory=list)


def _pairs(starts, goals):
    return [(np.asarray(s, float), np.asarray(g, float)) for s, g in zip(starts, goals)]


def blocked_agents(layout: EnvironmentLayout, j: int, starts, goals, radius: float, roadmap=None, base=None) -> list[int]:
    rm = roadmap or get_roadmap(layout.bounds, radius)
    pairs = _pairs(starts, goals)
    if base is None:
        base = rm.distances(layout.obstacles, pairs)
    without = rm.distances(layout.obstacles[:j] + layout.obstacles[j + 1:], pairs)
    return [i for i in range(len(pairs)) if without[i] < base[i] - _TOL]


def blocking_obstacles(layout: EnvironmentLayout, starts, goals, radius: float, roadmap=None) -> dict[int, list[int]]:
    """Map obstacle index -> agents it blocks (only blocking obstacles appear)."""
    rm = roadmap or get_roadmap(layout.bounds, radius)
    base = rm.distances(layout.obstacles, _pairs(starts, goals))
    report = {}
    for j in range(len(layout.obstacles)):
        hit = blocked_agents(layout, j, starts, goals, radius, rm, base)
        if hit:
            report[j] = hit
    return report


def _grid_round(world: GridWorld, rng, radius: float):
    info = RoundInfo()
    starts, goals = world.agent_points(), world.goal_points()
    rm = get_roadmap(world.bounds, radius)
    for j in range(len(world.obstacles)):
        layout = EnvironmentLayout(world.bounds, [], [], world.obstacle_rects())
        info.checks += 1
        if not blocked_agents(layout, j, starts, goals, radius, rm):
            continue
        options = [a for a in GridAction if a is not GridAction.STAY and not apply_move(world, j, a)[1]]
        if not options:
            info.stuck.append(j)
            continue
        world, _ = apply_move(world, j, options[int(rng.integers(len(options)))])
        info.moved.append(j)
    return world, info


def choose_displacement(bounds, obstacles, j, starts, goals, radius, rng, step, avoid, rm=None, tries=6):
    """Try random headings for obstacle j; returns ``(rect, heading)`` or ``(None, None)``.

    Headings after which j no longer blocks anyone win; otherwise the first
    admissible heading (inside the workspace, clear of ``avoid``) is used.
    """
    rm = rm or get_roadmap(bounds, radius)
    fallback = None
    for _ in range(tries):
        a = rng.uniform(0, 2 * math.pi)
        cand = obstacles[j].translate((step * math.cos(a), step * math.sin(a)))
        if not bounds.contains(cand) or any(overlaps(cand, b) for b in avoid):
            continue
        fallback = fallback or (cand, a)
        trial = EnvironmentLayout(bounds, [], [], obstacles[:j] + [cand] + obstacles[j + 1:])
        if not blocked_agents(trial, j, starts, goals, radius, rm):
            return cand, a
    return fallback or (None, None)


def _continuous_round(layout: EnvironmentLayout, starts, goals, radius, rng, step, avoid, tries=6):
    info = RoundInfo()
    rm = get_roadmap(layout.bounds, radius)
    obstacles = list(layout.obstacles)
    for j in range(len(obstacles)):
        cur = EnvironmentLayout(layout.bounds, [], [], obstacles)
        info.checks += 1
        if not blocked_agents(cur, j, starts, goals, radius, rm):
            continue
        chosen, _ = choose_displacement(layout.bounds, obstacles, j, starts, goals, radius, rng, step, avoid, rm, tries)
        if chosen is None:
            info.stuck.append(j)
            continue
        obstacles[j] = chosen
        info.moved.append(j)
    return EnvironmentLayout(layout.bounds, list(layout.starts), list(layout.goals), obstacles), info


def heuristic_round(layout, starts=None, goals=None, radius: float = AGENT_RADIUS, rng=None, step: float = 0.1, avoid=()):
    """One round over all obstacles in index order; returns ``(layout, RoundInfo)``.

    A :class:`GridWorld` moves blocking obstacles to a random free adjacent
    cell. An :class:`EnvironmentLayout` displaces them by ``step`` along a
    random heading, preferring headings after which they no longer block.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if isinstance(layout, GridWorld):
        return _grid_round(layout, rng, radius)
    if starts is None:
        starts = [b.center for b in layout.starts]
        goals = [b.center for b in layout.goals]
    avoid = list(avoid) or [Disk(s, radius) for s in starts]
    return _continuous_round(layout, starts, goals, radius, rng, step, avoid)


def run_heuristic(world: GridWorld, max_rounds: int, rng_seed: int = 0, radius: float = AGENT_RADIUS):
    rng = np.random.default_rng(rng_seed)
    infos = []
    for _ in range(max_rounds):
        world, info = heuristic_round(world, radius=radius, rng=rng)
        infos.append(info)
        if not info.moved:
            break
    return world, infos


class HeuristicCommander:
    """Online use of the heuristic: every ``replan_every`` steps each blocking
    obstacle picks a random non-blocking heading and is commanded along it at
    full speed until the next replan; the others are told to stop."""

    centralized = True

    def __init__(self, radius: float = AGENT_RADIUS, replan_every: int = 10, tries: int = 6):
        self.radius, self.replan_every, self.tries = radius, replan_every, tries
        self._actions = None

    def command(self, world, rng) -> np.ndarray:
        m = len(world.obstacles)
        if self._actions is None or len(self._actions) != m or world.time_step % self.replan_every == 0:
            self._actions = np.zeros((m, 2))
            obstacles = [o.body for o in world.obstacles]
            starts = [a.position for a in world.agents]
            goals = [a.goal for a in world.agents]
            rm = get_roadmap(world.bounds, self.radius)
            avoid = [Disk(tuple(p), self.radius) for p in starts]
            layout = EnvironmentLayout(world.bounds, [], [], obstacles)
            for j in blocking_obstacles(layout, starts, goals, self.radius, rm):
                step = world.obstacles[j].v_max * self.replan_every
                _, a = choose_displacement(world.bounds, obstacles, j, starts, goals, self.radius, rng, step, avoid,
                                           rm, self.tries)
                if a is not None:
                    self._actions[j] = (math.cos(a), math.sin(a))
        return self._actions.copy()
