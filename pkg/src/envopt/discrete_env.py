"""Offline setting: occupancy grid, per-obstacle moves in rounds, frozen-layout navigation.

Cell (col, row) is the unit square [col, col+1] x [row, row+1]; observation
arrays are indexed [channel, row, col].
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import Disk, EnvironmentLayout, Rect
from .metrics import shortest_lengths
from .roadmap import get_roadmap
from .rvo import AgentState, PlannerConfig, step_agents
from .trace import EpisodeTrace

AGENT_RADIUS = 0.3
ARRIVAL_TOL = 0.1
V_MAX = 0.1
N_CHANNELS = 4


class GridAction(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4

    @property
    def offset(self) -> tuple[int, int]:
        return _OFFSETS[self]


_OFFSETS = {
    GridAction.UP: (0, 1),
    GridAction.DOWN: (0, -1),
    GridAction.LEFT: (-1, 0),
    GridAction.RIGHT: (1, 0),
    GridAction.STAY: (0, 0),
}


def _cells(v) -> list[tuple[int, int]]:
    return [(int(c), int(r)) for c, r in v]


@dataclass
class GridWorld:
    width: int
    height: int
    obstacles: list = field(default_factory=list)
    agents: list = field(default_factory=list)
    goals: list = field(default_factory=list)

    def __post_init__(self):
        self.obstacles = _cells(self.obstacles)
        self.agents = _cells(self.agents)
        self.goals = _cells(self.goals)
        self.validate()

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        if len(self.agents) != len(self.goals):
            raise ValueError("every agent needs exactly one goal")
        allc = self.obstacles + self.agents + self.goals
        for c, r in allc:
            if not (0 <= c < self.width and 0 <= r < self.height):
                raise ValueError(f"cell {(c, r)} out of bounds")
        if len(set(allc)) != len(allc):
            raise ValueError("obstacle, agent and goal cells must be pairwise distinct")

    def occupied(self) -> set:
        return set(self.obstacles) | set(self.agents) | set(self.goals)

    def copy(self) -> "GridWorld":
        return GridWorld(self.width, self.height, list(self.obstacles), list(self.agents), list(self.goals))

    @property
    def bounds(self) -> Rect:
        return Rect((0, 0), (self.width, self.height))

    def obstacle_rects(self) -> list[Rect]:
        return [Rect.cell(c, r) for c, r in self.obstacles]

    def agent_points(self) -> np.ndarray:
        return np.array(self.agents, float).reshape(-1, 2) + 0.5

    def goal_points(self) -> np.ndarray:
        return np.array(self.goals, float).reshape(-1, 2) + 0.5

    def to_layout(self, regions: str = "disks", radius: float = AGENT_RADIUS) -> EnvironmentLayout:
        """Continuous lift. ``regions='cells'`` makes S and D whole cells."""
        if regions == "cells":
            starts = [Rect.cell(c, r) for c, r in self.agents]
            goals = [Rect.cell(c, r) for c, r in self.goals]
        else:
            starts = [Disk(p, radius) for p in self.agent_points()]
            goals = [Disk(p, radius) for p in self.goal_points()]
        return EnvironmentLayout(self.bounds, starts, goals, self.obstacle_rects())

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "obstacles": [list(c) for c in self.obstacles],
            "agents": [list(c) for c in self.agents],
            "goals": [list(c) for c in self.goals],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GridWorld":
        return cls(d["width"], d["height"], d.get("obstacles", []), d.get("agents", []), d.get("goals", []))

    @classmethod
    def from_json(cls, text: str) -> "GridWorld":
        return cls.from_dict(json.loads(text))


def random_world(rng, width: int = 8, height: int = 8, n_agents: int = 4, m_obstacles: int = 10) -> GridWorld:
    cells = rng.choice(width * height, m_obstacles + 2 * n_agents, replace=False)
    pts = [(int(k % width), int(k // width)) for k in cells]
    return GridWorld(width, height, pts[:m_obstacles], pts[m_obstacles:m_obstacles + n_agents], pts[m_obstacles + n_agents:])


def encode_observation(world: GridWorld, active_obstacle: int) -> np.ndarray:
    """Binary (4, height, width) stack: obstacles, agents, goals, active obstacle."""
    if not 0 <= active_obstacle < len(world.obstacles):
        raise IndexError(f"no obstacle with index {active_obstacle}")
    obs = np.zeros((N_CHANNELS, world.height, world.width))
    for k, cells in enumerate((world.obstacles, world.agents, world.goals)):
        for c, r in cells:
            obs[k, r, c] = 1.0
    c, r = world.obstacles[active_obstacle]
    obs[3, r, c] = 1.0
    return obs


def grid_path_lengths(world: GridWorld) -> np.ndarray:
    """Octile shortest path per agent over obstacle-free cells; inf when cut off.

    Diagonal steps need both side cells free, so corner-touching obstacles seal.
    """
    free = np.ones((world.width, world.height), bool)
    for c, r in world.obstacles:
        free[c, r] = False
    steps = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)]
    steps += [(dc, dr, math.sqrt(2.0)) for dc in (-1, 1) for dr in (-1, 1)]
    out = np.full(len(world.agents), math.inf)
    for i, (src, dst) in enumerate(zip(world.agents, world.goals)):
        dist = {src: 0.0}
        heap = [(0.0, src)]
        while heap:
            d, (c, r) = heapq.heappop(heap)
            if (c, r) == dst:
                out[i] = d
                break
            if d > dist[(c, r)]:
                continue
            for dc, dr, w in steps:
                nc, nr = c + dc, r + dr
                if not (0 <= nc < world.width and 0 <= nr < world.height) or not free[nc, nr]:
                    continue
                if dc and dr and not (free[c + dc, r] and free[c, r + dr]):
                    continue
                nd = d + w
                if nd < dist.get((nc, nr), math.inf):
                    dist[(nc, nr)] = nd
                    heapq.heappush(heap, (nd, (nc, nr)))
    return out


def apply_move(world: GridWorld, obstacle: int, action) -> tuple[GridWorld, bool]:
    """Translate one obstacle by a unit step; returns (world, noop).

    Moves off the grid or onto any occupied cell leave the world unchanged.
    """
    if not 0 <= obstacle < len(world.obstacles):
        raise IndexError(f"no obstacle with index {obstacle}")
    action = GridAction(action)
    if action is GridAction.STAY:
        return world, False
    c, r = world.obstacles[obstacle]
    dc, dr = action.offset
    tgt = (c + dc, r + dr)
    if not (0 <= tgt[0] < world.width and 0 <= tgt[1] < world.height) or tgt in world.occupied():
        return world, True
    new = world.copy()
    new.obstacles[obstacle] = tgt
    return new, False


@dataclass
class Move:
    round: int
    obstacle: int
    action: int
    noop: bool
    log_prob: float = 0.0
    value: float = 0.0


@dataclass
class OptimizationTrace:
    """Record of one layout-optimization episode (one entry per obstacle move)."""

    moves: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    worlds: list = field(default_factory=list)

    def __len__(self):
        return len(self.moves)


def run_optimization_episode(world: GridWorld, policy, max_rounds: int, rng_seed: int = 0, record_worlds: bool = False):
    """Sweep the obstacles in index order for ``max_rounds`` rounds.

    ``policy.act(obs, rng)`` returns ``(action, log_prob, value)``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    rng = np.random.default_rng(rng_seed)
    trace = OptimizationTrace()
    if record_worlds:
        trace.worlds.append(world)
    for rnd in range(max_rounds):
        for j in range(len(world.obstacles)):
            obs = encode_observation(world, j)
            action, logp, value = policy.act(obs, rng)
            world, noop = apply_move(world, j, action)
            trace.observations.append(obs)
            trace.moves.append(Move(rnd, j, int(action), noop, float(logp), float(value)))
            if record_worlds:
                trace.worlds.append(world)
    return world, trace


def _walls(bounds: Rect) -> list[Rect]:
    (x0, y0), (x1, y1) = bounds.lo, bounds.hi
    return [
        Rect((x0 - 1, y0 - 1), (x1 + 1, y0)),
        Rect((x0 - 1, y1), (x1 + 1, y1 + 1)),
        Rect((x0 - 1, y0), (x0, y1)),
        Rect((x1, y0), (x1 + 1, y1)),
    ]


def simulate(
    bounds: Rect,
    starts: np.ndarray,
    goals: np.ndarray,
    obstacles: list,
    planner_cfg: PlannerConfig,
    max_steps: int,
    radius: float = AGENT_RADIUS,
    v_max: float = V_MAX,
    tol: float = ARRIVAL_TOL,
    shortest=None,
) -> EpisodeTrace:
    """RVO navigation among static rectangles until all agents arrived or timeout."""
    n = len(starts)
    agents = [AgentState(i, starts[i], np.zeros(2), radius, goals[i], v_max) for i in range(n)]
    rects = list(obstacles)
    planner_obs = rects + _walls(bounds)
    if shortest is None:
        lay = EnvironmentLayout(bounds, [], [], rects)
        shortest = shortest_lengths(lay, starts, goals, radius, roadmap=get_roadmap(bounds, radius))
    arrival = np.full(n, -1)
    arrival[np.hypot(*(np.asarray(starts) - goals).T) <= tol] = 0
    positions = [np.array(starts, float).reshape(n, 2)]
    velocities = []
    events = []
    lo = np.array([o.lo for o in rects]).reshape(-1, 2)
    hi = np.array([o.hi for o in rects]).reshape(-1, 2)
    for t in range(max_steps):
        if (arrival >= 0).all():
            break
        agents, stalled = step_agents(agents, planner_obs, 1.0, planner_cfg, step=t)
        P = np.array([a.position for a in agents]).reshape(n, 2)
        positions.append(P)
        velocities.append(np.array([a.velocity for a in agents]).reshape(n, 2))
        newly = (arrival < 0) & (np.hypot(*(P - goals).T) <= tol)
        arrival[newly] = t + 1
        events.extend(_collision_events(t + 1, P, radius, lo, hi))
        events.extend({"t": t + 1, "kind": "stall", "ids": [i]} for i, s in enumerate(stalled) if s)
    T = len(velocities)
    m = len(rects)
    obs_arr = np.broadcast_to(np.concatenate([lo, hi], 1)[None], (T + 1, m, 4)).copy()
    return EpisodeTrace(
        positions=np.array(positions),
        velocities=np.array(velocities).reshape(T, n, 2),
        goals=np.asarray(goals, float),
        radii=np.full(n, radius),
        v_max=np.full(n, v_max),
        obstacles=obs_arr,
        arrival=arrival,
        shortest=np.asarray(shortest, float),
        events=events,
    )


def _collision_events(t, P, radius, lo, hi, slack=1e-9):
    out = []
    n = len(P)
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(P[i] - P[j])) < 2 * radius - slack:
                out.append({"t": t, "kind": "agent-agent", "ids": [i, j]})
    if len(lo):
        d = np.hypot(*np.moveaxis(np.maximum(np.maximum(lo[None] - P[:, None], 0), P[:, None] - hi[None]), -1, 0))
        for i, j in zip(*np.nonzero(d < radius - slack)):
            out.append({"t": t, "kind": "agent-obstacle", "ids": [int(i), int(j)]})
    return out


def navigate(world: GridWorld, planner_cfg: PlannerConfig | None = None, max_steps: int = 500, **kw) -> EpisodeTrace:
    """Lift the grid to continuous space and run the RVO agents on the frozen layout."""
    planner_cfg = planner_cfg or PlannerConfig()
    return simulate(
        world.bounds, world.agent_points(), world.goal_points(), world.obstacle_rects(), planner_cfg, max_steps, **kw
    )
