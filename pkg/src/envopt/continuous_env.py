"""Online setting: rectangles move under acceleration limits while RVO agents navigate.

Obstacles and agents act simultaneously from the same pre-step snapshot. An
obstacle's command depends only on its own state and the entities within the
communication radius, which :func:`local_observation` makes explicit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .discrete_env import AGENT_RADIUS, ARRIVAL_TOL, V_MAX, _collision_events, _walls
from .geometry import Rect
from .metrics import RewardConfig, agent_progress_reward, local_reward, obstacle_rewards
from .policy import Graph
from .rvo import AgentState, PlannerConfig, step_agents
from .trace import EpisodeTrace

A_MAX = 0.1
COMM_RADIUS = 2.0
NODE_DIM = 7
EDGE_DIM = 3
_SLACK = 1e-9


@dataclass
class ObstacleState:
    id: int
    body: Rect
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v_max: float = V_MAX
    a_max: float = A_MAX

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, float)
        if float(np.hypot(*self.velocity)) > self.v_max + 1e-12:
            raise ValueError("obstacle speed exceeds v_max")

    @property
    def center(self) -> np.ndarray:
        return np.array(self.body.center)


@dataclass(frozen=True)
class ObstacleCommand:
    desired_velocity: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in self.desired_velocity)
        if len(v) != 2 or not all(math.isfinite(x) for x in v):
            raise ValueError("desired velocity must be a finite 2-vector")
        object.__setattr__(self, "desired_velocity", v)


@dataclass
class WorldState:
    bounds: Rect
    agents: list
    obstacles: list
    time_step: int = 0

    def validate(self) -> "WorldState":
        for a in self.agents:
            for o in self.obstacles:
                lo, hi = np.array(o.body.lo), np.array(o.body.hi)
                if np.hypot(*np.maximum(np.maximum(lo - a.position, 0), a.position - hi)) < a.radius - _SLACK:
                    raise ValueError(f"agent {a.id} starts inside obstacle {o.id}")
        return self

    def to_dict(self) -> dict:
        return {
            "bounds": [list(self.bounds.lo), list(self.bounds.hi)],
            "time_step": self.time_step,
            "agents": [
                {"id": a.id, "p": a.position.tolist(), "v": a.velocity.tolist(), "radius": a.radius,
                 "goal": a.goal.tolist(), "v_max": a.v_max}
                for a in self.agents
            ],
            "obstacles": [
                {"id": o.id, "rect": o.body.to_list(), "v": o.velocity.tolist(), "v_max": o.v_max, "a_max": o.a_max}
                for o in self.obstacles
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "WorldState":
        (x0, y0), (x1, y1) = d["bounds"]
        agents = [AgentState(a["id"], a["p"], a.get("v", [0, 0]), a.get("radius", AGENT_RADIUS), a["goal"],
                             a.get("v_max", V_MAX)) for a in d["agents"]]
        obstacles = [ObstacleState(o["id"], Rect(o["rect"][:2], o["rect"][2:]), o.get("v", [0, 0]),
                                   o.get("v_max", V_MAX), o.get("a_max", A_MAX)) for o in d["obstacles"]]
        return cls(Rect((x0, y0), (x1, y1)), agents, obstacles, d.get("time_step", 0))

    @classmethod
    def from_json(cls, text: str) -> "WorldState":
        return cls.from_dict(json.loads(text))


def random_scenario(rng, n_agents=4, m_obstacles=10, size=10, band=(2, 8), radius=AGENT_RADIUS, v_max=V_MAX,
                    a_max=A_MAX) -> WorldState:
    """Agents start in a left strip, goals lie in a right strip; unit-square
    obstacles occupy random cells of the middle band."""
    cols = np.arange(band[0], band[1])
    cells = [(int(c), r) for c in cols for r in range(size)]
    if m_obstacles > len(cells):
        raise ValueError("too many obstacles for the band")
    pick = rng.choice(len(cells), m_obstacles, replace=False)
    obstacles = [ObstacleState(k, Rect.cell(*cells[i]), np.zeros(2), v_max, a_max) for k, i in enumerate(pick)]

    def strip(x0, x1):
        pts = []
        while len(pts) < n_agents:
            p = np.array([rng.uniform(x0, x1), rng.uniform(radius + 0.2, size - radius - 0.2)])
            if all(np.hypot(*(p - q)) >= 2 * radius + 0.2 for q in pts):
                pts.append(p)
        return pts

    starts = strip(radius + 0.2, 1.5)
    goals = strip(size - 1.5, size - radius - 0.2)
    agents = [AgentState(i, starts[i], np.zeros(2), radius, goals[i], v_max) for i in range(n_agents)]
    return WorldState(Rect((0, 0), (size, size)), agents, obstacles).validate()


def neighbors(world: WorldState, obstacle: int, radius: float):
    """Obstacles and agents whose centres lie within ``radius`` of obstacle ``obstacle``."""
    c = world.obstacles[obstacle].center
    obs = [o for k, o in enumerate(world.obstacles) if k != obstacle and np.hypot(*(o.center - c)) <= radius]
    ags = [a for a in world.agents if np.hypot(*(a.position - c)) <= radius]
    return obs, ags


def _brake_limit(gap: float, step_decel: float) -> float:
    """Largest per-step displacement u with sum_k max(u - k*b, 0) <= gap."""
    gap = max(gap, 0.0)
    q = math.floor((-1 + math.sqrt(1 + 8 * gap / step_decel)) / 2)
    return (gap + step_decel * q * (q + 1) / 2) / (q + 1)


def _clamp_norm(x: float, y: float, cap: float):
    n = math.hypot(x, y)
    if n > cap:
        return x * cap / n, y * cap / n
    return x, y


def apply_command(obstacle: ObstacleState, cmd: ObstacleCommand, dt: float = 1.0, bounds: Rect | None = None):
    """Acceleration-limited velocity update followed by the position update.

    With ``bounds`` each velocity component is additionally capped so that the
    obstacle can always brake to a halt inside the world; the cap never
    requires more than ``a_max * dt`` of velocity change.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    vx, vy = float(obstacle.velocity[0]), float(obstacle.velocity[1])
    dx, dy = _clamp_norm(*cmd.desired_velocity, obstacle.v_max)
    amax = obstacle.a_max * dt
    if bounds is not None:
        b = obstacle.a_max * dt * dt / math.sqrt(2)
        (bx0, by0), (bx1, by1) = bounds.lo, bounds.hi
        (x0, y0), (x1, y1) = obstacle.body.lo, obstacle.body.hi
        box = (-_brake_limit(x0 - bx0, b) / dt, _brake_limit(bx1 - x1, b) / dt,
               -_brake_limit(y0 - by0, b) / dt, _brake_limit(by1 - y1, b) / dt)
        dx = min(max(dx, box[0]), box[1])
        dy = min(max(dy, box[2]), box[3])
    ax, ay = _clamp_norm(dx - vx, dy - vy, amax)
    nx, ny = _clamp_norm(vx + ax, vy + ay, obstacle.v_max)
    if bounds is not None and not (box[0] <= nx <= box[1] and box[2] <= ny <= box[3]):
        cx, cy = min(max(nx, box[0]), box[1]), min(max(ny, box[2]), box[3])
        if math.hypot(cx - vx, cy - vy) > amax:
            cx, cy = min(max(vx, box[0]), box[1]), min(max(vy, box[2]), box[3])
        nx, ny = cx, cy
    return replace(obstacle, body=obstacle.body.translate((nx * dt, ny * dt)), velocity=np.array([nx, ny]))


def _rect_arrays(obstacles):
    lo = np.array([o.body.lo for o in obstacles], float).reshape(-1, 2)
    hi = np.array([o.body.hi for o in obstacles], float).reshape(-1, 2)
    return lo, hi


def obstacle_collisions(world: WorldState) -> np.ndarray:
    """Per-obstacle flag: interior overlap with any agent disk or other obstacle."""
    m = len(world.obstacles)
    hit = np.zeros(m, bool)
    if not m:
        return hit
    lo, hi = _rect_arrays(world.obstacles)
    if world.agents:
        P = np.array([a.position for a in world.agents])
        R = np.array([a.radius for a in world.agents])
        d = np.hypot(*np.moveaxis(np.maximum(np.maximum(lo[None] - P[:, None], 0), P[:, None] - hi[None]), -1, 0))
        hit |= (d < R[:, None] - _SLACK).any(0)
    ov = (np.minimum(hi[:, None], hi[None]) - np.maximum(lo[:, None], lo[None]) > _SLACK).all(-1)
    np.fill_diagonal(ov, False)
    hit |= ov.any(1)
    return hit


def step_world(world: WorldState, commands, planner_cfg: PlannerConfig, dt: float = 1.0):
    """Advance one step; returns ``(new_world, events, stall_flags)``.

    Agent velocities are planned against the pre-step obstacle velocities, and
    obstacle commands are applied to the pre-step obstacle states.
    """
    if len(commands) != len(world.obstacles):
        raise ValueError("need exactly one command per obstacle")
    cmds = [c if isinstance(c, ObstacleCommand) else ObstacleCommand(tuple(c)) for c in commands]
    rects = [o.body for o in world.obstacles]
    ovel = np.array([o.velocity for o in world.obstacles], float).reshape(-1, 2)
    walls = _walls(world.bounds)
    ovel_all = np.concatenate([ovel, np.zeros((len(walls), 2))])
    agents, stalls = step_agents(world.agents, rects + walls, dt, planner_cfg, step=world.time_step,
                                 obstacle_velocities=ovel_all)
    obstacles = [apply_command(o, c, dt, world.bounds) for o, c in zip(world.obstacles, cmds)]
    new = WorldState(world.bounds, agents, obstacles, world.time_step + 1)
    t = new.time_step
    events = []
    if agents:
        P = np.array([a.position for a in agents])
        lo, hi = _rect_arrays(obstacles)
        events = _collision_events(t, P, agents[0].radius, lo, hi)
    events.extend({"t": t, "kind": "stall", "ids": [i]} for i, s in enumerate(stalls) if s)
    return new, events, stalls


# ---------------------------------------------------------------------------
# observations


def _node(kind_agent, vel, v_max, goal_dir, half):
    return [float(kind_agent), vel[0] / v_max, vel[1] / v_max, goal_dir[0], goal_dir[1], half[0], half[1]]


def _agent_row(a: AgentState):
    g = a.goal - a.position
    n = float(np.hypot(*g))
    gd = g / n if n > 0 else np.zeros(2)
    return _node(1, a.velocity, a.v_max, gd, (a.radius, a.radius))


def _obstacle_row(o: ObstacleState):
    return _node(0, o.velocity, o.v_max, (0.0, 0.0), o.body.half_extent)


def local_observation(own: ObstacleState, obstacle_nbrs, agent_nbrs, comm_radius: float) -> Graph:
    """Single-target graph built from the obstacle's own state and its neighbours only."""
    c = own.center
    rows = [_obstacle_row(own)]
    rel = []
    for o in obstacle_nbrs:
        rows.append(_obstacle_row(o))
        rel.append(o.center - c)
    for a in agent_nbrs:
        rows.append(_agent_row(a))
        rel.append(a.position - c)
    k = len(rel)
    rel = np.array(rel, float).reshape(k, 2)
    ea = np.concatenate([rel, np.hypot(*rel.T)[:, None]], 1) / comm_radius
    return Graph(np.array(rows, float), np.arange(1, k + 1), np.zeros(k, int), ea, np.zeros(1, int))


def local_observations(world: WorldState, comm_radius: float) -> list[Graph]:
    """``local_observation`` for every obstacle, sharing per-step feature rows."""
    m = len(world.obstacles)
    rows = np.array([_obstacle_row(o) for o in world.obstacles] + [_agent_row(a) for a in world.agents], float)
    pos = np.array([o.center for o in world.obstacles] + [a.position for a in world.agents], float).reshape(-1, 2)
    out = []
    for j in range(m):
        rel = pos - pos[j]
        d = np.hypot(rel[:, 0], rel[:, 1])
        keep = d <= comm_radius
        keep[j] = False
        idx = np.flatnonzero(keep)
        k = len(idx)
        ea = np.concatenate([rel[idx], d[idx, None]], 1) / comm_radius
        x = np.concatenate([rows[j:j + 1], rows[idx]])
        out.append(Graph(x, np.arange(1, k + 1), np.zeros(k, int), ea, np.zeros(1, int)))
    return out


def centralized_graph(world: WorldState, comm_radius: float) -> Graph:
    """All obstacles as targets in one graph (nodes: obstacles, then agents)."""
    m = len(world.obstacles)
    rows = [_obstacle_row(o) for o in world.obstacles] + [_agent_row(a) for a in world.agents]
    pos = np.array([o.center for o in world.obstacles] + [a.position for a in world.agents], float).reshape(-1, 2)
    rel = pos[None, :, :] - pos[:m, None, :]
    d = np.hypot(rel[..., 0], rel[..., 1])
    mask = d <= comm_radius
    mask[np.arange(m), np.arange(m)] = False
    tgt, snd = np.nonzero(mask)
    ea = np.concatenate([rel[tgt, snd], d[tgt, snd][:, None]], 1) / comm_radius
    return Graph(np.array(rows, float).reshape(-1, NODE_DIM), snd, tgt, ea.reshape(-1, EDGE_DIM), np.arange(m))


# ---------------------------------------------------------------------------
# episodes


class ZeroCommandPolicy:
    """Obstacles ask to stay still (the unmodified-environment baseline)."""

    kind = "zero"

    def act(self, graph, rng, greedy=False):
        k = len(graph.targets)
        return np.zeros((k, 2)), np.zeros(k), np.zeros(k)


@dataclass
class OnlineSamples:
    graphs: list = field(default_factory=list)  # [t][j] -> Graph
    actions: list = field(default_factory=list)  # [t] -> (m, 2)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)  # [t] -> (m,)


def run_online_episode(
    init: WorldState,
    policy,
    max_steps: int = 500,
    comm_radius: float = COMM_RADIUS,
    rng_seed: int = 0,
    planner_cfg: PlannerConfig | None = None,
    reward_cfg: RewardConfig | None = None,
    greedy: bool = False,
    tol: float = ARRIVAL_TOL,
    collect: bool = False,
):
    """Roll the world forward until all agents arrived or ``max_steps``.

    ``policy.act(graph, rng, greedy)`` maps a batch of local graphs to
    per-obstacle actions; desired velocity = obstacle v_max * action. With
    ``collect`` also returns the per-step samples used by the trainer.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    planner_cfg = planner_cfg or PlannerConfig()
    reward_cfg = reward_cfg or RewardConfig()
    rng = np.random.default_rng(rng_seed)
    world = init
    n, m = len(world.agents), len(world.obstacles)
    goals = np.array([a.goal for a in world.agents], float).reshape(n, 2)
    starts = np.array([a.position for a in world.agents], float).reshape(n, 2)
    arrival = np.full(n, -1)
    arrival[np.hypot(*(starts - goals).T) <= tol] = 0
    positions, velocities = [starts], []
    rects = [np.array([o.body.to_list() for o in world.obstacles], float).reshape(m, 4)]
    commands, ovels, rewards, events = [], [], [], []
    samples = OnlineSamples()
    vmax_o = np.array([o.v_max for o in world.obstacles], float)
    for _ in range(max_steps):
        if (arrival >= 0).all():
            break
        if m and getattr(policy, "centralized", False):
            graphs, acts = [], policy.command(world, rng)
            lps, vals = np.zeros(m), np.zeros(m)
            desired = np.asarray(acts, float).reshape(m, 2) * vmax_o[:, None]
        elif m:
            graphs = local_observations(world, comm_radius)
            acts, lps, vals = policy.act(Graph.batch(graphs), rng, greedy)
            desired = np.asarray(acts, float).reshape(m, 2) * vmax_o[:, None]
        else:
            graphs, acts, lps, vals = [], np.zeros((0, 2)), np.zeros(0), np.zeros(0)
            desired = np.zeros((0, 2))
        before = world
        world, ev, _ = step_world(world, [ObstacleCommand(tuple(d)) for d in desired], planner_cfg)
        P = np.array([a.position for a in world.agents], float).reshape(n, 2)
        V = np.array([a.velocity for a in world.agents], float).reshape(n, 2)
        team = [agent_progress_reward(b.position, b.goal, v) for b, v in zip(before.agents, V)]
        hit = obstacle_collisions(world)
        ov = np.array([o.velocity for o in world.obstacles], float).reshape(m, 2)
        speeds = np.hypot(ov[:, 0], ov[:, 1])
        r = obstacle_rewards(team, [local_reward(bool(h), float(v), reward_cfg) for h, v in zip(hit, speeds)],
                             reward_cfg)
        positions.append(P)
        velocities.append(V)
        rects.append(np.array([o.body.to_list() for o in world.obstacles], float).reshape(m, 4))
        commands.append(desired)
        ovels.append(ov)
        rewards.append(r)
        events.extend(ev)
        newly = (arrival < 0) & (np.hypot(*(P - goals).T) <= tol)
        arrival[newly] = world.time_step - init.time_step
        if collect:
            samples.graphs.append(graphs)
            samples.actions.append(np.asarray(acts, float).reshape(m, 2))
            samples.log_probs.append(np.asarray(lps, float).reshape(m))
            samples.values.append(np.asarray(vals, float).reshape(m))
            samples.rewards.append(r)
    T = len(velocities)
    trace = EpisodeTrace(
        positions=np.array(positions),
        velocities=np.array(velocities).reshape(T, n, 2),
        goals=goals,
        radii=np.array([a.radius for a in init.agents], float),
        v_max=np.array([a.v_max for a in init.agents], float),
        obstacles=np.array(rects).reshape(T + 1, m, 4),
        arrival=arrival,
        shortest=np.hypot(*(goals - starts).T),
        commands=np.array(commands).reshape(T, m, 2),
        obstacle_velocities=np.array(ovels).reshape(T, m, 2),
        rewards=np.array(rewards).reshape(T, m),
        events=events,
    )
    return (trace, samples) if collect else trace
