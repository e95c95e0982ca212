"""Sampling-based reciprocal velocity obstacle planner for disk agents.

Each agent scores a seeded set of candidate velocities by deviation from its
preferred velocity plus ``w / time_to_collision`` against the reciprocal
velocity obstacles of its neighbours and the velocity obstacles of
rectangles. Two hard constraints make single steps safe:

* pairwise: an agent may close at most half the current gap to a neighbour
  along the line of centres, so two agents applying the rule together can
  never interpenetrate;
* rectangles: the swept segment (relative to the obstacle's velocity) must
  keep clearance ``radius`` to the rectangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numba import njit

from .geometry import Rect

@dataclass
class AgentState:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    radius: float
    goal: np.ndarray
    v_max: float = 0.1

    def __post_init__(self):
        self.position = np.asarray(self.position, float)
        self.velocity = np.asarray(self.velocity, float)
        self.goal = np.asarray(self.goal, float)
        if self.radius <= 0:
            raise ValueError("agent radius must be positive")


@dataclass(frozen=True)
class PlannerConfig:
    time_horizon: float = 10.0
    sample_count: int = 256
    neighbor_radius: float = 2.0
    rng_seed: int = 0
    penalty_weight: float = 1.0

    def __post_init__(self):
        if self.time_horizon <= 0 or self.sample_count <= 0 or self.neighbor_radius <= 0:
            raise ValueError("planner parameters must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        return cls(**d)


def preferred_velocity(agent: AgentState, dt: float = 1.0) -> np.ndarray:
    to_goal = agent.goal - agent.position
    d = float(np.hypot(*to_goal))
    if d == 0.0:
        return np.zeros(2)
    speed = min(agent.v_max, d / dt)
    return to_goal / d * speed


_MASK = (1 << 64) - 1


@njit(cache=True)
def _splitmix(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _disk_samples(key, count, v_max):
    out = np.empty((count, 2))
    state = key
    for k in range(count):
        state, a = _splitmix(state)
        state, b = _splitmix(state)
        u1 = (a >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        u2 = (b >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        rad = v_max * math.sqrt(u1)
        ang = 2 * math.pi * u2
        out[k, 0] = rad * math.cos(ang)
        out[k, 1] = rad * math.sin(ang)
    return out


def _stream_key(seed: int, agent_id: int, step: int) -> np.uint64:
    h = 0xCBF29CE484222325
    for v in (seed, agent_id, step):
        h = ((h ^ (int(v) & _MASK)) * 0x100000001B3) & _MASK
    return np.uint64(h)


def _candidates(agent: AgentState, v_pref: np.ndarray, cfg: PlannerConfig, step: int) -> np.ndarray:
    """Preferred, zero and current velocity followed by seeded uniform samples in the speed disk."""
    samples = _disk_samples(_stream_key(cfg.rng_seed, agent.id, step), cfg.sample_count, float(agent.v_max))
    cur = agent.velocity
    sp = math.hypot(cur[0], cur[1])
    if sp > agent.v_max:
        cur = cur * (agent.v_max / sp)
    out = np.empty((cfg.sample_count + 3, 2))
    out[0] = v_pref
    out[1] = 0.0
    out[2] = cur
    out[3:] = samples
    return out


@njit(cache=True)
def _ray_disk_scalar(px, py, ux, uy, R):
    c = px * px + py * py - R * R
    if c <= 0.0:
        return 0.0
    a = ux * ux + uy * uy
    b = px * ux + py * uy
    disc = b * b - a * c
    if disc >= 0.0 and a > 0.0 and b < 0.0:
        return max((-b - math.sqrt(disc)) / a, 0.0)
    return math.inf


@njit(cache=True)
def _ray_box_scalar(px, py, ux, uy, x0, y0, x1, y1):
    t_enter = 0.0
    t_exit = math.inf
    for ax in range(2):
        if ax == 0:
            pa, ua, la, ha = px, ux, x0, x1
        else:
            pa, ua, la, ha = py, uy, y0, y1
        if ua == 0.0:
            if pa < la or pa > ha:
                return math.inf
        else:
            t1 = (la - pa) / ua
            t2 = (ha - pa) / ua
            t_enter = max(t_enter, min(t1, t2))
            t_exit = min(t_exit, max(t1, t2))
    return t_enter if t_enter <= t_exit else math.inf


@njit(cache=True)
def _rect_contact_time(px, py, ux, uy, x0, y0, x1, y1, r):
    t = min(
        _ray_box_scalar(px, py, ux, uy, x0 - r, y0, x1 + r, y1),
        _ray_box_scalar(px, py, ux, uy, x0, y0 - r, x1, y1 + r),
    )
    t = min(t, _ray_disk_scalar(px - x0, py - y0, ux, uy, r))
    t = min(t, _ray_disk_scalar(px - x1, py - y0, ux, uy, r))
    t = min(t, _ray_disk_scalar(px - x1, py - y1, ux, uy, r))
    t = min(t, _ray_disk_scalar(px - x0, py - y1, ux, uy, r))
    return t


@njit(cache=True)
def _score(p, v, r, v_pref, cand, nP, nV, nR, lo, hi, ov, dt, horizon, w):
    """Index of the cheapest feasible candidate, -1 if none; plus 'some moving candidate feasible'."""
    best, best_cost, moving_ok = -1, math.inf, False
    for k in range(cand.shape[0]):
        cx, cy = cand[k, 0], cand[k, 1]
        ok = True
        tc = math.inf
        for j in range(nP.shape[0]):
            dx, dy = nP[j, 0] - p[0], nP[j, 1] - p[1]
            d = math.hypot(dx, dy)
            R = nR[j] + r
            gap = d - R
            if d > 0.0:
                allow = max(gap - 2e-9, 0.0) / 2
                if (cx * dx + cy * dy) / d * dt > allow:
                    ok = False
                    break
            if gap > 0.0:
                ux = 2 * cx - v[0] - nV[j, 0]
                uy = 2 * cy - v[1] - nV[j, 1]
                tc = min(tc, _ray_disk_scalar(-dx, -dy, ux, uy, R))
        if not ok:
            continue
        for m in range(lo.shape[0]):
            ex = max(lo[m, 0] - p[0], 0.0, p[0] - hi[m, 0])
            ey = max(lo[m, 1] - p[1], 0.0, p[1] - hi[m, 1])
            d0 = math.hypot(ex, ey)
            ux, uy = cx - ov[m, 0], cy - ov[m, 1]
            if d0 >= r:
                t = _rect_contact_time(p[0], p[1], ux, uy, lo[m, 0], lo[m, 1], hi[m, 0], hi[m, 1], r)
                if t < dt:
                    ok = False
                    break
                tc = min(tc, t)
            else:
                qx, qy = p[0] + ux * dt, p[1] + uy * dt
                fx = max(lo[m, 0] - qx, 0.0, qx - hi[m, 0])
                fy = max(lo[m, 1] - qy, 0.0, qy - hi[m, 1])
                if math.hypot(fx, fy) < d0:
                    ok = False
                    break
        if not ok:
            continue
        cost = math.hypot(cx - v_pref[0], cy - v_pref[1])
        if tc < horizon:
            cost = cost + (w / tc if tc > 0.0 else math.inf)
        if cx != 0.0 or cy != 0.0:
            moving_ok = True
        if cost < best_cost or best < 0:
            best, best_cost = k, cost
    return best, moving_ok


def select_velocity(
    agent: AgentState,
    neighbors: Sequence[AgentState],
    obstacles: Sequence[Rect],
    cfg: PlannerConfig,
    dt: float = 1.0,
    step: int = 0,
    obstacle_velocities=None,
) -> tuple[np.ndarray, bool]:
    """Return ``(velocity, stalled)``.

    ``stalled`` is True when no moving candidate satisfies the hard safety
    constraints and the agent stops. Only the agent's own state, the given
    neighbours and the given rectangles are read.
    """
    v_pref = preferred_velocity(agent, dt)
    cand = _candidates(agent, v_pref, cfg, step)
    nP = np.array([n.position for n in neighbors], float).reshape(-1, 2)
    nV = np.array([n.velocity for n in neighbors], float).reshape(-1, 2)
    nR = np.array([n.radius for n in neighbors], float)
    lo = np.array([o.lo for o in obstacles], float).reshape(-1, 2)
    hi = np.array([o.hi for o in obstacles], float).reshape(-1, 2)
    if obstacle_velocities is None:
        ov = np.zeros_like(lo)
    else:
        ov = np.asarray(obstacle_velocities, float).reshape(-1, 2)
    best, moving_ok = _score(
        agent.position, agent.velocity, float(agent.radius), v_pref, cand, nP, nV, nR, lo, hi, ov,
        float(dt), float(cfg.time_horizon), float(cfg.penalty_weight),
    )
    if best < 0:
        return np.zeros(2), True
    return cand[best].copy(), not moving_ok


def step_agents(
    agents: Sequence[AgentState],
    obstacles: Sequence[Rect],
    dt: float,
    cfg: PlannerConfig,
    step: int = 0,
    obstacle_velocities=None,
) -> tuple[list[AgentState], list[bool]]:
    """Synchronous update: every velocity is chosen from the pre-step snapshot."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not agents:
        return [], []
    pos = np.array([a.position for a in agents])
    obs = list(obstacles)
    if obs:
        lo = np.array([o.lo for o in obs])
        hi = np.array([o.hi for o in obs])
    out, flags = [], []
    for i, a in enumerate(agents):
        d = np.hypot(*(pos - a.position).T)
        nbrs = [agents[j] for j in np.flatnonzero(d <= cfg.neighbor_radius) if j != i]
        if obs:
            reach = max(cfg.neighbor_radius, a.v_max * cfg.time_horizon + a.radius)
            od = np.hypot(*np.maximum(np.maximum(lo - a.position, 0), a.position - hi).T)
            near = np.flatnonzero(od <= reach)
            near_obs = [obs[k] for k in near]
            near_v = None if obstacle_velocities is None else np.asarray(obstacle_velocities)[near]
        else:
            near_obs, near_v = [], None
        v, stalled = select_velocity(a, nbrs, near_obs, cfg, dt, step, near_v)
        out.append(v)
        flags.append(stalled)
    new = [replace(a, position=a.position + v * dt, velocity=v) for a, v in zip(agents, out)]
    return new, flags
