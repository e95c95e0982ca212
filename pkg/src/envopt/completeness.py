"""Free-area and capacity conditions for collision-free completion, plus well-formedness."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import Disk, EnvironmentLayout, body_center, max_distance, region_area
from .roadmap import get_roadmap


@dataclass(frozen=True)
class ConditionReport:
    satisfied: bool
    lhs: float
    rhs: float
    margin: float

    @classmethod
    def compare(cls, lhs: float, rhs: float) -> "ConditionReport":
        return cls(bool(lhs >= rhs), float(lhs), float(rhs), float(lhs - rhs))

    def to_dict(self) -> dict:
        return asdict(self)


def region_max_distance(a_regions, b_regions) -> float:
    """Largest distance between any point of the union ``a`` and any point of the union ``b``."""
    if not a_regions or not b_regions:
        raise ValueError("both region sets must be non-empty")
    return max(max_distance(a, b) for a in a_regions for b in b_regions)


def free_area(layout: EnvironmentLayout) -> float:
    """area(E) minus the area covered by obstacles, start and goal regions."""
    occupied = region_area([*layout.obstacles, *layout.starts, *layout.goals])
    return layout.bounds.area - occupied


def offline_condition(layout: EnvironmentLayout, n: int, r_hat: float, d_max: float | None = None) -> ConditionReport:
    """Free area against 2 n d_max r_hat.

    ``d_max`` defaults to the exact maximum distance between the start union and
    the goal union; pass a value to use an externally measured one.
    """
    if n < 0 or r_hat <= 0:
        raise ValueError("need n >= 0 and r_hat > 0")
    if not layout.starts or not layout.goals:
        raise ValueError("start and goal regions must be non-empty")
    if d_max is None:
        d_max = region_max_distance(layout.starts, layout.goals)
    return ConditionReport.compare(free_area(layout), 2.0 * n * d_max * r_hat)


def online_capacity_condition(n: int, r_hat: float, v_hat: float, delta_dot: float) -> ConditionReport:
    """Obstacle-area change rate against 2 n r_hat v_hat."""
    if min(n, r_hat, v_hat, delta_dot) < 0:
        raise ValueError("inputs must be non-negative")
    return ConditionReport.compare(delta_dot, 2.0 * n * r_hat * v_hat)


def layout_capacity(layout: EnvironmentLayout, v_max: float) -> float:
    """Largest area per unit time the obstacles can newly cover at speed ``v_max``.

    A w x h rectangle translating at speed v sweeps new area at most
    v * sqrt(w^2 + h^2) (its width across the motion direction).
    """
    total = 0.0
    for o in layout.obstacles:
        w, h = 2 * o.half_extent[0], 2 * o.half_extent[1]
        total += v_max * math.hypot(w, h)
    return total


def observed_capacity(trace) -> float:
    """Maximum over steps of area(Delta(t+1) minus Delta(t)) / dt from a trace's rectangles."""
    from .geometry import Rect

    best = 0.0
    for t in range(trace.obstacles.shape[0] - 1):
        now = [Rect(r[:2], r[2:]) for r in trace.obstacles[t]]
        nxt = [Rect(r[:2], r[2:]) for r in trace.obstacles[t + 1]]
        gained = region_area(now + nxt) - region_area(now)
        best = max(best, gained / trace.dt)
    return best


def agent_connectivity(layout: EnvironmentLayout, radius: float, resolution: float | None = None) -> list[bool]:
    """Per agent: does a clearance-``radius`` roadmap path join its start to its goal,
    treating Delta and every other agent's start and goal regions as blockers?"""
    if len(layout.starts) != len(layout.goals):
        raise ValueError("starts and goals must pair up")
    rm = get_roadmap(layout.bounds, radius, resolution)
    out = []
    for i, (s, g) in enumerate(zip(layout.starts, layout.goals)):
        others = [b for k, b in enumerate(layout.starts) if k != i] + [b for k, b in enumerate(layout.goals) if k != i]
        (ok,) = rm.connected(list(layout.obstacles) + others, [(np.array(body_center(s)), np.array(body_center(g)))])
        out.append(ok)
    return out


def well_formed(layout: EnvironmentLayout, radius: float, resolution: float | None = None) -> bool:
    return all(agent_connectivity(layout, radius, resolution))


def agent_regions(points, radius: float) -> list[Disk]:
    return [Disk(tuple(p), radius) for p in np.asarray(points, float).reshape(-1, 2)]
