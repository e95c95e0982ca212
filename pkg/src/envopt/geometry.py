"""Distance, area and clearance primitives for disks and axis-aligned rectangles.

Workspace units: one grid cell of the discrete setting is one unit of length.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np


def _vec(v) -> tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite coordinate {v!r}")
    return (x, y)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def bbox(self) -> tuple[float, float, float, float]:
        (x, y), r = self.center, self.radius
        return (x - r, y - r, x + r, y + r)

    def translate(self, d) -> "Disk":
        return Disk((self.center[0] + d[0], self.center[1] + d[1]), self.radius)

    def to_list(self) -> list[float]:
        return [*self.center, self.radius]


@dataclass(frozen=True)
class Rect:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ValueError(f"degenerate rectangle {self.lo} .. {self.hi}")

    @classmethod
    def cell(cls, col: int, row: int) -> "Rect":
        return cls((col, row), (col + 1, row + 1))

    @classmethod
    def centered(cls, center, half_extent) -> "Rect":
        cx, cy = center
        hx, hy = half_extent
        return cls((cx - hx, cy - hy), (cx + hx, cy + hy))

    @property
    def center(self) -> tuple[float, float]:
        return ((self.lo[0] + self.hi[0]) / 2, (self.lo[1] + self.hi[1]) / 2)

    @property
    def half_extent(self) -> tuple[float, float]:
        return ((self.hi[0] - self.lo[0]) / 2, (self.hi[1] - self.lo[1]) / 2)

    @property
    def area(self) -> float:
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])

    def bbox(self) -> tuple[float, float, float, float]:
        return (*self.lo, *self.hi)

    def corners(self) -> list[tuple[float, float]]:
        (x0, y0), (x1, y1) = self.lo, self.hi
        return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]

    def translate(self, d) -> "Rect":
        return Rect((self.lo[0] + d[0], self.lo[1] + d[1]), (self.hi[0] + d[0], self.hi[1] + d[1]))

    def contains(self, other: "Body") -> bool:
        x0, y0, x1, y1 = other.bbox()
        return self.lo[0] <= x0 and self.lo[1] <= y0 and x1 <= self.hi[0] and y1 <= self.hi[1]

    def to_list(self) -> list[float]:
        return [*self.lo, *self.hi]


Body = Union[Disk, Rect]


def body_from_list(values: Sequence[float]) -> Body:
    if len(values) == 3:
        return Disk(values[:2], values[2])
    if len(values) == 4:
        return Rect(values[:2], values[2:])
    raise ValueError(f"expected [x, y, r] or [x0, y0, x1, y1], got {values!r}")


def body_center(b: Body) -> tuple[float, float]:
    return b.center


# ---------------------------------------------------------------------------
# distances


def point_rect_distance(p, rect: Rect) -> float:
    dx = max(rect.lo[0] - p[0], 0.0, p[0] - rect.hi[0])
    dy = max(rect.lo[1] - p[1], 0.0, p[1] - rect.hi[1])
    return math.hypot(dx, dy)


def points_rect_distance(pts: np.ndarray, lo, hi) -> np.ndarray:
    """Vectorised point-to-rectangle distance for ``pts`` of shape (..., 2)."""
    d = np.maximum(np.maximum(lo - pts, 0.0), pts - hi)
    return np.hypot(d[..., 0], d[..., 1])


def point_body_distance(p, b: Body) -> float:
    if isinstance(b, Disk):
        return max(0.0, math.hypot(p[0] - b.center[0], p[1] - b.center[1]) - b.radius)
    return point_rect_distance(p, b)


def dist(a: Body, b: Body) -> float:
    """Minimum Euclidean distance between two bodies, 0 when they intersect."""
    if isinstance(a, Disk) and isinstance(b, Disk):
        d = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
        return max(0.0, d - (a.radius + b.radius))
    if isinstance(a, Disk):
        return max(0.0, point_rect_distance(a.center, b) - a.radius)
    if isinstance(b, Disk):
        return max(0.0, point_rect_distance(b.center, a) - b.radius)
    dx = max(a.lo[0] - b.hi[0], 0.0, b.lo[0] - a.hi[0])
    dy = max(a.lo[1] - b.hi[1], 0.0, b.lo[1] - a.hi[1])
    return math.hypot(dx, dy)


def overlaps(a: Body, b: Body) -> bool:
    """True when the interiors of ``a`` and ``b`` intersect (touching is not overlap)."""
    if isinstance(a, Rect) and isinstance(b, Rect):
        return (
            min(a.hi[0], b.hi[0]) > max(a.lo[0], b.lo[0])
            and min(a.hi[1], b.hi[1]) > max(a.lo[1], b.lo[1])
        )
    if isinstance(a, Disk) and isinstance(b, Disk):
        d = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
        return d < a.radius + b.radius
    disk, rect = (a, b) if isinstance(a, Disk) else (b, a)
    return point_rect_distance(disk.center, rect) < disk.radius


def max_distance(a: Body, b: Body) -> float:
    """Largest distance between a point of ``a`` and a point of ``b``."""
    pa = [a.center] if isinstance(a, Disk) else a.corners()
    pb = [b.center] if isinstance(b, Disk) else b.corners()
    ra = a.radius if isinstance(a, Disk) else 0.0
    rb = b.radius if isinstance(b, Disk) else 0.0
    return max(math.hypot(p[0] - q[0], p[1] - q[1]) for p in pa for q in pb) + ra + rb


def segment_point_distance(p0, p1, q) -> float:
    p0, p1, q = np.asarray(p0, float), np.asarray(p1, float), np.asarray(q, float)
    d = p1 - p0
    L2 = float(d @ d)
    t = 0.0 if L2 == 0.0 else min(1.0, max(0.0, float((q - p0) @ d) / L2))
    return float(np.hypot(*(p0 + t * d - q)))


def segments_rect_distance(p0: np.ndarray, p1: np.ndarray, lo, hi) -> np.ndarray:
    """Exact distance between segments p0[k]->p1[k] and the rectangle [lo, hi].

    For a segment that misses a convex polygon the minimum is attained at a
    vertex of one of the two, so endpoint and corner distances suffice once
    intersection is ruled out.
    """
    p0 = np.asarray(p0, float).reshape(-1, 2)
    p1 = np.asarray(p1, float).reshape(-1, 2)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    d = p1 - p0

    # Liang-Barsky clip against the slabs
    t0 = np.zeros(len(p0))
    t1 = np.ones(len(p0))
    hit = np.ones(len(p0), bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for ax in range(2):
            par = d[:, ax] == 0.0
            outside = par & ((p0[:, ax] < lo[ax]) | (p0[:, ax] > hi[ax]))
            hit &= ~outside
            ta = (lo[ax] - p0[:, ax]) / d[:, ax]
            tb = (hi[ax] - p0[:, ax]) / d[:, ax]
            tmin = np.where(par, -np.inf, np.minimum(ta, tb))
            tmax = np.where(par, np.inf, np.maximum(ta, tb))
            t0 = np.maximum(t0, tmin)
            t1 = np.minimum(t1, tmax)
    hit &= t0 <= t1

    out = np.minimum(points_rect_distance(p0, lo, hi), points_rect_distance(p1, lo, hi))
    L2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(L2 > 0, L2, 1.0)
    for c in ((lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])):
        c = np.asarray(c)
        t = np.clip(np.einsum("ij,ij->i", c - p0, d) / safe, 0.0, 1.0)
        t = np.where(L2 > 0, t, 0.0)
        q = p0 + t[:, None] * d - c
        out = np.minimum(out, np.hypot(q[:, 0], q[:, 1]))
    return np.where(hit, 0.0, out)


def segment_body_distance(p0, p1, b: Body) -> float:
    if isinstance(b, Disk):
        return max(0.0, segment_point_distance(p0, p1, b.center) - b.radius)
    return float(segments_rect_distance(np.asarray(p0), np.asarray(p1), b.lo, b.hi)[0])


# ---------------------------------------------------------------------------
# areas


def _rect_union_area(rects: Sequence[Rect]) -> float:
    xs = sorted({v for r in rects for v in (r.lo[0], r.hi[0])})
    ys = sorted({v for r in rects for v in (r.lo[1], r.hi[1])})
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    cover = np.zeros((len(xs) - 1, len(ys) - 1), bool)
    for r in rects:
        cover[xi[r.lo[0]]:xi[r.hi[0]], yi[r.lo[1]]:yi[r.hi[1]]] = True
    w = np.diff(xs)
    h = np.diff(ys)
    return float(w @ cover @ h)


def _slice_length(bodies: Sequence[Body], y: float) -> float:
    spans = []
    for b in bodies:
        if isinstance(b, Rect):
            if b.lo[1] <= y <= b.hi[1]:
                spans.append((b.lo[0], b.hi[0]))
        else:
            dy = y - b.center[1]
            if abs(dy) < b.radius:
                hw = math.sqrt(b.radius**2 - dy**2)
                spans.append((b.center[0] - hw, b.center[0] + hw))
    if not spans:
        return 0.0
    spans.sort()
    total, (a, c) = 0.0, spans[0]
    for s, e in spans[1:]:
        if s > c:
            total += c - a
            a, c = s, e
        else:
            c = max(c, e)
    return total + c - a


def _mixed_union_area(bodies: Sequence[Body], pieces: int = 32, order: int = 24) -> float:
    # exact union length per horizontal slice, Gauss-Legendre across y
    ys = set()
    for b in bodies:
        x0, y0, x1, y1 = b.bbox()
        ys.update((y0, y1))
        if isinstance(b, Disk):
            ys.add(b.center[1])
    ys = sorted(ys)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, c in zip(ys[:-1], ys[1:]):
        edges = np.linspace(a, c, pieces + 1)
        for u, v in zip(edges[:-1], edges[1:]):
            mid, half = (u + v) / 2, (v - u) / 2
            total += half * sum(
                w * _slice_length(bodies, mid + half * t) for t, w in zip(nodes, weights)
            )
    return total


def region_area(bodies: Iterable[Body]) -> float:
    """Area of the union of ``bodies`` (overlaps counted once).

    Bodies are grouped into overlap-connected clusters; singletons and
    rectangle-only clusters are exact, mixed clusters use slice quadrature.
    """
    bodies = list(bodies)
    n = len(bodies)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if overlaps(bodies[i], bodies[j]):
                parent[find(i)] = find(j)
    clusters: dict[int, list[Body]] = {}
    for i, b in enumerate(bodies):
        clusters.setdefault(find(i), []).append(b)

    total = 0.0
    for group in clusters.values():
        if len(group) == 1:
            total += group[0].area
        elif all(isinstance(b, Rect) for b in group):
            total += _rect_union_area(group)
        else:
            total += _mixed_union_area(group)
    return total


# ---------------------------------------------------------------------------
# layouts


@dataclass
class EnvironmentLayout:
    bounds: Rect
    starts: list[Body] = field(default_factory=list)
    goals: list[Body] = field(default_factory=list)
    obstacles: list[Rect] = field(default_factory=list)

    def validate(self) -> "EnvironmentLayout":
        groups = {"starts": self.starts, "goals": self.goals, "obstacles": self.obstacles}
        for name, bodies in groups.items():
            for b in bodies:
                if not self.bounds.contains(b):
                    raise ValueError(f"{name} body {b} lies outside the workspace")
        names = list(groups)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                for x in groups[a]:
                    for y in groups[b]:
                        if overlaps(x, y):
                            raise ValueError(f"{a} and {b} overlap: {x} / {y}")
        return self

    def without_obstacle(self, j: int) -> "EnvironmentLayout":
        obs = self.obstacles[:j] + self.obstacles[j + 1:]
        return EnvironmentLayout(self.bounds, list(self.starts), list(self.goals), obs)

    def to_dict(self) -> dict:
        return {
            "bounds": [list(self.bounds.lo), list(self.bounds.hi)],
            "starts": [b.to_list() for b in self.starts],
            "goals": [b.to_list() for b in self.goals],
            "obstacles": [b.to_list() for b in self.obstacles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentLayout":
        lo, hi = d["bounds"]
        obstacles = [body_from_list(v) for v in d.get("obstacles", [])]
        if not all(isinstance(o, Rect) for o in obstacles):
            raise ValueError("obstacles must be rectangles [x0, y0, x1, y1]")
        return cls(
            Rect(lo, hi),
            [body_from_list(v) for v in d.get("starts", [])],
            [body_from_list(v) for v in d.get("goals", [])],
            obstacles,
        ).validate()

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentLayout":
        return cls.from_dict(json.loads(text))


def collision_free_path(waypoints, radius: float, layout: EnvironmentLayout) -> bool:
    """True iff a disk of ``radius`` can follow the polyline without touching Δ.

    Clearance is a closed condition: distance exactly ``radius`` is allowed.
    """
    pts = np.asarray(waypoints, float).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("a path needs at least two waypoints")
    lo = np.asarray(layout.bounds.lo) + radius
    hi = np.asarray(layout.bounds.hi) - radius
    if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        return False
    for ob in layout.obstacles:
        d = segments_rect_distance(pts[:-1], pts[1:], ob.lo, ob.hi)
        if np.any(d < radius - 1e-12):
            return False
    return True
