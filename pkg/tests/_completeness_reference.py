"""Independent oracles for the completeness checks."""
from collections import deque

import numpy as np
import shapely

from envopt.geometry import Disk, EnvironmentLayout, Rect
from envopt.roadmap import default_spacing


def random_disk_layout(rng, w, h, m, n, r):
    """Unit-cell obstacles plus start/goal disks centred in distinct free cells."""
    cells = rng.choice(w * h, m + 2 * n, replace=False)
    cc = [(int(k % w), int(k // w)) for k in cells]
    obs = [Rect.cell(*c) for c in cc[:m]]
    starts = [Disk((c + 0.5, rr + 0.5), r) for c, rr in cc[m:m + n]]
    goals = [Disk((c + 0.5, rr + 0.5), r) for c, rr in cc[m + n:]]
    return EnvironmentLayout(Rect((0, 0), (w, h)), starts, goals, obs)


def bfs_oracle(layout: EnvironmentLayout, radius: float) -> list[bool]:
    """Lattice BFS with clearances measured by shapely; starts/goals sit on lattice nodes."""
    h = default_spacing(radius)
    (x0, y0), (x1, y1) = layout.bounds.lo, layout.bounds.hi
    nx_, ny_ = int(round((x1 - x0) / h)) + 1, int(round((y1 - y0) / h)) + 1
    ii, jj = np.meshgrid(np.arange(nx_), np.arange(ny_), indexing="ij")
    P = np.stack([x0 + ii * h, y0 + jj * h], -1)

    def geom(b):
        if isinstance(b, Disk):
            return shapely.Point(b.center).buffer(b.radius, quad_segs=64)
        return shapely.box(*b.lo, *b.hi)

    out = []
    for i, (s, g) in enumerate(zip(layout.starts, layout.goals)):
        others = [b for k, b in enumerate(layout.starts) if k != i] + [b for k, b in enumerate(layout.goals) if k != i]
        blockers = list(layout.obstacles) + others
        inside = ((P[..., 0] >= x0 + radius - 1e-12) & (P[..., 0] <= x1 - radius + 1e-12)
                  & (P[..., 1] >= y0 + radius - 1e-12) & (P[..., 1] <= y1 - radius + 1e-12))
        free = inside.copy()
        edge_ok = {}
        if blockers:
            union = shapely.union_all([geom(b) for b in blockers])
            d = shapely.distance(shapely.points(P.reshape(-1, 2)), union).reshape(nx_, ny_)
            # disks are polygonised inside the true circle (chord error < 3e-5 here)
            free &= d >= radius - 1e-4
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            a = P[: nx_ - di, max(0, -dj): ny_ - max(0, dj)]
            b = P[di:, max(0, dj): ny_ - max(0, -dj) if dj < 0 else ny_]
            if blockers:
                segs = shapely.linestrings(np.stack([a.reshape(-1, 2), b.reshape(-1, 2)], 1))
                clear = (shapely.distance(segs, union) >= radius - 1e-4).reshape(a.shape[:2])
            else:
                clear = np.ones(a.shape[:2], bool)
            edge_ok[(di, dj)] = clear
        start = tuple(np.round((np.array(s.center) - (x0, y0)) / h).astype(int))
        goal = tuple(np.round((np.array(g.center) - (x0, y0)) / h).astype(int))

        def passable(c, n):
            di, dj = n[0] - c[0], n[1] - c[1]
            if di < 0 or (di == 0 and dj < 0):
                c, n, di, dj = n, c, -di, -dj
            return edge_ok[(di, dj)][c[0], c[1] - max(0, -dj)]

        seen, queue, ok = {start}, deque([start]), False
        if not free[start] or not free[goal]:
            out.append(False)
            continue
        while queue:
            c = queue.popleft()
            if c == goal:
                ok = True
                break
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    n = (c[0] + di, c[1] + dj)
                    if (di, dj) == (0, 0) or n in seen or not (0 <= n[0] < nx_ and 0 <= n[1] < ny_):
                        continue
                    if free[n] and passable(c, n):
                        seen.add(n)
                        queue.append(n)
        out.append(ok)
    return out
