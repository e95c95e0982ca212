"""8-connected clearance roadmap over a rectangular workspace.

Lattice nodes sit at ``bounds.lo + (i, j) * spacing``. A node is free when a
disk of the configured radius centred on it stays inside the workspace and
keeps distance >= radius from every blocker; an edge is free when the whole
segment does. Per-blocker masks are cached so that remove-one-obstacle
queries only cost a graph search.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .geometry import Body, Disk, Rect, segments_rect_distance

_EPS = 1e-12
_DIRS = ((1, 0), (0, 1), (1, 1), (1, -1))


def default_spacing(radius: float) -> float:
    """Largest spacing 1/(2k) not above radius/2; keeps half-integers on the lattice."""
    return 1.0 / (2 * math.ceil(1.0 / radius))


def _segments_body_distance(p0: np.ndarray, p1: np.ndarray, b: Body) -> np.ndarray:
    if isinstance(b, Rect):
        return segments_rect_distance(p0, p1, b.lo, b.hi)
    c = np.asarray(b.center)
    d = p1 - p0
    L2 = np.einsum("ij,ij->i", d, d)
    t = np.where(L2 > 0, np.einsum("ij,ij->i", c - p0, d) / np.where(L2 > 0, L2, 1), 0.0)
    q = p0 + np.clip(t, 0, 1)[:, None] * d - c
    return np.maximum(np.hypot(q[:, 0], q[:, 1]) - b.radius, 0.0)


def _points_body_distance(pts: np.ndarray, b: Body) -> np.ndarray:
    if isinstance(b, Rect):
        d = np.maximum(np.maximum(np.asarray(b.lo) - pts, 0.0), pts - np.asarray(b.hi))
        return np.hypot(d[:, 0], d[:, 1])
    q = pts - np.asarray(b.center)
    return np.maximum(np.hypot(q[:, 0], q[:, 1]) - b.radius, 0.0)


class Roadmap:
    def __init__(self, bounds: Rect, radius: float, spacing: float | None = None):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.bounds = bounds
        self.radius = float(radius)
        self.h = float(spacing) if spacing else default_spacing(radius)
        w = bounds.hi[0] - bounds.lo[0]
        hgt = bounds.hi[1] - bounds.lo[1]
        self.nx = int(math.floor(w / self.h + 1e-9)) + 1
        self.ny = int(math.floor(hgt / self.h + 1e-9)) + 1
        gx = bounds.lo[0] + self.h * np.arange(self.nx)
        gy = bounds.lo[1] + self.h * np.arange(self.ny)
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        self.points = np.stack([X.ravel(), Y.ravel()], axis=1)
        r = self.radius
        inside = (
            (X >= bounds.lo[0] + r - _EPS) & (X <= bounds.hi[0] - r + _EPS)
            & (Y >= bounds.lo[1] + r - _EPS) & (Y <= bounds.hi[1] - r + _EPS)
        )
        self.base_free = inside.ravel()
        self._edges = []
        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        for di, dj in _DIRS:
            ok = (ii + di < self.nx) & (jj + dj >= 0) & (jj + dj < self.ny)
            src = (ii * self.ny + jj)[ok]
            dst = ((ii + di) * self.ny + (jj + dj))[ok]
            self._edges.append((src, dst, self.h * math.hypot(di, dj)))
        self._cache: dict = {}

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def _index(self, i, j):
        return i * self.ny + j

    def _window(self, b: Body, pad: float):
        x0, y0, x1, y1 = b.bbox()
        lo = self.bounds.lo
        i0 = max(0, int(math.floor((x0 - pad - lo[0]) / self.h)))
        i1 = min(self.nx - 1, int(math.ceil((x1 + pad - lo[0]) / self.h)))
        j0 = max(0, int(math.floor((y0 - pad - lo[1]) / self.h)))
        j1 = min(self.ny - 1, int(math.ceil((y1 + pad - lo[1]) / self.h)))
        return i0, i1, j0, j1

    def blocker_masks(self, b: Body):
        """(blocked node indices, [blocked edge positions per direction]) for one blocker."""
        hit = self._cache.get(b)
        if hit is not None:
            return hit
        i0, i1, j0, j1 = self._window(b, self.radius + 1.5 * self.h)
        if i0 > i1 or j0 > j1:
            res = (np.empty(0, int), [np.empty(0, int) for _ in _DIRS])
            self._cache[b] = res
            return res
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
        idx = self._index(ii, jj).ravel()
        d = _points_body_distance(self.points[idx], b)
        nodes = idx[d < self.radius - _EPS]
        edges = []
        for di, dj in _DIRS:
            si, sj = ii.ravel(), jj.ravel()
            ti, tj = si + di, sj + dj
            ok = (ti >= i0) & (ti <= i1) & (tj >= j0) & (tj <= j1)
            src = self._index(si[ok], sj[ok])
            dst = self._index(ti[ok], tj[ok])
            dd = _segments_body_distance(self.points[src], self.points[dst], b)
            bad_src = src[dd < self.radius - _EPS]
            # positions of these edges inside the direction's edge list
            edges.append(self._edge_positions(di, dj, bad_src))
        res = (nodes, edges)
        if len(self._cache) > 20000:
            self._cache.clear()
        self._cache[b] = res
        return res

    def _edge_positions(self, di, dj, src):
        # edge arrays are built from a boolean mask in row-major (i, j) order
        k = _DIRS.index((di, dj))
        all_src = self._edges[k][0]
        return np.searchsorted(all_src, src)

    def free_mask(self, blockers: Iterable[Body]) -> np.ndarray:
        free = self.base_free.copy()
        for b in blockers:
            free[self.blocker_masks(b)[0]] = False
        return free

    def segment_clear(self, p0, p1, blockers: Sequence[Body]) -> bool:
        p0 = np.asarray(p0, float).reshape(1, 2)
        p1 = np.asarray(p1, float).reshape(1, 2)
        return bool(self._segments_clear(p0, p1, blockers)[0])

    def point_free(self, p, blockers: Sequence[Body]) -> bool:
        lo, hi, r = self.bounds.lo, self.bounds.hi, self.radius
        if not (lo[0] + r - _EPS <= p[0] <= hi[0] - r + _EPS and lo[1] + r - _EPS <= p[1] <= hi[1] - r + _EPS):
            return False
        pts = np.asarray(p, float).reshape(1, 2)
        return all(_points_body_distance(pts, b)[0] >= self.radius - _EPS for b in blockers)

    def _segments_clear(self, p0, p1, blockers):
        ok = np.ones(len(p0), bool)
        for b in blockers:
            ok &= _segments_body_distance(p0, p1, b) >= self.radius - _EPS
        return ok

    def _graph(self, blockers: Sequence[Body], extra: np.ndarray):
        free = self.free_mask(blockers)
        rows, cols, data = [], [], []
        for k, (src, dst, w) in enumerate(self._edges):
            good = free[src] & free[dst]
            for b in blockers:
                good[self.blocker_masks(b)[1][k]] = False
            rows.append(src[good])
            cols.append(dst[good])
            data.append(np.full(int(good.sum()), w))
        N = self.size
        # attach off-lattice query points to the free nodes around them
        for e, p in enumerate(extra):
            if not self.point_free(p, blockers):
                continue
            ci = int(math.floor((p[0] - self.bounds.lo[0]) / self.h))
            cj = int(math.floor((p[1] - self.bounds.lo[1]) / self.h))
            ii, jj = np.meshgrid(
                np.arange(max(ci - 1, 0), min(ci + 3, self.nx)),
                np.arange(max(cj - 1, 0), min(cj + 3, self.ny)),
                indexing="ij",
            )
            idx = self._index(ii, jj).ravel()
            idx = idx[free[idx]]
            if len(idx) == 0:
                continue
            pts = self.points[idx]
            clear = self._segments_clear(np.repeat(p[None], len(idx), 0), pts, blockers)
            idx = idx[clear]
            w = np.hypot(*(self.points[idx] - p).T)
            rows.append(np.full(len(idx), N + e))
            cols.append(idx)
            data.append(np.maximum(w, 1e-300))
        return free, rows, cols, data

    def _solve(self, blockers, pairs, want_paths):
        blockers = list(blockers)
        pairs = [(np.asarray(s, float), np.asarray(g, float)) for s, g in pairs]
        extra = np.array([p for pair in pairs for p in pair]).reshape(-1, 2)
        free, rows, cols, data = self._graph(blockers, extra)
        N = self.size
        n_nodes = N + len(extra)
        # direct start-goal shortcut when the straight segment is clear
        for k, (s, g) in enumerate(pairs):
            if self.point_free(s, blockers) and self.point_free(g, blockers) and self.segment_clear(s, g, blockers):
                rows.append(np.array([N + 2 * k]))
                cols.append(np.array([N + 2 * k + 1]))
                data.append(np.array([max(float(np.hypot(*(g - s))), 1e-300)]))
        G = coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, n_nodes),
        ).tocsr()
        sources = [N + 2 * k for k in range(len(pairs))]
        if not sources:
            return np.empty(0), []
        out = dijkstra(G, directed=False, indices=sources, return_predecessors=want_paths)
        dist, pred = (out if want_paths else (out, None))
        lengths = np.array([dist[k, N + 2 * k + 1] for k in range(len(pairs))])
        for k, (s, g) in enumerate(pairs):
            if np.array_equal(s, g):
                lengths[k] = 0.0 if self.point_free(s, blockers) else np.inf
        lengths[lengths < 1e-200] = 0.0
        paths = []
        if want_paths:
            for k, (s, g) in enumerate(pairs):
                if not np.isfinite(lengths[k]):
                    paths.append(None)
                    continue
                if lengths[k] == 0.0:
                    paths.append(np.array([s, g]))
                    continue
                node, seq = N + 2 * k + 1, []
                while node >= 0:
                    seq.append(node)
                    if node == N + 2 * k:
                        break
                    node = pred[k, node]
                pts = [self.points[v] if v < N else extra[v - N] for v in reversed(seq)]
                paths.append(np.array(pts))
        return lengths, paths

    def distances(self, blockers: Sequence[Body], pairs) -> np.ndarray:
        """Roadmap path length for each (start, goal) pair; inf when disconnected."""
        return self._solve(blockers, pairs, False)[0]

    def paths(self, blockers: Sequence[Body], pairs, smooth: bool = True):
        lengths, paths = self._solve(blockers, pairs, True)
        if smooth:
            paths = [None if p is None else self.shortcut(p, blockers) for p in paths]
        return paths

    def shortcut(self, path: np.ndarray, blockers: Sequence[Body]) -> np.ndarray:
        """Greedy string pulling: jump to the farthest visible waypoint."""
        out = [path[0]]
        i = 0
        while i < len(path) - 1:
            j = len(path) - 1
            while j > i + 1 and not self.segment_clear(path[i], path[j], blockers):
                j -= 1
            out.append(path[j])
            i = j
        return np.array(out)

    def connected(self, blockers: Sequence[Body], pairs) -> list[bool]:
        return [bool(np.isfinite(d)) for d in self.distances(blockers, pairs)]

    def components(self, blockers: Sequence[Body]):
        free, rows, cols, data = self._graph(list(blockers), np.empty((0, 2)))
        G = coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size),
        )
        return free, connected_components(G, directed=False)[1]


@lru_cache(maxsize=16)
def get_roadmap(bounds: Rect, radius: float, spacing: float | None = None) -> Roadmap:
    """Shared roadmap per workspace; blocker masks are reused across layouts."""
    return Roadmap(bounds, radius, spacing)


def path_length(path) -> float:
    p = np.asarray(path, float)
    if len(p) < 2:
        return 0.0
    return float(np.hypot(*np.diff(p, axis=0).T).sum())
