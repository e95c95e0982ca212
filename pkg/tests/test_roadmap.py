import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _roadmap_reference import lattice_distance
from envopt.geometry import EnvironmentLayout, Rect, collision_free_path
from envopt.metrics import shortest_path_length
from envopt.roadmap import Roadmap, default_spacing, path_length


def test_default_spacing():
    assert default_spacing(0.3) == 0.125
    assert default_spacing(0.5) == 0.25
    assert default_spacing(0.3) <= 0.3 / 2


def test_shortest_path_examples():
    empty = EnvironmentLayout(Rect((-1, -1), (5, 6)))
    d = shortest_path_length(empty, (0, 0), (3, 4), 0.3, smooth=False)
    assert 5.0 <= d <= 5.0 * 1.08
    assert shortest_path_length(empty, (0, 0), (3, 4), 0.3) == pytest.approx(5.0)
    assert shortest_path_length(empty, (1, 1), (1, 1), 0.3) == 0.0
    walled = EnvironmentLayout(Rect((0, 0), (6, 6)), [], [], [Rect((3, 0), (3.5, 6))])
    assert shortest_path_length(walled, (1, 1), (5, 5), 0.3) == math.inf


@pytest.mark.parametrize("seed", range(6))
def test_roadmap_matches_networkx_oracle(seed):
    rng = np.random.default_rng(seed)
    bounds = Rect((0, 0), (4, 4))
    obstacles = [Rect.cell(int(c), int(r)) for c, r in rng.integers(0, 4, (4, 2))]
    obstacles = list(dict.fromkeys(obstacles))
    cells = [(c, r) for c in range(4) for r in range(4) if Rect.cell(c, r) not in obstacles]
    a, b = rng.choice(len(cells), 2, replace=False)
    s, g = tuple(np.add(cells[a], 0.5)), tuple(np.add(cells[b], 0.5))
    rm = Roadmap(bounds, 0.3, 0.25)
    got = rm.distances(obstacles, [(s, g)])[0]
    want = lattice_distance(bounds, obstacles, 0.3, 0.25, s, g)
    if math.isinf(want):
        assert math.isinf(got)
    else:
        assert got == pytest.approx(want, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=12, unique=True),
       st.tuples(st.integers(0, 7), st.integers(0, 7)), st.tuples(st.integers(0, 7), st.integers(0, 7)))
def test_shortest_path_bounds(cells, a, b):
    obstacles = [Rect.cell(*c) for c in cells if c not in (a, b)]
    lay = EnvironmentLayout(Rect((0, 0), (8, 8)), [], [], obstacles)
    s, g = np.add(a, 0.5), np.add(b, 0.5)
    raw = shortest_path_length(lay, s, g, 0.3, smooth=False)
    sm = shortest_path_length(lay, s, g, 0.3)
    straight = float(np.hypot(*(g - s)))
    if math.isinf(raw):
        assert math.isinf(sm)
        return
    assert sm >= straight - 1e-9
    assert sm <= raw + 1e-9
    rm = Roadmap(lay.bounds, 0.3)
    (path,) = rm.paths(obstacles, [(s, g)])
    assert collision_free_path(path, 0.3 - 1e-9, lay) if len(path) >= 2 else True
    assert path_length(path) == pytest.approx(sm)


def test_components_and_connected():
    rm = Roadmap(Rect((0, 0), (6, 6)), 0.3)
    wall = [Rect((3, 0), (3.5, 6))]
    assert rm.connected(wall, [((1, 1), (1, 5)), ((1, 1), (5, 5))]) == [True, False]
    free, labels = rm.components(wall)
    assert len(set(labels[free])) == 2
