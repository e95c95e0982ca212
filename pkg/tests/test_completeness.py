import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _completeness_reference import bfs_oracle, random_disk_layout
from envopt.completeness import (
    ConditionReport, agent_connectivity, free_area, layout_capacity, offline_condition, online_capacity_condition,
    well_formed,
)
from envopt.discrete_env import GridWorld, random_world
from envopt.geometry import Disk, EnvironmentLayout, Rect
from envopt.roadmap import default_spacing


def test_condition_report_invariants():
    r = ConditionReport.compare(3.0, 2.5)
    assert r.satisfied and r.margin == 0.5
    r = ConditionReport.compare(1.0, 2.0)
    assert not r.satisfied and r.margin == -1.0
    assert ConditionReport.compare(2.0, 2.0).satisfied


def _cells_layout(n_obstacle_cells, n_agents=4):
    # 8x8 with whole-cell starts/goals: |Delta u S u D| = obstacles + 2n cells
    cells = [(c, r) for r in range(8) for c in range(8)]
    obs = [Rect.cell(*c) for c in cells[:n_obstacle_cells]]
    starts = [Rect.cell(*c) for c in cells[n_obstacle_cells:n_obstacle_cells + n_agents]]
    goals = [Rect.cell(*c) for c in cells[n_obstacle_cells + n_agents:n_obstacle_cells + 2 * n_agents]]
    return EnvironmentLayout(Rect((0, 0), (8, 8)), starts, goals, obs)


def test_offline_condition_worked_example():
    lay = _cells_layout(10)
    rep = offline_condition(lay, 4, 0.5, d_max=9.9)
    assert rep.lhs == pytest.approx(46.0)
    assert rep.rhs == pytest.approx(39.6)
    assert rep.satisfied


def test_offline_condition_edge_cases():
    lay = _cells_layout(10)
    assert offline_condition(lay, 0, 0.3).rhs == 0.0
    assert offline_condition(lay, 0, 0.3).satisfied
    packed = EnvironmentLayout(Rect((0, 0), (2, 1)), [Disk((0.5, 0.5), 0.5)], [Disk((1.5, 0.5), 0.5)],
                               [Rect((0, 0), (2, 1))])
    rep = offline_condition(packed, 1, 0.5)
    assert rep.lhs <= 1e-9 and not rep.satisfied
    with pytest.raises(ValueError):
        offline_condition(EnvironmentLayout(Rect((0, 0), (2, 2))), 1, 0.3)
    with pytest.raises(ValueError):
        offline_condition(lay, -1, 0.3)
    with pytest.raises(ValueError):
        offline_condition(lay, 1, 0.0)


def test_online_condition_examples():
    rep = online_capacity_condition(4, 0.5, 0.1, 0.5)
    assert rep.rhs == pytest.approx(0.4) and rep.satisfied
    assert online_capacity_condition(4, 0.5, 0.0, 0.0).satisfied
    rep = online_capacity_condition(10, 0.5, 0.1, 0.9)
    assert rep.rhs == pytest.approx(1.0) and not rep.satisfied
    with pytest.raises(ValueError):
        online_capacity_condition(1, 0.5, -0.1, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.floats(0.01, 2), st.floats(0, 1))
def test_online_condition_boundary_closed(n, r, v):
    assert online_capacity_condition(n, r, v, 2 * n * r * v).satisfied


def test_conditions_match_direct_arithmetic_on_random_layouts():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        w, h = int(rng.integers(4, 11)), int(rng.integers(4, 11))
        n = int(rng.integers(1, 5))
        m = int(rng.integers(0, w * h - 2 * n + 1))
        r = float(rng.uniform(0.05, 0.5))
        lay = random_disk_layout(rng, w, h, m, n, r)
        # disjoint unit cells and disks that fit inside distinct cells
        lhs = w * h - m - 2 * n * math.pi * r * r
        d_max = max(math.hypot(s.center[0] - g.center[0], s.center[1] - g.center[1]) + 2 * r
                    for s in lay.starts for g in lay.goals)
        rep = offline_condition(lay, n, r)
        assert abs(rep.lhs - lhs) <= 1e-9
        assert abs(rep.rhs - 2 * n * d_max * r) <= 1e-9
        assert rep.satisfied == (lhs >= 2 * n * d_max * r)
        v, dd = float(rng.uniform(0, 0.5)), float(rng.uniform(0, 3))
        rep = online_capacity_condition(n, r, v, dd)
        assert abs(rep.rhs - 2 * n * r * v) <= 1e-9
        assert rep.satisfied == (dd >= 2 * n * r * v)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 40), st.integers(0, 20), st.floats(0.05, 1.0))
def test_offline_condition_monotone_in_n(seed, n, r):
    lay = random_disk_layout(np.random.default_rng(seed), 8, 8, 10, 4, 0.3)
    if not offline_condition(lay, n, r).satisfied:
        assert not offline_condition(lay, n + 1, r).satisfied


@pytest.mark.parametrize("seed", range(10))
def test_removing_obstacle_is_monotone(seed):
    rng = np.random.default_rng(seed)
    lay = random_disk_layout(rng, 6, 6, 12, 2, 0.3)
    base_wf = well_formed(lay, 0.3)
    base_margin = offline_condition(lay, 2, 0.3).margin
    for j in range(len(lay.obstacles)):
        smaller = lay.without_obstacle(j)
        if base_wf:
            assert well_formed(smaller, 0.3)
        assert offline_condition(smaller, 2, 0.3).margin >= base_margin - 1e-9


def test_well_formed_examples():
    empty = EnvironmentLayout(Rect((0, 0), (6, 6)), [Disk((1, 1), 0.3)], [Disk((5, 5), 0.3)], [])
    assert well_formed(empty, 0.3)
    wall = EnvironmentLayout(Rect((0, 0), (6, 6)), [Disk((1, 1), 0.3)], [Disk((5, 5), 0.3)],
                             [Rect((3, y), (4, y + 1)) for y in range(6)])
    assert not well_formed(wall, 0.3)
    # the other agent's goal closing a one-cell gap also breaks well-formedness
    gap = EnvironmentLayout(Rect((0, 0), (6, 6)), [Disk((1.5, 1.5), 0.3), Disk((5.5, 5.5), 0.3)],
                            [Disk((5.5, 1.5), 0.3), Disk((3.5, 3.5), 0.3)],
                            [Rect((3, y), (4, y + 1)) for y in range(6) if y != 3])
    assert agent_connectivity(gap, 0.3) == [False, True]


def test_well_formed_matches_bfs_oracle_on_6x6():
    rng = np.random.default_rng(7)
    outcomes = []
    for k in range(150):
        m = int(rng.integers(4, 16))
        world = random_world(rng, 6, 6, 2, m)
        lay = world.to_layout()
        got = agent_connectivity(lay, 0.3)
        assert got == bfs_oracle(lay, 0.3), f"instance {k}: {world.to_json()}"
        outcomes += got
    # the sample exercises both answers
    assert 0 < sum(outcomes) < len(outcomes)


def test_layout_capacity():
    lay = EnvironmentLayout(Rect((0, 0), (5, 5)), [], [], [Rect((0, 0), (1, 1)), Rect((2, 2), (4, 3))])
    assert layout_capacity(lay, 0.1) == pytest.approx(0.1 * (math.sqrt(2) + math.sqrt(5)))


def test_free_area_counts_overlaps_once():
    lay = EnvironmentLayout(Rect((0, 0), (4, 4)), [Disk((0.5, 0.5), 0.3)], [Disk((3.5, 3.5), 0.3)],
                            [Rect((1, 1), (2, 2))])
    assert free_area(lay) == pytest.approx(16 - 1 - 2 * math.pi * 0.09)


def test_grid_world_cells_lift():
    w = GridWorld(8, 8, [(2, 3)], [(0, 0)], [(7, 7)])
    lay = w.to_layout("cells")
    assert offline_condition(lay, 1, 0.3).lhs == pytest.approx(61.0)
