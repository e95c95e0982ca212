import inspect

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _rvo_reference import select_velocity as reference_select
from envopt.geometry import Rect
from envopt.rvo import AgentState, PlannerConfig, preferred_velocity, select_velocity, step_agents

CFG = PlannerConfig()


def agent(i, p, goal, v=(0, 0), r=0.3, vmax=0.1):
    return AgentState(i, np.array(p, float), np.array(v, float), r, np.array(goal, float), vmax)


def test_preferred_velocity_examples():
    np.testing.assert_allclose(preferred_velocity(agent(0, (0, 0), (10, 0))), (0.1, 0))
    np.testing.assert_array_equal(preferred_velocity(agent(0, (1, 1), (1, 1))), (0, 0))
    np.testing.assert_allclose(preferred_velocity(agent(0, (0, 0), (0.05, 0))), (0.05, 0))


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(sample_count=0)
    with pytest.raises(ValueError):
        AgentState(0, (0, 0), (0, 0), 0.0, (1, 1))


def test_free_space_returns_preferred():
    a = agent(0, (1, 1), (5, 4))
    v, stalled = select_velocity(a, [], [], CFG)
    np.testing.assert_array_equal(v, preferred_velocity(a))
    assert not stalled


def test_head_on_mirror_symmetry_and_separation():
    a, b = agent(0, (0, 0), (4, 0)), agent(1, (4, 0), (0, 0))
    agents = [a, b]
    cfg = PlannerConfig(rng_seed=3)
    for t in range(80):
        agents, _ = step_agents(agents, [], 1.0, cfg, step=t)
        gap = np.hypot(*(agents[0].position - agents[1].position)) - 0.6
        assert gap >= -1e-9
    # both agents arrive: the tie was broken without deadlock
    for t in range(80, 400):
        agents, _ = step_agents(agents, [], 1.0, cfg, step=t)
    assert all(np.hypot(*(x.position - x.goal)) < 0.1 for x in agents)


def test_head_on_first_step_mirror():
    # beyond the penalty horizon both agents keep their preferred velocity: exact mirror images
    a, b = agent(0, (0, 0), (4, 0)), agent(1, (4, 0), (0, 0))
    va, _ = select_velocity(a, [b], [], CFG)
    vb, _ = select_velocity(b, [a], [], CFG)
    np.testing.assert_array_equal(va, -vb)
    assert np.hypot(*((a.position + va) - (b.position + vb))) >= 0.6 - 1e-9


def test_wall_causes_lateral_motion():
    a = agent(0, (1, 2.1), (6, 2.1))
    wall = [Rect((1.45, 0), (1.6, 4))]
    agents = [a]
    lateral = 0.0
    for t in range(30):
        agents, _ = step_agents(agents, wall, 1.0, CFG, step=t)
        lateral = max(lateral, abs(agents[0].velocity[1]))
    assert lateral > 0


def test_single_agent_arrives_quickly():
    agents = [agent(0, (1.5, 1.5), (5.5, 4.5))]
    for t in range(55):
        agents, _ = step_agents(agents, [], 1.0, CFG, step=t)
        if np.hypot(*(agents[0].position - agents[0].goal)) <= 0.1:
            break
    assert np.hypot(*(agents[0].position - agents[0].goal)) <= 0.1


def test_zero_agents_identity():
    assert step_agents([], [Rect((0, 0), (1, 1))], 1.0, CFG) == ([], [])
    with pytest.raises(ValueError):
        step_agents([], [], 0.0, CFG)


def test_stall_flag_when_boxed_in():
    a = agent(0, (0.5, 0.5), (5, 5))
    box = [Rect((0.8, 0), (2, 2)), Rect((0, 0.8), (0.8, 2)), Rect((-1, -1), (0, 2)), Rect((0, -1), (2, 0))]
    v, stalled = select_velocity(a, [], box, CFG)
    np.testing.assert_array_equal(v, (0, 0))
    assert stalled


def _random_case(rng):
    a = agent(0, rng.uniform(0, 5, 2), rng.uniform(0, 5, 2), rng.uniform(-0.07, 0.07, 2))
    nbrs = []
    for i in range(int(rng.integers(0, 4))):
        p = a.position + rng.uniform(-1.5, 1.5, 2)
        if np.hypot(*(p - a.position)) >= 0.6:
            nbrs.append(agent(i + 1, p, rng.uniform(0, 5, 2), rng.uniform(-0.07, 0.07, 2)))
    obs = []
    for _ in range(int(rng.integers(0, 4))):
        lo = a.position + rng.uniform(-2, 2, 2)
        obs.append(Rect(tuple(lo), tuple(lo + rng.uniform(0.3, 1.0, 2))))
    ov = rng.uniform(-0.05, 0.05, (len(obs), 2))
    return a, nbrs, obs, ov


def test_kernel_matches_numpy_reference():
    rng = np.random.default_rng(11)
    for k in range(400):
        a, nbrs, obs, ov = _random_case(rng)
        cfg = PlannerConfig(rng_seed=k % 7)
        v1, s1 = select_velocity(a, nbrs, obs, cfg, 1.0, k, ov)
        v2, s2 = reference_select(a, nbrs, obs, cfg, 1.0, k, ov)
        np.testing.assert_allclose(v1, v2, atol=1e-12)
        assert s1 == s2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_speed_cap(seed):
    a, nbrs, obs, ov = _random_case(np.random.default_rng(seed))
    v, _ = select_velocity(a, nbrs, obs, CFG, 1.0, seed, ov)
    assert np.hypot(*v) <= a.v_max + 1e-9


def test_determinism():
    rng = np.random.default_rng(5)
    agents = [agent(i, rng.uniform(1, 7, 2), rng.uniform(1, 7, 2)) for i in range(4)]
    obs = [Rect((3, 3), (4, 4))]

    def run():
        ag = list(agents)
        out = []
        for t in range(50):
            ag, _ = step_agents(ag, obs, 1.0, CFG, step=t)
            out.append(np.array([x.position for x in ag]))
        return np.array(out)

    assert np.array_equal(run(), run())


def test_select_velocity_interface_is_local():
    # the planner sees only the agent, its neighbour list and rectangle bodies
    params = list(inspect.signature(select_velocity).parameters)
    assert params == ["agent", "neighbors", "obstacles", "cfg", "dt", "step", "obstacle_velocities"]


def test_far_neighbours_do_not_matter():
    a = agent(0, (1, 1), (6, 6))
    near = agent(1, (2, 1.5), (0, 0))
    far = agent(2, (9, 9), (0, 0))
    agents = [a, near, far]
    moved = [a, near, agent(2, (12, 3), (5, 5), v=(0.05, 0))]
    s1, _ = step_agents(agents, [], 1.0, CFG)
    s2, _ = step_agents(moved, [], 1.0, CFG)
    np.testing.assert_array_equal(s1[0].velocity, s2[0].velocity)
