"""Is a layout solvable for every agent, and does it leave enough free space?

We build an 8x8 grid with a wall that has a single gap, check the offline
area condition and per-agent connectivity, then plug the gap and check again.
"""
from envopt.completeness import agent_connectivity, offline_condition, online_capacity_condition
from envopt.discrete_env import GridWorld

wall = [(4, y) for y in range(8) if y != 3]
open_world = GridWorld(8, 8, wall, agents=[(1, 1), (1, 6)], goals=[(6, 6), (6, 1)])
layout = open_world.to_layout()

rep = offline_condition(layout, n=2, r_hat=0.3)
print(f"free area {rep.lhs:.2f} vs required {rep.rhs:.2f} -> satisfied={rep.satisfied}")
print("each agent can reach its goal:", agent_connectivity(layout, 0.3))

# an obstacle in the gap cuts both agents off
closed = GridWorld(8, 8, wall + [(4, 3)], agents=open_world.agents, goals=open_world.goals)
print("after plugging the gap:", agent_connectivity(closed.to_layout(), 0.3))

# online: can moving obstacles open space faster than two agents consume it?
print("online capacity:", online_capacity_condition(n=2, r_hat=0.3, v_hat=0.1, delta_dot=0.05).to_dict())
