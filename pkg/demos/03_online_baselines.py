"""Obstacles that move while agents navigate.

Same 10x10 scenario, two obstacle controllers: obstacles that hold still, and
the heuristic commander that steers blocking obstacles out of the way.
"""
import numpy as np

from envopt.continuous_env import ZeroCommandPolicy, random_scenario, run_online_episode
from envopt.heuristic import HeuristicCommander
from envopt.metrics import trial_metrics

for m in (10, 14):
    world = random_scenario(np.random.default_rng(7), n_agents=4, m_obstacles=m)
    for name, ctrl in (("still", ZeroCommandPolicy()), ("heuristic", HeuristicCommander())):
        tr = run_online_episode(world, ctrl, max_steps=500, rng_seed=7)
        met = trial_metrics(tr)
        print(f"m={m:2d} {name:>9}: SPL {met['spl']:.3f}  PCTSpeed {met['pct_speed']:.3f}  "
              f"obstacle travel {met['obstacle_travel']:.1f}  steps {tr.steps}")
