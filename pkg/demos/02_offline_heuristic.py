"""Rearranging obstacles before the agents move.

A random 8x8 world is navigated as-is, then again after ten rounds of the
blocking-obstacle heuristic. Both layouts are drawn side by side.
"""
import sys

from envopt.discrete_env import navigate
from envopt.heuristic import run_heuristic
from envopt.metrics import trial_metrics
from envopt.plots import before_after_svg
from envopt.ppo import sample_grid_world

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1003
world = sample_grid_world(seed)
final, rounds = run_heuristic(world, 10, rng_seed=seed)
print(f"heuristic ran {len(rounds)} rounds, moved obstacles per round: {[len(r.moved) for r in rounds]}")

before, after = navigate(world), navigate(final)
for name, tr in (("unchanged", before), ("rearranged", after)):
    m = trial_metrics(tr)
    print(f"{name:>10}: SPL {m['spl']:.3f}  success {m['success_rate']:.2f}  steps {tr.steps}")

with open("before_after.svg", "w") as fh:
    fh.write(before_after_svg(before, after, ((0, 0), (world.width, world.height))))
print("wrote before_after.svg")
