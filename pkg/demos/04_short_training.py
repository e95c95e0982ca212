"""A few PPO updates on the offline task, just to watch the loop run.

Real runs use configs/offline.json (see the README); this one finishes in
about a minute and writes its log and checkpoint to ./demo_run.
"""
from envopt.harness import ExperimentConfig, run_training, run_trials

cfg = ExperimentConfig.load(max_rounds=2, train_step_budget=5000,
                            ppo={"updates": 4, "batch_episodes": 4, "checkpoint_every": 2})
policy, log = run_training(cfg, "demo_run", callback=lambda r: print(
    f"update {r['update']}: env steps {r['env_steps']}, mean return {r['mean_return']:.3f}"))

rep, _, _ = run_trials(cfg.with_overrides(n_trials=3), "trained", policy=policy, sweep=[10])
print("SPL after a short run:", round(rep.get("spl", m_obstacles=10)["mean"], 3))
