"""PPO with GAE shared by the grid (categorical) and continuous (Gaussian) settings.

An *environment* here is anything with ``rollout(policy, seed) -> (trajectories,
info)``; a trajectory is the sample sequence of one decision maker (the whole
move sequence offline, one obstacle online).
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .discrete_env import GridWorld, grid_path_lengths, navigate, random_world, run_optimization_episode
from .heuristic import blocking_obstacles
from .metrics import RewardConfig, obstacle_reward, team_reward_offline, trial_metrics
from .nn import Adam, clip_grad_norm
from .policy import save_policy
from .rvo import PlannerConfig


@dataclass
class PpoConfig:
    clip_ratio: float = 0.2
    gae_lambda: float = 0.95
    gamma: float = 0.99
    epochs_per_batch: int = 4
    minibatch_size: int = 256
    learning_rate: float = 3e-4
    entropy_coeff: float = 0.01
    value_coeff: float = 0.5
    max_grad_norm: float = 0.5
    batch_episodes: int = 16
    updates: int = 100
    checkpoint_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.clip_ratio <= 0:
            raise ValueError("clip_ratio must be positive")
        if not 0 <= self.gae_lambda <= 1 or not 0 <= self.gamma <= 1:
            raise ValueError("gamma and gae_lambda must lie in [0, 1]")
        if min(self.epochs_per_batch, self.minibatch_size, self.batch_episodes) < 1:
            raise ValueError("epochs, minibatch size and batch episodes must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "PpoConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class Trajectory:
    observations: list
    actions: list
    log_probs: list
    values: list
    rewards: list


@dataclass
class RolloutBatch:
    observations: list
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray  # True on the last sample of each trajectory
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None
    infos: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.observations)
        for name in ("actions", "log_probs", "rewards", "values", "dones"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("non-finite reward in batch")

    def __len__(self):
        return len(self.observations)

    @classmethod
    def from_trajectories(cls, trajs, infos=()) -> "RolloutBatch":
        trajs = [t for t in trajs if len(t.rewards)]
        obs = [o for t in trajs for o in t.observations]
        cat = lambda name: np.concatenate([np.asarray(getattr(t, name), float) for t in trajs]) if trajs else np.zeros(0)
        dones = np.concatenate([np.arange(len(t.rewards)) == len(t.rewards) - 1 for t in trajs]) if trajs else np.zeros(0, bool)
        actions = [a for t in trajs for a in t.actions]
        return cls(obs, np.asarray(actions), cat("log_probs"), cat("rewards"), cat("values"), dones, infos=list(infos))


# ---------------------------------------------------------------------------
# environments


class OfflineGridTask:
    """Random grid layout -> policy rearranges obstacles for ``max_rounds`` -> navigation.

    The team reward of the navigation rollout is paid on the final move. With
    ``shaping > 0`` each move also earns ``shaping * (gamma * phi(next) - phi(prev))``
    where phi is minus the mean capped grid path length; being potential based it
    leaves the optimal policy unchanged. With ``blocked_only`` layouts are
    resampled until some obstacle blocks an agent. Only obstacle moves count as
    environment steps; the navigation rollout is reported as ``nav_steps``.
    """

    def __init__(self, width=8, height=8, n_agents=4, m_obstacles=10, max_rounds=10, max_steps=500,
                 planner_cfg: PlannerConfig | None = None, reward_cfg: RewardConfig | None = None,
                 blocked_only=True, radius=0.3, shaping=0.0, gamma=0.99):
        self.width, self.height, self.n_agents, self.m_obstacles = width, height, n_agents, m_obstacles
        self.max_rounds, self.max_steps, self.radius = max_rounds, max_steps, radius
        self.planner_cfg = planner_cfg or PlannerConfig()
        self.reward_cfg = reward_cfg or RewardConfig()
        self.blocked_only = blocked_only
        self.shaping, self.gamma = shaping, gamma

    def sample_world(self, seed: int) -> GridWorld:
        return sample_grid_world(seed, self.width, self.height, self.n_agents, self.m_obstacles, self.blocked_only,
                                 self.radius)

    def potential(self, world: GridWorld) -> float:
        cap = float(world.width + world.height)
        d = grid_path_lengths(world)
        return -float(np.mean(np.minimum(d, cap))) / cap if len(d) else 0.0

    def rollout(self, policy, seed: int):
        world = self.sample_world(seed)
        final, otrace = run_optimization_episode(world, policy, self.max_rounds, rng_seed=seed,
                                                 record_worlds=self.shaping > 0)
        nav = navigate(final, self.planner_cfg, self.max_steps, radius=self.radius)
        team = team_reward_offline(nav)
        rewards = np.zeros(len(otrace))
        if self.shaping > 0:
            phi = np.array([self.potential(w) for w in otrace.worlds])
            rewards += self.shaping * (self.gamma * phi[1:] - phi[:-1])
        last = otrace.moves[-1].obstacle if otrace.moves else 0
        rewards[-1] += obstacle_reward([team], last, 0.0, self.reward_cfg)
        traj = Trajectory(otrace.observations, [mv.action for mv in otrace.moves],
                          [mv.log_prob for mv in otrace.moves], [mv.value for mv in otrace.moves], list(rewards))
        info = {"return": team, "env_steps": len(otrace), "nav_steps": nav.steps, **trial_metrics(nav)}
        return [traj], info


def sample_grid_world(seed, width=8, height=8, n_agents=4, m_obstacles=10, blocked_only=True, radius=0.3):
    rng = np.random.default_rng(seed)
    while True:
        world = random_world(rng, width, height, n_agents, m_obstacles)
        if not blocked_only:
            return world
        layout = world.to_layout()
        if blocking_obstacles(layout, world.agent_points(), world.goal_points(), radius):
            return world


class OnlineTask:
    """Moving-obstacle episodes; each obstacle contributes one trajectory with dense rewards."""

    def __init__(self, scenario_kw=None, max_steps=500, comm_radius=2.0, planner_cfg=None, reward_cfg=None):
        self.scenario_kw = dict(scenario_kw or {})
        self.max_steps, self.comm_radius = max_steps, comm_radius
        self.planner_cfg = planner_cfg or PlannerConfig()
        self.reward_cfg = reward_cfg or RewardConfig()

    def sample_world(self, seed: int):
        from .continuous_env import random_scenario

        return random_scenario(np.random.default_rng(seed), **self.scenario_kw)

    def rollout(self, policy, seed: int):
        from .continuous_env import run_online_episode

        world = self.sample_world(seed)
        trace, smp = run_online_episode(world, policy, self.max_steps, self.comm_radius, rng_seed=seed,
                                        planner_cfg=self.planner_cfg, reward_cfg=self.reward_cfg, collect=True)
        trajs = []
        for j in range(len(world.obstacles)):
            trajs.append(Trajectory(
                [g[j] for g in smp.graphs], [a[j] for a in smp.actions], [lp[j] for lp in smp.log_probs],
                [v[j] for v in smp.values], [r[j] for r in smp.rewards],
            ))
        ret = float(np.mean([sum(t.rewards) for t in trajs])) if trajs else 0.0
        info = {"return": ret, "env_steps": trace.steps, **trial_metrics(trace)}
        return trajs, info


def episode_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([base, index]).generate_state(1)[0])


def collect_rollouts(env, policy, cfg: PpoConfig, first_episode: int = 0) -> RolloutBatch:
    trajs, infos = [], []
    for e in range(cfg.batch_episodes):
        t, info = env.rollout(policy, episode_seed(cfg.seed, first_episode + e))
        trajs.extend(t)
        infos.append(info)
    return RolloutBatch.from_trajectories(trajs, infos)


# ---------------------------------------------------------------------------
# advantages and update


def gae(rewards, values, dones, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates; the value after a trajectory end is 0."""
    r = np.asarray(rewards, float)
    v = np.asarray(values, float)
    d = np.asarray(dones, bool)
    adv = np.zeros_like(r)
    nxt_adv, nxt_v = 0.0, 0.0
    for t in range(len(r) - 1, -1, -1):
        if d[t]:
            nxt_adv, nxt_v = 0.0, 0.0
        delta = r[t] + gamma * nxt_v - v[t]
        nxt_adv = delta + gamma * lam * nxt_adv
        adv[t] = nxt_adv
        nxt_v = v[t]
    return adv


def compute_advantages(batch: RolloutBatch, gamma: float, lam: float, normalize: bool = True) -> np.ndarray:
    """Fill ``batch.advantages`` (normalised) and ``batch.returns`` (adv + value)."""
    raw = gae(batch.rewards, batch.values, batch.dones, gamma, lam)
    batch.returns = raw + batch.values
    if normalize and len(raw) > 1:
        raw = (raw - raw.mean()) / (raw.std() + 1e-8)
    batch.advantages = raw
    return raw


def clipped_surrogate(ratio, adv, clip: float) -> np.ndarray:
    ratio = np.asarray(ratio, float)
    return np.minimum(ratio * adv, np.clip(ratio, 1 - clip, 1 + clip) * adv)


def surrogate_grad_mask(ratio, adv, clip: float) -> np.ndarray:
    """1 where the surrogate depends on the ratio, 0 where clipping binds."""
    ratio = np.asarray(ratio, float)
    adv = np.asarray(adv, float)
    binds = ((adv > 0) & (ratio > 1 + clip)) | ((adv < 0) & (ratio < 1 - clip))
    return (~binds).astype(float)


def ppo_update(policy, batch: RolloutBatch, cfg: PpoConfig, optimizer: Adam | None = None, rng=None):
    """Clipped-surrogate epochs over shuffled minibatches; returns ``(policy, stats)``.

    A non-finite loss aborts the remaining update (``stats['aborted']``).
    """
    if batch.advantages is None or batch.returns is None:
        raise ValueError("compute_advantages must run before ppo_update")
    optimizer = optimizer or Adam(policy.params, cfg.learning_rate)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    n = len(batch)
    acc = {k: [] for k in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_frac", "grad_norm")}
    aborted = False
    for _ in range(cfg.epochs_per_batch):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.minibatch_size):
            idx = perm[s:s + cfg.minibatch_size]
            B = len(idx)
            obs = policy.collate([batch.observations[i] for i in idx])
            acts = batch.actions[idx]
            adv, ret, old = batch.advantages[idx], batch.returns[idx], batch.log_probs[idx]
            logp, ent, v, cache = policy.evaluate(obs, acts)
            ratio = np.exp(logp - old)
            pl = -clipped_surrogate(ratio, adv, cfg.clip_ratio).mean()
            vl = 0.5 * ((v - ret) ** 2).mean()
            em = ent.mean()
            loss = pl + cfg.value_coeff * vl - cfg.entropy_coeff * em
            if not math.isfinite(loss):
                aborted = True
                break
            mask = surrogate_grad_mask(ratio, adv, cfg.clip_ratio)
            dlogp = -(mask * adv * ratio) / B
            dent = np.full(B, -cfg.entropy_coeff / B)
            dv = cfg.value_coeff * (v - ret) / B
            grads = policy.backward_eval(cache, dlogp, dent, dv)
            gn = clip_grad_norm(grads, cfg.max_grad_norm)
            if not math.isfinite(gn):
                aborted = True
                break
            optimizer.step(policy.params, grads)
            acc["policy_loss"].append(pl)
            acc["value_loss"].append(vl)
            acc["entropy"].append(em)
            acc["approx_kl"].append(float(((ratio - 1) - np.log(ratio)).mean()))
            acc["clip_frac"].append(float((np.abs(ratio - 1) > cfg.clip_ratio).mean()))
            acc["grad_norm"].append(gn)
        if aborted:
            break
    stats = {k: float(np.mean(v)) if v else float("nan") for k, v in acc.items()}
    stats["aborted"] = aborted
    return policy, stats


# ---------------------------------------------------------------------------
# training loop

LOG_FIELDS = ("update", "episodes", "env_steps", "mean_return", "mean_spl", "eval_spl",
              "policy_loss", "value_loss", "entropy", "approx_kl", "clip_frac")


def train(env, policy, cfg: PpoConfig, out_dir=None, eval_fn=None, eval_every: int = 0, step_budget=None,
          callback=None):
    """Run ``cfg.updates`` PPO iterations; returns the list of log rows.

    Writes ``train_log.csv`` and ``checkpoint_<k>.bin`` / ``policy.bin`` into
    ``out_dir`` when given. ``step_budget`` stops before the environment-step
    count would be exceeded by another batch (estimated from the last one).
    """
    optimizer = Adam(policy.params, cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    steps = episodes = 0
    writer = fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        fh = open(os.path.join(out_dir, "train_log.csv"), "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        writer.writeheader()
    try:
        last_batch_steps = 0
        for u in range(cfg.updates):
            if step_budget is not None and steps + last_batch_steps > step_budget:
                break
            batch = collect_rollouts(env, policy, cfg, first_episode=episodes)
            episodes += cfg.batch_episodes
            last_batch_steps = sum(i.get("env_steps", 0) for i in batch.infos)
            steps += last_batch_steps
            compute_advantages(batch, cfg.gamma, cfg.gae_lambda)
            policy, stats = ppo_update(policy, batch, cfg, optimizer, rng)
            row = {
                "update": u + 1,
                "episodes": episodes,
                "env_steps": steps,
                "mean_return": float(np.mean([i["return"] for i in batch.infos])),
                "mean_spl": float(np.mean([i.get("spl", np.nan) for i in batch.infos])),
                "eval_spl": "",
                **{k: stats[k] for k in LOG_FIELDS[6:]},
            }
            if eval_fn is not None and eval_every and (u + 1) % eval_every == 0:
                row["eval_spl"] = float(eval_fn(policy))
            rows.append(row)
            if writer:
                writer.writerow(row)
                fh.flush()
                if cfg.checkpoint_every and (u + 1) % cfg.checkpoint_every == 0:
                    save_policy(policy, os.path.join(out_dir, f"checkpoint_{u + 1:04d}.bin"))
            if callback:
                callback(row)
            if stats["aborted"]:
                raise FloatingPointError(f"non-finite loss at update {u + 1}")
    finally:
        if fh:
            fh.close()
    if out_dir is not None:
        save_policy(policy, os.path.join(out_dir, "policy.bin"))
    return rows


def config_dict(cfg: PpoConfig) -> dict:
    return asdict(cfg)
