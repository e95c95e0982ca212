"""Experiment configuration, seeded trial sweeps, report/trace export."""
from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .continuous_env import EDGE_DIM, NODE_DIM, ZeroCommandPolicy, random_scenario, run_online_episode
from .discrete_env import navigate, run_optimization_episode
from .heuristic import HeuristicCommander, run_heuristic
from .metrics import MetricsReport, RewardConfig, trial_metrics
from .policy import CnnPolicy, GnnPolicy, GreedyPolicy, load_policy
from .ppo import OfflineGridTask, OnlineTask, PpoConfig, sample_grid_world, train
from .rvo import PlannerConfig

SOURCES = ("trained", "heuristic", "none")


class ConfigError(ValueError):
    pass


def load_defaults() -> dict:
    return json.loads(resources.files("envopt").joinpath("defaults.json").read_text())


def _merge(base: dict, over: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path}{k}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{path}{k} must be an object")
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=load_defaults)

    def __post_init__(self):
        self.validate()

    def __getattr__(self, name):
        raw = self.__dict__.get("raw")
        if raw is not None and name in raw:
            return raw[name]
        raise AttributeError(name)

    @classmethod
    def load(cls, path=None, **overrides) -> "ExperimentConfig":
        user = {}
        if path is not None:
            try:
                with open(path) as fh:
                    user = json.load(fh)
            except FileNotFoundError as e:
                raise ConfigError(f"config file not found: {path}") from e
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file is not valid JSON: {e}") from e
            if not isinstance(user, dict):
                raise ConfigError("config must be a JSON object")
        raw = _merge(load_defaults(), user)
        raw = _merge(raw, {k: v for k, v in overrides.items() if v is not None})
        return cls(raw)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return ExperimentConfig(_merge(self.raw, kw))

    def validate(self) -> None:
        r = self.raw
        if r.get("setting") not in ("offline", "online"):
            raise ConfigError("setting must be 'offline' or 'online'")
        if r["grid"]["width"] <= 0 or r["grid"]["height"] <= 0 or r["world_size"] <= 0:
            raise ConfigError("world dimensions must be positive")
        if r["n_trials"] < 1:
            raise ConfigError("n_trials must be >= 1")
        if r["n_agents"] < 0 or r["m_obstacles"] < 0 or any(m < 0 for m in r["test_obstacles"]):
            raise ConfigError("agent and obstacle counts must be non-negative")
        if r["max_steps"] < 1 or r["max_rounds"] < 1:
            raise ConfigError("max_steps and max_rounds must be >= 1")
        if min(r["v_max"], r["a_max"], r["comm_radius"], r["radius"]) <= 0:
            raise ConfigError("v_max, a_max, comm_radius and radius must be positive")
        try:
            self.reward_cfg()
            self.planner_cfg()
            self.ppo_cfg()
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def reward_cfg(self) -> RewardConfig:
        return RewardConfig(**self.raw["reward"])

    def planner_cfg(self) -> PlannerConfig:
        return PlannerConfig(**self.raw["planner"])

    def ppo_cfg(self) -> PpoConfig:
        return PpoConfig(**{**self.raw["ppo"]})

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# policies and tasks


def make_policy(cfg: ExperimentConfig, seed: int | None = None):
    seed = cfg.seed if seed is None else seed
    if cfg.setting == "offline":
        g = cfg.grid
        return CnnPolicy(g["height"], g["width"], seed=seed, **cfg.cnn)
    return GnnPolicy(NODE_DIM, EDGE_DIM, seed=seed, **cfg.gnn)


def scenario_kw(cfg: ExperimentConfig, m: int) -> dict:
    return dict(n_agents=cfg.n_agents, m_obstacles=m, size=cfg.world_size, radius=cfg.radius, v_max=cfg.v_max,
                a_max=cfg.a_max)


def make_task(cfg: ExperimentConfig):
    if cfg.setting == "offline":
        g = cfg.grid
        return OfflineGridTask(g["width"], g["height"], cfg.n_agents, cfg.m_obstacles, cfg.max_rounds, cfg.max_steps,
                               cfg.planner_cfg(), cfg.reward_cfg(), cfg.blocked_only, cfg.radius,
                               shaping=cfg.offline_shaping, gamma=cfg.ppo["gamma"])
    return OnlineTask(scenario_kw(cfg, cfg.m_obstacles), cfg.max_steps, cfg.comm_radius, cfg.planner_cfg(),
                      cfg.reward_cfg())


def run_training(cfg: ExperimentConfig, out_dir, callback=None):
    """Train the setting's policy; returns ``(policy, log_rows)``."""
    policy = make_policy(cfg)
    rows = train(make_task(cfg), policy, cfg.ppo_cfg(), out_dir=out_dir, step_budget=cfg.train_step_budget,
                 callback=callback)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        fh.write(cfg.to_json())
    return policy, rows


# ---------------------------------------------------------------------------
# trials


def trial_seed(base: int, m: int, k: int) -> int:
    """Evaluation layouts live in their own seed stream, disjoint from training."""
    return int(np.random.SeedSequence([base, 7919, m, k]).generate_state(1)[0])


def _run_one(args):
    cfg_raw, source, policy, m, k = args
    cfg = ExperimentConfig(cfg_raw)
    seed = trial_seed(cfg.seed, m, k)
    t0 = time.perf_counter()
    extra = {}
    if cfg.setting == "offline":
        g = cfg.grid
        world = sample_grid_world(seed, g["width"], g["height"], cfg.n_agents, m, cfg.blocked_only, cfg.radius)
        final = world
        if source == "heuristic":
            final, _ = run_heuristic(world, cfg.max_rounds, rng_seed=seed, radius=cfg.radius)
        elif source == "trained":
            pol = GreedyPolicy(policy) if cfg.greedy_eval else policy
            final, _ = run_optimization_episode(world, pol, cfg.max_rounds, rng_seed=seed)
        trace = navigate(final, cfg.planner_cfg(), cfg.max_steps, radius=cfg.radius, v_max=cfg.v_max,
                         tol=cfg.arrival_tol)
        extra = {"before": world.to_dict(), "after": final.to_dict()}
    else:
        world = random_scenario(np.random.default_rng(seed), **scenario_kw(cfg, m))
        if source == "none":
            pol = ZeroCommandPolicy()
        elif source == "heuristic":
            pol = HeuristicCommander(cfg.radius, cfg.heuristic_replan_every)
        else:
            pol = policy
        trace = run_online_episode(world, pol, cfg.max_steps, cfg.comm_radius, rng_seed=seed,
                                   planner_cfg=cfg.planner_cfg(), reward_cfg=cfg.reward_cfg(),
                                   greedy=cfg.greedy_eval, tol=cfg.arrival_tol)
    row = {"source": source, "m_obstacles": m, "trial": k, "seed": seed, **trial_metrics(trace),
           "wall_clock": time.perf_counter() - t0}
    return row, trace, extra


def run_trials(cfg: ExperimentConfig, source: str, policy=None, checkpoint=None, out_dir=None, sweep=None):
    """Seeded trials per obstacle count; returns ``(MetricsReport, trial_rows, traces)``.

    With ``out_dir`` writes ``<source>_metrics.csv/json``, ``<source>_trials.json``
    and per-trial JSON-lines traces.
    """
    if source not in SOURCES:
        raise ValueError(f"unknown policy source {source!r}")
    if source == "trained" and policy is None:
        if checkpoint is None or not os.path.exists(checkpoint):
            raise FileNotFoundError(f"checkpoint not found: {checkpoint}")
        policy = load_policy(checkpoint)
    sweep = list(cfg.test_obstacles if sweep is None else sweep)
    jobs = [(cfg.raw, source, policy, m, k) for m in sweep for k in range(cfg.n_trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    report = MetricsReport()
    for m in sweep:
        report.add([r for r, _, _ in results if r["m_obstacles"] == m], source=source, m_obstacles=m)
    rows = [r for r, _, _ in results]
    traces = [t for _, t, _ in results]
    if out_dir is not None:
        write_outputs(out_dir, source, report, results, cfg.export_traces)
    return report, rows, traces


def write_outputs(out_dir, source, report: MetricsReport, results, export_traces=True) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{source}_metrics.csv"), "w") as fh:
        fh.write(report.to_csv())
    with open(os.path.join(out_dir, f"{source}_metrics.json"), "w") as fh:
        fh.write(report.to_json())
    stable = [{k: v for k, v in r.items() if k != "wall_clock"} for r, _, _ in results]
    with open(os.path.join(out_dir, f"{source}_trials.json"), "w") as fh:
        json.dump(stable, fh, indent=1)
    with open(os.path.join(out_dir, f"{source}_timing.json"), "w") as fh:
        json.dump([r["wall_clock"] for r, _, _ in results], fh)
    if export_traces:
        tdir = os.path.join(out_dir, "traces")
        os.makedirs(tdir, exist_ok=True)
        for r, trace, extra in results:
            stem = f"{source}_m{r['m_obstacles']}_trial{r['trial']:03d}"
            trace.write_jsonl(os.path.join(tdir, stem + ".jsonl"))
            if extra:
                with open(os.path.join(tdir, stem + "_layouts.json"), "w") as fh:
                    json.dump(extra, fh)
