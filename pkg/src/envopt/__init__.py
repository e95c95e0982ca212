"""Environment optimization for multi-agent navigation.

Obstacles are treated as decision variables: rearranged before agents move
(grid setting, CNN policy) or moved while they move (continuous setting, GNN
policy), with RVO agents, completeness checks, PPO training and evaluation.
"""
from .completeness import ConditionReport, offline_condition, online_capacity_condition, well_formed
from .geometry import Disk, EnvironmentLayout, Rect, collision_free_path, dist, region_area
from .metrics import MetricsReport, RewardConfig, pct_speed, shortest_path_length, spl
from .rvo import AgentState, PlannerConfig, select_velocity, step_agents

__version__ = "0.1.0"

__all__ = [
    "AgentState", "ConditionReport", "Disk", "EnvironmentLayout", "MetricsReport", "PlannerConfig", "Rect",
    "RewardConfig", "collision_free_path", "dist", "offline_condition", "online_capacity_condition", "pct_speed",
    "region_area", "select_velocity", "shortest_path_length", "spl", "step_agents", "well_formed",
]
