"""Time-indexed episode records and their JSON-lines export."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class EpisodeTrace:
    """Navigation record.

    ``positions`` is (T+1, n, 2); ``velocities`` (T, n, 2) holds the velocity
    applied between t and t+1. ``obstacles`` is (T+1, m, 4) rectangles as
    [x0, y0, x1, y1]; ``commands`` (T, m, 2) is filled in the online setting.
    ``arrival`` is the first step at which each agent was within tolerance of
    its goal, -1 if never.
    """

    positions: np.ndarray
    velocities: np.ndarray
    goals: np.ndarray
    radii: np.ndarray
    v_max: np.ndarray
    obstacles: np.ndarray
    arrival: np.ndarray
    shortest: np.ndarray
    dt: float = 1.0
    commands: Optional[np.ndarray] = None
    obstacle_velocities: Optional[np.ndarray] = None
    rewards: Optional[np.ndarray] = None
    events: list = field(default_factory=list)
    moves: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.velocities)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def success(self) -> np.ndarray:
        return self.arrival >= 0

    def active_steps(self, i: int) -> int:
        """Steps counted for agent i: until arrival, or the whole episode."""
        return int(self.arrival[i]) if self.arrival[i] >= 0 else self.steps

    def traveled(self) -> np.ndarray:
        seg = np.hypot(*np.moveaxis(np.diff(self.positions, axis=0), -1, 0))  # (T, n)
        return np.array([seg[: self.active_steps(i), i].sum() for i in range(self.n_agents)])

    def obstacle_travel(self) -> float:
        c = np.stack(
            [(self.obstacles[..., 0] + self.obstacles[..., 2]) / 2, (self.obstacles[..., 1] + self.obstacles[..., 3]) / 2],
            -1,
        )
        return float(np.hypot(*np.moveaxis(np.diff(c, axis=0), -1, 0)).sum())

    def iter_records(self):
        T = self.steps
        by_t: dict[int, list] = {}
        for e in self.events:
            by_t.setdefault(e["t"], []).append(e)
        for t in range(T + 1):
            rec = {
                "t": t,
                "agents": [
                    {
                        "id": i,
                        "p": self.positions[t, i].tolist(),
                        "v": (self.velocities[t, i] if t < T else np.zeros(2)).tolist(),
                        **({"goal": self.goals[i].tolist()} if t == 0 else {}),
                    }
                    for i in range(self.n_agents)
                ],
                "obstacles": [
                    {"id": j, "rect": self.obstacles[t, j].tolist()} for j in range(self.obstacles.shape[1])
                ],
                "events": by_t.get(t, []),
            }
            if self.commands is not None and t < T:
                rec["commands"] = [{"id": j, "desired_velocity": c.tolist()} for j, c in enumerate(self.commands[t])]
            yield rec

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r) for r in self.iter_records()) + "\n"

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str, tol: float = 0.1) -> "EpisodeTrace":
        """Rebuild a trace from exported records (shortest lengths are not stored: NaN)."""
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not recs:
            raise ValueError("empty trace file")
        n = len(recs[0]["agents"])
        m = len(recs[0]["obstacles"])
        T = len(recs) - 1
        pos = np.array([[a["p"] for a in r["agents"]] for r in recs], float).reshape(T + 1, n, 2)
        vel = np.array([[a["v"] for a in r["agents"]] for r in recs[:-1]], float).reshape(T, n, 2)
        obs = np.array([[o["rect"] for o in r["obstacles"]] for r in recs], float).reshape(T + 1, m, 4)
        goals = np.array([a.get("goal", pos[-1, i]) for i, a in enumerate(recs[0]["agents"])], float).reshape(n, 2)
        d = np.hypot(*np.moveaxis(pos - goals[None], -1, 0))  # (T+1, n)
        arrival = np.array([int(np.argmax(d[:, i] <= tol)) if (d[:, i] <= tol).any() else -1 for i in range(n)])
        cmds = None
        if T and "commands" in recs[0]:
            cmds = np.array([[c["desired_velocity"] for c in r["commands"]] for r in recs[:-1]], float).reshape(T, m, 2)
        return cls(
            positions=pos, velocities=vel, goals=goals, radii=np.full(n, np.nan), v_max=np.full(n, np.nan),
            obstacles=obs, arrival=arrival, shortest=np.full(n, np.nan), commands=cmds,
            events=[e for r in recs for e in r["events"]],
        )
