"""Run configuration: a flat JSON object validated into a RunConfig.

Per-level hyperparameters are lists of length k (bottom level first). The
schema is documented in the README and mirrored by the example files under
configs/.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import PRESETS, EnvModel, make_env
from .hierarchy import LevelSpec, TrainConfig
from .phase2 import TaskSpec


class ConfigError(ValueError):
    """Malformed run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    env: str = "point_field_1d"
    seed: int = 0
    k: int = 1
    n: list = field(default_factory=lambda: [20])
    sigma0_gc: list = field(default_factory=lambda: [0.4])
    sigma0_gs: list = field(default_factory=lambda: [1.75])
    eps: list = field(default_factory=lambda: [0.15])
    gamma: list = field(default_factory=lambda: [0.95])
    hidden: list = field(default_factory=lambda: [64, 64])
    epochs: int = 100
    # phase-1 schedule and noise knobs
    gc_iters: int = 10
    gc_grad_steps: int = 50
    gs_grad_steps: int = 10
    gc_rollouts: int = 32
    gs_samples: int = 32
    gc_batch: int = 64
    gs_batch: int = 32
    lr_gc_actor: float = 1e-4
    lr_gc_critic: float = 1e-3
    lr_gs_actor: float = 1e-3
    lr_gs_critic: float = 1e-3
    explore_noise: float = 0.1
    goal_noise: float = 0.2
    gs_action_noise: float = 0.1
    entropy_coef: float = 1.0
    refresh_every: int = 5
    refresh_skills: int = 16
    buffer_capacity: int = 4096
    persistent_gc_buffer: bool = False
    distance: str = "euclidean"
    channel_noise_std: float = 0.15
    out_dir: str | None = None
    # phase 2
    task_goal_lengths: list | None = None
    task_n: int = 10
    task_eps: float = 0.3
    phase2_rounds: int = 40
    phase2_episodes: int = 16
    phase2_explore_noise: float = 0.1
    phase2_grad_steps: int = 50
    phase2_batch: int = 64
    lr_task_actor: float = 1e-4
    lr_task_critic: float = 1e-3
    eval_seeds: int = 4
    eval_episodes: int = 400
    # oracle
    oracle_actions_per_dim: int = 5
    oracle_node_budget: int = 2_000_000

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "RunConfig":
        if self.env not in PRESETS:
            raise ConfigError(f"field 'env': unknown preset {self.env!r}; choose from {PRESETS}")
        if self.k < 1 or self.k > 3:
            raise ConfigError(f"field 'k': must be in [1, 3], got {self.k}")
        for name in ("n", "sigma0_gc", "sigma0_gs", "eps", "gamma"):
            vals = getattr(self, name)
            if len(vals) != self.k:
                raise ConfigError(f"field {name!r}: expected {self.k} entries, got {len(vals)}")
        if any(int(x) < 1 for x in self.n):
            raise ConfigError("field 'n': entries must be >= 1")
        for name in ("sigma0_gc", "sigma0_gs", "eps"):
            if any(float(x) <= 0.0 for x in getattr(self, name)):
                raise ConfigError(f"field {name!r}: entries must be positive")
        if any(not (0.0 < float(g) <= 1.0) for g in self.gamma):
            raise ConfigError("field 'gamma': entries must be in (0, 1]")
        if self.epochs < 0:
            raise ConfigError("field 'epochs': must be >= 0")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ConfigError("field 'hidden': needs positive layer widths")
        if self.distance not in ("euclidean", "linf"):
            raise ConfigError(f"field 'distance': must be 'euclidean' or 'linf'")
        if self.channel_noise_std <= 0.0:
            raise ConfigError("field 'channel_noise_std': must be positive")
        for name in ("gc_iters", "gc_grad_steps", "gs_grad_steps", "gc_rollouts",
                     "gs_samples", "gc_batch", "gs_batch", "refresh_every",
                     "refresh_skills", "buffer_capacity", "task_n", "phase2_rounds",
                     "phase2_episodes", "phase2_grad_steps", "phase2_batch",
                     "eval_seeds", "eval_episodes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"field {name!r}: must be >= 1")
        if self.task_eps <= 0.0:
            raise ConfigError("field 'task_eps': must be positive")
        return self

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
        return RunConfig(**data).validate()

    @staticmethod
    def from_file(path) -> "RunConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return RunConfig.from_dict(data)

    def build_env(self) -> EnvModel:
        return make_env(self.env, noise_std=self.channel_noise_std, n=int(self.n[0]))

    def level_specs(self) -> list[LevelSpec]:
        return [LevelSpec(int(self.n[i]), float(self.sigma0_gc[i]),
                          float(self.sigma0_gs[i]), float(self.eps[i]),
                          float(self.gamma[i]))
                for i in range(self.k)]

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            gc_iters=self.gc_iters, gc_grad_steps=self.gc_grad_steps,
            gs_grad_steps=self.gs_grad_steps, gc_rollouts=self.gc_rollouts,
            gs_samples=self.gs_samples, gc_batch=self.gc_batch,
            gs_batch=self.gs_batch, lr_gc_actor=self.lr_gc_actor,
            lr_gc_critic=self.lr_gc_critic, lr_gs_actor=self.lr_gs_actor,
            lr_gs_critic=self.lr_gs_critic, explore_noise=self.explore_noise,
            goal_noise=self.goal_noise, gs_action_noise=self.gs_action_noise,
            entropy_coef=self.entropy_coef, refresh_every=self.refresh_every,
            refresh_skills=self.refresh_skills, buffer_capacity=self.buffer_capacity,
            persistent_gc_buffer=self.persistent_gc_buffer, distance=self.distance,
        )

    def task_spec(self, goal_dim: int) -> TaskSpec:
        lengths = self.task_goal_lengths
        if lengths is None:
            lengths = [2.0] * goal_dim
        if len(lengths) != goal_dim:
            raise ConfigError(f"field 'task_goal_lengths': expected {goal_dim} entries, "
                              f"got {len(lengths)}")
        return TaskSpec(np.asarray(lengths, dtype=np.float64), int(self.task_n),
                        float(self.task_eps))
