"""Downstream goal-reaching over a frozen skill hierarchy.

Phase 2 bolts one more goal-conditioned actor-critic on top of a trained
agent. Its action space is the top level's learned goal box (tanh scaling at
the current state), each action is carried out by executing a full top-level
skill, and no level below it is updated. Training reuses the phase-1 reward
shape: the Gaussian log-density of the episode goal around the achieved
projection with the same epsilon/discount truncation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .env import goal_distance, project_goal
from .gc_actor_critic import (GCActorCritic, GCContext, GCTransition,
                              make_gc_actor_critic, update_gc_actor, update_gc_critic)
from .gs_actor_critic import INIT_LOG_HALFWIDTH
from .hierarchy import Agent, bounds_shifts, box_at, execute_skill, scale_action
from .goalspace import var_logpdf
from .nnet import forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaskSpec:
    """Hand-designed downstream goal box: per-dimension side lengths centered
    on the task start's goal projection, a skill-invocation budget, and the
    achievement radius."""

    goal_lengths: np.ndarray
    n_task: int
    eps_task: float

    def __post_init__(self):
        if self.n_task < 1 or self.eps_task <= 0.0 or np.any(self.goal_lengths <= 0.0):
            raise ValueError("task spec entries must be positive")


@dataclass
class ExtendedAgent:
    base: Agent
    task_ac: GCActorCritic
    task: TaskSpec

    @property
    def goal_center(self) -> np.ndarray:
        return project_goal(self.base.env, self.base.env.start_region.center())

    def sample_goal(self, rng: np.random.Generator) -> np.ndarray:
        half = self.task.goal_lengths / 2.0
        return self.goal_center + rng.uniform(-half, half)


@dataclass
class EvalReport:
    """Per-episode minimum goal distances, grouped by seed."""

    seeds: list[int]
    goals: list[np.ndarray]
    min_dists: list[np.ndarray]

    @property
    def per_seed_mean(self) -> np.ndarray:
        return np.array([float(np.mean(d)) for d in self.min_dists])

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_seed_mean))

    @property
    def std(self) -> float:
        return float(np.std(self.per_seed_mean))

    def rows(self):
        """CSV rows: (seed, episode, goal components..., min_dist)."""
        out = []
        for i, seed in enumerate(self.seeds):
            n = len(self.min_dists[i])
            for ep in range(n):
                out.append((seed, ep, self.goals[i][ep], float(self.min_dists[i][ep])))
        return out


def attach_task_level(agent: Agent, task: TaskSpec, rng: np.random.Generator,
                      hidden=(64, 64)) -> ExtendedAgent:
    """Add the phase-2 goal-conditioned actor-critic over the frozen top box."""
    d = len(agent.env.goal_dims)
    probe = agent.env.start_region.center()
    box = box_at(agent, agent.top, probe)
    if float(np.mean(box.halfwidth)) < 2.0 * np.exp(INIT_LOG_HALFWIDTH):
        log.warning("attaching task level to an apparently untrained agent "
                    "(top box halfwidths %s)", np.round(box.halfwidth, 4))
    ac = make_gc_actor_critic(rng, agent.env.state_dim, d, d, hidden)
    return ExtendedAgent(agent, ac, task)


def _task_ctx(ext: ExtendedAgent, *, explore_noise: float, grad_steps: int,
              batch_size: int, lr_actor: float, lr_critic: float,
              distance: str = "euclidean") -> GCContext:
    agent = ext.base
    top = agent.top
    spec = agent.levels[top].spec
    return GCContext(
        act=lambda s, a, rng: execute_skill(agent, top, s, a, rng)[0],
        scaler=lambda states: bounds_shifts(agent, top + 1, states),
        box_source=None,
        sample_start=lambda rng: agent.env.sample_start(rng),
        project=lambda s: project_goal(agent.env, s),
        n=ext.task.n_task,
        sigma0=spec.sigma0_gc,
        eps_threshold=ext.task.eps_task,
        gamma=spec.gamma,
        explore_noise=explore_noise,
        grad_steps=grad_steps,
        batch_size=batch_size,
        lr_actor=lr_actor,
        lr_critic=lr_critic,
        distance=distance,
        level=top + 1,
    )


def _collect_task_episodes(ext: ExtendedAgent, ctx: GCContext, episodes: int,
                           rng: np.random.Generator, monitor=None):
    """Noisy task-level rollouts; returns transitions plus per-episode
    minimum goal distances for the learning curve."""
    agent = ext.base
    transitions: list[GCTransition] = []
    ep_min = []
    for _ in range(episodes):
        s0 = ctx.sample_start(rng)
        g = ext.sample_goal(rng)
        z = g - ctx.project(s0)
        s = s0
        best = goal_distance(ctx.project(s), g, ctx.distance)
        for _t in range(ctx.n):
            raw = forward(ext.task_ac.policy, np.concatenate([s, z]))
            b, sh = ctx.scaler(s[None, :])
            b, sh = b[0], sh[0]
            a = scale_action(raw, b, sh)
            a = np.clip(a + rng.normal(0.0, ctx.explore_noise * b), sh - b, sh + b)
            if monitor is not None:
                monitor.on_subgoal(ctx.level, b, sh, a)
            trace: list = []
            s_next, _ = execute_skill(agent, agent.top, s, a, rng, monitor=monitor,
                                      trace=trace)
            for st in trace:
                best = min(best, goal_distance(ctx.project(st), g, ctx.distance))
            r = var_logpdf(g, ctx.project(s_next), ctx.sigma0)
            if not np.isfinite(r):
                raise RuntimeError(f"non-finite task reward: s={s} g={g} a={a}")
            achieved = goal_distance(ctx.project(s_next), g, ctx.distance) < ctx.eps_threshold
            transitions.append(GCTransition(s, z, a, r, s_next,
                                            0.0 if achieved else ctx.gamma))
            s = s_next
            if achieved:
                break
        ep_min.append(best)
    return transitions, ep_min


def train_phase2(ext: ExtendedAgent, rounds: int, rng: np.random.Generator, *,
                 episodes_per_round: int = 16, explore_noise: float = 0.1,
                 grad_steps: int = 50, batch_size: int = 64,
                 lr_actor: float = 1e-4, lr_critic: float = 1e-3,
                 distance: str = "euclidean", metrics_cb=None,
                 monitor=None) -> ExtendedAgent:
    """Episodic DPG on the task level; all phase-1 parameters stay frozen."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    ctx = _task_ctx(ext, explore_noise=explore_noise, grad_steps=grad_steps,
                    batch_size=batch_size, lr_actor=lr_actor, lr_critic=lr_critic,
                    distance=distance)
    for rnd in range(1, rounds + 1):
        buf, ep_min = _collect_task_episodes(ext, ctx, episodes_per_round, rng,
                                             monitor=monitor)
        if not buf:
            raise RuntimeError("phase-2 replay buffer is empty after collection")
        for _ in range(ctx.grad_steps):
            idx = rng.integers(0, len(buf), size=ctx.batch_size)
            batch = [buf[i] for i in idx]
            update_gc_critic(ext.task_ac, batch, ctx)
            update_gc_actor(ext.task_ac, batch, ctx)
        if metrics_cb is not None:
            metrics_cb({
                "round": rnd,
                "episodes": episodes_per_round,
                "min_dist_mean": float(np.mean(ep_min)),
                "reward_mean": float(np.mean([t.r for t in buf])),
            })
        if rnd % 10 == 0 or rnd == rounds:
            log.info("phase2 round %d min_dist_mean=%.4f", rnd, float(np.mean(ep_min)))
    return ext


def evaluate(ext: ExtendedAgent, n_episodes: int, seeds: list[int],
             distance: str = "euclidean", monitor=None) -> EvalReport:
    """Greedy episodes per seed; records the running minimum distance between
    the goal and every primitive-step goal projection (including the start)."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    agent = ext.base
    top = agent.top
    all_goals, all_dists = [], []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        goals = np.zeros((n_episodes, len(agent.env.goal_dims)))
        dists = np.zeros(n_episodes)
        for ep in range(n_episodes):
            s = agent.env.sample_start(rng)
            g = ext.sample_goal(rng)
            z = g - project_goal(agent.env, s)
            best = goal_distance(project_goal(agent.env, s), g, distance)
            for _t in range(ext.task.n_task):
                raw = forward(ext.task_ac.policy, np.concatenate([s, z]))
                b, sh = bounds_shifts(agent, top + 1, s[None, :])
                a = scale_action(raw, b[0], sh[0])
                if monitor is not None:
                    monitor.on_subgoal(top + 1, b[0], sh[0], a)
                trace: list = []
                s, _ = execute_skill(agent, top, s, a, rng, monitor=monitor, trace=trace)
                for st in trace:
                    best = min(best, goal_distance(project_goal(agent.env, st), g, distance))
                if goal_distance(project_goal(agent.env, s), g, distance) < ext.task.eps_task:
                    break
            goals[ep] = g
            dists[ep] = best
        all_goals.append(goals)
        all_dists.append(dists)
    return EvalReport(list(seeds), all_goals, all_dists)
