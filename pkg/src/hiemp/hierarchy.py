"""k-level composition of goal-conditioned and goal-space actor-critics.

Level 0 acts in the primitive action space; every level above acts in the
learned goal space of the level below. A level's policy output is squashed
with tanh and affinely mapped by the (bounds, shifts) of the box one level
down, evaluated at the current state, so emitted subgoals always lie inside
that box. Executing a subgoal runs the lower level greedily for at most its
n actions, stopping early inside the epsilon ball. Start states are drawn
from per-level FIFO buffers refreshed by chaining top-level skills from a
task-initial state.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import env as envmod
from .env import EnvModel, goal_distance, project_goal
from .gc_actor_critic import GCActorCritic, GCContext, make_gc_actor_critic, run_gc_update
from .gs_actor_critic import GSActorCritic, GSContext, make_gs_actor_critic, run_gs_update
from .goalspace import BoxParams, box_from_raw, reparam, sample_eps
from .nnet import forward

log = logging.getLogger(__name__)


def scale_action(raw, bounds, shifts) -> np.ndarray:
    """tanh(raw) * bounds + shifts, elementwise; level 0 uses bounds 1, shifts 0."""
    raw = np.asarray(raw, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.float64)
    shifts = np.asarray(shifts, dtype=np.float64)
    if raw.shape != bounds.shape or raw.shape != shifts.shape:
        raise ValueError(f"shape mismatch: raw {raw.shape}, bounds {bounds.shape}, "
                         f"shifts {shifts.shape}")
    return np.tanh(raw) * bounds + shifts


@dataclass(frozen=True)
class LevelSpec:
    """Per-level hyperparameters: horizon, reward stds, goal radius, discount."""

    n: int
    sigma0_gc: float
    sigma0_gs: float
    eps_threshold: float
    gamma: float = 0.95

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if min(self.sigma0_gc, self.sigma0_gs, self.eps_threshold) <= 0.0:
            raise ValueError("sigma0_gc, sigma0_gs and eps_threshold must be positive")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")


@dataclass
class Level:
    gc: GCActorCritic
    gs: GSActorCritic
    spec: LevelSpec


@dataclass
class TrainConfig:
    """Knobs shared across levels during phase-1 training."""

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


@dataclass
class Agent:
    env: EnvModel
    levels: list[Level]
    start_buffers: list[deque]

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def top(self) -> int:
        return len(self.levels) - 1


class RolloutMonitor:
    """Counts emitted subgoals, their containment in the box one level
    below, and primitive steps consumed per skill at each level."""

    def __init__(self):
        self.subgoals = 0
        self.contained = 0
        self.max_steps = {}
        self.violations = []

    def on_subgoal(self, level, bounds, shifts, action):
        self.subgoals += 1
        if np.all(np.abs(action - shifts) <= bounds + 1e-9):
            self.contained += 1
        elif len(self.violations) < 32:
            self.violations.append((level, np.array(action), np.array(bounds), np.array(shifts)))

    def on_skill_done(self, level, prim_steps):
        prev = self.max_steps.get(level, 0)
        if prim_steps > prev:
            self.max_steps[level] = prim_steps


def action_dim_at(env: EnvModel, level: int) -> int:
    return env.action_dim if level == 0 else len(env.goal_dims)


def build_agent(enviro: EnvModel, specs: list[LevelSpec], rng: np.random.Generator,
                hidden=(64, 64), buffer_capacity: int = 4096,
                init_refresh_skills: int = 16) -> Agent:
    """Create all actor-critics and seed the start buffers with one refresh."""
    d = len(enviro.goal_dims)
    levels = []
    for i, spec in enumerate(specs):
        gc = make_gc_actor_critic(rng, enviro.state_dim, d, action_dim_at(enviro, i), hidden)
        gs = make_gs_actor_critic(rng, enviro.state_dim, d, hidden)
        levels.append(Level(gc, gs, spec))
    buffers = [deque(maxlen=buffer_capacity) for _ in specs]
    agent = Agent(enviro, levels, buffers)
    # Seed every buffer from the task-initial distribution; refreshes alone
    # cannot reach lower levels while the untrained top box is still inside
    # its own epsilon ball (skills return immediately).
    for buf in buffers:
        for _ in range(4):
            buf.append(enviro.sample_start(rng))
    refresh_start_states(agent, init_refresh_skills, rng)
    return agent


def box_at(agent: Agent, level: int, s: np.ndarray) -> BoxParams:
    """The level's current goal box at state s (noiseless policy output)."""
    return box_from_raw(forward(agent.levels[level].gs.policy, s))


def bounds_shifts(agent: Agent, level: int, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Action box for a batch of states: unit box at level 0, the box of the
    level below otherwise."""
    b = states.shape[0]
    if level == 0:
        dim = agent.env.action_dim
        return np.ones((b, dim)), np.zeros((b, dim))
    raw = forward(agent.levels[level - 1].gs.policy, states)
    d = len(agent.env.goal_dims)
    from .goalspace import RAW_LOGW_MAX, RAW_LOGW_MIN
    widths = np.exp(np.clip(raw[:, d:], RAW_LOGW_MIN, RAW_LOGW_MAX))
    return widths, raw[:, :d]


def execute_skill(agent: Agent, level: int, s: np.ndarray, z: np.ndarray,
                  rng: np.random.Generator | None = None, *, monitor=None,
                  trace=None, record_buffers: bool = False) -> tuple[np.ndarray, int]:
    """Greedily pursue goal offset z with the level's policy.

    Runs at most spec.n of the level's actions (each one a primitive step at
    level 0, otherwise a full skill of the level below), stopping early when
    the goal projection enters the epsilon ball. Returns the final state and
    the number of primitive steps consumed; an immediate hit returns 0 steps.
    """
    lev = agent.levels[level]
    if record_buffers:
        agent.start_buffers[level].append(np.array(s))
    target = project_goal(agent.env, s) + z
    prim = 0
    if goal_distance(project_goal(agent.env, s), target) < lev.spec.eps_threshold:
        if monitor is not None:
            monitor.on_skill_done(level, prim)
        return s, prim
    for _ in range(lev.spec.n):
        raw = forward(lev.gc.policy, np.concatenate([s, z]))
        b, sh = bounds_shifts(agent, level, s[None, :])
        a = scale_action(raw, b[0], sh[0])
        if level == 0:
            s = envmod.step(agent.env, s, a, rng)
            prim += 1
            if trace is not None:
                trace.append(s)
        else:
            if monitor is not None:
                monitor.on_subgoal(level, b[0], sh[0], a)
            s, used = execute_skill(agent, level - 1, s, a, rng, monitor=monitor,
                                    trace=trace, record_buffers=record_buffers)
            prim += used
        if goal_distance(project_goal(agent.env, s), target) < lev.spec.eps_threshold:
            break
    if monitor is not None:
        monitor.on_skill_done(level, prim)
    return s, prim


def execute_subgoal(agent: Agent, level: int, s: np.ndarray, subgoal: np.ndarray,
                    rng: np.random.Generator | None = None, *, monitor=None,
                    trace=None, record_buffers: bool = False) -> tuple[np.ndarray, int]:
    """Run level-1 below `level` to carry out a subgoal it emitted."""
    if level < 1:
        raise ValueError("execute_subgoal needs level >= 1")
    return execute_skill(agent, level - 1, s, subgoal, rng, monitor=monitor,
                         trace=trace, record_buffers=record_buffers)


def refresh_start_states(agent: Agent, n_skills: int, rng: np.random.Generator,
                         monitor=None) -> None:
    """Chain top-level skills from a task-initial state, recording the state
    seen at the start of every per-level execution into that level's buffer."""
    s = agent.env.sample_start(rng)
    top = agent.top
    for _ in range(n_skills):
        box = box_at(agent, top, s)
        z = reparam(sample_eps(rng, box.d), box)
        s, _ = execute_skill(agent, top, s, z, rng, monitor=monitor, record_buffers=True)


def _buffer_sampler(agent: Agent, level: int):
    buf = agent.start_buffers[level]

    def sample(rng: np.random.Generator) -> np.ndarray:
        if not buf:
            raise RuntimeError(f"start buffer for level {level} is empty")
        return buf[int(rng.integers(len(buf)))]

    return sample


def make_gc_context(agent: Agent, level: int, cfg: TrainConfig, monitor=None) -> GCContext:
    spec = agent.levels[level].spec
    if level == 0:
        def act(s, a, rng):
            return envmod.step(agent.env, s, a, rng)
    else:
        def act(s, a, rng):
            s2, _ = execute_skill(agent, level - 1, s, a, rng, monitor=monitor)
            return s2

    gs_policy = agent.levels[level].gs.policy
    return GCContext(
        act=act,
        scaler=lambda states: bounds_shifts(agent, level, states),
        box_source=lambda s0: forward(gs_policy, s0),
        sample_start=_buffer_sampler(agent, level),
        project=lambda s: project_goal(agent.env, s),
        n=spec.n,
        sigma0=spec.sigma0_gc,
        eps_threshold=spec.eps_threshold,
        gamma=spec.gamma,
        explore_noise=cfg.explore_noise,
        goal_noise=cfg.goal_noise,
        rollouts=cfg.gc_rollouts,
        grad_steps=cfg.gc_grad_steps,
        batch_size=cfg.gc_batch,
        lr_actor=cfg.lr_gc_actor,
        lr_critic=cfg.lr_gc_critic,
        distance=cfg.distance,
        level=level,
        monitor=monitor,
    )


def make_gs_context(agent: Agent, level: int, cfg: TrainConfig, monitor=None) -> GSContext:
    spec = agent.levels[level].spec

    def skill(s0, z, rng):
        s_n, _ = execute_skill(agent, level, s0, z, rng, monitor=monitor)
        return s_n

    return GSContext(
        skill=skill,
        sample_start=_buffer_sampler(agent, level),
        project=lambda s: project_goal(agent.env, s),
        sigma0=spec.sigma0_gs,
        action_noise=cfg.gs_action_noise,
        entropy_coef=cfg.entropy_coef,
        samples=cfg.gs_samples,
        grad_steps=cfg.gs_grad_steps,
        batch_size=cfg.gs_batch,
        lr_actor=cfg.lr_gs_actor,
        lr_critic=cfg.lr_gs_critic,
        level=level,
    )


def metrics_row(agent: Agent, epoch: int, level: int, gc_reward: float,
                gs_reward: float) -> dict:
    probe = agent.env.start_region.center()
    box = box_at(agent, level, probe)
    row = {
        "epoch": epoch,
        "level": level,
        "halfwidth_mean": float(np.mean(box.halfwidth)),
        "gc_reward_mean": gc_reward,
        "gs_reward_mean": gs_reward,
    }
    for i in range(box.d):
        row[f"center_{i}"] = float(box.center[i])
    for i in range(box.d):
        row[f"log_halfwidth_{i}"] = float(box.log_halfwidth[i])
    return row


def train_phase1(agent: Agent, cfg: TrainConfig, epochs: int, rng: np.random.Generator,
                 metrics_cb=None, monitor=None) -> Agent:
    """Bottom-up epoch loop: per level, gc_iters goal-conditioned updates then
    one goal-space update. Emits one metrics row per level per epoch, with an
    epoch-0 row describing the initial state."""
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    if metrics_cb is not None:
        for level in range(agent.k):
            metrics_cb(metrics_row(agent, 0, level, float("nan"), float("nan")))
    replays = [[] for _ in agent.levels] if cfg.persistent_gc_buffer else None
    for epoch in range(1, epochs + 1):
        if epoch > 1 and (epoch - 1) % cfg.refresh_every == 0:
            refresh_start_states(agent, cfg.refresh_skills, rng, monitor=monitor)
        for level in range(agent.k):
            lev = agent.levels[level]
            gc_ctx = make_gc_context(agent, level, cfg, monitor)
            r_sum, r_n = 0.0, 0
            for _ in range(cfg.gc_iters):
                m = run_gc_update(lev.gc, gc_ctx, rng,
                                  replay=replays[level] if replays else None)
                r_sum += m["reward_mean"] * m["transitions"]
                r_n += m["transitions"]
            gs_ctx = make_gs_context(agent, level, cfg, monitor)
            gs_m = run_gs_update(lev.gs, gs_ctx, rng)
            gc_reward = r_sum / r_n if r_n else float("nan")
            if metrics_cb is not None:
                metrics_cb(metrics_row(agent, epoch, level, gc_reward, gs_m["reward_mean"]))
            if epoch % 25 == 0 or epoch == epochs:
                probe = agent.env.start_region.center()
                box = box_at(agent, level, probe)
                log.info("epoch %d level %d halfwidth=%s gc_r=%.3f gs_r=%.3f",
                         epoch, level, np.round(box.halfwidth, 3), gc_reward,
                         gs_m["reward_mean"])
    return agent
