"""Goal-conditioned actor-critic: reach goals sampled from a noisy copy of
the current goal space.

Rollouts draw a goal offset z from the level's goal box (its raw parameters
perturbed with Gaussian noise before the half-widths are exponentiated),
then run the deterministic policy with exploration noise for at most n
actions. Every step is rewarded with the fixed-variance Gaussian log-density
of the target around the achieved goal projection, and the stored discount
is 0 once the target is inside the epsilon ball, which also ends the
rollout. Updates are one-step DPG: a squared-error critic step against the
bootstrapped target, then an actor step through the critic's action input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .goalspace import box_from_raw, reparam, sample_eps, var_logpdf
from .env import goal_distance
from .nnet import Net, OptState, backward, forward, init_net, init_opt, opt_step


@dataclass
class GCTransition:
    """(state, goal offset, action, reward, next state, discount) tuple."""

    s: np.ndarray
    z: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    gamma: float


@dataclass
class GCActorCritic:
    policy: Net
    critic: Net
    policy_opt: OptState
    critic_opt: OptState


def make_gc_actor_critic(rng: np.random.Generator, state_dim: int, goal_dim: int,
                         action_dim: int, hidden=(64, 64)) -> GCActorCritic:
    policy = init_net(rng, (state_dim + goal_dim, *hidden, action_dim),
                      final_weight_scale=0.01)
    critic = init_net(rng, (state_dim + goal_dim + action_dim, *hidden, 1))
    return GCActorCritic(policy, critic, init_opt(policy), init_opt(critic))


@dataclass
class GCContext:
    """Wiring and hyperparameters for one level's goal-conditioned training.

    The callables are supplied by the hierarchy module so this code is the
    same at every level: `act` advances the level's own transition function
    (a primitive step at level 0, a full lower-level skill above that),
    `scaler` maps a batch of states to the (bounds, shifts) of the level's
    action box, and `box_source` returns the raw goal-space output used to
    sample training goals.
    """

    act: Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
    scaler: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    box_source: Callable[[np.ndarray], np.ndarray]
    sample_start: Callable[[np.random.Generator], np.ndarray]
    project: Callable[[np.ndarray], np.ndarray]
    n: int
    sigma0: float
    eps_threshold: float
    gamma: float
    explore_noise: float = 0.1
    goal_noise: float = 0.2
    rollouts: int = 32
    grad_steps: int = 50
    batch_size: int = 64
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    distance: str = "euclidean"
    level: int = 0
    monitor: object | None = None


def policy_action(ac: GCActorCritic, ctx: GCContext, s: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Greedy scaled action at a single state."""
    raw = forward(ac.policy, np.concatenate([s, z]))
    bounds, shifts = ctx.scaler(s[None, :])
    return np.tanh(raw) * bounds[0] + shifts[0]


def collect_gc_rollouts(ac: GCActorCritic, ctx: GCContext,
                        rng: np.random.Generator) -> list[GCTransition]:
    """Roll out `ctx.rollouts` goal-pursuit episodes with exploration noise."""
    out: list[GCTransition] = []
    for _ in range(ctx.rollouts):
        s0 = ctx.sample_start(rng)
        raw = ctx.box_source(s0) + rng.normal(0.0, ctx.goal_noise, size=2 * len(ctx.project(s0)))
        box = box_from_raw(raw)
        eps = sample_eps(rng, box.d)
        z = reparam(eps, box)
        target = ctx.project(s0) + z
        s = s0
        for _t in range(ctx.n):
            raw_a = forward(ac.policy, np.concatenate([s, z]))
            bounds, shifts = ctx.scaler(s[None, :])
            bounds, shifts = bounds[0], shifts[0]
            a = np.tanh(raw_a) * bounds + shifts
            a = a + rng.normal(0.0, ctx.explore_noise * bounds)
            a = np.clip(a, shifts - bounds, shifts + bounds)
            if ctx.monitor is not None and ctx.level >= 1:
                ctx.monitor.on_subgoal(ctx.level, bounds, shifts, a)
            s_next = ctx.act(s, a, rng)
            r = var_logpdf(target, ctx.project(s_next), ctx.sigma0)
            if not np.isfinite(r):
                raise RuntimeError(
                    f"non-finite goal-conditioned reward at level {ctx.level}: "
                    f"s={s} z={z} a={a} s_next={s_next}")
            achieved = goal_distance(ctx.project(s_next), target, ctx.distance) < ctx.eps_threshold
            g = 0.0 if achieved else ctx.gamma
            out.append(GCTransition(s, z, a, r, s_next, g))
            s = s_next
            if achieved:
                break
    return out


def _batch_arrays(batch: list[GCTransition]):
    s = np.stack([t.s for t in batch])
    z = np.stack([t.z for t in batch])
    a = np.stack([t.a for t in batch])
    r = np.array([t.r for t in batch])
    sn = np.stack([t.s_next for t in batch])
    g = np.array([t.gamma for t in batch])
    return s, z, a, r, sn, g


def update_gc_critic(ac: GCActorCritic, batch: list[GCTransition], ctx: GCContext) -> float:
    """One squared-error step toward r + gamma * Q(s', z, pi(s', z))."""
    if not batch:
        raise ValueError("empty batch")
    s, z, a, r, sn, g = _batch_arrays(batch)
    b = len(batch)
    raw_next = forward(ac.policy, np.concatenate([sn, z], axis=1))
    bounds, shifts = ctx.scaler(sn)
    a_next = np.tanh(raw_next) * bounds + shifts
    q_next = forward(ac.critic, np.concatenate([sn, z, a_next], axis=1))[:, 0]
    target = r + g * q_next
    x = np.concatenate([s, z, a], axis=1)
    q = forward(ac.critic, x)[:, 0]
    diff = q - target
    loss = float(np.mean(diff ** 2))
    grads, _ = backward(ac.critic, x, (2.0 / b) * diff[:, None])
    ac.critic, ac.critic_opt = opt_step(ac.critic, grads, ac.critic_opt, ctx.lr_critic)
    return loss


def update_gc_actor(ac: GCActorCritic, batch: list[GCTransition], ctx: GCContext,
                    critic_fn=None) -> float:
    """One DPG step on the policy; the critic stays frozen.

    critic_fn, when given, replaces the learned critic with a callable
    (s, z, a) -> (q values, dq/da) so synthetic critics can drive the update.
    """
    if not batch:
        raise ValueError("empty batch")
    s, z = np.stack([t.s for t in batch]), np.stack([t.z for t in batch])
    b = len(batch)
    x_p = np.concatenate([s, z], axis=1)
    raw = forward(ac.policy, x_p)
    bounds, shifts = ctx.scaler(s)
    th = np.tanh(raw)
    a = th * bounds + shifts
    if critic_fn is not None:
        q, dq_da = critic_fn(s, z, a)
    else:
        x_c = np.concatenate([s, z, a], axis=1)
        q = forward(ac.critic, x_c)[:, 0]
        _, gin = backward(ac.critic, x_c, np.ones((b, 1)))
        dq_da = gin[:, s.shape[1] + z.shape[1]:]
    loss = float(-np.mean(q))
    g_raw = -(1.0 / b) * dq_da * (1.0 - th ** 2) * bounds
    grads, _ = backward(ac.policy, x_p, g_raw)
    ac.policy, ac.policy_opt = opt_step(ac.policy, grads, ac.policy_opt, ctx.lr_actor)
    return loss


def run_gc_update(ac: GCActorCritic, ctx: GCContext, rng: np.random.Generator,
                  replay: list[GCTransition] | None = None,
                  replay_capacity: int = 65536) -> dict:
    """Collect fresh rollouts, then take interleaved critic+actor steps.

    The buffer is rebuilt on every call unless a persistent `replay` list is
    passed in, in which case new transitions are appended FIFO up to
    replay_capacity.
    """
    fresh = collect_gc_rollouts(ac, ctx, rng)
    if replay is None:
        buf = fresh
    else:
        replay.extend(fresh)
        if len(replay) > replay_capacity:
            del replay[: len(replay) - replay_capacity]
        buf = replay
    if not buf:
        raise RuntimeError("goal-conditioned replay buffer is empty after collection")
    critic_loss = actor_loss = float("nan")
    for _ in range(ctx.grad_steps):
        idx = rng.integers(0, len(buf), size=ctx.batch_size)
        batch = [buf[i] for i in idx]
        critic_loss = update_gc_critic(ac, batch, ctx)
        actor_loss = update_gc_actor(ac, batch, ctx)
    return {
        "reward_mean": float(np.mean([t.r for t in fresh])) if fresh else float("nan"),
        "transitions": len(fresh),
        "critic_loss": critic_loss,
        "actor_loss": actor_loss,
    }
