"""Goal-space actor-critic: grow the box of reliably achievable goals.

This is a bandit problem. Each sample draws a start state, exogenous noise
eps, and a noisy raw goal-space action a; the goal z = reparam(eps, box(a))
is executed greedily by the level's goal-conditioned policy, and the reward
is the Gaussian log-density of the target around the terminal goal
projection plus the box entropy (the folded-in entropy term). The critic
regresses onto these single-sample rewards with no bootstrapping, and the
policy ascends the critic through its action input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .goalspace import (RAW_LOGW_MAX, RAW_LOGW_MIN, box_from_raw, neg_log_prob,
                        reparam, sample_eps, var_logpdf)
from .nnet import Net, OptState, backward, forward, init_net, init_opt, opt_step

# Raw log-half-width head bias at init; keeps the starting box a small
# neighborhood of the start state so growth reflects learned competence.
INIT_LOG_HALFWIDTH = -2.5


@dataclass
class GSTransition:
    """(start state, eps, raw goal-space action, reward) tuple."""

    s0: np.ndarray
    eps: np.ndarray
    a: np.ndarray
    r: float


@dataclass
class GSActorCritic:
    """Critic value(s0, eps, a) = net(s0, eps, a, z) + coef * box entropy(a).

    Two exact structural pieces keep the learned part well conditioned. The
    folded-in entropy term enters as an analytic additive head: a tanh net
    cannot represent that unbounded linear term globally (it saturates,
    killing the growth gradient). And the sampled goal z = center +
    eps * exp(logw) is appended to the net input as a derived feature with
    its exact jacobian: the goal-reaching part of the reward is a simple
    function of (s0, z), which the net fits far faster than the equivalent
    eps-by-logw interaction, so the shrink gradient at unreachable goals
    actually arrives at the policy before the box has overshot.
    """

    policy: Net
    critic: Net
    policy_opt: OptState
    critic_opt: OptState


def make_gs_actor_critic(rng: np.random.Generator, state_dim: int, goal_dim: int,
                         hidden=(64, 64)) -> GSActorCritic:
    final_bias = np.concatenate([np.zeros(goal_dim),
                                 np.full(goal_dim, INIT_LOG_HALFWIDTH)])
    policy = init_net(rng, (state_dim, *hidden, 2 * goal_dim),
                      final_weight_scale=0.01, final_bias=final_bias)
    # critic input: s0, eps, raw action, derived goal feature z
    critic = init_net(rng, (state_dim + goal_dim + 2 * goal_dim + goal_dim, *hidden, 1))
    return GSActorCritic(policy, critic, init_opt(policy), init_opt(critic))


@dataclass
class GSContext:
    """Wiring and hyperparameters for one level's goal-space training.

    `skill` runs the level's goal-conditioned policy greedily from s0 toward
    the offset z (recursing through lower levels above level 0) and returns
    the terminal state.
    """

    skill: Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
    sample_start: Callable[[np.random.Generator], np.ndarray]
    project: Callable[[np.ndarray], np.ndarray]
    sigma0: float
    action_noise: float = 0.1
    entropy_coef: float = 1.0
    samples: int = 32
    grad_steps: int = 10
    batch_size: int = 32
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    level: int = 0


def collect_gs_transitions(ac: GSActorCritic, ctx: GSContext,
                           rng: np.random.Generator) -> list[GSTransition]:
    """Draw (start state, eps, noisy action, reward) bandit samples.

    eps is collected in antithetic pairs sharing the same start state and
    noisy action: the mirrored draw cancels the eps-imbalance in the critic's
    regression targets, which otherwise dominates the center gradient of
    small boxes. Marginally each eps is still uniform on [-1, 1]^d.
    """
    out: list[GSTransition] = []
    while len(out) < ctx.samples:
        s0 = ctx.sample_start(rng)
        a = forward(ac.policy, s0) + rng.normal(0.0, ctx.action_noise, size=ac.policy.out_dim)
        box = box_from_raw(a)
        eps = sample_eps(rng, box.d)
        mirrored = (eps,) if len(out) + 1 == ctx.samples else (eps, -eps)
        for e in mirrored:
            z = reparam(e, box)
            s_n = ctx.skill(s0, z, rng)
            r = (var_logpdf(ctx.project(s0) + z, ctx.project(s_n), ctx.sigma0)
                 + ctx.entropy_coef * neg_log_prob(box))
            if not np.isfinite(r):
                raise RuntimeError(
                    f"non-finite goal-space reward at level {ctx.level}: "
                    f"s0={s0} eps={e} a={a} s_n={s_n}")
            out.append(GSTransition(s0, e, a, r))
    return out


def _batch_arrays(batch: list[GSTransition]):
    s0 = np.stack([t.s0 for t in batch])
    eps = np.stack([t.eps for t in batch])
    a = np.stack([t.a for t in batch])
    r = np.array([t.r for t in batch])
    return s0, eps, a, r


def _entropy_head(a: np.ndarray, coef: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact entropy contribution of raw actions and its gradient.

    Rows of `a` are [centers, raw log half-widths]; the value per row is
    coef * sum(log 2 + clip(logw)). The gradient is coef on unclamped
    log-half-width coordinates and zero elsewhere.
    """
    d = a.shape[1] // 2
    logw = np.clip(a[:, d:], RAW_LOGW_MIN, RAW_LOGW_MAX)
    val = coef * np.sum(np.log(2.0) + logw, axis=1)
    grad = np.zeros_like(a)
    inside = (a[:, d:] > RAW_LOGW_MIN) & (a[:, d:] < RAW_LOGW_MAX)
    grad[:, d:] = coef * inside
    return val, grad


def _goal_feature(eps: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derived critic input z = center + eps * exp(clip(logw)) and the two
    jacobian blocks dz/dcenter (identity, implicit) and dz/dlogw."""
    d = a.shape[1] // 2
    logw = np.clip(a[:, d:], RAW_LOGW_MIN, RAW_LOGW_MAX)
    w = np.exp(logw)
    z = a[:, :d] + eps * w
    inside = (a[:, d:] > RAW_LOGW_MIN) & (a[:, d:] < RAW_LOGW_MAX)
    dz_dlogw = eps * w * inside
    return z, w, dz_dlogw


def _critic_input(s0, eps, a):
    z, _, _ = _goal_feature(eps, a)
    return np.concatenate([s0, eps, a, z], axis=1)


def critic_value(ac: GSActorCritic, ctx: GSContext, s0: np.ndarray, eps: np.ndarray,
                 a: np.ndarray) -> np.ndarray:
    """Critic value for a batch: learned net plus the analytic entropy head."""
    ent, _ = _entropy_head(a, ctx.entropy_coef)
    return forward(ac.critic, _critic_input(s0, eps, a))[:, 0] + ent


def update_gs_critic(ac: GSActorCritic, batch: list[GSTransition], ctx: GSContext) -> float:
    """One squared-error step regressing the critic onto stored rewards."""
    if not batch:
        raise ValueError("empty batch")
    s0, eps, a, r = _batch_arrays(batch)
    b = len(batch)
    x = _critic_input(s0, eps, a)
    ent, _ = _entropy_head(a, ctx.entropy_coef)
    pred = forward(ac.critic, x)[:, 0] + ent
    diff = pred - r
    loss = float(np.mean(diff ** 2))
    grads, _ = backward(ac.critic, x, (2.0 / b) * diff[:, None])
    ac.critic, ac.critic_opt = opt_step(ac.critic, grads, ac.critic_opt, ctx.lr_critic)
    return loss


def update_gs_actor(ac: GSActorCritic, batch: list[GSTransition], ctx: GSContext,
                    critic_fn=None) -> float:
    """Ascend mean critic value at a = policy(s0) over stored (s0, eps) pairs.

    critic_fn, when given, replaces the learned critic with a callable
    (s0, eps, a) -> (values, dvalue/da).
    """
    if not batch:
        raise ValueError("empty batch")
    s0 = np.stack([t.s0 for t in batch])
    eps = np.stack([t.eps for t in batch])
    b = len(batch)
    a = forward(ac.policy, s0)
    if critic_fn is not None:
        q, dq_da = critic_fn(s0, eps, a)
    else:
        d = a.shape[1] // 2
        x = _critic_input(s0, eps, a)
        ent, ent_grad = _entropy_head(a, ctx.entropy_coef)
        q = forward(ac.critic, x)[:, 0] + ent
        _, gin = backward(ac.critic, x, np.ones((b, 1)))
        na, ns = a.shape[1], s0.shape[1] + eps.shape[1]
        g_a = gin[:, ns:ns + na]
        g_z = gin[:, ns + na:]
        _, _, dz_dlogw = _goal_feature(eps, a)
        dq_da = g_a + ent_grad
        dq_da[:, :d] += g_z            # z depends on the centers one-to-one
        dq_da[:, d:] += g_z * dz_dlogw
    loss = float(-np.mean(q))
    grads, _ = backward(ac.policy, s0, -(1.0 / b) * dq_da)
    ac.policy, ac.policy_opt = opt_step(ac.policy, grads, ac.policy_opt, ctx.lr_actor)
    return loss


def run_gs_update(ac: GSActorCritic, ctx: GSContext, rng: np.random.Generator) -> dict:
    """Fresh buffer, collect, then interleaved critic+actor steps."""
    buf = collect_gs_transitions(ac, ctx, rng)
    if not buf:
        raise RuntimeError("goal-space replay buffer is empty after collection")
    critic_loss = actor_loss = float("nan")
    for _ in range(ctx.grad_steps):
        idx = rng.integers(0, len(buf), size=ctx.batch_size)
        batch = [buf[i] for i in idx]
        critic_loss = update_gs_critic(ac, batch, ctx)
        actor_loss = update_gs_actor(ac, batch, ctx)
    return {
        "reward_mean": float(np.mean([t.r for t in buf])),
        "transitions": len(buf),
        "critic_loss": critic_loss,
        "actor_loss": actor_loss,
    }
