"""Ground-truth computations used only by tests and acceptance runs.

Two oracles: an exhaustive frontier search over discretized action sequences
that recovers the n-step reachable set of a noiseless environment, and a
trapezoid-rule integration of the skill-channel mutual information on the
1-D noisy channel. For the channel, a skill is executed open loop: the
deterministic policy is unrolled on the noiseless dynamics for exactly n
steps and the per-step Gaussian noise is accumulated analytically, so the
terminal law is exactly Gaussian with variance n * noise_std**2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .env import EnvModel, project_goal, step
from .goalspace import BoxParams, neg_log_prob, reparam, sample_eps, var_logpdf
from .hierarchy import Agent, box_at, execute_skill
from .nnet import Net, forward


@dataclass(frozen=True)
class ReachableSet:
    """Point cloud of achievable goal projections with its tight bounding box."""

    points: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    cell: float

    def contains(self, q, tol: float) -> bool:
        """True when some cloud point lies within tol of q (L2)."""
        q = np.asarray(q, dtype=np.float64)
        return bool(np.any(np.sum((self.points - q) ** 2, axis=1) <= tol * tol))


def reachable_bruteforce(env: EnvModel, s0, n: int, actions_per_dim: int = 5,
                         cell: float | None = None,
                         node_budget: int = 2_000_000) -> ReachableSet:
    """Frontier search over a discretized action grid, deduplicated on a
    spatial hash so the cost stays polynomial in n."""
    if env.noisy:
        raise ValueError("reachable_bruteforce needs a noiseless environment")
    if actions_per_dim < 3:
        raise ValueError("actions_per_dim must be >= 3")
    if cell is None:
        cell = env.v_max / 2.0
    s0 = np.asarray(s0, dtype=np.float64)
    grid_1d = np.linspace(-1.0, 1.0, actions_per_dim)
    actions = [np.array(a) for a in itertools.product(grid_1d, repeat=env.action_dim)]

    def key(s):
        return tuple(np.round(s / cell).astype(np.int64))

    visited = {key(s0): s0.copy()}
    frontier = [s0.copy()]
    nodes = 0
    for _wave in range(n):
        nxt = []
        for s in frontier:
            for a in actions:
                nodes += 1
                if nodes > node_budget:
                    raise RuntimeError(
                        f"frontier search exceeded node budget {node_budget} "
                        f"({len(visited)} cells visited, wave {_wave + 1}/{n}); "
                        f"raise the budget or coarsen the grid")
                s2 = step(env, s, a)
                k = key(s2)
                if k not in visited:
                    visited[k] = s2
                    nxt.append(s2)
        frontier = nxt
    pts = np.stack([project_goal(env, s) for s in visited.values()])
    return ReachableSet(pts, pts.min(axis=0), pts.max(axis=0), cell)


def channel_terminal_means(env: EnvModel, policy: Net, n: int, s0,
                           zs: np.ndarray) -> np.ndarray:
    """Noiseless n-step unroll of the deterministic policy for each goal
    offset in zs; the mean of the open-loop channel terminal law."""
    if env.state_dim != 1 or env.walls or env.cage is not None:
        raise ValueError("channel unroll expects an unbounded 1-D environment")
    s = np.full(len(zs), float(np.asarray(s0).reshape(-1)[0]))
    zcol = np.asarray(zs, dtype=np.float64)[:, None]
    for _ in range(n):
        x = np.concatenate([s[:, None], zcol], axis=1)
        a = np.tanh(forward(policy, x))[:, 0]
        s = s + a * env.v_max
    return s


def make_channel_sampler(env: EnvModel, policy: Net, n: int):
    """Terminal-state sampler matching the quadrature's open-loop channel."""
    sigma = float(np.sqrt(n) * env.noise_std[0])

    def terminal(s0, z, rng: np.random.Generator) -> np.ndarray:
        mean = channel_terminal_means(env, policy, n, s0, np.array([z[0]]))[0]
        return np.array([mean + rng.normal(0.0, sigma)])

    return terminal


def _mi_on_grids(zgrid, means, sgrid, sigma, halfwidth) -> float:
    pz = 1.0 / (2.0 * halfwidth)
    diff = sgrid[None, :] - means[:, None]
    p_sz = np.exp(-0.5 * (diff / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
    p_s = np.trapezoid(pz * p_sz, zgrid, axis=0)
    ratio = np.zeros_like(p_sz)
    mask = (p_sz > 1e-300) & (p_s > 1e-300)[None, :]
    ratio[mask] = np.log(p_sz[mask]) - np.log(np.broadcast_to(p_s, p_sz.shape)[mask])
    inner = np.trapezoid(p_sz * ratio, sgrid, axis=1)
    return float(np.trapezoid(pz * inner, zgrid))


def exact_mi_quadrature(env: EnvModel, box: BoxParams, policy: Net, n: int, *,
                        z_points: int = 257, s_points: int = 513,
                        tol: float = 1e-3, s0=None) -> float:
    """Trapezoid-rule I(Z; S_n | s0) on the 1-D noisy channel.

    p(z) is uniform on the box; p(s_n | z) is the open-loop Gaussian channel.
    A Richardson halving estimate of the quadrature error gates the result.
    """
    if not env.noisy:
        raise ValueError("exact MI needs a noisy channel (noise_std > 0)")
    if env.state_dim != 1 or box.d != 1:
        raise ValueError("quadrature oracle is 1-D only")
    if z_points % 2 == 0 or s_points % 2 == 0:
        raise ValueError("grid point counts must be odd so halving keeps endpoints")
    if s0 is None:
        s0 = np.zeros(1)
    c, w = float(box.center[0]), float(box.halfwidth[0])
    sigma = float(np.sqrt(n) * env.noise_std[0])
    zgrid = np.linspace(c - w, c + w, z_points)
    means = channel_terminal_means(env, policy, n, s0, zgrid)
    sgrid = np.linspace(means.min() - 6.0 * sigma, means.max() + 6.0 * sigma, s_points)
    full = _mi_on_grids(zgrid, means, sgrid, sigma, w)
    half = _mi_on_grids(zgrid[::2], means[::2], sgrid[::2], sigma, w)
    err = abs(full - half) / 3.0
    if err > tol:
        raise RuntimeError(
            f"quadrature error estimate {err:.3e} above tolerance {tol:.1e}; "
            f"increase z_points/s_points beyond {z_points}/{s_points}")
    return full


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    stderr: float


def variational_bound_estimate(agent: Agent, level: int, s0, n_samples: int,
                               rng: np.random.Generator,
                               terminal_fn=None) -> BoundEstimate:
    """Monte Carlo estimate of the mutual-information lower bound at s0:
    box entropy plus the mean Gaussian log-density of the sampled target
    around the achieved goal projection.

    terminal_fn(s0, z, rng) -> s_n overrides skill execution; the channel
    acceptance tests pass the analytic open-loop sampler here so the bound
    and the quadrature integrate the same channel.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s0 = np.asarray(s0, dtype=np.float64)
    box = box_at(agent, level, s0)
    sigma = agent.levels[level].spec.sigma0_gs
    h0 = project_goal(agent.env, s0)
    vals = np.zeros(n_samples)
    for i in range(n_samples):
        z = reparam(sample_eps(rng, box.d), box)
        if terminal_fn is not None:
            s_n = terminal_fn(s0, z, rng)
        else:
            s_n, _ = execute_skill(agent, level, s0, z, rng)
        vals[i] = var_logpdf(h0 + z, project_goal(agent.env, s_n), sigma)
    se = float(np.std(vals, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return BoundEstimate(neg_log_prob(box) + float(np.mean(vals)), se)
