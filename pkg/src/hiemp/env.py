"""Point-mass environments with explicit, model-based transition access.

Actions are per-dimension velocity commands in [-1, 1]; a step displaces the
state by action * v_max plus optional Gaussian noise, then clamps against
axis-aligned wall segments and an optional cage box. The n-step reachable
set of the open field is therefore the L-infinity box of half-width
n * v_max, which the oracle module exploits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONTACT_MARGIN = 1e-6

PRESETS = ("point_field_1d", "point_field_2d", "point_cage_2d", "h_maze_2d", "channel_1d")


@dataclass(frozen=True)
class Wall:
    """Axis-aligned segment: the plane coordinate `offset` along `axis`,
    spanning [lo, hi] in the other axis (ignored in 1-D)."""

    axis: int
    offset: float
    lo: float = -np.inf
    hi: float = np.inf


@dataclass(frozen=True)
class BoxRegion:
    lo: np.ndarray
    hi: np.ndarray

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))


def box_region(lo, hi) -> BoxRegion:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ValueError("invalid box region")
    return BoxRegion(lo, hi)


@dataclass(frozen=True)
class PointFieldConfig:
    """Builder input for a point-mass field."""

    dims: int
    v_max: float = 0.1
    noise_std: float = 0.0
    barriers: tuple[Wall, ...] = ()
    cage: BoxRegion | None = None
    start_halfwidth: float = 0.05
    name: str = "point_field"


@dataclass(frozen=True)
class EnvModel:
    name: str
    state_dim: int
    action_dim: int
    goal_dims: tuple[int, ...]
    v_max: float
    noise_std: np.ndarray
    walls: tuple[Wall, ...]
    cage: BoxRegion | None
    start_region: BoxRegion

    @property
    def goal_dim(self) -> int:
        return len(self.goal_dims)

    def sample_start(self, rng: np.random.Generator) -> np.ndarray:
        return self.start_region.sample(rng)

    @property
    def noisy(self) -> bool:
        return bool(np.any(self.noise_std > 0.0))


def make_point_field(cfg: PointFieldConfig) -> EnvModel:
    if cfg.dims not in (1, 2):
        raise ValueError(f"dims must be 1 or 2, got {cfg.dims}")
    if cfg.v_max <= 0.0:
        raise ValueError("v_max must be positive")
    hw = cfg.start_halfwidth
    start = box_region(np.full(cfg.dims, -hw), np.full(cfg.dims, hw))
    env = EnvModel(
        name=cfg.name,
        state_dim=cfg.dims,
        action_dim=cfg.dims,
        goal_dims=tuple(range(cfg.dims)),
        v_max=cfg.v_max,
        noise_std=np.full(cfg.dims, float(cfg.noise_std)),
        walls=tuple(cfg.barriers),
        cage=cfg.cage,
        start_region=start,
    )
    _check_start_free(env)
    return env


def _check_start_free(env: EnvModel) -> None:
    lo, hi = env.start_region.lo, env.start_region.hi
    if env.cage is not None:
        if not (np.all(lo > env.cage.lo) and np.all(hi < env.cage.hi)):
            raise ValueError("start region must lie strictly inside the cage")
    for w in env.walls:
        if lo[w.axis] <= w.offset <= hi[w.axis]:
            other = 1 - w.axis
            if env.state_dim == 1 or (lo[other] <= w.hi and hi[other] >= w.lo):
                raise ValueError("start region intersects a wall segment")


def step(env: EnvModel, s, a, rng: np.random.Generator | None = None) -> np.ndarray:
    """One transition. Movement is clamped axis by axis at walls and the cage."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (env.action_dim,):
        raise ValueError(f"action shape {a.shape} != ({env.action_dim},)")
    if np.any(np.abs(a) > 1.0 + 1e-12):
        raise ValueError(f"action out of range [-1, 1]: {a}")
    delta = a * env.v_max
    if env.noisy:
        if rng is None:
            raise ValueError("rng required for a noisy environment")
        delta = delta + rng.normal(0.0, env.noise_std)
    pos = s.copy()
    for axis in range(env.state_dim):
        t = pos[axis] + delta[axis]
        cur = pos[axis]
        for w in env.walls:
            if w.axis != axis:
                continue
            if env.state_dim == 2:
                # span sealed up to the contact margin so float dust cannot
                # slip through a corner-exact junction
                other = pos[1 - axis]
                if not (w.lo - CONTACT_MARGIN <= other <= w.hi + CONTACT_MARGIN):
                    continue
            if cur < w.offset and t >= w.offset - CONTACT_MARGIN:
                t = w.offset - CONTACT_MARGIN
            elif cur > w.offset and t <= w.offset + CONTACT_MARGIN:
                t = w.offset + CONTACT_MARGIN
        if env.cage is not None:
            t = min(max(t, env.cage.lo[axis] + CONTACT_MARGIN),
                    env.cage.hi[axis] - CONTACT_MARGIN)
        pos[axis] = t
    return pos


def project_goal(env: EnvModel, s) -> np.ndarray:
    """Project a state onto the goal space (ordered goal_dims coordinates)."""
    s = np.asarray(s, dtype=np.float64)
    return s[list(env.goal_dims)]


def goal_distance(u, v, kind: str = "euclidean") -> float:
    diff = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    if kind == "euclidean":
        return float(np.linalg.norm(diff))
    if kind == "linf":
        return float(np.max(np.abs(diff)))
    raise ValueError(f"unknown distance kind {kind!r}")


def make_channel_env_1d(noise_std: float, n: int, v_max: float = 0.1) -> EnvModel:
    """Noisy 1-D channel for the exact-MI oracle.

    With an open-loop action sequence the terminal-state law is Gaussian with
    mean n-step displacement and variance n * noise_std**2, which is what the
    quadrature oracle integrates. noise_std must be strictly positive.
    """
    if noise_std <= 0.0:
        raise ValueError(f"channel noise_std must be > 0, got {noise_std}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return make_point_field(PointFieldConfig(
        dims=1, v_max=v_max, noise_std=noise_std, name="channel_1d"))


def _h_maze_walls() -> tuple[Wall, ...]:
    # Horizontal hallway y in [-1, 1], x in [-3, 3]; vertical hallways
    # x in [-4, -2] and [2, 4], y in [-3, 3].
    return (
        Wall(1, 1.0, -2.0, 2.0), Wall(1, -1.0, -2.0, 2.0),
        Wall(1, 3.0, -4.0, -2.0), Wall(1, 3.0, 2.0, 4.0),
        Wall(1, -3.0, -4.0, -2.0), Wall(1, -3.0, 2.0, 4.0),
        Wall(0, -4.0, -3.0, 3.0), Wall(0, 4.0, -3.0, 3.0),
        Wall(0, -2.0, 1.0, 3.0), Wall(0, -2.0, -3.0, -1.0),
        Wall(0, 2.0, 1.0, 3.0), Wall(0, 2.0, -3.0, -1.0),
    )


def make_env(preset: str, *, noise_std: float = 0.15, n: int = 20) -> EnvModel:
    """Build a named preset. noise_std/n apply to channel_1d only."""
    if preset == "point_field_1d":
        return make_point_field(PointFieldConfig(dims=1, name=preset))
    if preset == "point_field_2d":
        return make_point_field(PointFieldConfig(dims=2, name=preset))
    if preset == "point_cage_2d":
        cage = box_region([-1.2, -1.2], [1.2, 1.2])
        return make_point_field(PointFieldConfig(dims=2, cage=cage, name=preset))
    if preset == "h_maze_2d":
        return make_point_field(PointFieldConfig(dims=2, barriers=_h_maze_walls(),
                                                 name=preset))
    if preset == "channel_1d":
        return make_channel_env_1d(noise_std, n)
    raise ValueError(f"unknown environment preset {preset!r}; choose from {PRESETS}")


def in_free_space(env: EnvModel, s, slack: float = 0.0) -> bool:
    """True when the state violates no wall or cage constraint (diagnostic)."""
    s = np.asarray(s, dtype=np.float64)
    if env.cage is not None and not env.cage.contains(s, slack):
        return False
    for w in env.walls:
        if abs(s[w.axis] - w.offset) < CONTACT_MARGIN - slack:
            if env.state_dim == 1 or (w.lo <= s[1 - w.axis] <= w.hi):
                return False
    return True
