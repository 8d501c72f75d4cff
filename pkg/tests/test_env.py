import numpy as np
import pytest

from hiemp.env import (CONTACT_MARGIN, PointFieldConfig, Wall, box_region,
                       goal_distance, in_free_space, make_channel_env_1d, make_env,
                       make_point_field, project_goal, step)


def test_linear_dynamics():
    env = make_env("point_field_2d")
    s = step(env, np.zeros(2), np.array([1.0, 0.0]))
    assert np.allclose(s, [0.1, 0.0])


def test_action_out_of_range_rejected():
    env = make_env("point_field_1d")
    with pytest.raises(ValueError):
        step(env, np.zeros(1), np.array([1.2]))
    with pytest.raises(ValueError):
        step(env, np.zeros(1), np.zeros(2))


def test_wall_clamp():
    wall = Wall(0, 0.05)
    env = make_point_field(PointFieldConfig(dims=1, barriers=(wall,), start_halfwidth=0.01))
    s = step(env, np.zeros(1), np.array([1.0]))
    assert np.isclose(s[0], 0.05 - CONTACT_MARGIN)
    # blocked from the other side too
    s2 = step(env, np.array([0.08]), np.array([-1.0]))
    assert np.isclose(s2[0], 0.05 + CONTACT_MARGIN)


def test_wall_span_limits_blocking():
    wall = Wall(0, 0.05, lo=-1.0, hi=1.0)
    env = make_point_field(PointFieldConfig(dims=2, barriers=(wall,), start_halfwidth=0.01))
    blocked = step(env, np.array([0.0, 0.5]), np.array([1.0, 0.0]))
    assert np.isclose(blocked[0], 0.05 - CONTACT_MARGIN)
    free = step(env, np.array([0.0, 1.5]), np.array([1.0, 0.0]))
    assert np.isclose(free[0], 0.1)


def test_cage_clamp():
    env = make_env("point_cage_2d")
    s = np.array([1.15, 0.0])
    s = step(env, s, np.array([1.0, 0.0]))
    assert np.isclose(s[0], 1.2 - CONTACT_MARGIN)


def test_noise_monte_carlo_mean():
    env = make_point_field(PointFieldConfig(dims=1, noise_std=0.01))
    rng = np.random.default_rng(0)
    n = 100_000
    s0 = np.zeros(1)
    a = np.array([0.5])
    outs = np.array([step(env, s0, a, rng)[0] for _ in range(n)])
    det = 0.5 * env.v_max
    assert abs(outs.mean() - det) < 3 * 0.01 / np.sqrt(n)


def test_noiseless_step_is_pure_and_seeded_rollouts_reproduce():
    env = make_env("point_field_2d")
    s = np.array([0.3, -0.2])
    a = np.array([-0.4, 0.9])
    assert np.array_equal(step(env, s, a), step(env, s, a))

    env_n = make_point_field(PointFieldConfig(dims=2, noise_std=0.02))
    def rollout(seed):
        rng = np.random.default_rng(seed)
        s = np.zeros(2)
        states = []
        for _ in range(50):
            s = step(env_n, s, np.array([0.5, -0.5]), rng)
            states.append(s)
        return np.stack(states)
    assert np.array_equal(rollout(7), rollout(7))


def test_noisy_step_requires_rng():
    env = make_point_field(PointFieldConfig(dims=1, noise_std=0.01))
    with pytest.raises(ValueError):
        step(env, np.zeros(1), np.array([0.1]))


def test_project_goal():
    env = make_env("point_field_2d")
    assert np.allclose(project_goal(env, np.array([3.0, 4.0])), [3.0, 4.0])
    env1 = make_env("point_field_1d")
    assert project_goal(env1, np.array([7.0])).shape == (1,)
    # zero action is a fixed point of the noiseless dynamics
    s = np.array([0.4, -0.4])
    assert np.allclose(project_goal(env, step(env, s, np.zeros(2))), project_goal(env, s))


def test_channel_env_requires_positive_noise():
    with pytest.raises(ValueError):
        make_channel_env_1d(0.0, 10)
    with pytest.raises(ValueError):
        make_channel_env_1d(-0.1, 10)


def test_channel_constant_action_mean_displacement():
    env = make_channel_env_1d(0.05, 20)
    rng = np.random.default_rng(1)
    n_steps, a = 20, np.array([0.7])
    finals = []
    for _ in range(4000):
        s = np.zeros(1)
        for _ in range(n_steps):
            s = step(env, s, a, rng)
        finals.append(s[0])
    finals = np.array(finals)
    expect = n_steps * 0.7 * env.v_max
    assert abs(finals.mean() - expect) < 4 * finals.std() / np.sqrt(len(finals))


def test_channel_variance_matches_closed_form():
    env = make_channel_env_1d(0.05, 5)
    rng = np.random.default_rng(2)
    n_steps = 5
    finals = []
    for _ in range(100_000):
        s = np.zeros(1)
        for _ in range(n_steps):
            s = step(env, s, np.zeros(1), rng)
        finals.append(s[0])
    var = np.var(finals)
    expect = n_steps * 0.05 ** 2
    assert abs(var - expect) / expect < 0.05


def test_channel_n1_is_single_step():
    env = make_channel_env_1d(0.03, 1)
    rng = np.random.default_rng(3)
    outs = np.array([step(env, np.zeros(1), np.array([1.0]), rng)[0] for _ in range(50_000)])
    assert abs(outs.mean() - env.v_max) < 4 * 0.03 / np.sqrt(len(outs))
    assert abs(outs.std() - 0.03) / 0.03 < 0.05


def test_barrier_invariant_random_walk():
    # no trajectory state inside a wall or outside the cage
    env = make_env("h_maze_2d")
    cage_env = make_env("point_cage_2d")
    rng = np.random.default_rng(4)
    for e in (env, cage_env):
        s = e.start_region.center()
        for _ in range(2000):
            s = step(e, s, rng.uniform(-1, 1, size=2))
            assert in_free_space(e, s)


def test_h_maze_geometry_blocks_vertical_exit_inside_hallway():
    env = make_env("h_maze_2d")
    s = np.array([0.0, 0.95])
    s = step(env, s, np.array([0.0, 1.0]))
    assert s[1] <= 1.0 - CONTACT_MARGIN / 2
    # inside the right vertical hallway the same move is free
    s2 = step(env, np.array([3.0, 0.95]), np.array([0.0, 1.0]))
    assert np.isclose(s2[1], 1.05)


def test_start_region_inside_free_space_validated():
    bad = PointFieldConfig(dims=1, barriers=(Wall(0, 0.0),))
    with pytest.raises(ValueError):
        make_point_field(bad)


def test_goal_distance_kinds():
    assert np.isclose(goal_distance([0.0, 0.0], [3.0, 4.0]), 5.0)
    assert np.isclose(goal_distance([0.0, 0.0], [3.0, 4.0], "linf"), 4.0)
    with pytest.raises(ValueError):
        goal_distance([0.0], [1.0], "taxicab")


def test_unknown_preset_rejected():
    with pytest.raises(ValueError):
        make_env("moon_base")
