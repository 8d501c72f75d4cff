import numpy as np
import pytest

from hiemp.env import make_env
from hiemp.hierarchy import (LevelSpec, RolloutMonitor, TrainConfig, box_at,
                             build_agent, execute_skill, execute_subgoal,
                             refresh_start_states, scale_action, train_phase1)
from hiemp.nnet import net_bytes


def tiny_cfg(**kw):
    defaults = dict(gc_iters=2, gc_grad_steps=3, gs_grad_steps=2, gc_rollouts=3,
                    gs_samples=3, gc_batch=8, gs_batch=4, refresh_every=2,
                    refresh_skills=2)
    defaults.update(kw)
    return TrainConfig(**defaults)


def specs_2level():
    return [LevelSpec(10, 0.4, 1.75, 0.15), LevelSpec(10, 0.8, 3.5, 0.3)]


def agent_bytes(agent):
    out = b""
    for lev in agent.levels:
        for net in (lev.gc.policy, lev.gc.critic, lev.gs.policy, lev.gs.critic):
            out += net_bytes(net)
    return out


def test_scale_action_zero_raw_returns_shifts():
    shifts = np.array([0.5, -1.0])
    bounds = np.array([2.0, 3.0])
    assert np.allclose(scale_action(np.zeros(2), bounds, shifts), shifts)


def test_scale_action_saturates_at_shifts_plus_bounds():
    shifts = np.array([1.0])
    bounds = np.array([2.0])
    out = scale_action(np.array([50.0]), bounds, shifts)
    assert np.isclose(out[0], 3.0, atol=1e-6)
    out = scale_action(np.array([-50.0]), bounds, shifts)
    assert np.isclose(out[0], -1.0, atol=1e-6)


def test_scale_action_always_inside_box():
    rng = np.random.default_rng(0)
    for _ in range(200):
        raw = rng.normal(scale=5, size=3)
        bounds = np.abs(rng.normal(size=3)) + 0.1
        shifts = rng.normal(size=3)
        a = scale_action(raw, bounds, shifts)
        assert np.all(a >= shifts - bounds) and np.all(a <= shifts + bounds)


def test_scale_action_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        scale_action(np.zeros(2), np.ones(3), np.zeros(2))


def test_level_spec_validation():
    with pytest.raises(ValueError):
        LevelSpec(0, 0.4, 1.75, 0.15)
    with pytest.raises(ValueError):
        LevelSpec(10, -0.4, 1.75, 0.15)
    with pytest.raises(ValueError):
        LevelSpec(10, 0.4, 1.75, 0.15, gamma=1.5)


def test_execute_skill_immediate_return_inside_eps_ball():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(1)
    agent = build_agent(env, [LevelSpec(10, 0.4, 1.75, 0.15)], rng, hidden=(8, 8))
    s = np.array([0.02, -0.01])
    out, steps = execute_skill(agent, 0, s, np.zeros(2), rng)
    assert steps == 0
    assert np.array_equal(out, s)


def test_execute_skill_respects_primitive_step_budget():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(2)
    agent = build_agent(env, specs_2level(), rng, hidden=(8, 8))
    mon = RolloutMonitor()
    _, steps = execute_skill(agent, 1, env.start_region.center(),
                             np.array([5.0, 5.0]), rng, monitor=mon)
    assert steps <= 10 * 10
    assert mon.max_steps.get(1, 0) <= 10 * 10


def test_execute_subgoal_runs_level_below():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(3)
    agent = build_agent(env, specs_2level(), rng, hidden=(8, 8))
    s = env.start_region.center()
    out, steps = execute_subgoal(agent, 1, s, np.array([0.5, 0.5]), rng)
    assert steps <= 10
    with pytest.raises(ValueError):
        execute_subgoal(agent, 0, s, np.zeros(2), rng)


def test_subgoal_containment_untrained_agent():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(4)
    agent = build_agent(env, specs_2level(), rng, hidden=(8, 8))
    mon = RolloutMonitor()
    for _ in range(5):
        z = rng.uniform(-2.0, 2.0, 2)  # beyond the epsilon ball, forces subgoals
        execute_skill(agent, 1, env.start_region.center(), z, rng, monitor=mon)
    assert mon.subgoals > 0
    assert mon.contained == mon.subgoals


def test_start_buffers_nonempty_and_near_start_after_init():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(5)
    agent = build_agent(env, specs_2level(), rng, hidden=(8, 8))
    for buf in agent.start_buffers:
        assert len(buf) > 0
        for s in buf:
            assert np.all(np.abs(s) < 0.5)  # untrained policies barely move


def test_start_buffer_capacity_respected():
    env = make_env("point_field_1d")
    rng = np.random.default_rng(6)
    agent = build_agent(env, [LevelSpec(5, 0.4, 1.75, 0.15)], rng, hidden=(8, 8),
                        buffer_capacity=8)
    refresh_start_states(agent, 30, rng)
    assert len(agent.start_buffers[0]) <= 8


def test_train_phase1_updates_bottom_up_per_epoch():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(7)
    agent = build_agent(env, specs_2level(), rng, hidden=(8, 8))
    rows = []
    train_phase1(agent, tiny_cfg(), 2, rng, metrics_cb=rows.append)
    seq = [(r["epoch"], r["level"]) for r in rows]
    assert seq == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]


def test_train_phase1_zero_lr_keeps_parameters():
    env = make_env("point_field_1d")
    rng = np.random.default_rng(8)
    agent = build_agent(env, [LevelSpec(5, 0.4, 1.75, 0.15)], rng, hidden=(8, 8))
    before = agent_bytes(agent)
    cfg = tiny_cfg(lr_gc_actor=0.0, lr_gc_critic=0.0, lr_gs_actor=0.0, lr_gs_critic=0.0)
    train_phase1(agent, cfg, 2, rng)
    assert agent_bytes(agent) == before


def test_train_phase1_deterministic_metrics_and_params():
    def run(seed):
        env = make_env("point_field_1d")
        rng = np.random.default_rng(seed)
        agent = build_agent(env, [LevelSpec(5, 0.4, 1.75, 0.15)], rng, hidden=(8, 8))
        rows = []
        train_phase1(agent, tiny_cfg(), 3, rng, metrics_cb=rows.append)
        return rows, agent_bytes(agent)

    rows_a, bytes_a = run(9)
    rows_b, bytes_b = run(9)
    assert len(rows_a) == len(rows_b)
    for ra, rb in zip(rows_a, rows_b):
        assert ra.keys() == rb.keys()
        for k in ra:
            assert np.isclose(ra[k], rb[k], rtol=0, atol=0, equal_nan=True)
    assert bytes_a == bytes_b


def test_train_phase1_epoch_zero_row_only_when_no_epochs():
    env = make_env("point_field_1d")
    rng = np.random.default_rng(10)
    agent = build_agent(env, [LevelSpec(5, 0.4, 1.75, 0.15)], rng, hidden=(8, 8))
    rows = []
    train_phase1(agent, tiny_cfg(), 0, rng, metrics_cb=rows.append)
    assert len(rows) == 1 and rows[0]["epoch"] == 0


def test_metrics_rows_carry_box_transcription_fields():
    env = make_env("point_field_2d")
    rng = np.random.default_rng(11)
    agent = build_agent(env, [LevelSpec(5, 0.4, 1.75, 0.15)], rng, hidden=(8, 8))
    rows = []
    train_phase1(agent, tiny_cfg(), 1, rng, metrics_cb=rows.append)
    row = rows[-1]
    box = box_at(agent, 0, env.start_region.center())
    assert np.isclose(row["halfwidth_mean"], float(np.mean(box.halfwidth)))
    assert np.isclose(row["center_0"], box.center[0])
    assert np.isclose(row["log_halfwidth_0"], box.log_halfwidth[0])
