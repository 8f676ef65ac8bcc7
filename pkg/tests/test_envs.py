import math

import numpy as np
import pytest

from opaclab.envs import (
    NavConfig,
    NavLayout,
    NavState,
    PendulumConfig,
    PendulumState,
    dump_layout_csv,
    dump_trajectory_csv,
    make_env,
    nav_observe,
    nav_reset,
    nav_step,
    pendulum_reset,
    pendulum_step,
)
from opaclab.errors import ConfigError, InputError


def _state(pos, vel=(0.0, 0.0), goal=(1.5, 1.5), hazards=()):
    hz = np.array([[x, y, r] for x, y, r in hazards], dtype=float).reshape(-1, 3)
    lay = NavLayout(2.0, np.array(goal, dtype=float), 0.2, hz)
    p = np.array(pos, dtype=float)
    return NavState(p, np.array(vel, dtype=float), lay, 0, float(np.hypot(*(lay.goal - p))))


def test_reset_deterministic():
    a, oa = nav_reset(NavConfig(), np.random.default_rng(5))
    b, ob = nav_reset(NavConfig(), np.random.default_rng(5))
    assert np.array_equal(a.layout.hazards, b.layout.hazards)
    assert np.array_equal(a.layout.goal, b.layout.goal)
    assert np.array_equal(oa, ob)


def test_start_and_goal_outside_hazards():
    rng = np.random.default_rng(0)
    cfg = NavConfig()
    for _ in range(10_000):
        st, _ = nav_reset(cfg, rng)
        assert not st.layout.inside_hazard(st.position)
        assert not st.layout.inside_hazard(st.layout.goal)
        assert np.all(np.abs(st.layout.hazards[:, :2]) <= cfg.half_width)
        assert st.step_count == 0 and not st.velocity.any()


def test_zero_hazards_zero_cost():
    cfg = NavConfig(n_hazards=0)
    rng = np.random.default_rng(0)
    st, _ = nav_reset(cfg, rng)
    for _ in range(200):
        _, res = nav_step(st, rng.uniform(-1, 1, 2), cfg, rng)
        assert res.cost == 0.0


def test_crowded_arena_rejected():
    with pytest.raises(ConfigError):
        nav_reset(NavConfig(half_width=1.0, n_hazards=60, hazard_radius=0.7, max_layout_tries=50),
                  np.random.default_rng(0))


def test_hazard_center_costs():
    cfg = NavConfig()
    st = _state((0.5, 0.5), hazards=[(0.5, 0.5, 0.25)])
    _, res = nav_step(st, np.zeros(2), cfg, np.random.default_rng(0))
    assert res.cost == 1.0


def test_zero_action_rest_no_motion():
    cfg = NavConfig()
    st = _state((0.3, -0.2))
    _, res = nav_step(st, np.zeros(2), cfg, np.random.default_rng(0))
    assert np.array_equal(st.position, [0.3, -0.2])
    assert res.incentive == 0.0 and res.reward == 0.0


def test_dense_reward_is_progress():
    cfg = NavConfig(damping=0.0, accel=1.0, dt=0.1)
    st = _state((-1.0, 0.0), goal=(1.5, 0.0))
    _, res = nav_step(st, np.array([1.0, 0.0]), cfg, np.random.default_rng(0))
    assert res.incentive == pytest.approx(0.1, abs=1e-12)


def test_dynamics_formula():
    cfg = NavConfig()
    st = _state((0.0, 0.0), vel=(0.2, -0.1))
    a = np.array([0.5, -1.0])
    v = 0.95 * np.array([0.2, -0.1]) + 0.1 * a
    _, res = nav_step(st, a, cfg, np.random.default_rng(0))
    assert np.allclose(st.velocity, v, atol=1e-15)
    assert np.allclose(st.position, 0.1 * v, atol=1e-15)


def test_speed_and_arena_clamped():
    cfg = NavConfig(accel=5.0)
    st = _state((1.99, 0.0), vel=(0.9, 0.0))
    nav_step(st, np.array([1.0, 1.0]), cfg, np.random.default_rng(0))
    assert np.linalg.norm(st.velocity) <= cfg.vmax + 1e-12
    assert np.all(np.abs(st.position) <= cfg.half_width)


def test_goal_bonus_and_resample():
    cfg = NavConfig()
    st = _state((1.0, 1.0), goal=(1.05, 1.0))
    old_goal = st.layout.goal.copy()
    _, res = nav_step(st, np.zeros(2), cfg, np.random.default_rng(0))
    assert res.incentive == pytest.approx(1.0, abs=1e-12)
    assert not np.array_equal(st.layout.goal, old_goal)
    assert st.prev_goal_dist >= cfg.min_start_goal_dist


def test_mixed_sign_decomposition():
    cfg = NavConfig(penalty_weight=0.7)
    rng = np.random.default_rng(1)
    st, _ = nav_reset(cfg, rng)
    for _ in range(300):
        _, res = nav_step(st, rng.uniform(-1, 1, 2), cfg, rng)
        assert res.reward == res.incentive + (-0.7 * res.cost)
        assert res.cost in (0.0, 1.0)


def test_constrained_mode_separates_cost():
    cfg = NavConfig(penalty_weight=0.7, constrained=True)
    st = _state((0.5, 0.5), hazards=[(0.5, 0.5, 0.25)])
    _, res = nav_step(st, np.zeros(2), cfg, np.random.default_rng(0))
    assert res.cost == 1.0 and res.reward == res.incentive == 0.0


def test_done_only_at_episode_len():
    cfg = NavConfig(episode_len=5)
    rng = np.random.default_rng(0)
    st, _ = nav_reset(cfg, rng)
    flags = [nav_step(st, np.zeros(2), cfg, rng)[1] for _ in range(5)]
    assert [r.done for r in flags] == [False] * 4 + [True]
    assert not any(r.terminal for r in flags)


def test_action_bounds_rejected():
    st = _state((0.0, 0.0))
    for bad in ([1.5, 0.0], [np.nan, 0.0], [0.0]):
        with pytest.raises(InputError):
            nav_step(st, np.array(bad), NavConfig(), np.random.default_rng(0))


def test_observation_layout():
    st = _state((0.5, 0.0), vel=(0.1, 0.2), goal=(0.5, 0.0), hazards=[(1.0, 0.0, 0.25), (-1, 0, 0.25)])
    obs = nav_observe(st, 3)
    assert obs.shape == (11,)
    assert np.array_equal(obs[:2], [0.1, 0.2])
    assert np.allclose(obs[2:4], 0.0)  # at goal
    assert np.allclose(obs[4:6], [0.5, 0.0])  # nearest hazard first
    assert np.allclose(obs[6:8], [-1.5, 0.0])
    assert np.array_equal(obs[8:10], [0.0, 0.0])  # padding
    assert obs[10] == 0.0


def test_observation_translation_invariant():
    rng = np.random.default_rng(0)
    st, _ = nav_reset(NavConfig(), rng)
    shift = np.array([0.3, -0.7])
    moved = NavState(st.position + shift, st.velocity.copy(),
                     NavLayout(2.0, st.layout.goal + shift, 0.2,
                               st.layout.hazards + np.array([shift[0], shift[1], 0.0])), 0, st.prev_goal_dist)
    assert np.allclose(nav_observe(st), nav_observe(moved), atol=1e-12)


def test_trajectory_determinism():
    def roll(seed):
        env = make_env("nav_mixed", np.random.default_rng(seed), penalty_weight=1.0)
        env.reset()
        acts = np.random.default_rng(99).uniform(-1, 1, size=(400, 2))
        out = []
        for a in acts:
            res = env.step(a)
            out.append((res.obs.tobytes(), res.reward, res.cost))
            if res.done:
                env.reset()
        return out

    assert roll(4) == roll(4)


def test_episode_cost_bounded():
    env = make_env("nav_mixed", np.random.default_rng(0), n_hazards=20, hazard_radius=0.4)
    env.reset()
    rng = np.random.default_rng(0)
    total = 0.0
    for _ in range(env.spec.episode_len):
        total += env.step(rng.uniform(-1, 1, 2)).cost
    assert 0 <= total <= env.spec.episode_len


def test_pendulum_hanging_stays_down():
    cfg = PendulumConfig()
    st = PendulumState(math.pi, 0.0)
    rewards = [pendulum_step(st, np.zeros(1), cfg)[1].reward for _ in range(10)]
    assert np.allclose(rewards, -math.pi ** 2, atol=1e-9)


def test_pendulum_hanging_with_noise_near_bottom():
    cfg = PendulumConfig()
    st, _ = pendulum_reset(cfg, np.random.default_rng(0))
    rewards = [pendulum_step(st, np.zeros(1), cfg)[1].reward for _ in range(10)]
    assert np.allclose(rewards, -math.pi ** 2, atol=0.8)


def test_pendulum_upright_zero_reward():
    _, res = pendulum_step(PendulumState(0.0, 0.0), np.zeros(1), PendulumConfig())
    assert res.reward == 0.0 and res.cost == 0.0


def test_pendulum_speed_bounded():
    cfg = PendulumConfig()
    rng = np.random.default_rng(0)
    for _ in range(20):
        st, _ = pendulum_reset(cfg, rng)
        for _ in range(500):
            pendulum_step(st, rng.uniform(-1, 1, 1), cfg)
            assert abs(st.theta_dot) <= cfg.max_speed


def test_pendulum_horizon():
    env = make_env("pendulum", np.random.default_rng(0))
    env.reset()
    done = [env.step(np.zeros(1)).done for _ in range(200)]
    assert done[-1] and not any(done[:-1])


def test_csv_dumps(tmp_path):
    env = make_env("nav_mixed", np.random.default_rng(0), penalty_weight=0.5)
    env.reset()
    env.record = True
    for _ in range(5):
        env.step(np.array([0.2, 0.1]))
    dump_layout_csv(env.state.layout, tmp_path / "layout.csv")
    dump_trajectory_csv(env.trajectory, tmp_path / "traj.csv")
    assert len((tmp_path / "layout.csv").read_text().splitlines()) == 2 + 6
    rows = (tmp_path / "traj.csv").read_text().splitlines()
    assert rows[0] == "step,x,y,cost,incentive,penalty,reward" and len(rows) == 6


def test_unknown_env():
    with pytest.raises(ConfigError):
        make_env("cartpole", np.random.default_rng(0))
