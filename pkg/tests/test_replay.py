import numpy as np
import pytest

from opaclab.algos import AgentConfig, make_agent
from opaclab.envs import make_env
from opaclab.errors import BufferStateError, InputError
from opaclab.replay import VALIDATION_TAG_BASE, ReplayBuffer, Transition, collect_validation


def _t(x):
    return Transition(np.array([x]), np.array([0.0]), float(x), 0.0, np.array([x + 1.0]), 0.0, int(x))


def test_ring_overwrites_oldest():
    buf = ReplayBuffer(1, 1, capacity=3)
    for x in range(1, 5):
        buf.push(_t(x))
    assert sorted(t.r for t in buf) == [2.0, 3.0, 4.0]
    assert [t.r for t in buf] == [2.0, 3.0, 4.0]  # oldest first


def test_sizes():
    buf = ReplayBuffer(1, 1, capacity=3)
    buf.push(_t(0))
    assert len(buf) == 1
    for x in range(10):
        buf.push(_t(x))
    assert len(buf) == 3


def test_single_entry_sampling():
    buf = ReplayBuffer(1, 1, capacity=5)
    buf.push(_t(7))
    b = buf.sample_batch(4, np.random.default_rng(0))
    assert np.array_equal(b.r, [7.0] * 4)
    assert b[2].tag == 7


def test_uniform_frequencies():
    buf = ReplayBuffer(1, 1, capacity=5)
    buf.push(_t(0)).push(_t(1))
    idx = buf.sample_indices(10_000, np.random.default_rng(0))
    assert abs(np.mean(idx == 0) - 0.5) < 0.02
    assert set(np.unique(idx)) == {0, 1}


def test_sampling_deterministic():
    buf = ReplayBuffer(1, 1, capacity=50)
    for x in range(30):
        buf.push(_t(x))
    a = buf.sample_batch(8, np.random.default_rng(11))
    b = buf.sample_batch(8, np.random.default_rng(11))
    assert np.array_equal(a.s, b.s) and np.array_equal(a.tag, b.tag)


def test_errors():
    buf = ReplayBuffer(1, 1, capacity=2)
    with pytest.raises(BufferStateError):
        buf.sample_batch(1, np.random.default_rng(0))
    buf.push(_t(0))
    with pytest.raises(InputError):
        buf.sample_batch(0, np.random.default_rng(0))
    with pytest.raises(InputError):
        ReplayBuffer(1, 1, capacity=0)


def test_dump_csv(tmp_path):
    buf = ReplayBuffer(1, 1, capacity=2)
    for x in range(3):
        buf.push(_t(x))
    path = tmp_path / "buf.csv"
    buf.dump_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "s0,a0,r,c,s_next0,d,tag"
    assert [line.split(",")[-1] for line in lines[1:]] == ["1", "2"]


def _agent_env(seed=0):
    cfg = AgentConfig(hidden_dims=(8,), batch_size=4)
    env = make_env("nav_mixed", np.random.default_rng(seed), episode_len=200)
    return make_agent("sac", env.spec.obs_dim, env.spec.act_dim, cfg, 0), env


def test_validation_size_and_contract():
    agent, env = _agent_env()
    val = collect_validation(env, agent, 5, np.random.default_rng(0))
    assert len(val) == 1000
    assert len(val.episodes) == 5
    for e in val.episodes:
        assert len(e) == 200  # ends at the step limit
        assert e.tags.min() >= VALIDATION_TAG_BASE
    assert len(val.batch()) == 1000


def test_validation_deterministic():
    a, env_a = _agent_env(3)
    b, env_b = _agent_env(3)
    va = collect_validation(env_a, a, 2, np.random.default_rng(9))
    vb = collect_validation(env_b, b, 2, np.random.default_rng(9))
    ba, bb = va.batch(), vb.batch()
    for name in ("s", "a", "r", "c", "s_next", "d", "tag"):
        assert np.array_equal(getattr(ba, name), getattr(bb, name))


def test_validation_does_not_touch_buffer():
    agent, env = _agent_env()
    buf = ReplayBuffer(env.spec.obs_dim, env.spec.act_dim, 10)
    collect_validation(env, agent, 1, np.random.default_rng(0))
    assert len(buf) == 0
