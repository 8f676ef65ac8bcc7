import math

import numpy as np
import pytest

from opaclab.diagnostics import (
    MetricsRecord,
    RunSummary,
    cost_adjustment_ratio,
    iqm,
    mc_return,
    performance_profile,
    q_estimation_error,
    returns_to_go,
    validation_td_error,
)
from opaclab.errors import InputError
from opaclab.replay import EvalEpisode, ValidationSet

import oracles


class ConstQ:
    """Minimal agent exposing the diagnostics hooks with a constant critic."""

    def __init__(self, value=0.0, gamma=0.0):
        self.value = value
        self.gamma = gamma

    def td_residuals(self, batch, rng):
        return {"reward": np.full(len(batch), self.value) - (batch.r + self.gamma * (1 - batch.d) * self.value)}

    def q_estimates(self, s, a):
        return {"reward": np.full(s.shape[0], self.value)}


def _val(rewards_per_episode):
    eps = []
    for rs in rewards_per_episode:
        n = len(rs)
        r = np.asarray(rs, dtype=float)
        eps.append(EvalEpisode(np.zeros((n, 1)), np.zeros((n, 1)), r, np.zeros(n), r.copy(), np.zeros((n, 1)),
                               np.zeros(n), np.arange(n)))
    return ValidationSet(eps)


def test_td_error_zero_for_consistent_critic():
    # Q = 1 / (1 - gamma) with all rewards 1 satisfies its own backup
    assert validation_td_error(ConstQ(2.0, 0.5), _val([[1.0] * 4])) == {"reward": 0.0}


def test_td_error_residual_is_reward():
    assert validation_td_error(ConstQ(0.0, 0.0), _val([[1.0] * 5, [1.0] * 3]))["reward"] == 1.0


def test_td_error_empty():
    with pytest.raises(InputError):
        validation_td_error(ConstQ(), ValidationSet([]))


def test_mc_return():
    assert mc_return([1, 1, 1], 0.5) == 1.75
    assert mc_return([3.0, 5.0], 0.0) == 3.0
    assert mc_return([2.5], 0.9) == 2.5
    assert np.array_equal(returns_to_go([1, 1, 1], 0.5), [1.75, 1.5, 1.0])


def test_q_error_zero_when_q_is_return():
    class Exact(ConstQ):
        def q_estimates(self, s, a):
            return {"reward": returns_to_go([1.0, 2.0, 3.0], 0.9)}

    assert q_estimation_error(Exact(), _val([[1.0, 2.0, 3.0]]), 0.9)["reward"] == pytest.approx(0.0, abs=1e-15)


def test_q_error_sign():
    assert q_estimation_error(ConstQ(0.0), _val([[1.0, 2.0]]), 0.9)["reward"] < 0


def test_q_error_three_step_toy():
    val = _val([[1.0, 0.0, 2.0]])
    # returns: 1 + 0.5*0 + 0.25*2 = 1.5, 0 + 0.5*2 = 1, 2
    expect = np.mean([3.0 - 1.5, 3.0 - 1.0, 3.0 - 2.0])
    assert q_estimation_error(ConstQ(3.0), val, 0.5)["reward"] == expect


@pytest.mark.parametrize("kind", ["opac2", "copac2", "sac", "td3", "sac_constrained", "td3_constrained"])
def test_diagnostics_match_loop_oracle(kind):
    agent = oracles.fixture_agent(kind)
    val = oracles.fixture_validation()
    got = validation_td_error(agent, val, np.random.default_rng(5))
    ref = oracles.loop_td_rms(agent, val, kind, np.random.default_rng(5))
    assert got.keys() == ref.keys()
    for k in got:
        assert got[k] == pytest.approx(ref[k], rel=1e-12, abs=0)
    got_q = q_estimation_error(agent, val, agent.cfg.gamma)
    ref_q = oracles.loop_q_error(agent, val, agent.cfg.gamma)
    for k in got_q:
        assert got_q[k] == pytest.approx(ref_q[k], rel=1e-12, abs=1e-15)


def _run(points):
    return RunSummary([MetricsRecord(step, 0.0, inc, cost) for step, inc, cost in points])


def test_cost_adjustment_ratio():
    assert cost_adjustment_ratio(_run([(0, 2, 10), (10, 8, 4)]), 10) == -1.0
    assert cost_adjustment_ratio(_run([(0, 2, 10), (10, 8, 10)]), 10) == 0.0
    assert math.isnan(cost_adjustment_ratio(_run([(0, 2, 10), (10, 2, 4)]), 10))
    # the early checkpoint is the last one at or before early_step
    assert cost_adjustment_ratio(_run([(0, 2, 10), (10, 8, 4), (20, 0, 0)]), 15) == -1.0
    with pytest.raises(InputError):
        cost_adjustment_ratio(_run([(0, 2, 10)]), 10)


def test_iqm_examples():
    assert iqm([0, 10, 20, 100]) == 15
    assert iqm([4.0] * 7) == 4.0
    assert iqm([1, 2, 3, 4, 5, 6, 7, 8]) == 4.5
    assert iqm([3]) == 3
    with pytest.raises(InputError):
        iqm([])


def test_iqm_matches_scipy_when_divisible():
    from scipy import stats

    x = np.random.default_rng(0).normal(size=40)
    assert iqm(x) == pytest.approx(stats.trim_mean(x, 0.25), rel=1e-12)


def test_performance_profile():
    assert performance_profile([5, 6], [0, 1, 2]) == [1.0, 1.0, 1.0]
    assert performance_profile([5, 6], [10]) == [0.0]
    assert performance_profile([1, 3], [0, 2, 4]) == [1.0, 0.5, 0.0]


def test_run_summary_order_and_window():
    with pytest.raises(InputError):
        _run([(10, 0, 0), (10, 0, 0)])
    run = _run([(i * 10, i, 0) for i in range(1, 31)])
    assert [r.env_step for r in run.final_window()] == [280, 290, 300]
    assert run.final("episode_incentive") == 29.0
