"""Measurement battery: held-out TD error, Q-estimation error, early cost
adjustment, interquartile mean and performance profiles."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError
from .replay import ValidationSet


@dataclass
class MetricsRecord:
    env_step: int
    episode_reward: float
    episode_incentive: float
    episode_cost: float
    td_error_reward: float | None = None
    td_error_cost: float | None = None
    q_error_reward: float | None = None
    q_error_cost: float | None = None
    alpha: float | None = None
    beta: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunSummary:
    records: list[MetricsRecord] = field(default_factory=list)
    final_window_frac: float = 0.1

    def __post_init__(self):
        steps = [r.env_step for r in self.records]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise InputError("checkpoints must be strictly increasing in env_step")

    def final_window(self) -> list[MetricsRecord]:
        if not self.records:
            return []
        n = max(1, math.ceil(self.final_window_frac * len(self.records)))
        return self.records[-n:]

    def final(self, metric: str) -> float:
        window = self.final_window()
        if not window:
            return math.nan
        return float(np.mean([getattr(r, metric) for r in window]))


def validation_td_error(agent, val: ValidationSet, rng: np.random.Generator | None = None) -> dict[str, float]:
    """Root-mean-square Bellman residual of the agent's critics on held-out data.

    Keys are ``"reward"`` and, for constrained agents, ``"cost"``.
    """
    if len(val) == 0:
        raise InputError("empty validation set")
    rng = rng if rng is not None else np.random.default_rng(0)
    res = agent.td_residuals(val.batch(), rng)
    return {k: float(np.sqrt(np.mean(v * v))) for k, v in res.items()}


def mc_return(rewards, gamma: float) -> float:
    """Discounted sum ``sum_t gamma^t r_t``."""
    total = 0.0
    for r in reversed(list(rewards)):
        total = float(r) + gamma * total
    return total


def returns_to_go(rewards, gamma: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def q_estimation_error(agent, val: ValidationSet, gamma: float) -> dict[str, float]:
    """Mean signed ``Q(s_t, a_t) - G_t`` with ``G_t`` the discounted return to episode end.

    Negative values mean the critic underestimates.
    """
    if len(val) == 0:
        raise InputError("empty validation set")
    batch = val.batch()
    q = agent.q_estimates(batch.s, batch.a)
    targets = {"reward": np.concatenate([returns_to_go(e.r, gamma) for e in val.episodes])}
    if "cost" in q:
        targets["cost"] = np.concatenate([returns_to_go(e.c, gamma) for e in val.episodes])
    return {k: float(np.mean(q[k] - targets[k])) for k in q}


def cost_adjustment_ratio(run: RunSummary, early_step: int) -> float:
    """``(cost_start - cost_early) / (incentive_start - incentive_early)``.

    ``start`` is the first checkpoint, ``early`` the checkpoint at
    ``early_step`` (or the last one before it). Returns NaN when the incentive
    change is below 1e-9 in magnitude.
    """
    if not run.records:
        raise InputError("run has no checkpoints")
    start = run.records[0]
    early = None
    for rec in run.records:
        if rec.env_step <= early_step:
            early = rec
    if early is None or early is start:
        raise InputError(f"no checkpoint after the first one at or before step {early_step}")
    d_cost = start.episode_cost - early.episode_cost
    d_inc = start.episode_incentive - early.episode_incentive
    if abs(d_inc) < 1e-9:
        return math.nan
    return d_cost / d_inc


def iqm(scores) -> float:
    """Mean of the middle 50% of scores.

    Each sorted score owns an equal slice of the unit interval; the result
    averages over the slice [0.25, 0.75], so boundary scores get fractional
    weight when the count is not a multiple of four.
    """
    x = np.sort(np.asarray(scores, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise InputError("iqm of an empty list")
    lo = np.arange(n) / n
    hi = (np.arange(n) + 1) / n
    w = np.clip(np.minimum(hi, 0.75) - np.maximum(lo, 0.25), 0.0, None)
    return float(np.dot(w, x) / w.sum())


def performance_profile(scores, thresholds) -> list[float]:
    """Fraction of scores strictly above each threshold."""
    x = np.asarray(scores, dtype=np.float64).ravel()
    if x.size == 0:
        raise InputError("performance profile of an empty list")
    return [float(np.mean(x > t)) for t in thresholds]
