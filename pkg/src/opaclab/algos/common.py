"""Shared pieces of the agents: configuration, value networks, loss primitives."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field, fields

import numpy as np

from ..diffcore import (
    ForwardCache,
    MLPSpec,
    OptimizerConfig,
    ParamStore,
    backward,
    check_finite,
    forward_cached,
    init_params,
    optimizer_step,
    polyak_update,
    reset_params,
)
from ..errors import ConfigError, InputError

ALGORITHMS = ("opac2", "copac2", "sac", "td3", "sac_constrained", "td3_constrained")
CONSTRAINED = {"copac2", "sac_constrained", "td3_constrained"}


@dataclass
class AgentConfig:
    gamma: float = 0.99
    rho: float = 0.995
    batch_size: int = 256
    target_update_interval: int = 1
    initial_exploration_steps: int = 10_000
    update_after: int | None = None  # defaults to initial_exploration_steps
    gradient_steps: int = 1
    learning_rate: float = 1e-4  # shared by policy, Q and V
    lr_alpha: float = 5e-4
    lr_beta: float = 5e-6
    init_alpha: float = 1.0
    init_beta: float = 0.0
    freeze_beta: bool = False
    target_entropy: float | None = None  # defaults to -act_dim
    entropy_mode: str = "bonus"  # bonus | max_entropy | none
    reset_interval: int | None = None
    n_cost_critics: int = 1
    independent_batches: bool = False
    hidden_dims: tuple[int, ...] = (256, 256)
    activation: str | None = None  # tanh for OPAC2 variants, relu otherwise
    state_dependent_std: bool | None = None  # free log-std for OPAC2 variants by default
    cost_limit: float | None = None
    epoch_len: int = 10_000
    policy_delay: int = 2
    smooth_sigma: float = 0.2
    smooth_clip: float = 0.5
    expl_sigma: float = 0.1
    adv_eps: float = 1e-8

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("rho must lie in (0, 1)")
        for name in ("learning_rate", "lr_alpha", "lr_beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.batch_size <= 0 or self.target_update_interval <= 0 or self.gradient_steps < 0:
            raise ConfigError("batch_size and target_update_interval must be positive, gradient_steps >= 0")
        if self.entropy_mode not in ("bonus", "max_entropy", "none"):
            raise ConfigError(f"unknown entropy_mode {self.entropy_mode!r}")
        if self.n_cost_critics not in (1, 2):
            raise ConfigError("n_cost_critics must be 1 or 2")
        if self.reset_interval is not None and self.reset_interval <= 0:
            raise ConfigError("reset_interval must be positive when set")
        if self.init_beta < 0:
            raise ConfigError("init_beta must be non-negative")
        if self.epoch_len <= 0 or self.policy_delay <= 0:
            raise ConfigError("epoch_len and policy_delay must be positive")

    @property
    def warmup(self) -> int:
        return self.initial_exploration_steps if self.update_after is None else self.update_after

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}


class RngFactory:
    """Named, independent Philox streams derived from one master seed.

    ``get(name, generation)`` always returns the same stream for the same
    arguments, so e.g. the network called ``"q"`` is initialized identically
    regardless of which other networks an agent owns.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def get(self, name: str, generation: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()), generation))
        return np.random.Generator(np.random.Philox(ss))


class Net:
    """An MLP plus its optimizer settings; optionally owns a Polyak target."""

    def __init__(self, name: str, spec: MLPSpec, rngs: RngFactory, lr: float, with_target: bool = False):
        self.name = name
        self.spec = spec
        self.opt = OptimizerConfig(learning_rate=lr)
        self.store = init_params(spec, rngs.get(name))
        self.target: ParamStore | None = self.store.copy() if with_target else None
        if self.target is not None:
            self.target.m_flat[...] = 0.0
            self.target.v_flat[...] = 0.0

    def __call__(self, x, target: bool = False) -> np.ndarray:
        store = self.target if target else self.store
        return forward_cached(store, self.spec, x)[0][..., 0]

    def cached(self, x) -> tuple[np.ndarray, ForwardCache]:
        out, cache = forward_cached(self.store, self.spec, x)
        return out[..., 0], cache

    def step(self) -> None:
        optimizer_step(self.store, self.opt)

    def sync_target(self) -> None:
        if self.target is not None:
            self.target.load_from(self.store)

    def update_target(self, rho: float) -> None:
        polyak_update(self.target, self.store, rho)

    def reset(self, rngs: RngFactory, generation: int) -> None:
        reset_params(self.store, self.spec, rngs.get(self.name, generation))
        self.sync_target()


def sa(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.concatenate([s, a], axis=-1)


def mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared residual and its gradient in ``pred``."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.shape[0]


def regress(net: Net, x: np.ndarray, target: np.ndarray, name: str) -> float:
    """One gradient step of ``net(x)`` toward the constant ``target``."""
    pred, cache = net.cached(x)
    loss, g = mse(pred, target)
    check_finite(loss, name)
    net.store.zero_grad()
    backward(net.store, net.spec, cache, g[:, None])
    net.step()
    return loss


def critic_loss_and_grad(net: Net, x: np.ndarray, target: np.ndarray) -> float:
    """Fill ``net`` gradients for ``mean((net(x) - target)^2)`` without stepping."""
    pred, cache = net.cached(x)
    loss, g = mse(pred, target)
    net.store.zero_grad()
    backward(net.store, net.spec, cache, g[:, None])
    return loss


def action_grad(net: Net, s: np.ndarray, a: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``Q(s, a)`` and ``d(sum_i weights_i Q(s_i, a_i)) / da`` (no parameter gradients)."""
    q, cache = net.cached(sa(s, a))
    g_in = backward(net.store, net.spec, cache, weights[:, None], accumulate=False)
    return q, g_in[:, s.shape[1]:]


def q_target_single(r, d, v_targ_next, gamma: float):
    """Bellman target ``r + gamma (1 - d) V_targ(s')``."""
    return r + gamma * (1.0 - d) * v_targ_next


def v_loss(v_pred, q_at_policy_action) -> float:
    return mse(np.asarray(v_pred, dtype=np.float64), np.asarray(q_at_policy_action, dtype=np.float64))[0]


def advantage(q, v):
    return q - v


def normalize_advantages(adv, eps: float = 1e-8) -> np.ndarray:
    """``(A - mean) / (std + eps)`` with the population std; zeros for a single entry."""
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size < 2:
        return np.zeros_like(adv)
    return (adv - adv.mean()) / (adv.std() + eps)


def copac2_advantage(q_r, v_r, q_c, v_c, beta: float):
    if beta < 0:
        raise InputError("beta must be non-negative")
    return (q_r - v_r) - beta * (q_c - v_c)


def beta_objective(beta: float, cost_limit: float, avg_cost: float) -> tuple[float, float]:
    """``beta (M - J_C)`` and its derivative in ``beta``."""
    return beta * (cost_limit - avg_cost), cost_limit - avg_cost


def update_beta(beta: float, cost_limit: float, avg_cost: float, lr: float) -> float:
    """Projected gradient step ``beta <- max(0, beta - lr (M - J_C))``."""
    _, grad = beta_objective(beta, cost_limit, avg_cost)
    return max(0.0, beta - lr * grad)


@dataclass
class EpochCostLog:
    """Mean episode cost over the most recently completed epoch.

    An epoch is a window of ``epoch_len`` environment steps; only episodes
    that start and end inside the window count. ``value`` is ``None`` until
    the first epoch with at least one complete episode has closed.
    """

    epoch_len: int
    value: float | None = None
    window_start: int = 0
    current: list = field(default_factory=list)

    def record_episode(self, start_step: int, end_step: int, total_cost: float) -> None:
        if start_step >= self.window_start:
            self.current.append(float(total_cost))

    def advance(self, env_step: int) -> None:
        """Close the window if ``env_step`` reached its end."""
        if env_step - self.window_start >= self.epoch_len:
            if self.current:
                self.value = float(np.mean(self.current))
            self.current = []
            self.window_start += self.epoch_len
