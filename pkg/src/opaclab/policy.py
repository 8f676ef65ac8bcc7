"""Squashed diagonal-Gaussian policies and entropy-temperature adaptation.

Actions are ``a = tanh(u)`` with ``u ~ N(mean, exp(log_std)^2)``. The density
of ``a`` picks up the change-of-variables term ``-sum log(1 - tanh(u)^2)``,
evaluated in the overflow-free form ``2 (log 2 - u - softplus(-2u))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .diffcore import (
    ForwardCache,
    MLPSpec,
    OptimizerConfig,
    ParamStore,
    backward,
    forward_cached,
    init_params,
    optimizer_step,
    reset_params,
)
from .errors import InputError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


@dataclass
class PolicyHead:
    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.clip(
            np.broadcast_to(np.asarray(self.log_std, dtype=np.float64), self.mean.shape),
            LOG_STD_MIN,
            LOG_STD_MAX,
        )

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


@dataclass
class SquashedSample:
    u: np.ndarray
    action: np.ndarray
    log_prob: np.ndarray
    xi: np.ndarray
    reparameterized: bool


def sample_action(head: PolicyHead, rng: np.random.Generator, reparameterized: bool = False) -> SquashedSample:
    """Draw ``a = tanh(mean + std * xi)``.

    With ``reparameterized`` the noise ``xi`` is kept so gradients can be
    pushed through the sample (see :func:`rsample_grads`); otherwise callers
    should treat the sample as a constant.
    """
    xi = rng.standard_normal(head.mean.shape)
    return sample_from_noise(head, xi, reparameterized)


def sample_from_noise(head: PolicyHead, xi: np.ndarray, reparameterized: bool = False) -> SquashedSample:
    u = head.mean + head.std * xi
    return SquashedSample(u, np.tanh(u), log_prob(head, u), xi, reparameterized)


def log_prob(head: PolicyHead, u) -> np.ndarray:
    """Log density of ``tanh(u)`` under the squashed head (summed over action dims)."""
    u = np.asarray(u, dtype=np.float64)
    return kernels.tanh_gauss_logp(u, head.mean, head.log_std)[0]


def log_prob_grads(head: PolicyHead, u):
    """``(logp, d/dmean, d/dlog_std)`` with the pre-squash sample ``u`` held fixed."""
    logp, d_mean, d_log_std, _ = kernels.tanh_gauss_logp(np.asarray(u, dtype=np.float64), head.mean, head.log_std)
    return logp, d_mean, d_log_std


def rsample_grads(head: PolicyHead, xi):
    """Reparameterized sample and total derivatives through ``u = mean + std * xi``.

    Returns ``(u, a, logp, dlogp_dmean, dlogp_dlog_std, da_dmean, da_dlog_std)``;
    the ``da_*`` arrays are elementwise (the Jacobian is diagonal).
    """
    xi = np.asarray(xi, dtype=np.float64)
    std = head.std
    u = head.mean + std * xi
    a = np.tanh(u)
    logp, p_mean, p_log_std, p_u = kernels.tanh_gauss_logp(u, head.mean, head.log_std)
    du_dlog_std = std * xi
    dlogp_dmean = p_mean + p_u
    dlogp_dlog_std = p_log_std + p_u * du_dlog_std
    da_du = 1.0 - a * a
    return u, a, logp, dlogp_dmean, dlogp_dlog_std, da_du, da_du * du_dlog_std


def deterministic_action(head: PolicyHead) -> np.ndarray:
    return np.tanh(head.mean)


class Temperature:
    """Entropy weight ``alpha = exp(log_alpha)`` tuned toward a target entropy."""

    def __init__(self, target_entropy: float, init_alpha: float = 1.0, learning_rate: float = 5e-4):
        if init_alpha <= 0:
            raise InputError("initial alpha must be positive")
        self.target_entropy = float(target_entropy)
        self.store = ParamStore({"log_alpha": (1,)})
        self.store.params["log_alpha"][0] = np.log(init_alpha)
        self.opt = OptimizerConfig(learning_rate=learning_rate)

    @property
    def log_alpha(self) -> float:
        return float(self.store.params["log_alpha"][0])

    @property
    def alpha(self) -> float:
        return float(np.exp(self.store.params["log_alpha"][0]))

    def loss_and_grad(self, batch_log_probs) -> tuple[float, float]:
        """``mean(-alpha * (logp + H_target))`` and its derivative in ``log_alpha``."""
        lp = np.asarray(batch_log_probs, dtype=np.float64)
        if lp.size == 0:
            raise InputError("temperature update needs a nonempty batch")
        loss = -self.alpha * float(np.mean(lp + self.target_entropy))
        return loss, loss


def update_temperature(temp: Temperature, batch_log_probs) -> Temperature:
    _, grad = temp.loss_and_grad(batch_log_probs)
    temp.store.grads["log_alpha"][0] = grad
    optimizer_step(temp.store, temp.opt)
    return temp


class GaussianPolicy:
    """MLP producing a :class:`PolicyHead` per observation.

    With ``state_dependent_std`` the network emits ``[mean, log_std]``;
    otherwise ``log_std`` is a free parameter vector stored in the same
    :class:`ParamStore`.
    """

    def __init__(self, obs_dim: int, act_dim: int, hidden_dims=(256, 256), activation: str = "tanh",
                 state_dependent_std: bool = True, rng: np.random.Generator | None = None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.state_dependent_std = state_dependent_std
        out = 2 * act_dim if state_dependent_std else act_dim
        self.spec = MLPSpec(obs_dim, tuple(hidden_dims), out, activation)
        self.extra = {} if state_dependent_std else {"log_std": (act_dim,)}
        self.store = init_params(self.spec, rng if rng is not None else np.random.default_rng(0), self.extra)

    def reset(self, rng: np.random.Generator) -> None:
        reset_params(self.store, self.spec, rng)

    def head(self, obs) -> tuple[PolicyHead, tuple]:
        out, cache = forward_cached(self.store, self.spec, obs)
        if self.state_dependent_std:
            mean = out[..., : self.act_dim]
            raw = out[..., self.act_dim :]
        else:
            mean = out
            raw = np.broadcast_to(self.store.params["log_std"], mean.shape)
        inside = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
        return PolicyHead(mean, raw), (cache, inside)

    def backward(self, ctx, g_mean, g_log_std) -> None:
        """Accumulate parameter gradients from ``dL/dmean`` and ``dL/dlog_std``."""
        cache, inside = ctx
        g_log_std = np.where(inside, g_log_std, 0.0)
        if self.state_dependent_std:
            g_out = np.concatenate([g_mean, g_log_std], axis=-1)
        else:
            g_out = g_mean
            g = g_log_std.reshape(-1, self.act_dim).sum(axis=0)
            self.store.grads["log_std"] += g
        backward(self.store, self.spec, cache, g_out)


class DeterministicPolicy:
    """``a = tanh(net(s))``; the actor of TD3."""

    def __init__(self, obs_dim: int, act_dim: int, hidden_dims=(256, 256), activation: str = "relu",
                 rng: np.random.Generator | None = None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.spec = MLPSpec(obs_dim, tuple(hidden_dims), act_dim, activation)
        self.store = init_params(self.spec, rng if rng is not None else np.random.default_rng(0))

    def reset(self, rng: np.random.Generator) -> None:
        reset_params(self.store, self.spec, rng)

    def act(self, obs, store: ParamStore | None = None) -> np.ndarray:
        out, _ = forward_cached(store or self.store, self.spec, obs)
        return np.tanh(out)

    def act_cached(self, obs) -> tuple[np.ndarray, ForwardCache]:
        out, cache = forward_cached(self.store, self.spec, obs)
        return np.tanh(out), cache

    def backward(self, cache: ForwardCache, action: np.ndarray, g_action) -> None:
        backward(self.store, self.spec, cache, g_action * (1.0 - action * action))
