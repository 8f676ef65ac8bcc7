"""Behaviour shared by all agents: acting, resetting, beta, checkpoint arrays."""
from __future__ import annotations

import numpy as np

from ..diffcore import OptimizerConfig, optimizer_step
from ..errors import ConfigError
from ..policy import GaussianPolicy, Temperature, sample_action, update_temperature
from ..replay import ReplayBuffer
from .common import AgentConfig, EpochCostLog, Net, RngFactory, update_beta


class Agent:
    name = "agent"
    constrained = False
    default_activation = "relu"

    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig, seed: int = 0):
        cfg.validate()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.cfg = cfg
        self.rngs = RngFactory(seed)
        self.update_rng = self.rngs.get("update")
        self.activation = cfg.activation or self.default_activation
        self.generation = 0
        self.grad_steps = 0
        self.nets: dict[str, Net] = {}
        target_entropy = -float(act_dim) if cfg.target_entropy is None else cfg.target_entropy
        self.temperature = Temperature(target_entropy, cfg.init_alpha, cfg.lr_alpha)
        self.beta: float | None = None
        self.cost_log: EpochCostLog | None = None
        if self.constrained:
            if cfg.cost_limit is None or not cfg.cost_limit > 0:
                raise ConfigError(f"{self.name} requires a positive cost_limit")
            self.beta = float(cfg.init_beta)
            self.cost_log = EpochCostLog(cfg.epoch_len)

    # -- construction helpers -------------------------------------------------
    def _hidden(self):
        return tuple(self.cfg.hidden_dims)

    def _net(self, name: str, in_dim: int, with_target: bool = False) -> Net:
        from ..diffcore import MLPSpec

        net = Net(name, MLPSpec(in_dim, self._hidden(), 1, self.activation), self.rngs,
                  self.cfg.learning_rate, with_target)
        self.nets[name] = net
        return net

    def _gaussian_policy(self, state_dependent_std: bool) -> GaussianPolicy:
        pol = GaussianPolicy(self.obs_dim, self.act_dim, self._hidden(), self.activation,
                             state_dependent_std, self.rngs.get("policy"))
        self.policy_opt = OptimizerConfig(learning_rate=self.cfg.learning_rate)
        return pol

    # -- acting -----------------------------------------------------------------
    def act(self, obs, rng: np.random.Generator) -> np.ndarray:
        head, _ = self.policy.head(obs)
        return sample_action(head, rng).action

    def act_eval(self, obs, rng: np.random.Generator) -> np.ndarray:
        return self.act(obs, rng)

    def act_for_training(self, obs, env_step: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform actions during initial exploration, the behaviour policy afterwards."""
        if env_step < self.cfg.initial_exploration_steps:
            return rng.uniform(-1.0, 1.0, size=self.act_dim)
        return self.act(obs, rng)

    # -- updates ------------------------------------------------------------------
    def sample_batches(self, buffer: ReplayBuffer, n: int):
        """``n`` batches; identical objects unless ``independent_batches`` is set."""
        first = buffer.sample_batch(self.cfg.batch_size, self.update_rng)
        if not self.cfg.independent_batches:
            return [first] * n
        return [first] + [buffer.sample_batch(self.cfg.batch_size, self.update_rng) for _ in range(n - 1)]

    def step_policy(self) -> None:
        optimizer_step(self.policy.store, self.policy_opt)

    def step_temperature(self, log_probs) -> None:
        update_temperature(self.temperature, log_probs)

    def step_beta(self) -> None:
        if self.beta is None or self.cfg.freeze_beta or self.cost_log.value is None:
            return
        self.beta = update_beta(self.beta, self.cfg.cost_limit, self.cost_log.value, self.cfg.lr_beta)

    def update(self, buffer: ReplayBuffer) -> dict:
        raise NotImplementedError

    # -- bookkeeping ----------------------------------------------------------------
    def record_episode(self, start_step: int, end_step: int, total_cost: float) -> None:
        if self.cost_log is not None:
            self.cost_log.record_episode(start_step, end_step, total_cost)

    def advance(self, env_step: int) -> None:
        if self.cost_log is not None:
            self.cost_log.advance(env_step)

    @property
    def alpha(self) -> float | None:
        return self.temperature.alpha

    def maybe_reset(self, env_step: int) -> bool:
        """Re-initialize every network and optimizer at multiples of ``reset_interval``.

        The temperature, beta and the replay buffer are left untouched.
        """
        interval = self.cfg.reset_interval
        if not interval or env_step <= 0 or env_step % interval:
            return False
        self.generation += 1
        self.reset_networks()
        return True

    def reset_networks(self) -> None:
        for net in self.nets.values():
            net.reset(self.rngs, self.generation)
        self.policy.reset(self.rngs.get("policy", self.generation))

    # -- diagnostics hooks --------------------------------------------------------
    def td_residuals(self, batch, rng: np.random.Generator) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def q_estimates(self, s, a) -> dict[str, np.ndarray]:
        raise NotImplementedError

    # -- checkpoints --------------------------------------------------------------
    def stores(self) -> dict:
        out = {"policy": self.policy.store, "temperature": self.temperature.store}
        for name, net in self.nets.items():
            out[name] = net.store
            if net.target is not None:
                out[f"{name}_targ"] = net.target
        return out

    def meta(self) -> dict:
        meta = {"generation": self.generation, "grad_steps": self.grad_steps}
        if self.beta is not None:
            meta["beta"] = self.beta
            meta["cost_log_value"] = np.nan if self.cost_log.value is None else self.cost_log.value
        return meta

    def load_meta(self, meta: dict) -> None:
        self.generation = int(meta["generation"])
        self.grad_steps = int(meta["grad_steps"])
        if self.beta is not None:
            self.beta = float(meta["beta"])
            v = float(meta["cost_log_value"])
            self.cost_log.value = None if np.isnan(v) else v
