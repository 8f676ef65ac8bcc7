"""Twin delayed deterministic policy gradient, optionally with Lagrangian cost critics."""
from __future__ import annotations

import numpy as np

from ..diffcore import OptimizerConfig, backward, optimizer_step, polyak_update
from ..policy import DeterministicPolicy
from .base import Agent
from .common import Net, regress, sa


def td3_actor_loss(actor: DeterministicPolicy, critic: Net, s, cost_critics: list[Net] = (),
                   beta: float = 0.0) -> float:
    """``-mean(Q_1(s, mu(s)) - beta * min_j Qc_j(s, mu(s)))``; fills actor grads."""
    n = s.shape[0]
    obs_dim = s.shape[1]
    a, a_cache = actor.act_cached(s)
    x = sa(s, a)
    q, cache = critic.cached(x)
    g_a = backward(critic.store, critic.spec, cache, np.full((n, 1), -1.0 / n), accumulate=False)[:, obs_dim:]
    objective = q
    if len(cost_critics):
        evals = [c.cached(x) for c in cost_critics]
        stacked = np.stack([v for v, _ in evals])
        which = np.argmin(stacked, axis=0)
        objective = q - beta * np.take_along_axis(stacked, which[None], 0)[0]
        if beta != 0.0:
            for j, (c, (_, c_cache)) in enumerate(zip(cost_critics, evals)):
                w = beta * (which == j).astype(np.float64) / n
                g_a = g_a + backward(c.store, c.spec, c_cache, w[:, None], accumulate=False)[:, obs_dim:]
    actor.store.zero_grad()
    actor.backward(a_cache, a, g_a)
    return -float(np.mean(objective))


class TD3Agent(Agent):
    name = "td3"

    def __init__(self, obs_dim, act_dim, cfg, seed=0):
        super().__init__(obs_dim, act_dim, cfg, seed)
        self.actor = DeterministicPolicy(obs_dim, act_dim, self._hidden(), self.activation, self.rngs.get("policy"))
        self.policy = self.actor
        self.policy_opt = OptimizerConfig(learning_rate=cfg.learning_rate)
        self.actor_target = self.actor.store.copy()
        self.q1 = self._net("q1", obs_dim + act_dim, with_target=True)
        self.q2 = self._net("q2", obs_dim + act_dim, with_target=True)
        self.cost_critics: list[Net] = []
        if self.constrained:
            for j in range(cfg.n_cost_critics):
                self.cost_critics.append(self._net(f"q_c{j + 1}", obs_dim + act_dim, with_target=True))
        self.critic_steps = 0
        self.actor_steps = 0

    @property
    def alpha(self):
        return None

    def act(self, obs, rng):
        a = self.actor.act(obs)
        if self.cfg.expl_sigma > 0:
            a = np.clip(a + self.cfg.expl_sigma * rng.standard_normal(a.shape), -1.0, 1.0)
        return a

    def target_action(self, s_next, rng):
        mu = self.actor.act(s_next, self.actor_target)
        eps = np.clip(self.cfg.smooth_sigma * rng.standard_normal(mu.shape), -self.cfg.smooth_clip,
                      self.cfg.smooth_clip)
        return np.clip(mu + eps, -1.0, 1.0)

    def reward_target(self, batch, a_next):
        x = sa(batch.s_next, a_next)
        return batch.r + self.cfg.gamma * (1.0 - batch.d) * np.minimum(self.q1(x, target=True), self.q2(x, target=True))

    def cost_target(self, batch, a_next):
        x = sa(batch.s_next, a_next)
        qc = np.min([c(x, target=True) for c in self.cost_critics], axis=0)
        return batch.c + self.cfg.gamma * (1.0 - batch.d) * qc

    def update(self, buffer) -> dict:
        cfg = self.cfg
        b_q, b_pi = self.sample_batches(buffer, 2)
        self.step_beta()
        a_next = self.target_action(b_q.s_next, self.update_rng)
        y = self.reward_target(b_q, a_next)
        x = sa(b_q.s, b_q.a)
        q_loss = regress(self.q1, x, y, "q1_loss") + regress(self.q2, x, y, "q2_loss")
        if self.constrained:
            y_c = self.cost_target(b_q, a_next)
            for c in self.cost_critics:
                q_loss += regress(c, x, y_c, f"{c.name}_loss")
        self.critic_steps += 1
        self.grad_steps += 1
        out = {"q_loss": q_loss}
        if self.critic_steps % cfg.policy_delay == 0:
            out["pi_loss"] = td3_actor_loss(self.actor, self.q1, b_pi.s, self.cost_critics, self.beta or 0.0)
            optimizer_step(self.actor.store, self.policy_opt)
            self.actor_steps += 1
            if self.actor_steps % cfg.target_update_interval == 0:
                for net in self.nets.values():
                    net.update_target(cfg.rho)
                polyak_update(self.actor_target, self.actor.store, cfg.rho)
        return out

    def reset_networks(self) -> None:
        super().reset_networks()
        self.actor_target.load_from(self.actor.store)

    def td_residuals(self, batch, rng) -> dict[str, np.ndarray]:
        a_next = self.target_action(batch.s_next, rng)
        y = self.reward_target(batch, a_next)
        x = sa(batch.s, batch.a)
        out = {"reward": np.concatenate([self.q1(x) - y, self.q2(x) - y])}
        if self.constrained:
            y_c = self.cost_target(batch, a_next)
            out["cost"] = np.concatenate([c(x) - y_c for c in self.cost_critics])
        return out

    def q_estimates(self, s, a) -> dict[str, np.ndarray]:
        x = sa(s, a)
        out = {"reward": np.minimum(self.q1(x), self.q2(x))}
        if self.constrained:
            out["cost"] = np.min([c(x) for c in self.cost_critics], axis=0)
        return out

    def stores(self) -> dict:
        out = super().stores()
        out["policy_targ"] = self.actor_target
        return out

    def meta(self) -> dict:
        meta = super().meta()
        meta["critic_steps"] = self.critic_steps
        meta["actor_steps"] = self.actor_steps
        return meta

    def load_meta(self, meta: dict) -> None:
        super().load_meta(meta)
        self.critic_steps = int(meta["critic_steps"])
        self.actor_steps = int(meta["actor_steps"])


class ConstrainedTD3Agent(TD3Agent):
    name = "td3_constrained"
    constrained = True
