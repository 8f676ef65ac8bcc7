"""Soft actor-critic with clipped double-Q, optionally with Lagrangian cost critics."""
from __future__ import annotations

import numpy as np

from ..diffcore import backward
from ..policy import GaussianPolicy, rsample_grads
from .base import Agent
from .common import Net, regress, sa


def _min_with_arg(values: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    stacked = np.stack(values)
    idx = np.argmin(stacked, axis=0)
    return np.take_along_axis(stacked, idx[None], 0)[0], idx


def sac_policy_loss(policy: GaussianPolicy, critics: list[Net], s, xi, alpha: float,
                    cost_critics: list[Net] = (), beta: float = 0.0) -> tuple[float, np.ndarray]:
    """``mean(alpha log pi(a|s) - [min_i Q_i(s,a) - beta min_j Qc_j(s,a)])`` with ``a`` reparameterized.

    Fills the policy gradients and returns ``(loss, log pi(a|s))``.
    """
    n = s.shape[0]
    head, ctx = policy.head(s)
    u, a, logp, dlm, dlls, da_dm, da_dls = rsample_grads(head, xi)
    x = sa(s, a)
    obs_dim = s.shape[1]
    evals = [c.cached(x) for c in critics]
    q_min, which = _min_with_arg([q for q, _ in evals])
    g_a = np.zeros_like(a)
    for i, (critic, (_, cache)) in enumerate(zip(critics, evals)):
        w = -(which == i).astype(np.float64) / n
        g_a += backward(critic.store, critic.spec, cache, w[:, None], accumulate=False)[:, obs_dim:]
    objective = q_min
    if len(cost_critics):
        c_evals = [c.cached(x) for c in cost_critics]
        qc_min, which_c = _min_with_arg([q for q, _ in c_evals])
        objective = q_min - beta * qc_min
        if beta != 0.0:
            for j, (critic, (_, cache)) in enumerate(zip(cost_critics, c_evals)):
                w = beta * (which_c == j).astype(np.float64) / n
                g_a += backward(critic.store, critic.spec, cache, w[:, None], accumulate=False)[:, obs_dim:]
    loss = float(np.mean(alpha * logp - objective))
    g_mean = (alpha / n) * dlm + g_a * da_dm
    g_log_std = (alpha / n) * dlls + g_a * da_dls
    policy.store.zero_grad()
    policy.backward(ctx, g_mean, g_log_std)
    return loss, logp


class SACAgent(Agent):
    name = "sac"

    def __init__(self, obs_dim, act_dim, cfg, seed=0):
        super().__init__(obs_dim, act_dim, cfg, seed)
        sd = True if cfg.state_dependent_std is None else cfg.state_dependent_std
        self.policy = self._gaussian_policy(sd)
        self.q1 = self._net("q1", obs_dim + act_dim, with_target=True)
        self.q2 = self._net("q2", obs_dim + act_dim, with_target=True)
        self.cost_critics: list[Net] = []
        if self.constrained:
            for j in range(cfg.n_cost_critics):
                self.cost_critics.append(self._net(f"q_c{j + 1}", obs_dim + act_dim, with_target=True))

    @property
    def critics(self) -> list[Net]:
        return [self.q1, self.q2]

    def _next_action(self, s_next, rng):
        head, _ = self.policy.head(s_next)
        _, a, logp, *_ = rsample_grads(head, rng.standard_normal(head.mean.shape))
        return a, logp

    def reward_target(self, batch, a_next, logp_next):
        x = sa(batch.s_next, a_next)
        q_next = np.minimum(self.q1(x, target=True), self.q2(x, target=True))
        return batch.r + self.cfg.gamma * (1.0 - batch.d) * (q_next - self.temperature.alpha * logp_next)

    def cost_target(self, batch, a_next):
        x = sa(batch.s_next, a_next)
        qc_next = np.min([c(x, target=True) for c in self.cost_critics], axis=0)
        return batch.c + self.cfg.gamma * (1.0 - batch.d) * qc_next

    def update(self, buffer) -> dict:
        cfg = self.cfg
        rng = self.update_rng
        b_q, b_pi = self.sample_batches(buffer, 2)
        self.step_beta()
        a_next, logp_next = self._next_action(b_q.s_next, rng)
        y = self.reward_target(b_q, a_next, logp_next)
        x = sa(b_q.s, b_q.a)
        q_loss = regress(self.q1, x, y, "q1_loss") + regress(self.q2, x, y, "q2_loss")
        if self.constrained:
            y_c = self.cost_target(b_q, a_next)
            for c in self.cost_critics:
                q_loss += regress(c, x, y_c, f"{c.name}_loss")

        xi = rng.standard_normal((b_pi.s.shape[0], self.act_dim))
        pi_loss, logp = sac_policy_loss(self.policy, self.critics, b_pi.s, xi, self.temperature.alpha,
                                        self.cost_critics, self.beta or 0.0)
        self.step_policy()
        self.step_temperature(logp)

        self.grad_steps += 1
        if self.grad_steps % cfg.target_update_interval == 0:
            for net in self.nets.values():
                net.update_target(cfg.rho)
        return {"q_loss": q_loss, "pi_loss": pi_loss}

    def td_residuals(self, batch, rng) -> dict[str, np.ndarray]:
        """Residuals of both critics against the entropy-augmented target, pooled."""
        a_next, logp_next = self._next_action(batch.s_next, rng)
        y = self.reward_target(batch, a_next, logp_next)
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


class ConstrainedSACAgent(SACAgent):
    name = "sac_constrained"
    constrained = True
