"""OPAC2 and its constrained variant C-OPAC2.

Both learn a single Q critic and a state-value baseline V per signal (reward,
and for C-OPAC2 also cost). The policy follows the off-policy actor-critic
gradient ``E[A_hat * grad log pi(a|s)]`` with batch-normalized advantages,
plus an entropy bonus computed on a reparameterized sample.
"""
from __future__ import annotations

import numpy as np

from ..policy import GaussianPolicy, log_prob_grads, rsample_grads
from .base import Agent
from .common import (
    copac2_advantage,
    normalize_advantages,
    q_target_single,
    regress,
    sa,
)


def opac2_policy_loss(policy: GaussianPolicy, s, u_pi, xi_rp, adv_hat, alpha: float,
                      entropy_bonus: bool = True) -> tuple[float, np.ndarray]:
    """``mean(alpha * log pi(a_rp|s) - A_hat * log pi(a_pi|s))``; fills policy grads.

    ``u_pi`` is the pre-squash policy sample held constant, ``xi_rp`` the noise
    of the reparameterized sample. Returns the loss and ``log pi(a_pi|s)``.
    """
    n = s.shape[0]
    head, ctx = policy.head(s)
    logp_pi, dm, dls = log_prob_grads(head, u_pi)
    w = -adv_hat[:, None] / n
    g_mean = w * dm
    g_log_std = w * dls
    loss = -float(np.mean(adv_hat * logp_pi))
    if entropy_bonus and alpha != 0.0:
        _, _, logp_rp, dlm, dlls, _, _ = rsample_grads(head, xi_rp)
        loss += alpha * float(np.mean(logp_rp))
        g_mean = g_mean + (alpha / n) * dlm
        g_log_std = g_log_std + (alpha / n) * dlls
    policy.store.zero_grad()
    policy.backward(ctx, g_mean, g_log_std)
    return loss, logp_pi


class OPAC2Agent(Agent):
    name = "opac2"
    default_activation = "tanh"

    def __init__(self, obs_dim, act_dim, cfg, seed=0):
        super().__init__(obs_dim, act_dim, cfg, seed)
        sd = False if cfg.state_dependent_std is None else cfg.state_dependent_std
        self.policy = self._gaussian_policy(sd)
        self.q = self._net("q", obs_dim + act_dim)
        self.v = self._net("v", obs_dim, with_target=True)
        if self.constrained:
            self.q_c = self._net("q_c", obs_dim + act_dim)
            self.v_c = self._net("v_c", obs_dim, with_target=True)

    def update(self, buffer) -> dict:
        cfg = self.cfg
        rng = self.update_rng
        b_q, b_v, b_pi = self.sample_batches(buffer, 3)
        self.step_beta()
        alpha = self.temperature.alpha
        gamma = cfg.gamma

        y = q_target_single(b_q.r, b_q.d, self.v(b_q.s_next, target=True), gamma)
        q_loss = regress(self.q, sa(b_q.s, b_q.a), y, "q_loss")
        if self.constrained:
            y_c = q_target_single(b_q.c, b_q.d, self.v_c(b_q.s_next, target=True), gamma)
            q_loss += regress(self.q_c, sa(b_q.s, b_q.a), y_c, "q_c_loss")

        # policy action for the V regression (held constant)
        head, _ = self.policy.head(b_v.s)
        u_v = head.mean + head.std * rng.standard_normal(head.mean.shape)
        a_v = np.tanh(u_v)
        v_target = self.q(sa(b_v.s, a_v))
        if cfg.entropy_mode == "max_entropy":
            v_target = v_target - alpha * log_prob_grads(head, u_v)[0]
        v_loss = regress(self.v, b_v.s, v_target, "v_loss")
        if self.constrained:
            v_loss += regress(self.v_c, b_v.s, self.q_c(sa(b_v.s, a_v)), "v_c_loss")

        if b_pi is b_v:
            u_pi, a_pi = u_v, a_v
        else:
            head, _ = self.policy.head(b_pi.s)
            u_pi = head.mean + head.std * rng.standard_normal(head.mean.shape)
            a_pi = np.tanh(u_pi)
        x_pi = sa(b_pi.s, a_pi)
        adv = self.q(x_pi) - self.v(b_pi.s)
        if self.constrained:
            adv = copac2_advantage(adv, 0.0, self.q_c(x_pi), self.v_c(b_pi.s), self.beta)
        adv_hat = normalize_advantages(adv, cfg.adv_eps)

        xi_rp = rng.standard_normal(u_pi.shape)
        pi_loss, logp_pi = opac2_policy_loss(self.policy, b_pi.s, u_pi, xi_rp, adv_hat, alpha,
                                             entropy_bonus=cfg.entropy_mode == "bonus")
        self.step_policy()
        if cfg.entropy_mode != "none":
            self.step_temperature(logp_pi)

        self.grad_steps += 1
        if self.grad_steps % cfg.target_update_interval == 0:
            self.v.update_target(cfg.rho)
            if self.constrained:
                self.v_c.update_target(cfg.rho)
        return {"q_loss": q_loss, "v_loss": v_loss, "pi_loss": pi_loss}

    def td_residuals(self, batch, rng=None) -> dict[str, np.ndarray]:
        x = sa(batch.s, batch.a)
        out = {"reward": self.q(x) - q_target_single(batch.r, batch.d, self.v(batch.s_next, target=True),
                                                   self.cfg.gamma)}
        if self.constrained:
            out["cost"] = self.q_c(x) - q_target_single(batch.c, batch.d, self.v_c(batch.s_next, target=True),
                                                      self.cfg.gamma)
        return out

    def q_estimates(self, s, a) -> dict[str, np.ndarray]:
        x = sa(s, a)
        out = {"reward": self.q(x)}
        if self.constrained:
            out["cost"] = self.q_c(x)
        return out


class COPAC2Agent(OPAC2Agent):
    name = "copac2"
    constrained = True
