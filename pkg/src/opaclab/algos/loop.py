"""The environment-interaction loop: one env step, then G gradient steps."""
from __future__ import annotations

import numpy as np

from ..replay import ReplayBuffer


class Trainer:
    """Owns the live episode of one run and feeds the replay buffer.

    Transitions are tagged with the global environment step at which they
    were collected.
    """

    def __init__(self, agent, env, buffer: ReplayBuffer, act_rng: np.random.Generator):
        self.agent = agent
        self.env = env
        self.buffer = buffer
        self.act_rng = act_rng
        self.env_step = 0
        self.obs = env.reset()
        self.episode_start = 0
        self.episode_cost = 0.0
        self.episode_reward = 0.0
        self.completed: list[dict] = []

    def step(self) -> dict:
        agent = self.agent
        action = agent.act_for_training(self.obs, self.env_step, self.act_rng)
        res = self.env.step(action)
        self.buffer.add(self.obs, action, res.reward, res.cost, res.obs, 1.0 if res.terminal else 0.0,
                        self.env_step)
        self.env_step += 1
        self.episode_cost += res.cost
        self.episode_reward += res.reward
        self.obs = res.obs
        if res.done:
            agent.record_episode(self.episode_start, self.env_step, self.episode_cost)
            self.completed.append({"end": self.env_step, "reward": self.episode_reward, "cost": self.episode_cost})
            self.obs = self.env.reset()
            self.episode_start = self.env_step
            self.episode_cost = 0.0
            self.episode_reward = 0.0
        agent.advance(self.env_step)
        metrics: dict = {}
        if self.env_step >= agent.cfg.warmup:
            for _ in range(agent.cfg.gradient_steps):
                metrics = agent.update(self.buffer)
        return metrics


def train_step(trainer: Trainer) -> dict:
    return trainer.step()
