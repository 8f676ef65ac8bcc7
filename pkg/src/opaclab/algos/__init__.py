"""Agents: OPAC2, C-OPAC2, SAC and TD3 (plus Lagrangian SAC/TD3)."""
from ..errors import ConfigError
from .base import Agent
from .common import (
    ALGORITHMS,
    CONSTRAINED,
    AgentConfig,
    EpochCostLog,
    RngFactory,
    advantage,
    beta_objective,
    copac2_advantage,
    normalize_advantages,
    q_target_single,
    update_beta,
    v_loss,
)
from .loop import Trainer, train_step
from .opac2 import COPAC2Agent, OPAC2Agent, opac2_policy_loss
from .sac import ConstrainedSACAgent, SACAgent, sac_policy_loss
from .td3 import ConstrainedTD3Agent, TD3Agent, td3_actor_loss

AGENTS = {
    "opac2": OPAC2Agent,
    "copac2": COPAC2Agent,
    "sac": SACAgent,
    "sac_constrained": ConstrainedSACAgent,
    "td3": TD3Agent,
    "td3_constrained": ConstrainedTD3Agent,
}


def make_agent(algorithm: str, obs_dim: int, act_dim: int, cfg: AgentConfig, seed: int = 0) -> Agent:
    try:
        cls = AGENTS[algorithm]
    except KeyError:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {sorted(AGENTS)}") from None
    return cls(obs_dim, act_dim, cfg, seed)


def maybe_reset(agent: Agent, env_step: int) -> Agent:
    agent.maybe_reset(env_step)
    return agent


__all__ = [
    "AGENTS", "ALGORITHMS", "CONSTRAINED", "Agent", "AgentConfig", "COPAC2Agent", "ConstrainedSACAgent",
    "ConstrainedTD3Agent", "EpochCostLog", "OPAC2Agent", "RngFactory", "SACAgent", "TD3Agent", "Trainer",
    "advantage", "beta_objective", "copac2_advantage", "make_agent", "maybe_reset", "normalize_advantages",
    "opac2_policy_loss", "q_target_single", "sac_policy_loss", "td3_actor_loss", "train_step", "update_beta",
    "v_loss",
]
