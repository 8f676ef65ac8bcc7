"""Experiment configuration and its flat ``key = value`` text format.

Grammar, one entry per line::

    # comment
    key = value

Blank lines and ``#`` comments are ignored. Values are parsed according to
the field type: integers, reals, booleans (``true``/``false``), strings,
comma-separated integer lists (``64, 64``) and ``none`` for optional fields.
Keys starting with ``env.`` are passed to the environment constructor
(e.g. ``env.n_hazards = 8``). Command-line ``--override key=value`` entries
use the same syntax and are applied after the file.
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field, fields

from .algos.common import ALGORITHMS, CONSTRAINED, AgentConfig
from .envs import PENALTY_PRESETS, NavConfig, PendulumConfig
from .errors import ConfigError

ENVS = ("nav_mixed", "pendulum")


@dataclass
class ExperimentConfig:
    algorithm: str = "opac2"
    env: str = "nav_mixed"
    penalty_weight: float = 0.0
    penalty_preset: str | None = None  # small | large; overrides penalty_weight
    total_env_steps: int = 1_000_000
    eval_interval: int = 10_000
    eval_episodes: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    buffer_capacity: int = 1_000_000
    early_step: int = 200_000
    checkpoint_interval: int = 0  # 0: only at the end
    agent: AgentConfig = field(default_factory=AgentConfig)
    env_overrides: dict = field(default_factory=dict)

    @property
    def constrained(self) -> bool:
        return self.algorithm in CONSTRAINED

    @property
    def effective_penalty(self) -> float:
        if self.constrained:
            return 0.0
        if self.penalty_preset is not None:
            return PENALTY_PRESETS[self.env][self.penalty_preset]
        return self.penalty_weight

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}")
        if self.penalty_preset is not None and self.penalty_preset not in ("small", "large"):
            raise ConfigError("penalty_preset must be small or large")
        if self.penalty_weight < 0:
            raise ConfigError("penalty_weight must be non-negative")
        if self.constrained and (self.agent.cost_limit is None or not self.agent.cost_limit > 0):
            raise ConfigError("constrained algorithms need cost_limit > 0")
        if self.total_env_steps < 0 or self.eval_interval <= 0 or self.eval_episodes <= 0:
            raise ConfigError("total_env_steps >= 0, eval_interval > 0 and eval_episodes > 0 required")
        if self.buffer_capacity <= 0:
            raise ConfigError("buffer_capacity must be positive")
        env_cls = NavConfig if self.env == "nav_mixed" else PendulumConfig
        valid = {f.name for f in fields(env_cls)}
        bad = set(self.env_overrides) - valid
        if bad:
            raise ConfigError(f"unknown env settings for {self.env}: {sorted(bad)}")
        self.agent.validate()


_EXPERIMENT_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name not in ("agent", "env_overrides")}
_AGENT_FIELDS = {f.name: f for f in fields(AgentConfig)}


def _resolve_type(owner, name):
    return typing.get_type_hints(owner)[name]


def _parse_value(raw: str, tp):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType) and type(None) in args:
        if raw.lower() in ("none", "null", ""):
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _parse_value(raw, inner)
    if tp is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if tp is int:
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if tp is float:
        return float(raw)
    if tp is str:
        return raw
    if origin is tuple:
        return tuple(int(p) for p in raw.replace(" ", "").split(",") if p)
    raise ConfigError(f"unsupported field type {tp}")


def _parse_env_value(raw: str, env: str, key: str):
    env_cls = NavConfig if env == "nav_mixed" else PendulumConfig
    hints = typing.get_type_hints(env_cls)
    if key not in hints:
        raise ConfigError(f"unknown env setting {key!r} for {env}")
    return _parse_value(raw, hints[key])


def parse_pairs(pairs: list[tuple[str, str]], base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base if base is not None else ExperimentConfig()
    cfg = dataclasses.replace(cfg, agent=dataclasses.replace(cfg.agent), env_overrides=dict(cfg.env_overrides))
    env_raw = []
    for key, raw in pairs:
        key = key.strip()
        try:
            if key.startswith("env."):
                env_raw.append((key[4:], raw))
            elif key in _EXPERIMENT_FIELDS:
                setattr(cfg, key, _parse_value(raw, _resolve_type(ExperimentConfig, key)))
            elif key in _AGENT_FIELDS:
                setattr(cfg.agent, key, _parse_value(raw, _resolve_type(AgentConfig, key)))
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for key, raw in env_raw:
        cfg.env_overrides[key] = _parse_env_value(raw, cfg.env, key)
    return cfg


def split_line(line: str) -> tuple[str, str] | None:
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    if "=" not in line:
        raise ConfigError(f"expected 'key = value', got {line!r}")
    key, value = line.split("=", 1)
    return key.strip(), value.strip()


def parse_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    pairs = [p for p in (split_line(line) for line in text.splitlines()) if p is not None]
    return parse_pairs(pairs, base)


def load_config(path=None, overrides: list[str] = ()) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        with open(path) as fh:
            cfg = parse_text(fh.read(), cfg)
    if overrides:
        cfg = parse_pairs([split_line(o) for o in overrides], cfg)
    cfg.validate()
    return cfg


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_text(cfg: ExperimentConfig) -> str:
    """Serialize to the text format; ``parse_text(dump_text(c))`` reproduces ``c``."""
    lines = [f"{k} = {_format_value(getattr(cfg, k))}" for k in _EXPERIMENT_FIELDS]
    lines += [f"{k} = {_format_value(getattr(cfg.agent, k))}" for k in _AGENT_FIELDS]
    lines += [f"env.{k} = {_format_value(v)}" for k, v in sorted(cfg.env_overrides.items())]
    return "\n".join(lines) + "\n"
