"""Desk-scale continuous-control environments.

``NavEnv`` is a point mass that must reach a stream of random goals in an
arena scattered with hazards. Goals pay a sparse bonus plus dense progress
shaping; standing in a hazard raises a 0/1 cost indicator. In unconstrained
mode the cost is folded into the reward with a fixed penalty weight, giving a
mixed-sign reward; in constrained mode reward and cost are returned separately.

``PendulumEnv`` is a plain-reward torque-limited swing-up with no cost.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigError, InputError

# Penalty presets per environment; "large" is the reference weight and
# "small" halves it.
PENALTY_PRESETS = {"nav_mixed": {"small": 0.5, "large": 1.0}, "pendulum": {"small": 0.0, "large": 0.0}}


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    cost: float
    done: bool
    incentive: float
    terminal: bool = False  # true terminal state; step-limit truncation is not terminal


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    act_dim: int
    episode_len: int


@dataclass(frozen=True)
class NavConfig:
    half_width: float = 2.0
    n_hazards: int = 6
    hazard_radius: float = 0.25
    goal_radius: float = 0.2
    episode_len: int = 200
    dt: float = 0.1
    k_nearest: int = 3
    damping: float = 0.95
    accel: float = 0.1
    vmax: float = 1.0
    w_dense: float = 1.0
    goal_reward: float = 1.0
    penalty_weight: float = 0.0
    constrained: bool = False
    min_start_goal_dist: float = 1.0
    max_layout_tries: int = 1000

    def validate(self) -> None:
        if self.half_width <= 0 or self.episode_len <= 0 or self.dt <= 0:
            raise ConfigError("half_width, episode_len and dt must be positive")
        if self.n_hazards < 0 or self.k_nearest < 0:
            raise ConfigError("n_hazards and k_nearest must be non-negative")
        if self.n_hazards > 64:
            raise ConfigError("at most 64 hazards are supported")
        if self.penalty_weight < 0:
            raise ConfigError("penalty_weight must be non-negative")


@dataclass
class NavLayout:
    half_width: float
    goal: np.ndarray
    goal_radius: float
    hazards: np.ndarray  # (n, 3): x, y, radius

    def inside_hazard(self, p) -> bool:
        if not len(self.hazards):
            return False
        d2 = (self.hazards[:, 0] - p[0]) ** 2 + (self.hazards[:, 1] - p[1]) ** 2
        return bool(np.any(d2 <= self.hazards[:, 2] ** 2))


@dataclass
class NavState:
    position: np.ndarray
    velocity: np.ndarray
    layout: NavLayout
    step_count: int = 0
    prev_goal_dist: float = 0.0


def _sample_free_point(rng, cfg: NavConfig, hazards: np.ndarray, margin: float, avoid=None, min_dist=0.0):
    lim = cfg.half_width - margin
    for _ in range(cfg.max_layout_tries):
        p = rng.uniform(-lim, lim, size=2)
        if len(hazards):
            d2 = (hazards[:, 0] - p[0]) ** 2 + (hazards[:, 1] - p[1]) ** 2
            if np.any(d2 <= (hazards[:, 2] + margin) ** 2):
                continue
        if avoid is not None and np.hypot(*(p - avoid)) < min_dist:
            continue
        return p
    raise ConfigError("could not place a point outside all hazards; arena too crowded")


def nav_reset(cfg: NavConfig, rng: np.random.Generator) -> tuple[NavState, np.ndarray]:
    """Draw a fresh random layout and start state."""
    cfg.validate()
    r = cfg.hazard_radius
    lim = cfg.half_width - r
    if lim <= 0:
        raise ConfigError("hazards do not fit in the arena")
    hazards = np.empty((cfg.n_hazards, 3))
    hazards[:, :2] = rng.uniform(-lim, lim, size=(cfg.n_hazards, 2))
    hazards[:, 2] = r
    goal = _sample_free_point(rng, cfg, hazards, cfg.goal_radius)
    start = _sample_free_point(rng, cfg, hazards, 0.0, avoid=goal, min_dist=cfg.min_start_goal_dist)
    layout = NavLayout(cfg.half_width, goal, cfg.goal_radius, np.ascontiguousarray(hazards))
    state = NavState(start, np.zeros(2), layout, 0, float(np.hypot(*(goal - start))))
    return state, nav_observe(state, cfg.k_nearest)


def nav_observe(state: NavState, k: int = 3) -> np.ndarray:
    """``[velocity, goal - position, k nearest (hazard - position), |goal - position|]``."""
    out = np.empty(5 + 2 * k)
    kernels.nav_observe(state.position, state.velocity, state.layout.goal, state.layout.hazards, k, out)
    return out


def nav_step(state: NavState, action, cfg: NavConfig, rng: np.random.Generator) -> tuple[NavState, StepResult]:
    """Advance one step in place. ``rng`` is only used when a goal is reached."""
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (2,) or not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0):
        raise InputError(f"action must be a finite 2-vector in [-1, 1]^2, got {action!r}")
    lay = state.layout
    cost, dist = kernels.nav_physics(state.position, state.velocity, np.ascontiguousarray(a), lay.hazards, lay.goal,
                                     cfg.damping, cfg.accel, cfg.vmax, cfg.dt, cfg.half_width)
    incentive = cfg.w_dense * (state.prev_goal_dist - dist)
    if dist < lay.goal_radius:
        incentive += cfg.goal_reward
        lay.goal = _sample_free_point(rng, cfg, lay.hazards, cfg.goal_radius, avoid=state.position,
                                      min_dist=cfg.min_start_goal_dist)
        dist = float(np.hypot(*(lay.goal - state.position)))
    state.prev_goal_dist = dist
    state.step_count += 1
    reward = incentive if cfg.constrained else incentive - cfg.penalty_weight * cost
    done = state.step_count >= cfg.episode_len
    return state, StepResult(nav_observe(state, cfg.k_nearest), reward, cost, done, incentive)


class NavEnv:
    name = "nav_mixed"

    def __init__(self, cfg: NavConfig | None = None, rng: np.random.Generator | None = None):
        self.cfg = cfg or NavConfig()
        self.cfg.validate()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state: NavState | None = None
        self.spec = EnvSpec(5 + 2 * self.cfg.k_nearest, 2, self.cfg.episode_len)
        self.record = False
        self.trajectory: list[dict] = []

    def reset(self) -> np.ndarray:
        self.state, obs = nav_reset(self.cfg, self.rng)
        return obs

    def step(self, action) -> StepResult:
        if self.state is None:
            raise InputError("call reset() before step()")
        _, res = nav_step(self.state, action, self.cfg, self.rng)
        if self.record:
            p = self.state.position
            self.trajectory.append({
                "step": self.state.step_count, "x": p[0], "y": p[1], "cost": res.cost,
                "incentive": res.incentive, "penalty": -self.cfg.penalty_weight * res.cost
                if not self.cfg.constrained else 0.0, "reward": res.reward,
            })
        return res


@dataclass(frozen=True)
class PendulumConfig:
    gravity: float = 10.0
    length: float = 1.0
    mass: float = 1.0
    max_torque: float = 2.0
    max_speed: float = 8.0
    dt: float = 0.05
    episode_len: int = 200
    start_noise: float = 0.1


@dataclass
class PendulumState:
    theta: float  # 0 is upright
    theta_dot: float
    step_count: int = 0


def angle_from_upright(theta: float) -> float:
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def pendulum_observe(state: PendulumState) -> np.ndarray:
    return np.array([math.cos(state.theta), math.sin(state.theta), state.theta_dot])


def pendulum_reset(cfg: PendulumConfig, rng: np.random.Generator) -> tuple[PendulumState, np.ndarray]:
    """Start hanging down with a small random perturbation."""
    th = math.pi + rng.uniform(-cfg.start_noise, cfg.start_noise)
    thd = rng.uniform(-cfg.start_noise, cfg.start_noise)
    state = PendulumState(th, thd, 0)
    return state, pendulum_observe(state)


def pendulum_step(state: PendulumState, action, cfg: PendulumConfig) -> tuple[PendulumState, StepResult]:
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (1,) or not np.isfinite(a[0]) or abs(a[0]) > 1.0:
        raise InputError(f"action must be a finite 1-vector in [-1, 1], got {action!r}")
    torque = cfg.max_torque * float(a[0])
    th, thd = state.theta, state.theta_dot
    ang = angle_from_upright(th)
    reward = -(ang * ang + 0.1 * thd * thd + 0.001 * torque * torque)
    acc = (cfg.gravity / cfg.length) * math.sin(th) + torque / (cfg.mass * cfg.length**2)
    thd = min(max(thd + cfg.dt * acc, -cfg.max_speed), cfg.max_speed)
    state.theta = th + cfg.dt * thd
    state.theta_dot = thd
    state.step_count += 1
    done = state.step_count >= cfg.episode_len
    return state, StepResult(pendulum_observe(state), reward, 0.0, done, reward)


class PendulumEnv:
    name = "pendulum"

    def __init__(self, cfg: PendulumConfig | None = None, rng: np.random.Generator | None = None):
        self.cfg = cfg or PendulumConfig()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state: PendulumState | None = None
        self.spec = EnvSpec(3, 1, self.cfg.episode_len)

    def reset(self) -> np.ndarray:
        self.state, obs = pendulum_reset(self.cfg, self.rng)
        return obs

    def step(self, action) -> StepResult:
        if self.state is None:
            raise InputError("call reset() before step()")
        return pendulum_step(self.state, action, self.cfg)[1]


def make_env(name: str, rng: np.random.Generator, **overrides):
    if name == "nav_mixed":
        return NavEnv(replace(NavConfig(), **overrides), rng)
    if name == "pendulum":
        return PendulumEnv(replace(PendulumConfig(), **overrides), rng)
    raise ConfigError(f"unknown environment {name!r}")


def dump_layout_csv(layout: NavLayout, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "x", "y", "radius"])
        w.writerow(["goal", repr(layout.goal[0]), repr(layout.goal[1]), repr(layout.goal_radius)])
        for x, y, r in layout.hazards:
            w.writerow(["hazard", repr(x), repr(y), repr(r)])


def dump_trajectory_csv(rows: list[dict], path) -> None:
    fields = ["step", "x", "y", "cost", "incentive", "penalty", "reward"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in fields})
