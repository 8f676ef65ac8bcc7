"""Replay storage: a fixed-capacity ring buffer and held-out validation episodes."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import BufferStateError, InputError


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    c: float
    s_next: np.ndarray
    d: float
    tag: int = -1  # provenance id, used to check train/validation disjointness


@dataclass
class Batch:
    """Struct-of-arrays view of sampled transitions."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    c: np.ndarray
    s_next: np.ndarray
    d: np.ndarray
    tag: np.ndarray

    def __len__(self) -> int:
        return self.r.shape[0]

    def __getitem__(self, i: int) -> Transition:
        return Transition(self.s[i], self.a[i], float(self.r[i]), float(self.c[i]),
                          self.s_next[i], float(self.d[i]), int(self.tag[i]))


class ReplayBuffer:
    def __init__(self, obs_dim: int, act_dim: int, capacity: int = 1_000_000):
        if capacity <= 0:
            raise InputError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros((capacity, act_dim))
        self.r = np.zeros(capacity)
        self.c = np.zeros(capacity)
        self.s_next = np.zeros((capacity, obs_dim))
        self.d = np.zeros(capacity)
        self.tag = np.full(capacity, -1, dtype=np.int64)
        self.write_head = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> "ReplayBuffer":
        self.add(t.s, t.a, t.r, t.c, t.s_next, t.d, t.tag)
        return self

    def add(self, s, a, r, c, s_next, d, tag: int = -1) -> None:
        i = self.write_head
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.c[i] = c
        self.s_next[i] = s_next
        self.d[i] = d
        self.tag[i] = tag
        self.write_head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _live_indices(self) -> np.ndarray:
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self.write_head) % self.capacity

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise BufferStateError("cannot sample from an empty replay buffer")
        if n <= 0:
            raise InputError("batch size must be positive")
        return rng.integers(0, self.size, size=n)

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch(self.s[idx], self.a[idx], self.r[idx], self.c[idx],
                     self.s_next[idx], self.d[idx], self.tag[idx])

    def sample_batch(self, n: int, rng: np.random.Generator) -> Batch:
        """``n`` uniform draws with replacement over the live entries."""
        return self.gather(self.sample_indices(n, rng))

    def __iter__(self) -> Iterator[Transition]:
        """Live entries, oldest first."""
        batch = self.gather(self._live_indices())
        for i in range(len(batch)):
            yield batch[i]

    def state_arrays(self) -> dict[str, np.ndarray]:
        idx = self._live_indices()
        return {"s": self.s[idx], "a": self.a[idx], "r": self.r[idx], "c": self.c[idx],
                "s_next": self.s_next[idx], "d": self.d[idx], "tag": self.tag[idx]}

    def dump_csv(self, path) -> None:
        """Write live entries oldest-first; vector fields are flattened to ``s0, s1, ...``."""
        arrays = self.state_arrays()
        header = ([f"s{i}" for i in range(self.obs_dim)] + [f"a{i}" for i in range(self.act_dim)]
                  + ["r", "c"] + [f"s_next{i}" for i in range(self.obs_dim)] + ["d", "tag"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for j in range(arrays["r"].shape[0]):
                w.writerow([*map(repr, arrays["s"][j]), *map(repr, arrays["a"][j]),
                            repr(arrays["r"][j]), repr(arrays["c"][j]),
                            *map(repr, arrays["s_next"][j]), repr(arrays["d"][j]), int(arrays["tag"][j])])


@dataclass
class EvalEpisode:
    """One complete held-out episode.

    ``incentive`` is the reward without the cost penalty (equal to ``r`` for
    environments that have no penalty term).
    """

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    c: np.ndarray
    incentive: np.ndarray
    s_next: np.ndarray
    d: np.ndarray
    tags: np.ndarray

    def __len__(self) -> int:
        return self.r.shape[0]

    @property
    def total_reward(self) -> float:
        return float(self.r.sum())

    @property
    def total_cost(self) -> float:
        return float(self.c.sum())

    @property
    def total_incentive(self) -> float:
        return float(self.incentive.sum())


@dataclass
class ValidationSet:
    episodes: list[EvalEpisode] = field(default_factory=list)

    def __len__(self) -> int:
        return sum(len(e) for e in self.episodes)

    def batch(self) -> Batch:
        eps = self.episodes
        if not eps:
            raise BufferStateError("empty validation set")
        return Batch(np.concatenate([e.s for e in eps]), np.concatenate([e.a for e in eps]),
                     np.concatenate([e.r for e in eps]), np.concatenate([e.c for e in eps]),
                     np.concatenate([e.s_next for e in eps]), np.concatenate([e.d for e in eps]),
                     np.concatenate([e.tags for e in eps]))


VALIDATION_TAG_BASE = 1 << 40


def collect_validation(env, agent, episodes: int, rng: np.random.Generator, tag_base: int = VALIDATION_TAG_BASE) -> ValidationSet:
    """Roll out ``episodes`` full episodes with the agent's stochastic policy.

    The transitions are returned only; nothing is written to a replay buffer.
    Provenance tags start at ``tag_base`` so they never collide with the
    training tags (the global environment step).
    """
    out = ValidationSet()
    tag = tag_base
    for _ in range(episodes):
        obs = env.reset()
        rows = {k: [] for k in ("s", "a", "r", "c", "inc", "s_next", "d", "tag")}
        while True:
            action = agent.act_eval(obs, rng)
            res = env.step(action)
            rows["s"].append(obs)
            rows["a"].append(action)
            rows["r"].append(res.reward)
            rows["c"].append(res.cost)
            rows["inc"].append(res.incentive)
            rows["s_next"].append(res.obs)
            rows["d"].append(1.0 if res.terminal else 0.0)
            rows["tag"].append(tag)
            tag += 1
            obs = res.obs
            if res.done:
                break
        out.episodes.append(EvalEpisode(
            np.array(rows["s"]), np.array(rows["a"]), np.array(rows["r"]), np.array(rows["c"]),
            np.array(rows["inc"]), np.array(rows["s_next"]), np.array(rows["d"]),
            np.array(rows["tag"], dtype=np.int64)))
    return out
