from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    next_obs: np.ndarray
    rew: np.ndarray
    stl: np.ndarray

    def __len__(self):
        return len(self.rew)


class ReplayBuffer:
    """Ring buffer of ``(z_hat, a, z_hat', r, s)`` experiences."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.rew = np.zeros(capacity)
        self.stl = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, obs, act, next_obs, r: float, s: float) -> None:
        i = self._next
        self.obs[i] = obs
        self.act[i] = act
        self.next_obs[i] = next_obs
        self.rew[i] = r
        self.stl[i] = s
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """Uniform sample of ``n`` distinct stored experiences."""
        if n > self._size:
            raise ValueError(f"cannot sample {n} experiences from a buffer holding {self._size}")
        idx = rng.choice(self._size, size=n, replace=False)
        return Batch(self.obs[idx], self.act[idx], self.next_obs[idx], self.rew[idx], self.stl[idx])

    def state_arrays(self) -> dict[str, np.ndarray]:
        n = self._size
        return {
            "buffer.obs": self.obs[:n], "buffer.act": self.act[:n],
            "buffer.next_obs": self.next_obs[:n], "buffer.rew": self.rew[:n],
            "buffer.stl": self.stl[:n],
        }
