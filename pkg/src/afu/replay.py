"""Fixed-capacity FIFO replay buffer with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Transition(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    terminal: bool


@dataclass
class MiniBatch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


class ReplayBuffer:
    def __init__(self, state_dim: int, action_dim: int, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, state_dim))
        self.a = np.zeros((self.capacity, action_dim))
        self.r = np.zeros(self.capacity)
        self.s_next = np.zeros((self.capacity, state_dim))
        self.terminal = np.zeros(self.capacity, dtype=bool)
        self.insertions = 0

    def __len__(self) -> int:
        return min(self.insertions, self.capacity)

    def insert(self, t: Transition) -> None:
        s = np.asarray(t.s, dtype=np.float64).reshape(-1)
        a = np.asarray(t.a, dtype=np.float64).reshape(-1)
        s_next = np.asarray(t.s_next, dtype=np.float64).reshape(-1)
        if s.size != self.state_dim or s_next.size != self.state_dim or a.size != self.action_dim:
            raise ValueError(
                f"transition shapes s={s.shape} a={a.shape} s'={s_next.shape} do not match "
                f"buffer dims ({self.state_dim}, {self.action_dim})")
        if np.any(np.abs(a) > 1.0):
            raise ValueError(f"action {a} outside [-1, 1]")
        i = self.insertions % self.capacity
        self.s[i] = s
        self.a[i] = a
        self.r[i] = t.r
        self.s_next[i] = s_next
        self.terminal[i] = bool(t.terminal)
        self.insertions += 1

    def sample(self, n: int, rng: np.random.Generator) -> MiniBatch:
        """Draw ``n`` transitions uniformly with replacement."""
        if len(self) == 0:
            raise ValueError("cannot sample from an empty buffer")
        if n < 1:
            raise ValueError("batch size must be positive")
        idx = rng.integers(0, len(self), size=n)
        return MiniBatch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.terminal[idx])

    def oldest(self) -> Transition:
        i = 0 if self.insertions <= self.capacity else self.insertions % self.capacity
        return Transition(self.s[i].copy(), self.a[i].copy(), float(self.r[i]),
                          self.s_next[i].copy(), bool(self.terminal[i]))
