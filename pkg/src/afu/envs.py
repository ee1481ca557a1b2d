"""Desk-scale environments with a small gym-like ``reset``/``step`` interface."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    max_episode_steps: int

    def __post_init__(self):
        if self.action_dim < 1 or self.max_episode_steps < 1:
            raise ValueError(f"invalid env spec {self}")


def toy_oracle(s, a):
    """Fixed Q-function ``sin(4s) + 0.7 cos(4a)`` on [-1, 1]^2."""
    return np.sin(4.0 * np.asarray(s)) + 0.7 * np.cos(4.0 * np.asarray(a))


def sfm_reward(a):
    """Reward of the one-step trap environment.

    A quadratic bump peaking at 5 for ``a = 0.1`` on ``a >= -0.6`` and a flat 0
    to the left of it, so the function jumps from -44 to 0 at the edge.
    """
    a = np.asarray(a, dtype=np.float64)
    r = np.where(a >= -0.6, 5.0 - 100.0 * (a - 0.1) ** 2, 0.0)
    return r if r.ndim else float(r)


class SfmEnv:
    """Single state, one-dimensional action, every transition terminal."""

    spec = EnvSpec("sfm", state_dim=1, action_dim=1, max_episode_steps=1)

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.zeros(1)

    def step(self, action):
        a = float(np.asarray(action).reshape(-1)[0])
        if not -1.0 <= a <= 1.0:
            warnings.warn(f"sfm action {a} outside [-1, 1]; clamping", RuntimeWarning)
            a = min(max(a, -1.0), 1.0)
        return np.zeros(1), sfm_reward(a), True, False


def sfm_step(a: float):
    """``(reward, terminal)`` for one SFM action."""
    _, r, term, _ = SfmEnv().step(a)
    return r, term


POINT_REACH_STEP = 0.1
POINT_REACH_HORIZON = 20


def point_reach_step(x: float, a: float):
    """``(x', reward, terminal)``; horizon handling is left to :class:`PointReachEnv`."""
    x_next = min(max(x + POINT_REACH_STEP * a, -1.0), 1.0)
    return x_next, -x_next * x_next, False


class PointReachEnv:
    """Drive a point on [-1, 1] to the origin; cost is the squared distance.

    Episodes end by truncation after 20 steps, reported through the
    ``truncated`` flag so learners keep bootstrapping through it.
    """

    spec = EnvSpec("point_reach", state_dim=1, action_dim=1, max_episode_steps=POINT_REACH_HORIZON)

    def __init__(self):
        self.x = 0.0
        self.t = 0

    def reset(self, rng: np.random.Generator, x0: float | None = None) -> np.ndarray:
        self.x = float(rng.uniform(-1.0, 1.0)) if x0 is None else float(x0)
        self.t = 0
        return np.array([self.x])

    def step(self, action):
        a = float(np.clip(np.asarray(action).reshape(-1)[0], -1.0, 1.0))
        self.x, r, term = point_reach_step(self.x, a)
        self.t += 1
        return np.array([self.x]), r, term, self.t >= POINT_REACH_HORIZON


ENVS = {"sfm": SfmEnv, "point_reach": PointReachEnv}


def make_env(name: str):
    try:
        return ENVS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVS)}") from None


def point_reach_dp(n_states: int = 201, n_actions: int = 21, horizon: int = POINT_REACH_HORIZON,
                   gamma: float = 1.0):
    """Backward induction on a state/action grid.

    With the default grid every successor lands exactly on a grid node, so the
    table is the exact optimum at the nodes. Returns ``(grid, values)`` where
    ``values[k]`` is the optimal return with ``k`` steps to go.
    """
    grid = np.linspace(-1.0, 1.0, n_states)
    actions = np.linspace(-1.0, 1.0, n_actions)
    nxt = np.clip(grid[:, None] + POINT_REACH_STEP * actions[None, :], -1.0, 1.0)
    reward = -nxt ** 2
    values = np.zeros((horizon + 1, n_states))
    for k in range(1, horizon + 1):
        cont = np.interp(nxt, grid, values[k - 1])
        values[k] = np.max(reward + gamma * cont, axis=1)
    return grid, values


def point_reach_optimal_return(x0, gamma: float = 1.0, horizon: int = POINT_REACH_HORIZON):
    """Optimal ``horizon``-step return from ``x0`` (interpolated off-grid)."""
    grid, values = point_reach_dp(horizon=horizon, gamma=gamma)
    return np.interp(x0, grid, values[horizon])
