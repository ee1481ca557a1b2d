"""Q-network regression on clipped double value targets.

Nothing here touches the policy: Q, the two V/A pairs and their target value
nets are trained from replayed transitions alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maxq import MaxQPair, VaLoss, lambda_va_loss
from .nn import MlpGrads, MlpNet, backward, forward, forward_cached


@dataclass
class CriticEnsemble:
    q: MlpNet
    pairs: tuple[MaxQPair, MaxQPair]
    v_targets: tuple[MlpNet, MlpNet]
    gamma: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        for p, t in zip(self.pairs, self.v_targets):
            if p.value.sizes != t.sizes:
                raise ValueError("target value net shape differs from online value net")

    @classmethod
    def init(cls, state_dim: int, action_dim: int, rng: np.random.Generator,
             hidden=(256, 256), rho: float = 0.3, gamma: float = 0.99) -> "CriticEnsemble":
        q = MlpNet.init((state_dim + action_dim, *hidden, 1), rng, name="q")
        pairs = tuple(MaxQPair.init(state_dim, action_dim, rng, hidden, rho, suffix=str(i + 1))
                      for i in range(2))
        targets = tuple(p.value.copy(name=f"value{i + 1}_target") for i, p in enumerate(pairs))
        return cls(q, pairs, targets, gamma)

    def q_values(self, s, a) -> np.ndarray:
        return forward(self.q, np.concatenate([s, a], axis=1))[:, 0]

    def q_action_grad(self, s, a) -> tuple[np.ndarray, np.ndarray]:
        """``(Q(s, a), dQ/da)`` for a batch; no parameter gradients are formed."""
        sa = np.concatenate([s, a], axis=1)
        out, cache = forward_cached(self.q, sa)
        _, g = backward(self.q, sa, np.ones_like(out), cache=cache, need_params=False)
        return out[:, 0], g[:, s.shape[1]:]

    def min_value(self, s) -> np.ndarray:
        """Minimum of the two online value nets."""
        return np.minimum(forward(self.pairs[0].value, s)[:, 0], forward(self.pairs[1].value, s)[:, 0])


def bootstrap_target(ensemble: CriticEnsemble, r, s_next, terminal) -> np.ndarray:
    """``r + gamma * min_i V_target_i(s')``, with gamma set to 0 on terminal rows."""
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    s_next = np.atleast_2d(np.asarray(s_next, dtype=np.float64))
    terminal = np.asarray(terminal, dtype=bool).reshape(-1)
    v1 = forward(ensemble.v_targets[0], s_next)[:, 0]
    v2 = forward(ensemble.v_targets[1], s_next)[:, 0]
    return r + np.where(terminal, 0.0, ensemble.gamma * np.minimum(v1, v2))


def critic_loss(ensemble: CriticEnsemble, batch, targets=None) -> tuple[float, MlpGrads]:
    """Mean squared error between Q(s, a) and the (gradient-blocked) targets."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    if targets is None:
        targets = bootstrap_target(ensemble, batch.r, batch.s_next, batch.terminal)
    sa = np.concatenate([batch.s, batch.a], axis=1)
    out, cache = forward_cached(ensemble.q, sa)
    err = out[:, 0] - targets
    loss = float(np.mean(err * err))
    grads, _ = backward(ensemble.q, sa, (2.0 * err / len(err))[:, None], cache=cache, need_input=False)
    return loss, grads


def value_advantage_update(ensemble: CriticEnsemble, batch, targets=None) -> list[VaLoss]:
    """Max-Q regression losses of both V/A pairs on the shared bootstrap targets."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    if targets is None:
        targets = bootstrap_target(ensemble, batch.r, batch.s_next, batch.terminal)
    return [lambda_va_loss(p, batch.s, batch.a, targets) for p in ensemble.pairs]
