"""Squashed-Gaussian policy, temperature tuning and the mode-guided gradient fix.

The policy network emits ``[mean, log_std]`` and, when built with a mode
head, an extra block of pre-tanh outputs for the regressed argmax estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .critic import CriticEnsemble
from .nn import MlpGrads, MlpNet, backward, forward_cached

LOG_STD_MIN = -10.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_ONE_MINUS = np.nextafter(1.0, 0.0)


@dataclass
class PolicyNet:
    net: MlpNet
    action_dim: int
    with_mu: bool = False

    def __post_init__(self):
        blocks = 3 if self.with_mu else 2
        if self.net.out_dim != blocks * self.action_dim:
            raise ValueError(f"policy output width {self.net.out_dim} != {blocks}*{self.action_dim}")

    @classmethod
    def init(cls, state_dim: int, action_dim: int, rng: np.random.Generator,
             hidden=(256, 256), with_mu: bool = False) -> "PolicyNet":
        blocks = 3 if with_mu else 2
        net = MlpNet.init((state_dim, *hidden, blocks * action_dim), rng, name="policy")
        return cls(net, action_dim, with_mu)

    def copy(self) -> "PolicyNet":
        return PolicyNet(self.net.copy(), self.action_dim, self.with_mu)


@dataclass
class PolicyOutput:
    mean: np.ndarray
    log_std_raw: np.ndarray
    mu_raw: np.ndarray | None
    cache: list = field(repr=False)

    @property
    def log_std(self) -> np.ndarray:
        return np.clip(self.log_std_raw, LOG_STD_MIN, LOG_STD_MAX)

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    @property
    def mu(self) -> np.ndarray | None:
        return None if self.mu_raw is None else np.tanh(self.mu_raw)


def policy_forward(policy: PolicyNet, s) -> PolicyOutput:
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    out, cache = forward_cached(policy.net, s)
    d = policy.action_dim
    mu_raw = out[:, 2 * d:3 * d] if policy.with_mu else None
    return PolicyOutput(out[:, :d], out[:, d:2 * d], mu_raw, cache)


def _log1m_tanh_sq(u):
    # log(1 - tanh(u)^2) without cancellation for large |u|
    return 2.0 * (np.log(2.0) - np.abs(u) - np.logaddexp(0.0, -2.0 * np.abs(u)))


def _squash(mean, log_std, noise):
    std = np.exp(log_std)
    u = mean + std * noise
    a = np.tanh(u)
    log_prob = np.sum(-0.5 * noise ** 2 - log_std - HALF_LOG_2PI - _log1m_tanh_sq(u), axis=-1)
    return u, a, log_prob


def sample_action(policy: PolicyNet, s, noise):
    """Reparameterized draw ``tanh(mean + std * noise)`` and its exact log-density.

    Accepts a single state or a batch. Returned actions are kept strictly
    inside (-1, 1).
    """
    single = np.ndim(s) == 1
    out = policy_forward(policy, s)
    noise = np.asarray(noise, dtype=np.float64).reshape(out.mean.shape)
    _, a, log_prob = _squash(out.mean, out.log_std, noise)
    a = np.clip(a, -_ONE_MINUS, _ONE_MINUS)
    if single:
        return a[0], float(log_prob[0])
    return a, log_prob


def deterministic_action(policy: PolicyNet, s) -> np.ndarray:
    """Evaluation-mode action ``tanh(mean)``."""
    single = np.ndim(s) == 1
    a = np.tanh(policy_forward(policy, s).mean)
    return a[0] if single else a


@dataclass
class Temperature:
    log_alpha: np.ndarray
    target_entropy: float

    @classmethod
    def init(cls, action_dim: int, initial: float = 1.0, target_entropy: float | None = None):
        if initial <= 0:
            raise ValueError("initial temperature must be positive")
        h = -float(action_dim) if target_entropy is None else float(target_entropy)
        return cls(np.array([np.log(initial)]), h)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))


# --- actor loss --------------------------------------------------------------

@dataclass
class ActorLoss:
    loss: float
    grads: MlpGrads
    actions: np.ndarray
    log_prob: np.ndarray
    q_values: np.ndarray
    projected: np.ndarray = field(repr=False)
    out: PolicyOutput = field(repr=False)

    @property
    def entropy(self) -> float:
        return float(-np.mean(self.log_prob))


def project_gradient(v, a_s, mu, q_val, min_v):
    """Drop the part of ``v`` pointing away from ``mu - a_s``.

    Fires only where ``v . (mu - a_s) < 0`` and ``q_val < min_v``; elsewhere
    ``v`` is returned unchanged. Row-wise for 2-D inputs.
    """
    single = np.ndim(v) == 1
    v, a_s, mu = (np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in (v, a_s, mu))
    q_val = np.atleast_1d(np.asarray(q_val, dtype=np.float64))
    min_v = np.atleast_1d(np.asarray(min_v, dtype=np.float64))
    out, _ = _project_rows(v, mu - a_s, q_val, min_v)
    return out[0] if single else out


def _project_rows(v, direction, q_val, min_v):
    dot = np.sum(v * direction, axis=1)
    scale = np.max(np.abs(direction), axis=1)
    # an all-zero direction has dot == 0 and can never fire
    fire = (dot < 0.0) & (q_val < min_v) & (scale > 0.0)
    # unit direction, rescaled first so tiny differences do not underflow
    unit = direction / np.where(fire, scale, 1.0)[:, None]
    unit /= np.where(fire, np.linalg.norm(unit, axis=1), 1.0)[:, None]
    out = v - np.sum(v * unit, axis=1)[:, None] * unit
    # second pass removes the rounding left along ``unit`` by the first one
    out -= np.sum(out * unit, axis=1)[:, None] * unit
    # a projection never lengthens a vector; keep that true after rounding too
    v_norm, out_norm = np.linalg.norm(v, axis=1), np.linalg.norm(out, axis=1)
    out *= np.minimum(1.0, v_norm / np.where(out_norm > 0.0, out_norm, 1.0))[:, None]
    return np.where(fire[:, None], out, v), fire


def _actor_loss(policy, states, alpha, critic, noise, modify: bool, min_v=None) -> ActorLoss:
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    n = len(states)
    if n == 0:
        raise ValueError("empty batch")
    d = policy.action_dim
    out = policy_forward(policy, states)
    noise = np.asarray(noise, dtype=np.float64).reshape(n, d)
    log_std = out.log_std
    std = np.exp(log_std)
    u, a, log_prob = _squash(out.mean, log_std, noise)
    a_in = np.clip(a, -_ONE_MINUS, _ONE_MINUS)
    q, gq = critic.q_action_grad(states, a_in)
    fired = np.zeros(n, dtype=bool)
    if modify:
        if not policy.with_mu:
            raise ValueError("modified actor gradient needs a policy with a mode head")
        if min_v is None:
            min_v = critic.min_value(states)
        gq, fired = _project_rows(gq, out.mu - a_in, q, min_v)
    loss = float(np.mean(alpha * log_prob - q))

    dsq = 1.0 - a * a  # d tanh(u) / du
    du = (alpha * 2.0 * a - gq * dsq) / n
    d_mean = du
    d_log_std = (-alpha / n + du * std * noise)
    d_log_std = d_log_std * ((out.log_std_raw > LOG_STD_MIN) & (out.log_std_raw < LOG_STD_MAX))
    g_out = np.zeros((n, policy.net.out_dim))
    g_out[:, :d] = d_mean
    g_out[:, d:2 * d] = d_log_std
    grads, _ = backward(policy.net, states, g_out, cache=out.cache, need_input=False)
    return ActorLoss(loss, grads, a_in, log_prob, q, fired, out)


def actor_loss_alpha(policy: PolicyNet, states, alpha: float, critic: CriticEnsemble, noise) -> ActorLoss:
    """``mean(alpha * log pi(a_s|s) - Q(s, a_s))`` with reparameterized ``a_s``.

    Only policy parameters receive gradients; alpha and the critic are constants.
    """
    return _actor_loss(policy, states, alpha, critic, noise, modify=False)


def actor_loss_beta(policy: PolicyNet, states, alpha: float, critic: CriticEnsemble, noise,
                    min_v=None) -> ActorLoss:
    """Same loss value as :func:`actor_loss_alpha`; the action gradient of Q is
    passed through :func:`project_gradient` before the chain rule."""
    return _actor_loss(policy, states, alpha, critic, noise, modify=True, min_v=min_v)


def temperature_loss(temperature: Temperature, log_prob) -> tuple[float, np.ndarray]:
    """``mean(-alpha * log_prob - alpha * target_entropy)``; gradient is w.r.t. log alpha.

    ``log_prob`` is treated as a constant.
    """
    log_prob = np.asarray(log_prob, dtype=np.float64)
    if log_prob.size == 0:
        raise ValueError("empty batch")
    alpha = temperature.alpha
    gap = float(np.mean(-log_prob - temperature.target_entropy))
    return alpha * gap, np.array([alpha * gap])


# --- mode head ----------------------------------------------------------------

@dataclass
class MuTargets:
    """Multiset of (state, target action) pairs; ``rows`` index the batch."""

    rows: np.ndarray
    actions: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)


def mu_targets(states, buffer_actions, resampled_actions, critic: CriticEnsemble, min_v=None) -> MuTargets:
    """Batch and resampled actions whose Q-value strictly beats ``min_i V_i(s)``."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if len(states) == 0:
        raise ValueError("empty batch")
    if min_v is None:
        min_v = critic.min_value(states)
    n = len(states)
    both_a = np.concatenate([buffer_actions, resampled_actions], axis=0)
    q = critic.q_values(np.concatenate([states, states], axis=0), both_a)
    keep = q > np.concatenate([min_v, min_v])
    rows = np.concatenate([np.arange(n), np.arange(n)])[keep]
    return MuTargets(rows, both_a[keep])


def _mu_out_grad(mu_raw_rows, targets, n_targets):
    mu = np.tanh(mu_raw_rows)
    diff = mu - targets
    loss = float(np.sum(diff * diff) / n_targets)
    return loss, 2.0 * diff * (1.0 - mu * mu) / n_targets


def mu_loss(policy: PolicyNet, states, targets) -> tuple[float, MlpGrads]:
    """Mean over targets of ``||mu(s) - a_target||^2``; an empty set gives zeros."""
    if not policy.with_mu:
        raise ValueError("policy has no mode head")
    grads = MlpGrads.zeros_like(policy.net)
    states = np.asarray(states, dtype=np.float64).reshape(-1, policy.net.in_dim)
    if len(states) == 0:
        return 0.0, grads
    d = policy.action_dim
    out = policy_forward(policy, states)
    loss, g_mu = _mu_out_grad(out.mu_raw, np.asarray(targets).reshape(-1, d), len(states))
    g_out = np.zeros((len(states), policy.net.out_dim))
    g_out[:, 2 * d:] = g_mu
    grads, _ = backward(policy.net, states, g_out, cache=out.cache, need_input=False)
    return loss, grads


@dataclass
class BetaActorStep:
    actor: ActorLoss
    mu_loss: float
    n_targets: int
    grads: MlpGrads


def beta_actor_step(policy: PolicyNet, states, buffer_actions, alpha: float,
                    critic: CriticEnsemble, noise) -> BetaActorStep:
    """Mode-head and modified policy gradients from one shared forward pass.

    The returned ``grads`` are the sum of both gradients, ready for a single
    optimizer step on the shared network.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    min_v = critic.min_value(states)
    act = actor_loss_beta(policy, states, alpha, critic, noise, min_v=min_v)
    targets = mu_targets(states, buffer_actions, act.actions, critic, min_v=min_v)
    grads = MlpGrads(act.grads.sizes, act.grads.flat.copy())
    m_loss = 0.0
    if len(targets):
        d = policy.action_dim
        m_loss, g_rows = _mu_out_grad(act.out.mu_raw[targets.rows], targets.actions, len(targets))
        g_out = np.zeros((len(states), policy.net.out_dim))
        np.add.at(g_out[:, 2 * d:], targets.rows, g_rows)
        g_mu, _ = backward(policy.net, states, g_out, cache=act.out.cache, need_input=False)
        grads += g_mu
    return BetaActorStep(act, m_loss, len(targets), grads)
