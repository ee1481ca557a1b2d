"""Max-Q regression: fit V(s) ~ max_a Q(s, a) jointly with an advantage net.

The value net is pushed down by scaling its gradient by ``1 - rho`` whenever
``V + A`` undershoots the regression target, so that V settles on a tight
upper bound of the targets instead of any upper bound.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .nn import AdamState, MlpGrads, MlpNet, adam_step, backward, forward, forward_cached
from .envs import toy_oracle


@dataclass
class MaxQPair:
    value: MlpNet
    advantage: MlpNet
    rho: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.advantage.in_dim <= self.value.in_dim:
            raise ValueError("advantage net must take state and action")

    @classmethod
    def init(cls, state_dim: int, action_dim: int, rng: np.random.Generator,
             hidden=(256, 256), rho: float = 0.3, suffix: str = "") -> "MaxQPair":
        value = MlpNet.init((state_dim, *hidden, 1), rng, name=f"value{suffix}")
        adv = MlpNet.init((state_dim + action_dim, *hidden, 1), rng, name=f"advantage{suffix}")
        return cls(value, adv, rho)


def indicator(v, adv, target):
    """1 where ``v + adv < target`` (strict), else 0. Works elementwise."""
    out = (np.asarray(v) + np.asarray(adv) < np.asarray(target)).astype(np.float64)
    return out if out.ndim else float(out)


def z_loss(x, y):
    """``(x + y)**2`` where ``x >= 0``, ``x**2 + y**2`` elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.where(x >= 0.0, (x + y) ** 2, x * x + y * y)
    return out if out.ndim else float(out)


def _z_grads(x, y):
    pos = x >= 0.0
    s = 2.0 * (x + y)
    return np.where(pos, s, 2.0 * x), np.where(pos, s, 2.0 * y)


def upsilon_forward_and_grad_scale(v, adv, target, rho: float):
    """Value and value-gradient multiplier of the gradient-scaled V.

    The forward value always equals ``v``; only the share of the gradient
    reaching the value parameters changes, to ``1 - rho`` when the indicator
    fires.
    """
    ind = indicator(v, adv, target)
    scale = 1.0 - rho * np.asarray(ind)
    v = np.asarray(v, dtype=np.float64)
    # (1 - rho*I) * v + rho*I * stop_grad(v)
    value = scale * v + (1.0 - scale) * v
    if value.ndim == 0:
        return float(value), float(scale)
    return value, scale


@dataclass
class VaLoss:
    loss: float
    value_grads: MlpGrads
    advantage_grads: MlpGrads
    indicator: np.ndarray = field(repr=False)


def lambda_va_loss(pair: MaxQPair, states, actions, targets) -> VaLoss:
    """Batch mean of ``Z(upsilon - target, A)`` and its parameter gradients."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    actions = np.asarray(actions, dtype=np.float64).reshape(len(states), -1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = len(targets)
    if n == 0:
        raise ValueError("empty batch")
    sa = np.concatenate([states, actions], axis=1)
    v_out, v_cache = forward_cached(pair.value, states)
    a_out, a_cache = forward_cached(pair.advantage, sa)
    v, adv = v_out[:, 0], a_out[:, 0]

    ind = indicator(v, adv, targets)
    ups, scale = upsilon_forward_and_grad_scale(v, adv, targets, pair.rho)
    x = ups - targets
    loss = float(np.mean(z_loss(x, adv)))
    dx, dadv = _z_grads(x, adv)
    gv, _ = backward(pair.value, states, (scale * dx / n)[:, None], cache=v_cache, need_input=False)
    ga, _ = backward(pair.advantage, sa, (dadv / n)[:, None], cache=a_cache, need_input=False)
    return VaLoss(loss, gv, ga, ind)


def expectile_loss(value_net: MlpNet, states, targets, tau_e: float):
    """Asymmetric squared loss ``|tau - 1(u < 0)| * u**2`` with ``u = target - V(s)``.

    Returns ``(loss, grads)``.
    """
    if not 0.0 < tau_e < 1.0:
        raise ValueError(f"expectile must lie in (0, 1), got {tau_e}")
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if len(targets) == 0:
        raise ValueError("empty batch")
    v_out, cache = forward_cached(value_net, states)
    u = targets - v_out[:, 0]
    w = np.where(u < 0.0, 1.0 - tau_e, tau_e)
    loss = float(np.mean(w * u * u))
    dv = -2.0 * w * u / len(u)
    grads, _ = backward(value_net, states, dv[:, None], cache=cache, need_input=False)
    return loss, grads


# --- toy max-Q benchmark ---------------------------------------------------

def toy_true_max(s):
    return np.sin(4.0 * np.asarray(s)) + 0.7


@dataclass
class ToyResult:
    method: str
    hyper: float
    seed: int
    states: np.ndarray
    v_estimate: np.ndarray
    advantage: MlpNet | None = field(default=None, repr=False)

    @property
    def true_max(self) -> np.ndarray:
        return toy_true_max(self.states)

    @property
    def residual(self) -> np.ndarray:
        return self.v_estimate - self.true_max

    def summary(self) -> dict:
        r = self.residual
        return {
            "method": self.method,
            "hyper": self.hyper,
            "seed": self.seed,
            "mean_abs_residual": float(np.mean(np.abs(r))),
            "mean_residual": float(np.mean(r)),
            "max_abs_residual": float(np.max(np.abs(r))),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "v_estimate", "true_max", "residual"])
        for row in zip(self.states, self.v_estimate, self.true_max, self.residual):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


TOY_METHODS = ("afu", "expectile")


def run_toy_benchmark(method: str, hyper: float, steps: int = 3000, batch: int = 256,
                      seed: int = 0, hidden=(256, 256), lr: float = 3e-4,
                      n_grid: int = 201) -> ToyResult:
    """Train V on ``sin(4s) + 0.7 cos(4a)`` samples and compare it to the true max.

    ``hyper`` is rho for ``afu`` and the expectile for ``expectile``.
    """
    if method not in TOY_METHODS:
        raise ValueError(f"unknown toy method {method!r}; choose from {TOY_METHODS}")
    if steps < 1 or batch < 1:
        raise ValueError("steps and batch must be positive")
    init_rng, data_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))

    if method == "afu":
        pair = MaxQPair.init(1, 1, init_rng, hidden=hidden, rho=hyper)
        value = pair.value
        opt_v = AdamState.for_net(pair.value, lr)
        opt_a = AdamState.for_net(pair.advantage, lr)
    else:
        if not 0.0 < hyper < 1.0:
            raise ValueError(f"expectile must lie in (0, 1), got {hyper}")
        value = MlpNet.init((1, *hidden, 1), init_rng, name="value")
        opt_v = AdamState.for_net(value, lr)

    for _ in range(steps):
        sa = data_rng.uniform(-1.0, 1.0, size=(batch, 2))
        s, a = sa[:, :1], sa[:, 1:]
        q = toy_oracle(s[:, 0], a[:, 0])
        if method == "afu":
            res = lambda_va_loss(pair, s, a, q)
            adam_step(opt_v, pair.value, res.value_grads)
            adam_step(opt_a, pair.advantage, res.advantage_grads)
        else:
            _, g = expectile_loss(value, s, q, hyper)
            adam_step(opt_v, value, g)

    grid = np.linspace(-1.0, 1.0, n_grid)
    v_est = forward(value, grid[:, None])[:, 0]
    adv = pair.advantage if method == "afu" else None
    return ToyResult(method, float(hyper), int(seed), grid, v_est, adv)
