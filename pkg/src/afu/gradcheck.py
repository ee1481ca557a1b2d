"""Central finite-difference checks for every hand-derived gradient.

Each check builds a small random instance, evaluates the loss with forward
passes only, and compares the numeric derivative to the analytic gradient.
Stop-gradient pieces (indicator, no-grad value copy, resampled actions,
frozen noise) are frozen at the base point on the numeric side.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .actor import (PolicyNet, Temperature, actor_loss_alpha, actor_loss_beta, mu_loss,
                    policy_forward, temperature_loss, _project_rows)
from .critic import CriticEnsemble, critic_loss
from .maxq import MaxQPair, lambda_va_loss
from .nn import MlpNet, backward, forward
from .replay import MiniBatch

STEP = 1e-5
TOL = 1e-5


def rel_error(analytic, numeric) -> float:
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-10)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_grad(f: Callable[[], float], params: np.ndarray, h: float = STEP) -> np.ndarray:
    """Central differences of ``f`` w.r.t. ``params``, perturbed in place."""
    g = np.zeros_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + h
        up = f()
        params[i] = old - h
        down = f()
        params[i] = old
        g[i] = (up - down) / (2.0 * h)
    return g


def _random_net(rng, n_in, n_out, hidden=(6, 5), name="net"):
    return MlpNet.init((n_in, *hidden, n_out), rng, name=name, output_scale=1.0)


def _dims(rng):
    return int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(3, 7))


def _batch(rng, sd, ad, n):
    return MiniBatch(rng.standard_normal((n, sd)), rng.uniform(-1, 1, (n, ad)),
                     rng.standard_normal(n), rng.standard_normal((n, sd)), rng.random(n) < 0.3)


def check_backward(rng) -> float:
    sd, od, _ = _dims(rng)
    net = _random_net(rng, sd, od)
    x = rng.standard_normal(sd)
    gout = rng.standard_normal(od)
    grads, gin = backward(net, x, gout)
    f = lambda: float(forward(net, x) @ gout)
    num_p = numeric_grad(f, net.params)
    num_x = numeric_grad(f, x)
    return max(rel_error(grads.flat, num_p), rel_error(gin, num_x))


def check_critic_loss(rng) -> float:
    sd, ad, n = _dims(rng)
    ens = CriticEnsemble.init(sd, ad, rng, hidden=(6, 5), gamma=0.9)
    ens.q.params[:] = _random_net(rng, sd + ad, 1).params
    batch = _batch(rng, sd, ad, n)
    targets = rng.standard_normal(n)
    _, grads = critic_loss(ens, batch, targets)

    def f():
        q = forward(ens.q, np.hstack([batch.s, batch.a]))[:, 0]
        return float(np.mean((q - targets) ** 2))
    return rel_error(grads.flat, numeric_grad(f, ens.q.params))


def check_va_loss(rng) -> float:
    sd, ad, n = _dims(rng)
    rho = float(rng.uniform(0.05, 0.95))
    pair = MaxQPair(_random_net(rng, sd, 1, name="v"), _random_net(rng, sd + ad, 1, name="a"), rho)
    s = rng.standard_normal((n, sd))
    a = rng.uniform(-1, 1, (n, ad))
    sa = np.hstack([s, a])
    v0 = forward(pair.value, s)[:, 0]
    a0 = forward(pair.advantage, sa)[:, 0]
    # targets straddle V and V + A so every branch shows up
    y = v0 + a0 * rng.uniform(-1.0, 2.0, n) + 0.3 * rng.standard_normal(n)
    res = lambda_va_loss(pair, s, a, y)
    ind = (v0 + a0 < y).astype(float)

    def f():
        v = forward(pair.value, s)[:, 0]
        adv = forward(pair.advantage, sa)[:, 0]
        ups = (1 - rho * ind) * v + rho * ind * v0
        x = ups - y
        return float(np.mean(np.where(x >= 0, (x + adv) ** 2, x ** 2 + adv ** 2)))
    num_v = numeric_grad(f, pair.value.params)
    num_a = numeric_grad(f, pair.advantage.params)
    return max(rel_error(res.value_grads.flat, num_v), rel_error(res.advantage_grads.flat, num_a))


def _actor_setup(rng, with_mu=False):
    sd, ad, n = _dims(rng)
    ens = CriticEnsemble.init(sd, ad, rng, hidden=(6, 5))
    ens.q.params[:] = _random_net(rng, sd + ad, 1).params
    for p in ens.pairs:
        p.value.params[:] = _random_net(rng, sd, 1).params
    policy = PolicyNet(_random_net(rng, sd, (3 if with_mu else 2) * ad, name="policy"), ad, with_mu)
    states = rng.standard_normal((n, sd))
    noise = rng.standard_normal((n, ad))
    alpha = float(rng.uniform(0.05, 2.0))
    return ens, policy, states, noise, alpha


def _sampled(policy, states, noise):
    out = policy_forward(policy, states)
    ls = np.clip(out.log_std_raw, -10.0, 2.0)
    u = out.mean + np.exp(ls) * noise
    a = np.tanh(u)
    logp = np.sum(-0.5 * noise ** 2 - ls - 0.5 * np.log(2 * np.pi) - np.log(1 - a ** 2), axis=1)
    return a, logp


def check_actor_loss(rng) -> float:
    ens, policy, states, noise, alpha = _actor_setup(rng)
    res = actor_loss_alpha(policy, states, alpha, ens, noise)

    def f():
        a, logp = _sampled(policy, states, noise)
        q = forward(ens.q, np.hstack([states, a]))[:, 0]
        return float(np.mean(alpha * logp - q))
    return rel_error(res.grads.flat, numeric_grad(f, policy.net.params))


def check_actor_loss_beta(rng) -> float:
    """The modified gradient is the exact gradient of a surrogate in which Q is
    replaced by its projected linearization around each sampled action."""
    ens, policy, states, noise, alpha = _actor_setup(rng, with_mu=True)
    # lift min V so the projection condition can fire
    ens.pairs[0].value.params[-1] += 2.0
    ens.pairs[1].value.params[-1] += 2.0
    res = actor_loss_beta(policy, states, alpha, ens, noise)
    a0, _ = _sampled(policy, states, noise)
    sa = np.hstack([states, a0])
    _, gin = backward(ens.q, sa, np.ones((len(states), 1)))
    gq = gin[:, states.shape[1]:]
    q0 = forward(ens.q, sa)[:, 0]
    min_v = np.minimum(forward(ens.pairs[0].value, states)[:, 0], forward(ens.pairs[1].value, states)[:, 0])
    mu0 = np.tanh(policy_forward(policy, states).mu_raw)
    gmod, _ = _project_rows(gq, mu0 - a0, q0, min_v)

    def f():
        a, logp = _sampled(policy, states, noise)
        return float(np.mean(alpha * logp - np.sum(gmod * a, axis=1)))
    return rel_error(res.grads.flat, numeric_grad(f, policy.net.params))


def check_temperature_loss(rng) -> float:
    n = int(rng.integers(3, 9))
    temp = Temperature(np.array([rng.uniform(-2, 1)]), float(rng.uniform(-3, 1)))
    logp = rng.standard_normal(n)
    _, g = temperature_loss(temp, logp)

    def f():
        alpha = np.exp(temp.log_alpha[0])
        return float(np.mean(-alpha * logp - alpha * temp.target_entropy))
    return rel_error(g, numeric_grad(f, temp.log_alpha))


def check_mu_loss(rng) -> float:
    sd, ad, n = _dims(rng)
    policy = PolicyNet(_random_net(rng, sd, 3 * ad, name="policy"), ad, with_mu=True)
    states = rng.standard_normal((n, sd))
    targets = rng.uniform(-1, 1, (n, ad))
    _, grads = mu_loss(policy, states, targets)

    def f():
        mu = np.tanh(forward(policy.net, states)[:, 2 * ad:])
        return float(np.mean(np.sum((mu - targets) ** 2, axis=1)))
    return rel_error(grads.flat, numeric_grad(f, policy.net.params))


CHECKS: dict[str, Callable[[np.random.Generator], float]] = {
    "backward": check_backward,
    "critic_loss": check_critic_loss,
    "value_advantage_loss": check_va_loss,
    "actor_loss": check_actor_loss,
    "actor_loss_modified": check_actor_loss_beta,
    "temperature_loss": check_temperature_loss,
    "mu_loss": check_mu_loss,
}


def run_all(n_instances: int = 20, seed: int = 0, tol: float = TOL) -> dict[str, float]:
    """Worst relative error per check over ``n_instances`` random instances."""
    out = {}
    for k, (name, check) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, k])
        out[name] = max(check(rng) for _ in range(n_instances))
    return out
