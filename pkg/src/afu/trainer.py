"""Interleaved environment / gradient-step loop for both AFU variants."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .actor import (PolicyNet, Temperature, actor_loss_alpha, beta_actor_step,
                    deterministic_action, sample_action, temperature_loss)
from .critic import CriticEnsemble, bootstrap_target, critic_loss, value_advantage_update
from .envs import make_env
from .nn import AdamState, adam_step, adam_update, soft_update
from .replay import ReplayBuffer, Transition

CSV_COLUMNS = ("step", "mean_return", "entropy", "alpha", "loss_q", "loss_va",
               "loss_pi", "loss_temp", "loss_mu")
EVAL_MODE = "deterministic tanh(mean)"


class ConfigError(ValueError):
    pass


class NumericalAbort(RuntimeError):
    """A loss went non-finite; ``records`` holds everything emitted so far."""

    def __init__(self, message: str, records: list):
        super().__init__(message)
        self.records = records


@dataclass
class AfuConfig:
    variant: str = "alpha"
    env: str = "sfm"
    rho: float = 0.3
    tau: float = 0.01
    gamma: float = 0.99
    target_entropy: float | None = None
    initial_temperature: float = 1.0
    lr_q: float = 3e-4
    lr_va: float = 3e-4
    lr_pi: float = 3e-4
    lr_temp: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    hidden: tuple = (256, 256)
    total_steps: int = 1_000_000
    warmup_steps: int = 10_000
    eval_interval: int = 10_000
    eval_rollouts: int = 10
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)

    def validate(self) -> "AfuConfig":
        problems = []
        if self.variant not in ("alpha", "beta"):
            problems.append(f"variant must be alpha or beta, got {self.variant!r}")
        if not 0.0 < self.rho < 1.0:
            problems.append("rho must lie in (0, 1)")
        if not 0.0 < self.tau < 1.0:
            problems.append("tau must lie in (0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            problems.append("gamma must lie in [0, 1)")
        for name in ("lr_q", "lr_va", "lr_pi", "lr_temp", "initial_temperature"):
            if not getattr(self, name) > 0.0:
                problems.append(f"{name} must be positive")
        for name in ("batch_size", "buffer_capacity", "total_steps", "eval_interval", "eval_rollouts"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if not 0 <= self.warmup_steps <= self.total_steps:
            problems.append("warmup_steps must lie in [0, total_steps]")
        if not self.hidden or min(self.hidden) < 1:
            problems.append("hidden sizes must be positive")
        try:
            make_env(self.env)
        except ValueError as e:
            problems.append(str(e))
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AfuConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EvalRecord:
    step: int
    mean_return: float
    entropy: float
    alpha: float
    loss_q: float
    loss_va: float
    loss_pi: float
    loss_temp: float
    loss_mu: float | None = None

    def row(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append("" if v is None else repr(v))
        return out


def records_to_csv(records: list[EvalRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def smooth(values, window: int = 10) -> np.ndarray:
    """Trailing moving average; early points average what is available."""
    values = np.asarray(values, dtype=np.float64)
    c = np.cumsum(np.insert(values, 0, 0.0))
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


class Agent:
    """All learnable state of one AFU run plus the optimizers that own it."""

    def __init__(self, config: AfuConfig, state_dim: int, action_dim: int, rng: np.random.Generator):
        c = config
        self.config = c
        self.action_dim = action_dim
        self.critic = CriticEnsemble.init(state_dim, action_dim, rng, c.hidden, c.rho, c.gamma)
        self.policy = PolicyNet.init(state_dim, action_dim, rng, c.hidden, with_mu=c.variant == "beta")
        self.temperature = Temperature.init(action_dim, c.initial_temperature, c.target_entropy)
        self.opt_q = AdamState.for_net(self.critic.q, c.lr_q)
        self.opt_pairs = [(AdamState.for_net(p.value, c.lr_va), AdamState.for_net(p.advantage, c.lr_va))
                          for p in self.critic.pairs]
        self.opt_pi = AdamState.for_net(self.policy.net, c.lr_pi)
        self.opt_temp = AdamState.for_shape(1, c.lr_temp)

    def critic_params(self) -> np.ndarray:
        c = self.critic
        parts = [c.q.params] + [n.params for p in c.pairs for n in (p.value, p.advantage)]
        parts += [t.params for t in c.v_targets]
        return np.concatenate(parts)

    def gradient_step(self, batch, noise: np.ndarray, update_actor: bool = True,
                      trace: list | None = None) -> dict:
        """One update of every parameter group, in the order Q, (V_i, A_i, target_i), mode, policy, alpha."""
        c = self.critic
        log = trace.append if trace is not None else (lambda _: None)
        targets = bootstrap_target(c, batch.r, batch.s_next, batch.terminal)

        loss_q, g_q = critic_loss(c, batch, targets)
        adam_step(self.opt_q, c.q, g_q)
        log("q")

        va_losses = []
        va = value_advantage_update(c, batch, targets)
        for i, (pair, (opt_v, opt_a), res) in enumerate(zip(c.pairs, self.opt_pairs, va)):
            adam_step(opt_v, pair.value, res.value_grads)
            adam_step(opt_a, pair.advantage, res.advantage_grads)
            soft_update(c.v_targets[i], pair.value, self.config.tau)
            va_losses.append(res.loss)
            log(f"va{i + 1}")
            log(f"target{i + 1}")

        out = {"loss_q": loss_q, "loss_va": float(np.mean(va_losses))}
        if not update_actor:
            return out

        alpha = self.temperature.alpha
        if self.policy.with_mu:
            step = beta_actor_step(self.policy, batch.s, batch.a, alpha, c, noise)
            act = step.actor
            out["loss_mu"] = step.mu_loss
            log("mu")
            log("pi")
            adam_step(self.opt_pi, self.policy.net, step.grads)
        else:
            act = actor_loss_alpha(self.policy, batch.s, alpha, c, noise)
            log("pi")
            adam_step(self.opt_pi, self.policy.net, act.grads)

        loss_t, g_t = temperature_loss(self.temperature, act.log_prob)
        adam_update(self.opt_temp, self.temperature.log_alpha, g_t, name="log_alpha")
        log("temp")
        out.update(loss_pi=act.loss, loss_temp=loss_t, entropy=act.entropy)
        return out


def rollout(policy: PolicyNet, env, rng: np.random.Generator) -> tuple[float, np.ndarray]:
    """One deterministic-mode episode; returns ``(undiscounted return, start state)``."""
    s = env.reset(rng)
    start = s.copy()
    total = 0.0
    for _ in range(env.spec.max_episode_steps):
        s, r, term, trunc = env.step(deterministic_action(policy, s))
        total += r
        if term or trunc:
            break
    return total, start


def evaluate_rollouts(policy: PolicyNet, env_name: str, n_rollouts: int, rng: np.random.Generator):
    env = make_env(env_name)
    return [rollout(policy, env, rng) for _ in range(n_rollouts)]


def evaluate(policy: PolicyNet, env_name: str, n_rollouts: int, rng: np.random.Generator) -> float:
    """Mean undiscounted return of ``n_rollouts`` deterministic-mode episodes."""
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    return float(np.mean([ret for ret, _ in evaluate_rollouts(policy, env_name, n_rollouts, rng)]))


@dataclass
class RunResult:
    config: AfuConfig
    records: list[EvalRecord]
    agent: Agent = field(repr=False)
    buffer: ReplayBuffer | None = field(default=None, repr=False)

    def to_csv(self) -> str:
        return records_to_csv(self.records)

    def metadata(self) -> dict:
        return {"config": self.config.to_dict(), "eval_mode": EVAL_MODE}


def _mean(xs):
    return float(np.mean(xs)) if xs else math.nan


def train(config: AfuConfig, *, forced_actions: Callable | None = None, update_actor: bool = True,
          trace: list | None = None, callback: Callable | None = None) -> RunResult:
    """Run AFU-alpha or AFU-beta and return its evaluation records.

    ``forced_actions(step, state)`` overrides the behaviour policy and
    ``update_actor=False`` freezes policy and temperature; both exist for
    paired-run experiments. ``callback(step, agent)`` runs after every
    environment step; returning True ends the run early.
    """
    config.validate()
    env = make_env(config.env)
    sd, ad = env.spec.state_dim, env.spec.action_dim
    init_rng, env_rng, act_rng, batch_rng, noise_rng, eval_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(6))
    agent = Agent(config, sd, ad, init_rng)
    buffer = ReplayBuffer(sd, ad, config.buffer_capacity)
    records: list[EvalRecord] = []
    acc: dict[str, list] = {}

    s = env.reset(env_rng)
    for step in range(1, config.total_steps + 1):
        if forced_actions is not None:
            a = np.asarray(forced_actions(step, s), dtype=np.float64).reshape(ad)
        elif step <= config.warmup_steps:
            a = act_rng.uniform(-1.0, 1.0, size=ad)
        else:
            a, _ = sample_action(agent.policy, s, act_rng.standard_normal(ad))
        s_next, r, term, trunc = env.step(a)
        buffer.insert(Transition(s, a, r, s_next, term))
        s = env.reset(env_rng) if (term or trunc) else s_next

        if step > config.warmup_steps:
            batch = buffer.sample(config.batch_size, batch_rng)
            noise = noise_rng.standard_normal((config.batch_size, ad))
            losses = agent.gradient_step(batch, noise, update_actor, trace)
            for k, v in losses.items():
                acc.setdefault(k, []).append(v)
            bad = [k for k, v in losses.items() if not np.isfinite(v)]
            if bad:
                records.append(_record(step, math.nan, agent, acc))
                raise NumericalAbort(f"non-finite {', '.join(bad)} at step {step}", records)

        stop = callback is not None and callback(step, agent)
        if step % config.eval_interval == 0:
            ret = evaluate(agent.policy, config.env, config.eval_rollouts, eval_rng)
            records.append(_record(step, ret, agent, acc))
            acc = {}
        if stop:
            break
    return RunResult(config, records, agent, buffer)


def _record(step, ret, agent, acc) -> EvalRecord:
    beta = agent.policy.with_mu
    return EvalRecord(
        step=step, mean_return=float(ret), entropy=_mean(acc.get("entropy", [])),
        alpha=agent.temperature.alpha, loss_q=_mean(acc.get("loss_q", [])),
        loss_va=_mean(acc.get("loss_va", [])), loss_pi=_mean(acc.get("loss_pi", [])),
        loss_temp=_mean(acc.get("loss_temp", [])),
        loss_mu=_mean(acc.get("loss_mu", [])) if beta else None,
    )


# --- trap-environment comparison --------------------------------------------

# Narrow networks move their outputs less per Adam step, so the desk presets
# raise the network learning rates to keep the fitting speed of 256-unit
# layers at 3e-4. The temperature is a scalar and keeps its rate.
_DESK_NETS = dict(hidden=(32, 32), lr_q=2e-3, lr_va=2e-3, lr_pi=2e-3, lr_temp=3e-4)

DESK_PRESETS = {
    "sfm": dict(_DESK_NETS, env="sfm", total_steps=20_000, warmup_steps=1_000,
                eval_interval=250, eval_rollouts=1),
    "point_reach": dict(_DESK_NETS, env="point_reach", total_steps=100_000, warmup_steps=1_000,
                        eval_interval=5_000, eval_rollouts=10),
}
SFM_DESK_DEFAULTS = DESK_PRESETS["sfm"]


def desk_config(env: str = "sfm", **overrides) -> AfuConfig:
    """Desk-scale configuration for ``env``; keyword overrides win."""
    if env not in DESK_PRESETS:
        raise ConfigError(f"no desk preset for {env!r}")
    return AfuConfig(**{**DESK_PRESETS[env], **overrides})


def final_smoothed_return(records: list[EvalRecord], window: int = 10) -> float:
    return float(smooth([r.mean_return for r in records], window)[-1])


def final_quarter_entropy(records: list[EvalRecord]) -> float:
    last = records[-1].step
    vals = [r.entropy for r in records if r.step > 0.75 * last]
    return float(np.mean(vals))


def sfm_suite(seeds=range(10), variants=("alpha", "beta"), **overrides) -> list[dict]:
    """Train both variants on the trap environment for each seed.

    Returns one summary row per run with the final smoothed return and the
    mean entropy over the last quarter of training.
    """
    rows = []
    for variant in variants:
        for seed in seeds:
            cfg = desk_config("sfm", **{**overrides, "variant": variant, "seed": seed})
            run = train(cfg)
            rows.append({
                "variant": variant, "seed": seed,
                "final_smoothed_return": final_smoothed_return(run.records),
                "final_quarter_entropy": final_quarter_entropy(run.records),
                "final_alpha": run.records[-1].alpha,
                "csv": run.to_csv(),
            })
    return rows


def suite_table(rows: list[dict]) -> str:
    lines = ["variant,seed,final_smoothed_return,final_quarter_entropy,final_alpha"]
    for r in rows:
        lines.append(f"{r['variant']},{r['seed']},{r['final_smoothed_return']!r},"
                     f"{r['final_quarter_entropy']!r},{r['final_alpha']!r}")
    return "\n".join(lines) + "\n"


def config_json(config: AfuConfig) -> str:
    return json.dumps({"config": config.to_dict(), "eval_mode": EVAL_MODE}, indent=2)
