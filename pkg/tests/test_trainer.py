import csv
import io
import math

import numpy as np
import pytest

from afu.actor import PolicyNet
from afu.envs import PointReachEnv
from afu.trainer import (CSV_COLUMNS, AfuConfig, Agent, ConfigError, NumericalAbort, desk_config, evaluate,
                         final_quarter_entropy, final_smoothed_return, rollout, smooth, train)

from conftest import constant_net


def tiny(**kw):
    base = dict(hidden=(8,), batch_size=16, total_steps=60, warmup_steps=20, eval_interval=20,
                eval_rollouts=1)
    base.update(kw)
    return AfuConfig(**base)


def _flat(agent):
    return np.concatenate([agent.critic_params(), agent.policy.net.params, agent.temperature.log_alpha])


class TestConfig:
    def test_defaults_follow_reference_hyperparameters(self):
        c = AfuConfig()
        assert (c.lr_q, c.lr_va, c.lr_pi, c.lr_temp) == (3e-4,) * 4
        assert (c.gamma, c.tau, c.batch_size, c.initial_temperature) == (0.99, 0.01, 256, 1.0)
        assert c.buffer_capacity == 1_000_000 and c.warmup_steps == 10_000
        assert c.target_entropy is None  # resolved to -action_dim

    @pytest.mark.parametrize("field, value", [
        ("rho", 0.0), ("rho", 1.0), ("tau", 0.0), ("tau", 1.0), ("gamma", 1.0), ("lr_q", 0.0),
        ("lr_temp", -1.0), ("variant", "gamma"), ("env", "pong"), ("batch_size", 0),
        ("eval_rollouts", 0), ("hidden", ()),
    ])
    def test_invalid(self, field, value):
        with pytest.raises(ConfigError):
            AfuConfig(**{field: value}).validate()

    def test_warmup_beyond_total(self):
        with pytest.raises(ConfigError):
            AfuConfig(total_steps=10, warmup_steps=11).validate()

    def test_round_trip(self):
        c = desk_config("point_reach", variant="beta", seed=4)
        assert AfuConfig.from_dict(c.to_dict()) == c

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            AfuConfig.from_dict({"learning_rate": 1.0})

    def test_desk_presets(self):
        c = desk_config("sfm")
        assert c.warmup_steps == 1_000 and c.total_steps == 20_000 and c.hidden == (32, 32)
        with pytest.raises(ConfigError):
            desk_config("pong")

    def test_invalid_config_fails_before_work(self):
        calls = []
        with pytest.raises(ConfigError):
            train(tiny(rho=2.0), callback=lambda step, agent: calls.append(step))
        assert calls == []


class TestTrainLoop:
    def test_warmup_only_leaves_parameters(self):
        seen = {}

        def grab(step, agent):
            if step == 1:
                seen["start"] = _flat(agent).copy()
        run = train(tiny(total_steps=40, warmup_steps=40), callback=grab)
        np.testing.assert_array_equal(seen["start"], _flat(run.agent))
        assert len(run.buffer) == 40
        assert all(math.isnan(r.loss_q) for r in run.records)

    @pytest.mark.parametrize("variant, expected", [
        ("alpha", ["q", "va1", "target1", "va2", "target2", "pi", "temp"]),
        ("beta", ["q", "va1", "target1", "va2", "target2", "mu", "pi", "temp"]),
    ])
    def test_update_order(self, variant, expected):
        trace = []
        train(tiny(variant=variant, total_steps=22, warmup_steps=20), trace=trace)
        assert trace == expected * 2

    def test_records(self):
        run = train(tiny(variant="beta"))
        steps = [r.step for r in run.records]
        assert steps == [20, 40, 60]
        rows = list(csv.reader(io.StringIO(run.to_csv())))
        assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 4
        assert all(v != "" for v in rows[-1])
        assert all(np.isfinite(float(v)) for v in rows[-1])

    def test_alpha_csv_leaves_mode_loss_empty(self):
        rows = list(csv.DictReader(io.StringIO(train(tiny()).to_csv())))
        assert all(r["loss_mu"] == "" for r in rows)

    def test_sfm_transitions_are_terminal(self):
        run = train(tiny(total_steps=30, warmup_steps=30))
        assert run.buffer.terminal[:30].all()

    def test_truncation_is_not_terminal(self):
        run = train(tiny(env="point_reach", total_steps=60, warmup_steps=60))
        assert not run.buffer.terminal[:60].any()
        # episodes restart from fresh states every 20 steps
        s, s_next = run.buffer.s[:60, 0], run.buffer.s_next[:60, 0]
        assert s[20] != s_next[19]
        np.testing.assert_array_equal(s[1:20], s_next[:19])

    def test_determinism(self):
        assert train(tiny(variant="beta", seed=3)).to_csv() == train(tiny(variant="beta", seed=3)).to_csv()

    def test_seeds_differ(self):
        assert train(tiny(seed=1)).to_csv() != train(tiny(seed=2)).to_csv()

    def test_callback_stops_early(self):
        run = train(tiny(), callback=lambda step, agent: step >= 30)
        assert [r.step for r in run.records] == [20]

    def test_numerical_abort(self, monkeypatch):
        monkeypatch.setattr(Agent, "gradient_step", lambda self, *a, **k: {"loss_q": float("nan")})
        with pytest.raises(NumericalAbort) as info:
            train(tiny())
        assert info.value.records[-1].step == 21

    def test_critic_ignores_actor_updates(self):
        """Paired runs on one forced action stream: the critic trajectory is identical
        whether or not the policy and temperature are trained."""
        actions = np.random.default_rng(0).uniform(-1, 1, 200)
        forced = lambda step, s: actions[step - 1]
        trajectories = []
        for update in (False, True):
            traj = []
            cb = lambda step, agent: traj.append(agent.critic_params().copy()) if step % 10 == 0 else None
            run = train(tiny(variant="beta", total_steps=200), forced_actions=forced,
                        update_actor=update, callback=cb)
            trajectories.append((np.array(traj), run.agent.policy.net.params.copy()))
        (crit_off, pol_off), (crit_on, pol_on) = trajectories
        np.testing.assert_array_equal(crit_off, crit_on)
        assert not np.array_equal(pol_off, pol_on)


class TestEvaluate:
    @staticmethod
    def _mode_policy(mode):
        return PolicyNet(constant_net(1, [np.arctanh(mode), 0.0], "policy"), 1)

    def test_sfm_optimal_mode(self):
        assert evaluate(self._mode_policy(0.1), "sfm", 3, np.random.default_rng(0)) == 5.0

    def test_sfm_left_of_barrier(self):
        pol = PolicyNet(constant_net(1, [-50.0, 0.0], "policy"), 1)
        assert evaluate(pol, "sfm", 1, np.random.default_rng(0)) == 0.0

    def test_point_reach_zero_policy_from_origin(self):
        class AtOrigin(PointReachEnv):
            def reset(self, rng, x0=None):
                return super().reset(rng, 0.0)
        ret, start = rollout(PolicyNet(constant_net(1, [0.0, 0.0], "policy"), 1), AtOrigin(),
                             np.random.default_rng(0))
        assert ret == 0.0 and start[0] == 0.0

    def test_needs_rollouts(self):
        with pytest.raises(ValueError):
            evaluate(self._mode_policy(0.1), "sfm", 0, np.random.default_rng(0))


class TestReporting:
    def test_smooth_window(self):
        np.testing.assert_allclose(smooth(np.arange(12.0), 10), [0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5.5, 6.5])

    def test_smoothing_leaves_records(self):
        run = train(tiny(total_steps=100))
        before = [r.mean_return for r in run.records]
        final_smoothed_return(run.records)
        assert [r.mean_return for r in run.records] == before

    def test_final_quarter_entropy(self):
        run = train(tiny(total_steps=100))
        late = [r.entropy for r in run.records if r.step > 75]
        assert final_quarter_entropy(run.records) == pytest.approx(np.mean(late))
