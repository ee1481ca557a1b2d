import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from afu.gradcheck import check_backward, numeric_grad, rel_error
from afu.nn import (AdamState, ContractError, MlpGrads, MlpNet, NonFiniteGradientError, adam_step,
                    adam_update, backward, forward, load_nets, save_nets, soft_update)

from conftest import affine_net


class TestForward:
    def test_zero_net_gives_zero_output(self, rng):
        net = MlpNet((3, 4, 2))
        np.testing.assert_array_equal(forward(net, rng.standard_normal((5, 3))), np.zeros((5, 2)))

    def test_affine_one_by_one(self):
        net = affine_net([[2.0]], [1.0])
        assert forward(net, np.array([3.0]))[0] == 7.0

    def test_relu_clamps_negative_preactivation(self):
        net = MlpNet((1, 1, 1))
        net.weights[0][...] = -1.0
        net.weights[1][...] = 1.0
        assert forward(net, np.array([1.0]))[0] == 0.0

    def test_single_and_batch_agree(self, rng):
        net = MlpNet.init((2, 8, 3), rng)
        x = rng.standard_normal((4, 2))
        batch = forward(net, x)
        for i in range(4):
            # BLAS may sum in a different order for one row; equal up to rounding
            np.testing.assert_allclose(forward(net, x[i]), batch[i], rtol=1e-12, atol=1e-15)

    def test_dimension_mismatch(self, rng):
        net = MlpNet.init((2, 8, 1), rng)
        with pytest.raises(ContractError):
            forward(net, np.zeros((4, 3)))

    def test_bad_param_vector(self):
        with pytest.raises(ContractError):
            MlpNet((2, 3, 1), params=np.zeros(5))

    def test_views_alias_flat_params(self, rng):
        net = MlpNet.init((2, 3, 1), rng)
        net.params[:] = 0.0
        assert np.all(net.weights[0] == 0.0) and np.all(net.biases[1] == 0.0)

    def test_output_layer_is_shrunk(self, rng):
        net = MlpNet.init((4, 64, 1), rng, output_scale=1e-2)
        assert np.max(np.abs(net.weights[1])) <= 1e-2 / np.sqrt(64)


class TestBackward:
    def test_linear_unit(self):
        w, b, x = 1.7, -0.4, 2.5
        net = affine_net([[w]], [b])
        grads, gin = backward(net, np.array([x]), np.array([1.0]))
        assert grads.weights[0][0, 0] == x
        assert grads.biases[0][0] == 1.0
        assert gin[0] == w

    def test_zero_output_grad(self, rng):
        net = MlpNet.init((3, 5, 2), rng)
        grads, gin = backward(net, rng.standard_normal((4, 3)), np.zeros((4, 2)))
        assert not grads.flat.any() and not gin.any()

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            assert check_backward(rng) < 1e-6

    def test_batch_gradient_is_sum_of_rows(self, rng):
        net = MlpNet.init((2, 6, 1), rng, output_scale=1.0)
        x = rng.standard_normal((3, 2))
        g = rng.standard_normal((3, 1))
        total, _ = backward(net, x, g)
        parts = sum(backward(net, x[i], g[i])[0].flat for i in range(3))
        np.testing.assert_allclose(total.flat, parts, rtol=1e-12, atol=1e-14)

    def test_output_grad_shape_checked(self, rng):
        net = MlpNet.init((2, 6, 1), rng)
        with pytest.raises(ContractError):
            backward(net, np.zeros((3, 2)), np.zeros((3, 2)))

    def test_skip_flags(self, rng):
        net = MlpNet.init((2, 6, 1), rng)
        grads, gin = backward(net, np.zeros((3, 2)), np.ones((3, 1)), need_params=False)
        assert grads is None and gin.shape == (3, 2)

    def test_finite_difference_helper(self):
        # d/dp sum(p^3) = 3p^2
        p = np.array([0.5, -1.0, 2.0])
        num = numeric_grad(lambda: float(np.sum(p ** 3)), p)
        assert rel_error(3 * p ** 2, num) < 1e-9


class TestAdam:
    def test_first_step_magnitude_is_lr(self):
        p = np.array([0.0])
        st_ = AdamState.for_shape(1, lr=3e-4)
        adam_update(st_, p, np.array([1.0]))
        assert p[0] == pytest.approx(-3e-4, rel=1e-6)

    def test_zero_gradient_on_fresh_state(self):
        p = np.array([1.0, -2.0])
        adam_update(AdamState.for_shape(2), p, np.zeros(2))
        np.testing.assert_array_equal(p, [1.0, -2.0])

    def test_zero_gradient_decays_moments(self):
        p = np.array([1.0, -2.0])
        st_ = AdamState.for_shape(2)
        adam_update(st_, p, np.array([1.0, -1.0]))
        m0, v0 = st_.m.copy(), st_.v.copy()
        adam_update(st_, p, np.zeros(2))
        np.testing.assert_allclose(st_.m, 0.9 * m0, rtol=1e-15)
        np.testing.assert_allclose(st_.v, 0.999 * v0, rtol=1e-15)

    def test_two_identical_gradients_closed_form(self):
        g, lr, eps = 0.37, 1e-3, 1e-8
        p = np.array([0.0])
        st_ = AdamState.for_shape(1, lr=lr, eps=eps)
        adam_update(st_, p, np.array([g]))
        first = p[0]
        adam_update(st_, p, np.array([g]))
        # with constant gradients the bias-corrected moments are exactly g and g^2
        expected_step = lr * g / (abs(g) + eps)
        assert -first == pytest.approx(expected_step, rel=1e-12)
        assert first - p[0] == pytest.approx(expected_step, rel=1e-12)

    def test_two_different_gradients_closed_form(self):
        g1, g2, lr, b1, b2, eps = 2.0, -0.5, 1e-2, 0.9, 0.999, 1e-8
        p = np.array([1.0])
        st_ = AdamState.for_shape(1, lr=lr)
        adam_update(st_, p, np.array([g1]))
        adam_update(st_, p, np.array([g2]))
        m2 = b1 * (1 - b1) * g1 + (1 - b1) * g2
        v2 = b2 * (1 - b2) * g1 ** 2 + (1 - b2) * g2 ** 2
        step2 = lr * (m2 / (1 - b1 ** 2)) / (np.sqrt(v2 / (1 - b2 ** 2)) + eps)
        step1 = lr * g1 / (abs(g1) + eps)
        assert p[0] == pytest.approx(1.0 - step1 - step2, rel=1e-12)

    def test_non_finite_gradient_names_network(self, rng):
        net = MlpNet.init((2, 3, 1), rng, name="critic_q")
        grads = MlpGrads.zeros_like(net)
        grads.flat[0] = np.nan
        with pytest.raises(NonFiniteGradientError, match="critic_q"):
            adam_step(AdamState.for_net(net), net, grads)


class TestSoftUpdate:
    def test_tau_one_copies(self, rng):
        a, b = MlpNet.init((2, 3, 1), rng), MlpNet.init((2, 3, 1), rng)
        soft_update(a, b, 1.0)
        np.testing.assert_array_equal(a.params, b.params)

    def test_default_tau(self):
        target = affine_net([[0.0]], [0.0])
        online = affine_net([[1.0]], [1.0])
        soft_update(target, online, 0.01)
        np.testing.assert_allclose(target.params, 0.01)

    @pytest.mark.parametrize("tau", [0.0, -0.1, 1.5])
    def test_bad_tau(self, tau, rng):
        a = MlpNet.init((2, 3, 1), rng)
        with pytest.raises(ValueError):
            soft_update(a, a.copy(), tau)

    @settings(max_examples=50, deadline=None)
    @given(tau=st.floats(1e-3, 1.0), seed=st.integers(0, 2 ** 16))
    def test_fixed_point_and_contraction(self, tau, seed):
        r = np.random.default_rng(seed)
        online = MlpNet.init((2, 4, 1), r)
        same = online.copy()
        soft_update(same, online, tau)
        np.testing.assert_allclose(same.params, online.params, rtol=0, atol=1e-15)
        target = MlpNet.init((2, 4, 1), r)
        gap = np.linalg.norm(target.params - online.params)
        soft_update(target, online, tau)
        after = np.linalg.norm(target.params - online.params)
        assert after == pytest.approx((1 - tau) * gap, rel=1e-9, abs=1e-15)


class TestSnapshots:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        nets = {"q": MlpNet.init((3, 5, 1), rng), "policy": MlpNet.init((1, 4, 2), rng)}
        path = tmp_path / "nets.json"
        save_nets(path, nets)
        back = load_nets(path)
        for k in nets:
            assert back[k].sizes == nets[k].sizes
            np.testing.assert_array_equal(back[k].params, nets[k].params)

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "nets.json"
        path.write_text(json.dumps({"version": 99, "nets": {}}))
        with pytest.raises(ValueError):
            load_nets(path)


@settings(max_examples=30, deadline=None)
@given(x=arrays(np.float64, (4, 2), elements=st.floats(-5, 5)))
def test_forward_is_piecewise_linear_in_scale(x):
    # ReLU nets without biases are positively homogeneous
    net = MlpNet.init((2, 6, 1), np.random.default_rng(0), output_scale=1.0)
    for b in net.biases:
        b[...] = 0.0
    np.testing.assert_allclose(forward(net, 3.0 * x), 3.0 * forward(net, x), rtol=1e-12, atol=1e-12)
