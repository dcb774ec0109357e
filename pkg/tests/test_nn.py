"""Differentiable-core checks: attention semantics, encoder size
invariance, analytic-vs-numeric gradients, head densities, and Adam."""

import math

import numpy as np
import pytest

from gradcheck import finite_diff_check
from uavmec import nn
from uavmec.autodiff import Tensor, concat, no_grad, parameter, softmax


class TestScaledDotAttention:
    def test_single_unit_vector_returns_value(self):
        q = k = np.array([[1.0]])
        v = np.array([[42.0]])
        out = nn.scaled_dot_attention(q, k, v, 1.0)
        assert out.data == pytest.approx(np.array([[42.0]]))

    def test_two_identical_keys_average_values(self):
        q = np.array([[0.3, -0.7]])
        k = np.array([[0.5, 0.1], [0.5, 0.1]])
        v = np.array([[2.0, 0.0], [4.0, 6.0]])
        out = nn.scaled_dot_attention(q, k, v, 2.0)
        assert np.allclose(out.data, [[3.0, 3.0]])

    def test_random_case_against_direct_evaluation(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(3, 4))
        k = rng.normal(size=(3, 4))
        v = rng.normal(size=(3, 4))
        out = nn.scaled_dot_attention(q, k, v, 4.0)
        scores = q @ k.T / math.sqrt(4.0)
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights = e / e.sum(axis=1, keepdims=True)
        assert np.allclose(out.data, weights @ v, rtol=1e-13, atol=1e-15)

    def test_rows_are_probability_vectors(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = Tensor(rng.normal(scale=5.0, size=(6, 7)))
            w = softmax(x, axis=-1).data
            assert np.all(w >= 0)
            assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-12)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            nn.scaled_dot_attention(np.ones((2, 3)), np.ones((2, 4)),
                                    np.ones((2, 4)), 3.0)


class TestMhaEncoder:
    def setup_method(self):
        self.spec = nn.MhaEncoderSpec(max_users=4, d_u=3, att_dim=5)
        self.rng = np.random.default_rng(7)
        self.enc = nn.MhaEncoder(self.spec, self.rng)

    def test_zero_active_users_constant_output(self):
        out = self.enc.encode(np.zeros((1, 4, 3)))
        assert out.shape == (1, 20)
        assert np.allclose(out.data, 0.0)   # no-bias projections of zero input

    def test_output_dim_constant_across_active_counts(self):
        dims = set()
        for active in range(0, 5):
            x = np.zeros((1, 4, 3))
            x[0, :active] = self.rng.normal(size=(active, 3))
            dims.add(self.enc.encode(x).shape)
        assert dims == {(1, 20)}

    def test_padded_equals_unpadded_on_active_slots(self):
        states = self.rng.normal(size=(2, 3))
        x_two = np.zeros((1, 4, 3))
        x_two[0, :2] = states
        x_three = x_two.copy()
        x_three[0, 2] = self.rng.normal(size=3)
        a = self.enc.encode(x_two).data.reshape(4, 5)
        b = self.enc.encode(x_three).data.reshape(4, 5)
        assert np.array_equal(a[:2], b[:2])
        assert np.allclose(a[2:], [np.zeros(5), np.zeros(5)])

    def test_overflow_guard(self):
        self.spec.validate_active(4)
        with pytest.raises(ValueError):
            self.spec.validate_active(5)
        with pytest.raises(ValueError):
            self.enc.encode(np.zeros((1, 5, 3)))

    def test_forward_deterministic(self):
        x = self.rng.normal(size=(3, 4, 3))
        with no_grad():
            a = self.enc.encode(x).data
            b = self.enc.encode(x).data
        assert np.array_equal(a, b)

    def test_gradients_match_finite_differences(self):
        x = self.rng.normal(size=(2, 4, 3))
        x[:, 3] = 0.0   # one inactive slot in every batch row

        def loss():
            out = self.enc.encode(x)
            return (out * out).sum() * 0.5

        worst = finite_diff_check(loss, self.enc.parameters())
        assert worst <= 1e-4


class TestMlp:
    def test_single_linear_layer_exact(self):
        rng = np.random.default_rng(3)
        mlp = nn.MLP([4, 2], rng)
        x = rng.normal(size=(5, 4))
        expect = x @ mlp.layers[0].w.data + mlp.layers[0].b.data
        assert np.allclose(mlp(Tensor(x)).data, expect, rtol=1e-15)

    def test_bias_gradient_of_half_squared_norm(self):
        rng = np.random.default_rng(4)
        mlp = nn.MLP([3, 3], rng)
        x = rng.normal(size=(1, 3))
        out = mlp(Tensor(x))
        loss = (out * out).sum() * 0.5
        loss.backward()
        assert np.allclose(mlp.layers[0].b.grad, out.data[0], rtol=1e-12)

    def test_deep_net_gradients(self):
        rng = np.random.default_rng(5)
        mlp = nn.MLP([4, 8, 8, 2], rng)
        x = rng.normal(size=(3, 4))
        target = rng.normal(size=(3, 2))

        def loss():
            diff = mlp(Tensor(x)) - target
            return (diff * diff).mean()

        worst = finite_diff_check(loss, mlp.parameters())
        assert worst <= 1e-4


class TestGaussianHead:
    def test_log_prob_at_mean_with_unit_std(self):
        head = nn.GaussianHead(dim=3, log_std_init=0.0, squash="none")
        mean = Tensor(np.zeros((1, 3)))
        logp = head.log_prob(mean, np.zeros((1, 3)))
        assert logp.data[0] == pytest.approx(-0.5 * 3 * math.log(2 * math.pi),
                                             rel=1e-12)

    def test_entropy_monotone_in_log_std(self):
        values = []
        for ls in (-1.0, -0.5, 0.0, 0.5, 1.0):
            head = nn.GaussianHead(dim=2, log_std_init=ls)
            values.append(float(head.entropy().data))
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_monte_carlo_entropy_matches_analytic(self):
        head = nn.GaussianHead(dim=2, log_std_init=0.3, squash="none")
        rng = np.random.default_rng(9)
        mean = np.tile(np.array([[0.7, -1.2]]), (100000, 1))
        raw = head.sample_raw(mean, rng)
        logp = head.log_prob(Tensor(mean), raw).data
        mc_entropy = -float(np.mean(logp))
        analytic = float(head.entropy().data)
        assert mc_entropy == pytest.approx(analytic, rel=0.01)

    @pytest.mark.parametrize("squash,scale", [("unit", 1.0),
                                              ("symmetric", 25.0)])
    def test_squash_correction_matches_numeric_jacobian(self, squash, scale):
        head = nn.GaussianHead(dim=1, squash=squash, scale=scale)
        h = 1e-6
        for z in (-3.0, -0.4, 0.0, 1.3, 4.0):
            raw = np.array([[z]])
            fd = (head.to_action(raw + h) - head.to_action(raw - h)) / (2 * h)
            corr = head.squash_correction(raw)[0]
            assert corr == pytest.approx(math.log(float(fd[0, 0])), abs=1e-6)

    def test_squashed_actions_respect_bounds(self):
        head = nn.GaussianHead(dim=4, squash="unit")
        rng = np.random.default_rng(11)
        raw = head.sample_raw(np.zeros((1000, 4)), rng)
        act = head.to_action(raw)
        assert np.all((act > 0.0) & (act < 1.0))
        head = nn.GaussianHead(dim=2, squash="symmetric", scale=25.0)
        act = head.to_action(head.sample_raw(np.zeros((1000, 2)), rng))
        assert np.all(np.abs(act) < 25.0)

    def test_log_prob_gradients(self):
        head = nn.GaussianHead(dim=3, log_std_init=0.2, squash="unit")
        rng = np.random.default_rng(13)
        w = parameter(rng.normal(size=(2, 3)) * 0.3)
        x = rng.normal(size=(4, 2))
        raw = rng.normal(size=(4, 3))

        def loss():
            mean = Tensor(x) @ w
            return head.log_prob(mean, raw).mean()

        worst = finite_diff_check(loss, [w, head.log_std])
        assert worst <= 1e-4

    def test_sampling_deterministic_given_seed(self):
        head = nn.GaussianHead(dim=2, log_std_init=0.1)
        a = head.sample_raw(np.zeros((3, 2)), np.random.default_rng(42))
        b = head.sample_raw(np.zeros((3, 2)), np.random.default_rng(42))
        assert np.array_equal(a, b)


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = parameter(np.array([1.0, -2.0]))
        opt = nn.Adam([p], lr=0.1)
        p.grad = np.zeros(2)
        opt.step()
        assert np.array_equal(p.data, [1.0, -2.0])

    def test_first_step_magnitude_is_lr(self):
        p = parameter(np.array([0.0]))
        opt = nn.Adam([p], lr=0.01)
        p.grad = np.array([123.4])
        opt.step()
        assert abs(p.data[0] + 0.01) < 1e-6   # ~lr * sign(g)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            nn.adam_step(np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(3),
                         0.1, (0.9, 0.999), 1e-8, 1)

    def test_quadratic_bowl_convergence(self):
        target = np.array([3.0, -1.5, 0.25])
        p = parameter(np.zeros(3))
        opt = nn.Adam([p], lr=0.05)
        for _ in range(5000):
            diff = p - target
            loss = (diff * diff).sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
            if float(np.max(np.abs(p.data - target))) < 1e-6:
                break
        assert np.allclose(p.data, target, atol=1e-6)


def test_concat_and_reshape_gradients():
    rng = np.random.default_rng(21)
    a = parameter(rng.normal(size=(2, 3)))
    b = parameter(rng.normal(size=(2, 4)))

    def loss():
        joined = concat([a, b], axis=1)
        return (joined * joined).sum()

    worst = finite_diff_check(loss, [a, b])
    assert worst <= 1e-4
