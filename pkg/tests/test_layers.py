import numpy as np
import pytest

from mricascade import (
    ComplexImage,
    ConvLayer,
    InvalidParameterError,
    InvalidShapeError,
    Rng,
    conv_backward,
    conv_forward,
    he_init,
    relu_backward,
    relu_forward,
    residual_add,
)
from mricascade.gradcheck import check_conv, check_relu, numeric_gradient, relative_error

from oracles import naive_conv2d


def identity_layer(dtype=np.float64):
    w = np.zeros((1, 1, 3, 3), dtype=dtype)
    w[0, 0, 1, 1] = 1.0
    return ConvLayer(w, np.zeros(1, dtype=dtype))


class TestHeInit:
    def test_sample_std_matches_fan_in(self):
        # sqrt(2 / (64*3*3)) ~ 0.0589; ~10^4 draws land within 5%
        layer = he_init(Rng(0), n_out=13, n_in=64, k=3, dtype=np.float64)
        expected = np.sqrt(2.0 / (64 * 9))
        assert abs(expected - 0.0589) < 1e-3
        assert abs(layer.weights.std() - expected) / expected < 0.05

    def test_biases_zero(self):
        layer = he_init(Rng(1), 8, 4, 3)
        assert np.all(layer.bias == 0.0)

    def test_determinism(self):
        a = he_init(Rng(2), 4, 2, 3, dtype=np.float64)
        b = he_init(Rng(2), 4, 2, 3, dtype=np.float64)
        assert np.array_equal(a.weights, b.weights)

    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidParameterError):
            he_init(Rng(0), 4, 2, 4)


class TestConvForward:
    def test_identity_kernel(self):
        x = Rng(3).gen.standard_normal((1, 6, 6))
        out, _ = conv_forward(identity_layer(), x)
        assert np.allclose(out, x)

    def test_ones_kernel_counts_window_coverage(self):
        w = np.ones((1, 1, 3, 3))
        layer = ConvLayer(w, np.zeros(1))
        out, _ = conv_forward(layer, np.ones((1, 5, 5)))
        assert np.allclose(out[0, 1:-1, 1:-1], 9.0)  # interior sees the full window
        for i, j in [(0, 0), (0, 4), (4, 0), (4, 4)]:
            assert out[0, i, j] == 4.0  # corners see a 2x2 window

    def test_zero_weights_give_bias(self):
        layer = ConvLayer(np.zeros((2, 1, 3, 3)), np.array([1.5, -0.5]))
        out, _ = conv_forward(layer, Rng(0).gen.standard_normal((1, 4, 4)))
        assert np.allclose(out[0], 1.5)
        assert np.allclose(out[1], -0.5)

    def test_channel_mismatch_rejected(self):
        layer = he_init(Rng(0), 2, 3, 3)
        with pytest.raises(InvalidShapeError):
            conv_forward(layer, np.zeros((2, 4, 4)))

    def test_shape_preserved(self):
        layer = he_init(Rng(1), 5, 3, 3, dtype=np.float64)
        out, _ = conv_forward(layer, np.zeros((3, 6, 10)))
        assert out.shape == (5, 6, 10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_quadruple_loop_oracle(self, seed):
        rng = Rng(seed)
        layer = he_init(rng, n_out=3, n_in=2, k=3, dtype=np.float64)
        layer.bias[:] = rng.gen.standard_normal(3)
        x = rng.gen.standard_normal((2, 5, 7))
        got, _ = conv_forward(layer, x)
        expect = naive_conv2d(layer.weights, layer.bias, x)
        scale = np.max(np.abs(expect))
        assert np.max(np.abs(got - expect)) < 1e-10 * scale


class TestConvBackward:
    def test_finite_difference_agreement(self):
        # random 1 -> 2 channel layer on a 6x6 input, all three gradients
        for result in check_conv(seed=0):
            assert result.max_error < 1e-6, result

    def test_zero_grad_out(self):
        layer = he_init(Rng(0), 2, 1, 3, dtype=np.float64)
        x = Rng(1).gen.standard_normal((1, 6, 6))
        out, cache = conv_forward(layer, x)
        gi, gw, gb = conv_backward(layer, cache, np.zeros_like(out))
        assert np.all(gi == 0) and np.all(gw == 0) and np.all(gb == 0)

    def test_identity_kernel_passes_gradient_through(self):
        layer = identity_layer()
        x = Rng(2).gen.standard_normal((1, 6, 6))
        _, cache = conv_forward(layer, x)
        grad_out = Rng(3).gen.standard_normal((1, 6, 6))
        gi, _, _ = conv_backward(layer, cache, grad_out)
        assert np.array_equal(gi, grad_out)

    def test_grad_b_is_spatial_sum(self):
        layer = he_init(Rng(4), 3, 2, 3, dtype=np.float64)
        x = Rng(5).gen.standard_normal((2, 4, 4))
        out, cache = conv_forward(layer, x)
        grad_out = Rng(6).gen.standard_normal(out.shape)
        _, _, gb = conv_backward(layer, cache, grad_out)
        assert np.allclose(gb, grad_out.sum(axis=(1, 2)))

    def test_shape_mismatch_rejected(self):
        layer = he_init(Rng(0), 2, 1, 3)
        _, cache = conv_forward(layer, np.zeros((1, 4, 4), dtype=np.float32))
        with pytest.raises(InvalidShapeError):
            conv_backward(layer, cache, np.zeros((2, 5, 5), dtype=np.float32))


class TestRelu:
    def test_forward_clamps_negatives(self):
        out, _ = relu_forward(np.array([-1.0, 0.0, 2.0]))
        assert out.tolist() == [0.0, 0.0, 2.0]

    def test_backward_zero_subgradient_at_zero(self):
        x = np.array([-1.0, 0.0, 2.0])
        _, cache = relu_forward(x)
        grad = relu_backward(cache, np.array([5.0, 5.0, 5.0]))
        assert grad.tolist() == [0.0, 0.0, 5.0]

    def test_finite_difference_away_from_kink(self):
        assert check_relu(seed=0).max_error < 1e-8


class TestResidualAdd:
    def test_zero_module_output_is_identity(self):
        x = ComplexImage(Rng(0).gen.standard_normal((2, 4, 4)))
        out = residual_add(ComplexImage.zeros(4, 4, dtype=np.float64), x)
        assert np.array_equal(out.channels, x.channels)

    def test_zero_input_passes_module_output(self):
        m = ComplexImage(Rng(1).gen.standard_normal((2, 4, 4)))
        out = residual_add(m, ComplexImage.zeros(4, 4, dtype=np.float64))
        assert np.array_equal(out.channels, m.channels)

    def test_gradient_flows_to_both_branches(self):
        # f(a, b) = sum((a + b) * G): both partials equal G
        rng = Rng(2)
        a = rng.gen.standard_normal((2, 4, 4))
        b = rng.gen.standard_normal((2, 4, 4))
        g_up = rng.gen.standard_normal((2, 4, 4))

        def f_a(av):
            return float(np.sum(residual_add(ComplexImage(av), ComplexImage(b)).channels * g_up))

        def f_b(bv):
            return float(np.sum(residual_add(ComplexImage(a), ComplexImage(bv)).channels * g_up))

        assert relative_error(g_up, numeric_gradient(f_a, a)) < 1e-9
        assert relative_error(g_up, numeric_gradient(f_b, b)) < 1e-9

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidShapeError):
            residual_add(ComplexImage.zeros(4, 4), ComplexImage.zeros(4, 6))
