"""Gradient and value checks for the autodiff engine, layer by layer."""

import numpy as np
import pytest
from gradcheck import numeric_grad, rel_error

from paprlab import autodiff as ad
from paprlab.autodiff import Tensor
from paprlab.errors import DegenerateInputError
from paprlab.layers import BatchNorm1d, Conv1d, Linear
from paprlab.metrics import SpectralParams, acpr, papr, psd

RNG = np.random.default_rng(2024)

GRAD_TOL = 1e-4
FD_STEP = 1e-5


def check_grad(build_loss, arrays, eps=FD_STEP, tol=GRAD_TOL):
    """Compare engine gradients against central differences for each input."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build_loss(*tensors)
    loss.backward()
    for i, t in enumerate(tensors):
        def f(x, i=i):
            args = [Tensor(a) for a in arrays]
            args[i] = Tensor(x)
            return build_loss(*args).item()
        numeric = numeric_grad(f, arrays[i], eps=eps)
        assert t.grad is not None, f"input {i} received no gradient"
        err = rel_error(t.grad, numeric)
        assert err < tol, f"input {i}: rel error {err:.3e}"


def scalarize(t: Tensor) -> Tensor:
    """Reduce any tensor to a scalar with fixed random weights (real path)."""
    if np.iscomplexobj(t.data):
        t = ad.complex_to_interleaved(t)
    w = Tensor(np.linspace(0.3, 1.1, t.data.size).reshape(t.data.shape))
    return ad.sq_norm(t * w)


class TestEngineBasics:
    def test_add_mul_grads(self):
        a = RNG.standard_normal((3, 4))
        b = RNG.standard_normal((3, 4))
        check_grad(lambda x, y: ad.sq_norm(x * y + x), [a, b])

    def test_broadcast_add(self):
        a = RNG.standard_normal((3, 4))
        b = RNG.standard_normal((4,))
        check_grad(lambda x, y: ad.sq_norm(x + y), [a, b])

    def test_scalar_ops(self):
        a = RNG.standard_normal((5,))
        check_grad(lambda x: ad.sq_norm(2.5 * x - 1.0), [a])

    def test_matmul_grads(self):
        a = RNG.standard_normal((3, 4))
        b = RNG.standard_normal((4, 2))
        check_grad(lambda x, y: ad.sq_norm(ad.matmul(x, y)), [a, b])

    def test_linear_grads(self):
        x = RNG.standard_normal((4, 3))
        w = RNG.standard_normal((3, 5))
        b = RNG.standard_normal(5)
        check_grad(lambda *args: ad.sq_norm(ad.linear(*args)), [x, w, b])

    def test_reshape_grads(self):
        x = RNG.standard_normal((2, 6))
        check_grad(lambda t: ad.sq_norm(ad.reshape(t, (3, 4))), [x])

    def test_no_tape_for_constants(self):
        out = Tensor(np.ones(3)) + Tensor(np.ones(3))
        assert out._backward is None and not out.requires_grad

    def test_reused_node_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        y = x * x  # dy/dx = 2x via two paths
        y.backward()
        assert x.grad[0] == pytest.approx(6.0)

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            (x * 2.0).backward()


class TestActivations:
    def test_selu_values(self):
        x = Tensor(np.array([0.0, 1.0, -1000.0]))
        out = ad.selu(x).data
        assert out[0] == 0.0
        assert out[1] == pytest.approx(1.0507, abs=1e-4)
        assert out[2] == pytest.approx(-1.7581, abs=1e-4)

    def test_selu_grad(self):
        x = RNG.standard_normal((4, 7)) * 2
        check_grad(lambda t: ad.sq_norm(ad.selu(t)), [x])

    def test_relu_grad(self):
        x = RNG.standard_normal((4, 7)) + 0.1
        check_grad(lambda t: ad.sq_norm(ad.relu(t)), [x])


class TestConv1d:
    def test_identity_kernel(self):
        x = RNG.standard_normal((2, 1, 10))
        w = np.array([[[0.0, 1.0, 0.0]]])
        b = np.zeros(1)
        out = ad.conv1d(Tensor(x), Tensor(w), Tensor(b), padding=2).data
        assert out.shape == (2, 1, 12)
        np.testing.assert_allclose(out[:, :, 1:11], x)
        np.testing.assert_allclose(out[:, :, 0], 0.0)
        np.testing.assert_allclose(out[:, :, 11], 0.0)

    def test_zero_weights_give_bias(self):
        x = RNG.standard_normal((2, 3, 8))
        w = np.zeros((4, 3, 3))
        b = np.array([1.0, -2.0, 0.5, 3.0])
        out = ad.conv1d(Tensor(x), Tensor(w), Tensor(b), padding=2).data
        np.testing.assert_allclose(out, np.broadcast_to(b[:, None], (2, 4, 10)))

    def test_matches_nested_loop_oracle(self):
        x = RNG.standard_normal((2, 2, 7))
        w = RNG.standard_normal((3, 2, 3))
        b = RNG.standard_normal(3)
        padding = 2
        got = ad.conv1d(Tensor(x), Tensor(w), Tensor(b), padding=padding).data

        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
        out_len = 7 + 2 * padding - 3 + 1
        want = np.zeros((2, 3, out_len))
        for bi in range(2):
            for o in range(3):
                for pos in range(out_len):
                    acc = b[o]
                    for c in range(2):
                        for k in range(3):
                            acc += w[o, c, k] * xp[bi, c, pos + k]
                    want[bi, o, pos] = acc
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_grads(self):
        x = RNG.standard_normal((2, 2, 7))
        w = RNG.standard_normal((3, 2, 3))
        b = RNG.standard_normal(3)
        check_grad(lambda *args: ad.sq_norm(ad.conv1d(*args, padding=2)), [x, w, b])

    def test_channel_mismatch(self):
        with pytest.raises(ValueError, match="channel"):
            ad.conv1d(Tensor(np.zeros((1, 2, 5))), Tensor(np.zeros((3, 4, 3))),
                      Tensor(np.zeros(3)))


class TestBatchNorm:
    def test_training_standardizes(self):
        bn = BatchNorm1d(5)
        x = Tensor(RNG.standard_normal((8, 5, 12)) * 3 + 1)
        out = bn(x).data  # gamma=1, beta=0 at init
        np.testing.assert_allclose(out.mean(axis=(0, 2)), 0.0, atol=1e-6)
        np.testing.assert_allclose(out.var(axis=(0, 2)), 1.0, atol=1e-3)

    def test_standardized_input_is_fixed_point(self):
        bn = BatchNorm1d(2)
        raw = RNG.standard_normal((64, 2, 16))
        raw = (raw - raw.mean(axis=(0, 2), keepdims=True)) / raw.std(axis=(0, 2), keepdims=True)
        out = bn(Tensor(raw)).data
        np.testing.assert_allclose(out, raw, atol=1e-4)

    def test_eval_mode_uses_running_stats(self):
        bn = BatchNorm1d(3)
        for _ in range(200):
            bn(Tensor(RNG.standard_normal((16, 3, 8)) * 2 + 5))
        bn.eval()
        x = RNG.standard_normal((4, 3, 8)) * 2 + 5
        out = bn(Tensor(x)).data
        expect = (x - bn.running_mean[:, None]) / np.sqrt(bn.running_var[:, None] + bn.eps)
        np.testing.assert_allclose(out, expect, atol=1e-12)

    def test_batch_of_one_rejected_in_training(self):
        bn = BatchNorm1d(2)
        with pytest.raises(ValueError, match="batch"):
            bn(Tensor(np.zeros((1, 2, 4))))

    def test_grads_training_mode(self):
        x = RNG.standard_normal((4, 3, 5))
        gamma = RNG.standard_normal(3) + 1.5
        beta = RNG.standard_normal(3)

        def loss(xt, gt, bt):
            rm = np.zeros(3)
            rv = np.ones(3)
            return ad.sq_norm(ad.batch_norm(xt, gt, bt, rm, rv, training=True))
        check_grad(loss, [x, gamma, beta])

    def test_grads_eval_mode(self):
        x = RNG.standard_normal((4, 3, 5))
        gamma = RNG.standard_normal(3) + 1.5
        beta = RNG.standard_normal(3)
        rm = RNG.standard_normal(3)
        rv = np.abs(RNG.standard_normal(3)) + 0.5

        def loss(xt, gt, bt):
            return ad.sq_norm(ad.batch_norm(xt, gt, bt, rm.copy(), rv.copy(), training=False))
        check_grad(loss, [x, gamma, beta])


class TestComplexBridging:
    def test_interleaved_roundtrip(self):
        z = RNG.standard_normal((3, 8)) + 1j * RNG.standard_normal((3, 8))
        x = ad.complex_to_interleaved(Tensor(z))
        assert x.data.shape == (3, 16)
        back = ad.interleaved_to_complex(x)
        np.testing.assert_array_equal(back.data, z)

    def test_channels_roundtrip(self):
        z = RNG.standard_normal((3, 8)) + 1j * RNG.standard_normal((3, 8))
        x = ad.complex_to_channels(Tensor(z))
        assert x.data.shape == (3, 2, 8)
        np.testing.assert_array_equal(ad.channels_to_complex(x).data, z)

    def test_interleaved_grads(self):
        z = RNG.standard_normal((2, 4)) + 1j * RNG.standard_normal((2, 4))
        check_grad(lambda t: scalarize(ad.complex_to_interleaved(t)), [z])

    def test_channels_grads(self):
        z = RNG.standard_normal((2, 4)) + 1j * RNG.standard_normal((2, 4))
        check_grad(lambda t: scalarize(ad.complex_to_channels(t)), [z])

    def test_real_to_complex_grads(self):
        x = RNG.standard_normal((2, 8))
        check_grad(lambda t: scalarize(ad.interleaved_to_complex(t)), [x])


class TestChainOps:
    def test_complex_scale_value_and_grad(self):
        z = RNG.standard_normal((2, 6)) + 1j * RNG.standard_normal((2, 6))
        c = 0.7 - 0.4j
        out = ad.complex_scale(Tensor(z), c)
        np.testing.assert_allclose(out.data, z * c)
        check_grad(lambda t: scalarize(ad.complex_scale(t, c)), [z])

    def test_add_constant_grad(self):
        z = RNG.standard_normal((2, 6)) + 1j * RNG.standard_normal((2, 6))
        w = RNG.standard_normal((2, 6)) + 1j * RNG.standard_normal((2, 6))
        out = ad.add_constant(Tensor(z), w)
        np.testing.assert_allclose(out.data, z + w)
        check_grad(lambda t: scalarize(ad.add_constant(t, w)), [z])

    def test_bandpass_matches_ofdm_bpf(self):
        from paprlab.ofdm import bpf
        z = RNG.standard_normal((3, 32)) + 1j * RNG.standard_normal((3, 32))
        out = ad.bandpass(Tensor(z), 8)
        np.testing.assert_allclose(out.data, bpf(z, 4), atol=1e-13)

    def test_bandpass_grad(self):
        z = RNG.standard_normal((2, 16)) + 1j * RNG.standard_normal((2, 16))
        check_grad(lambda t: scalarize(ad.bandpass(t, 4)), [z])

    def test_dft_unpad_matches_demodulate(self):
        from paprlab.ofdm import ofdm_demodulate
        z = RNG.standard_normal((3, 32)) + 1j * RNG.standard_normal((3, 32))
        out = ad.dft_unpad(Tensor(z), 8)
        np.testing.assert_allclose(out.data, ofdm_demodulate(z, 4), atol=1e-13)

    def test_dft_unpad_grad(self):
        z = RNG.standard_normal((2, 16)) + 1j * RNG.standard_normal((2, 16))
        check_grad(lambda t: scalarize(ad.dft_unpad(t, 4)), [z])

    def test_rapp_matches_frontend(self):
        from paprlab.frontend import HpaParams, rapp_amplify
        z = RNG.standard_normal((2, 50)) + 1j * RNG.standard_normal((2, 50))
        hpa = HpaParams(a0=0.9, v=1.2, p=2.0)
        out = ad.rapp_nonlinearity(Tensor(z), hpa.a0, hpa.v, hpa.p)
        np.testing.assert_allclose(out.data, rapp_amplify(z, hpa), rtol=1e-12)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
    def test_rapp_grad(self, p):
        z = RNG.standard_normal((2, 10)) + 1j * RNG.standard_normal((2, 10))
        check_grad(lambda t: scalarize(ad.rapp_nonlinearity(t, 1.0, 1.0, p)), [z])

    def test_rapp_grad_survives_zero_sample(self):
        z = RNG.standard_normal((1, 6)) + 1j * RNG.standard_normal((1, 6))
        z[0, 2] = 0.0
        t = Tensor(z, requires_grad=True)
        loss = scalarize(ad.rapp_nonlinearity(t, 1.0, 1.0, 2.0))
        loss.backward()
        assert np.all(np.isfinite(t.grad.real)) and np.all(np.isfinite(t.grad.imag))

    def test_power_norm_value(self):
        z = 3.0 * (RNG.standard_normal((4, 8)) + 1j * RNG.standard_normal((4, 8)))
        out = ad.power_norm(Tensor(z))
        assert np.mean(np.abs(out.data) ** 2) == pytest.approx(1.0, abs=1e-9)

    def test_power_norm_grad_couples_batch(self):
        z = RNG.standard_normal((3, 6)) + 1j * RNG.standard_normal((3, 6))
        check_grad(lambda t: scalarize(ad.power_norm(t)), [z])

    def test_power_norm_zero_batch(self):
        with pytest.raises(DegenerateInputError):
            ad.power_norm(Tensor(np.zeros((2, 4), dtype=complex)))


class TestLossHeads:
    def test_mse_value_and_grad(self):
        z = RNG.standard_normal((3, 5)) + 1j * RNG.standard_normal((3, 5))
        target = RNG.standard_normal((3, 5)) + 1j * RNG.standard_normal((3, 5))
        out = ad.mse_complex(Tensor(z), target)
        assert out.item() == pytest.approx(np.mean(np.abs(z - target) ** 2))
        check_grad(lambda t: ad.mse_complex(t, target), [z])

    def test_papr_loss_matches_metric(self):
        z = RNG.standard_normal((6, 32)) + 1j * RNG.standard_normal((6, 32))
        out = ad.papr_loss(Tensor(z))
        assert out.item() == pytest.approx(np.mean(papr(z)))

    def test_papr_loss_grad(self):
        z = RNG.standard_normal((4, 16)) + 1j * RNG.standard_normal((4, 16))
        check_grad(lambda t: ad.papr_loss(t), [z])

    def test_acpr_value_matches_metric(self):
        z = RNG.standard_normal((8, 32)) + 1j * RNG.standard_normal((8, 32))
        sp = SpectralParams(bw_bins=8)
        out = ad.acpr_value(Tensor(z), 8)
        assert out.item() == pytest.approx(acpr(psd(z), sp), abs=1e-9)

    def test_acpr_grad_hard_max(self):
        z = RNG.standard_normal((3, 32)) + 1j * RNG.standard_normal((3, 32))
        check_grad(lambda t: ad.acpr_value(t, 8), [z])

    def test_acpr_grad_smooth_max(self):
        z = RNG.standard_normal((3, 32)) + 1j * RNG.standard_normal((3, 32))
        check_grad(lambda t: ad.acpr_value(t, 8, smooth_temp=10.0), [z])

    def test_sq_norm_grad(self):
        x = RNG.standard_normal((3, 4))
        check_grad(lambda t: ad.sq_norm(t), [x])


class TestLayerModules:
    def test_linear_layer_shapes_and_grad(self):
        rng = np.random.default_rng(0)
        layer = Linear(6, 4, rng)
        x = Tensor(RNG.standard_normal((5, 6)), requires_grad=True)
        out = ad.sq_norm(layer(x))
        out.backward()
        assert layer.w.grad.shape == (6, 4)
        assert layer.b.grad.shape == (4,)
        assert x.grad.shape == (5, 6)

    def test_conv_layer_params_registered(self):
        rng = np.random.default_rng(0)
        layer = Conv1d(2, 3, rng)
        names = [n for n, _ in layer.named_parameters()]
        assert names == ["w", "b"]
