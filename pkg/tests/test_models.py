import numpy as np
import pytest

from paprlab.autodiff import Tensor
from paprlab.models import (
    CaeModel,
    FcAeModel,
    build_model,
    load_checkpoint,
    save_checkpoint,
    transmitter_conv_weight_count,
)
from paprlab.ofdm import ofdm_modulate, qam4_map
from paprlab.optim import AdamW


def small_cae(**kw):
    args = dict(n_subcarriers=8, oversampling=4, enc_channels=(13, 11),
                dec_channels=(11, 13), seed=1)
    args.update(kw)
    return CaeModel(**args)


class TestArchitecture:
    def test_transmitter_conv_weight_count_is_468(self):
        model = CaeModel()  # stock 72-subcarrier configuration
        assert transmitter_conv_weight_count(model) == 468
        # 3*1*13 kernel weights in the first layer, 3*13*11 in the second
        assert model.encoder.conv1.w.data.size == 39
        assert model.encoder.conv2.w.data.size == 429

    def test_count_invariant_to_system_size(self):
        assert transmitter_conv_weight_count(small_cae()) == 468

    def test_channels_layout_changes_first_conv(self):
        model = small_cae(layout="channels")
        assert model.encoder.conv1.w.data.shape == (13, 2, 3)

    def test_fc_ae_parameter_count_order(self):
        model = FcAeModel()  # 2500/3500 hidden at the stock system size
        assert 5e6 <= model.num_parameters() <= 5e7

    def test_forward_shapes(self):
        model = small_cae()
        model.eval()
        rng = np.random.default_rng(0)
        x = ofdm_modulate(qam4_map(rng.integers(0, 2, (4, 16))), 4)
        tx = model.encode(Tensor(x))
        assert tx.data.shape == (4, 32)
        assert np.mean(np.abs(tx.data) ** 2) == pytest.approx(1.0, abs=1e-9)
        rx = model.decode(Tensor(np.zeros((4, 8), dtype=complex)))
        assert rx.data.shape == (4, 8)

    @pytest.mark.parametrize("layout", ["interleaved", "channels"])
    def test_layouts_run(self, layout):
        model = small_cae(layout=layout)
        model.eval()
        rng = np.random.default_rng(1)
        x = ofdm_modulate(qam4_map(rng.integers(0, 2, (4, 16))), 4)
        assert model.encode(Tensor(x)).data.shape == (4, 32)

    def test_fc_ae_forward(self):
        model = FcAeModel(n_subcarriers=8, oversampling=4, hidden=(32, 48), seed=2)
        model.eval()
        rng = np.random.default_rng(2)
        x = ofdm_modulate(qam4_map(rng.integers(0, 2, (4, 16))), 4)
        assert model.encode(Tensor(x)).data.shape == (4, 32)
        assert model.decode(Tensor(np.zeros((4, 8), complex))).data.shape == (4, 8)

    def test_construction_is_seeded(self):
        a = small_cae(seed=7)
        b = small_cae(seed=7)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_relu_option(self):
        model = small_cae(activation="relu")
        model.eval()
        rng = np.random.default_rng(3)
        x = ofdm_modulate(qam4_map(rng.integers(0, 2, (2, 16))), 4)
        assert np.all(np.isfinite(model.encode(Tensor(x)).data.real))

    def test_unknown_activation_rejected(self):
        with pytest.raises(ValueError, match="activation"):
            small_cae(activation="tanh")


class TestCheckpoint:
    def test_roundtrip_is_bit_exact(self, tmp_path):
        model = small_cae(seed=3)
        # dirty the BN running stats so buffers are non-trivial
        rng = np.random.default_rng(4)
        x = ofdm_modulate(qam4_map(rng.integers(0, 2, (8, 16))), 4)
        model.encode(Tensor(x))
        opt = AdamW(model.parameters(), lr=1e-3)
        for p in model.parameters():
            p.grad = np.ones_like(p.data)
        opt.step()

        path = tmp_path / "model.npz"
        save_checkpoint(path, model, optimizer=opt, epoch=5, seed=99)
        ck = load_checkpoint(path)
        assert ck.epoch == 5 and ck.seed == 99
        want = model.state_dict()
        got = ck.model.state_dict()
        assert sorted(want) == sorted(got)
        for name in want:
            np.testing.assert_array_equal(want[name], got[name], err_msg=name)
        assert ck.optimizer_state["step"] == 1
        for m_got, m_want in zip(ck.optimizer_state["m"], opt.m):
            np.testing.assert_array_equal(m_got, m_want)

    def test_same_model_writes_identical_bytes(self, tmp_path):
        model = small_cae(seed=5)
        p1, p2 = tmp_path / "a.npz", tmp_path / "b.npz"
        save_checkpoint(p1, model, epoch=1, seed=1)
        save_checkpoint(p2, model, epoch=1, seed=1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_fc_ae_roundtrip(self, tmp_path):
        model = FcAeModel(n_subcarriers=8, oversampling=4, hidden=(16, 24), seed=6)
        path = tmp_path / "fc.npz"
        save_checkpoint(path, model)
        ck = load_checkpoint(path)
        assert isinstance(ck.model, FcAeModel)
        assert ck.model.descriptor() == model.descriptor()

    def test_build_model_rejects_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            build_model({"kind": "mystery"})

    def test_reloaded_model_reproduces_outputs(self, tmp_path):
        model = small_cae(seed=8)
        model.eval()
        rng = np.random.default_rng(9)
        x = ofdm_modulate(qam4_map(rng.integers(0, 2, (4, 16))), 4)
        before = model.encode(Tensor(x)).data
        path = tmp_path / "m.npz"
        save_checkpoint(path, model)
        reloaded = load_checkpoint(path).model
        reloaded.eval()
        np.testing.assert_array_equal(reloaded.encode(Tensor(x)).data, before)
