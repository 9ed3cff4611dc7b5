import math

import numpy as np
import pytest

from paprlab.chain import run_chain
from paprlab.frontend import HpaParams
from paprlab.losses import LossWeights, joint_loss
from paprlab.metrics import SpectralParams, acpr, papr, psd
from paprlab.models import CaeModel
from paprlab.ofdm import ofdm_modulate, qam4_map
from paprlab.training import weight_params

N, L = 8, 4
SPECTRAL = SpectralParams(bw_bins=N)
HPA = HpaParams(ibo_db=3.0)


def make_taps(seed=0, batch=2, model=None, p_snr_db=math.inf):
    rng = np.random.default_rng(seed)
    blocks = qam4_map(rng.integers(0, 2, (batch, 2 * N)))
    x = ofdm_modulate(blocks, L)
    if model is None:
        model = CaeModel(n_subcarriers=N, oversampling=L, enc_channels=(3, 2),
                         dec_channels=(2, 3), seed=seed)
        model.train()
    noise_rng = np.random.default_rng(seed + 1) if math.isfinite(p_snr_db) else None
    taps = run_chain(model, x, HPA, p_snr_db=p_snr_db, noise_rng=noise_rng)
    return taps, blocks, model


class TestLossWeights:
    def test_defaults(self):
        w = LossWeights()
        assert w.lambda2 == pytest.approx(0.004)
        assert w.lambda3 == pytest.approx(0.001)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(lambda2=-1)


class TestJointLoss:
    def test_perfect_reconstruction_zero_weights(self):
        """With x_hat == x and all weights zero the loss vanishes."""
        taps, blocks, _ = make_taps()
        taps.decoded.data = np.array(blocks, dtype=complex)  # force perfect output
        w = LossWeights(lambda1=0, lambda2=0, lambda3=0)
        loss, parts = joint_loss(taps, blocks, w, SPECTRAL, stage=2)
        assert loss.item() == 0.0
        assert parts["l1"] == 0.0

    def test_stage2_zero_weights_equals_l1(self):
        taps, blocks, _ = make_taps(seed=1)
        w = LossWeights(lambda1=0, lambda2=0, lambda3=0)
        loss, parts = joint_loss(taps, blocks, w, SPECTRAL, stage=2)
        assert loss.item() == pytest.approx(parts["l1"])
        mse = np.mean(np.abs(taps.decoded.data - blocks) ** 2)
        assert parts["l1"] == pytest.approx(mse)

    def test_stage1_ignores_lambda2_lambda3(self):
        taps, blocks, _ = make_taps(seed=2)
        a, _ = joint_loss(taps, blocks, LossWeights(lambda1=0, lambda2=0.004, lambda3=0.001),
                          SPECTRAL, stage=1)
        taps2, blocks2, _ = make_taps(seed=2)
        b, _ = joint_loss(taps2, blocks2, LossWeights(lambda1=0, lambda2=99.0, lambda3=42.0),
                          SPECTRAL, stage=1)
        assert a.item() == pytest.approx(b.item())

    def test_term_by_term_oracle(self):
        """Stage-2 loss equals an independent term-by-term computation."""
        taps, blocks, model = make_taps(seed=3)
        w = LossWeights(lambda1=0, lambda2=0.004, lambda3=0.001)
        loss, parts = joint_loss(taps, blocks, w, SPECTRAL, stage=2)

        mse = np.mean(np.abs(taps.decoded.data - blocks) ** 2)
        mean_papr = np.mean(papr(taps.x_f.data))
        acpr_gap = acpr(psd(taps.x_p.data), SPECTRAL) - SPECTRAL.acpr_req_db
        expected = mse + 0.004 * mean_papr + 0.001 * acpr_gap
        assert loss.item() == pytest.approx(expected, rel=1e-9)
        assert parts["l2"] == pytest.approx(mean_papr, rel=1e-9)
        assert parts["l3"] == pytest.approx(acpr_gap, rel=1e-9)

    def test_additive_regularization(self):
        taps, blocks, model = make_taps(seed=4)
        reg = weight_params(model)
        w = LossWeights(lambda1=0.01, lambda2=0, lambda3=0)
        loss, _ = joint_loss(taps, blocks, w, SPECTRAL, stage=2, reg_params=reg)
        mse = np.mean(np.abs(taps.decoded.data - blocks) ** 2)
        sq = sum(np.sum(p.data ** 2) for p in reg)
        assert loss.item() == pytest.approx(mse + 0.01 * sq, rel=1e-9)

    def test_regularization_covers_weights_only(self):
        _, _, model = make_taps(seed=5)
        names = [n for n, _ in model.named_parameters() if n.endswith(".w")]
        assert len(weight_params(model)) == len(names)
        assert all(not n.endswith((".b", ".gamma", ".beta")) for n in names)

    def test_hinge_clamps_satisfied_constraint(self):
        taps, blocks, _ = make_taps(seed=6)
        # with a lax requirement the gap is negative: hinge clamps it to zero
        lax = SpectralParams(bw_bins=N, acpr_req_db=+50.0)
        w = LossWeights(lambda1=0, lambda2=0, lambda3=1.0)
        plain, _ = joint_loss(taps, blocks, w, lax, stage=2)
        taps2, blocks2, _ = make_taps(seed=6)
        hinged, _ = joint_loss(taps2, blocks2, w, lax, stage=2, acpr_hinge=True)
        mse = np.mean(np.abs(taps.decoded.data - blocks) ** 2)
        assert plain.item() < mse           # negative gap pulls below the MSE
        assert hinged.item() == pytest.approx(mse)

    def test_invalid_stage(self):
        taps, blocks, _ = make_taps(seed=7)
        with pytest.raises(ValueError, match="stage"):
            joint_loss(taps, blocks, LossWeights(), SPECTRAL, stage=3)

    def test_gradient_flows_through_total(self):
        taps, blocks, model = make_taps(seed=8)
        loss, _ = joint_loss(taps, blocks, LossWeights(), SPECTRAL, stage=2,
                             reg_params=weight_params(model))
        loss.backward()
        grads = [p.grad for p in model.parameters()]
        assert all(g is not None for g in grads)
        assert any(np.abs(g).max() > 0 for g in grads)
