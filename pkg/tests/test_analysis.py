"""Metric and receptive-field tests: closed-form PSNR values, SSIM
symmetry, the exact 3x3 toy receptive field and the depth-k containment
property."""

import logging

import numpy as np
import pytest

from opnet.analysis import (
    RFMask,
    effective_receptive_field,
    mask_from_gradient,
    psnr,
    rf_area_report,
    rf_input_gradient,
    rf_overlay,
    ssim,
    write_mask_csv,
)
from opnet.basenet import BaseNetConfig, InjectedWeights, LayerSpec
from opnet.tensor import ConvSpec, Tensor
from opnet.synth import generate_image


class TestPsnr:
    def test_identical_capped_at_99(self):
        img = generate_image(16, np.random.default_rng(0))
        assert psnr(img, img) == 99.0

    def test_closed_form_20db(self):
        a = np.zeros((1, 10, 10))
        b = np.full((1, 10, 10), 0.1)  # mse = 0.01
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(size=(3, 8, 8))
        b = rng.uniform(size=(3, 8, 8))
        mse = np.mean((a - b) ** 2)
        assert psnr(a, b) == pytest.approx(10 * np.log10(1 / mse), rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(size=(3, 8, 8))
        b = rng.uniform(size=(3, 8, 8))
        assert psnr(a, b) == psnr(b, a)


class TestSsim:
    def test_identical_is_exactly_one(self):
        img = generate_image(24, np.random.default_rng(3))
        assert ssim(img, img) == 1.0

    def test_constant_offset_matches_direct_formula(self):
        a = np.full((1, 12, 12), 0.25)
        b = np.full((1, 12, 12), 0.75)
        # constant windows: covariance and variances vanish, means differ
        c1, c2 = 0.01**2, 0.03**2
        mu_a, mu_b = 0.25, 0.75
        expected = ((2 * mu_a * mu_b + c1) * c2) / ((mu_a**2 + mu_b**2 + c1) * c2)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(size=(3, 16, 16))
        b = rng.uniform(size=(3, 16, 16))
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)

    def test_range(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(size=(3, 16, 16))
        b = rng.uniform(size=(3, 16, 16))
        assert -1.0 <= ssim(a, b) <= 1.0

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="window"):
            ssim(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)))


def toy_stack(depth, channels_in=4, seed=0, size=16):
    """depth stride-1 3x3 conv layers, no norm/relu, random generic weights."""
    rng = np.random.default_rng(seed)
    layers = []
    kernels, biases = [], []
    cin = channels_in
    for d in range(depth):
        cout = 3 if d == depth - 1 else 4
        spec = ConvSpec(cin, cout, (3, 3), padding=1)
        layers.append(LayerSpec(spec, norm=False, relu=False))
        kernels.append(Tensor(rng.uniform(0.2, 1.0, size=spec.weight_shape())))
        biases.append(rng.uniform(size=cout))
        cin = cout
    cfg = BaseNetConfig(layers=tuple(layers), channels=4)
    return cfg, InjectedWeights(kernels, biases)


class TestReceptiveField:
    def test_single_conv_mask_is_exact_3x3(self):
        cfg, w = toy_stack(1)
        x = Tensor(np.random.default_rng(6).uniform(size=(1, 4, 16, 16)))
        grad = rf_input_gradient(cfg, w, x, (8, 8))
        mask = mask_from_gradient(grad)
        expected = np.zeros((16, 16), dtype=bool)
        expected[7:10, 7:10] = True
        np.testing.assert_array_equal(mask, expected)

    def test_zero_weight_network_empty_mask_with_warning(self, caplog):
        cfg, w = toy_stack(1)
        w.kernels[0] = Tensor(np.zeros_like(w.kernels[0].data))
        w.biases[0] = np.zeros_like(w.biases[0])
        x = Tensor(np.random.default_rng(7).uniform(size=(1, 4, 16, 16)))
        grad = rf_input_gradient(cfg, w, x, (8, 8))
        with caplog.at_level(logging.WARNING, logger="opnet.analysis"):
            mask = mask_from_gradient(grad)
        assert not mask.any()
        assert any("all-zero" in r.getMessage() for r in caplog.records)

    def test_mask_invariant_to_cotangent_scale(self):
        cfg, w = toy_stack(3)
        x = Tensor(np.random.default_rng(8).uniform(size=(1, 4, 16, 16)))
        g1 = rf_input_gradient(cfg, w, x, (8, 8), cotangent_scale=1.0)
        g2 = rf_input_gradient(cfg, w, x, (8, 8), cotangent_scale=137.5)
        np.testing.assert_array_equal(mask_from_gradient(g1), mask_from_gradient(g2))

    @pytest.mark.parametrize("depth", [1, 2, 4])
    def test_depth_k_containment(self, depth):
        cfg, w = toy_stack(depth, size=24)
        x = Tensor(np.random.default_rng(9).uniform(size=(1, 4, 24, 24)))
        grad = rf_input_gradient(cfg, w, x, (12, 12))
        mask = mask_from_gradient(grad)
        window = np.zeros((24, 24), dtype=bool)
        r = depth  # (2k+1)x(2k+1) window
        window[12 - r : 12 + r + 1, 12 - r : 12 + r + 1] = True
        assert not np.any(mask & ~window), "mask escaped the theoretical window"

    def test_point_outside_rejected(self):
        cfg, w = toy_stack(1)
        x = Tensor(np.zeros((1, 4, 16, 16)))
        with pytest.raises(ValueError, match="outside"):
            rf_input_gradient(cfg, w, x, (99, 2))


class TestRfAreaReport:
    def _checkpoint(self):
        from opnet.basenet import BaseNetConfig
        from opnet.checkpoint import Checkpoint
        from opnet.hypernet import init_hyperparams
        from opnet.operators import build_operator_specs

        cfg = BaseNetConfig.standard(channels=4)
        return Checkpoint(
            basenet={"channels": 4},
            operators=build_operator_specs(["gaussian"]),
            hp=init_hyperparams(cfg, m=1, seed=4, precision="single"),
        )

    def test_row_count_and_duplicate_gammas(self):
        ckpt = self._checkpoint()
        img = generate_image(16, np.random.default_rng(11))
        rows = rf_area_report(ckpt, img, [(4, 4), (8, 8)], [0.5, 0.5, 2.0])
        assert len(rows) == 2 * 3
        by_key = {}
        for r in rows:
            by_key.setdefault((r["point"], r["gamma"]), []).append(r["area"])
        for areas in by_key.values():
            assert len(set(areas)) == 1

    def test_checkpoint_rf_mask_shape(self):
        ckpt = self._checkpoint()
        img = generate_image(16, np.random.default_rng(12))
        rf = effective_receptive_field(ckpt, img, 1.0, (8, 8))
        assert rf.mask.shape == (16, 16)
        assert rf.point == (8, 8)

    def test_inference_pads_non_divisible_sizes(self):
        from opnet.inference import infer_array

        ckpt = self._checkpoint()
        img = generate_image(16, np.random.default_rng(13))[:, :14, :15]
        out = infer_array(ckpt, np.ascontiguousarray(img), None, 1.0)
        assert out.shape == (3, 14, 15)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestReportAndOverlay:
    def test_overlay_marks_mask_green(self):
        img = generate_image(16, np.random.default_rng(10))
        mask = np.zeros((16, 16), dtype=bool)
        mask[4:8, 4:8] = True
        out = rf_overlay(img, mask)
        assert out.shape == (3, 16, 16)
        assert (out[1, 4:8, 4:8] > out[0, 4:8, 4:8]).all()
        gray = 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]
        np.testing.assert_allclose(out[0, 0, 0], gray[0, 0])

    def test_mask_csv(self, tmp_path):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = True
        rf = RFMask(mask=mask, point=(0, 0), gamma=0.5)
        p = tmp_path / "m.csv"
        write_mask_csv(p, rf)
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "x,y"
        assert lines[1] == "2,1"
        assert rf.area == 1
