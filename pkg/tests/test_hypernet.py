"""Weight-generator tests: exact affinity, the multi-path convolution
decomposition, rank-1 trajectories under scalar parameter sweeps, and the
chain rule through the fc layers."""

import csv

import numpy as np
import pytest

from opnet.basenet import BaseNetConfig, forward, total_weight_dims
from opnet.hypernet import (
    HyperParams,
    affine_structure_check,
    export_weight_trajectory,
    flatten_weight_grads,
    generate_weights,
    hyper_backward,
    init_hyperparams,
    multipath_equivalent,
    pca_project,
    write_trajectory_csv,
)
from opnet.tensor import ShapeError, Tensor, conv2d_forward

from gradcheck import assert_grad_close, numeric_grad


@pytest.fixture(scope="module")
def small():
    cfg = BaseNetConfig.standard(channels=4)
    hp = init_hyperparams(cfg, m=2, seed=5, precision="double")
    return cfg, hp


class TestGenerateWeights:
    def test_gamma_zero_gives_bias(self, small):
        cfg, hp = small
        w = generate_weights(hp, np.zeros(2), cfg)
        dims = total_weight_dims(cfg)
        for i, n_wi in enumerate(dims):
            flat = np.concatenate([w.kernels[i].data.ravel(), w.biases[i]])
            np.testing.assert_array_equal(flat, hp.b[i])
            assert flat.shape == (n_wi,)

    def test_zero_matrix_makes_weights_constant(self, small):
        cfg, _ = small
        hp = init_hyperparams(cfg, m=1, seed=6, precision="double")
        hp = HyperParams([np.zeros_like(a) for a in hp.a], hp.b)
        w1 = generate_weights(hp, np.array([0.3]), cfg)
        w2 = generate_weights(hp, np.array([0.9]), cfg)
        for k1, k2 in zip(w1.kernels, w2.kernels):
            np.testing.assert_array_equal(k1.data, k2.data)

    def test_matches_matrix_arithmetic(self, small):
        cfg, hp = small
        gamma = np.array([0.4, 0.7])
        w = generate_weights(hp, gamma, cfg)
        for i in range(len(cfg.layers)):
            expected = hp.a[i] @ gamma + hp.b[i]
            flat = np.concatenate([w.kernels[i].data.ravel(), w.biases[i]])
            np.testing.assert_allclose(flat, expected, rtol=1e-14)

    def test_dimension_mismatch_rejected(self, small):
        cfg, hp = small
        with pytest.raises(ShapeError):
            generate_weights(hp, np.zeros(3), cfg)


class TestHyperBackward:
    def test_zero_grads(self, small):
        cfg, hp = small
        flats = [np.zeros_like(b) for b in hp.b]
        ga, gb = hyper_backward(np.array([0.5, 0.5]), flats)
        assert all(not np.any(g) for g in ga)
        assert all(not np.any(g) for g in gb)

    def test_scalar_chain_rule(self, small):
        cfg, hp = small
        rng = np.random.default_rng(7)
        flats = [rng.normal(size=b.shape) for b in hp.b]
        ga, gb = hyper_backward(np.array([2.0]), flats)
        for g, f in zip(ga, flats):
            np.testing.assert_allclose(g[:, 0], 2.0 * f, rtol=1e-14)
        for g, f in zip(gb, flats):
            np.testing.assert_array_equal(g, f)

    def test_finite_differences_through_quadratic_readout(self, small):
        cfg, hp = small
        rng = np.random.default_rng(8)
        gamma = np.array([0.3, 0.8])
        coeffs = [rng.normal(size=b.shape) for b in hp.b]

        def loss_of(hp_local):
            w = generate_weights(hp_local, gamma, cfg)
            total = 0.0
            for i in range(len(cfg.layers)):
                flat = np.concatenate([w.kernels[i].data.ravel(), w.biases[i]])
                total += float(np.sum(coeffs[i] * flat**2))
            return total

        # analytic: dL/dflat_i = 2 * coeffs_i * flat_i, then the fc chain rule
        w0 = generate_weights(hp, gamma, cfg)
        grad_flats = [
            2.0 * coeffs[i] * np.concatenate([w0.kernels[i].data.ravel(), w0.biases[i]])
            for i in range(len(cfg.layers))
        ]
        ga, gb = hyper_backward(gamma, grad_flats)

        for i in (0, 9, 19):
            def f_a(arr, i=i):
                hp2 = HyperParams(list(hp.a), list(hp.b))
                hp2.a = list(hp.a)
                hp2.a[i] = arr
                return loss_of(hp2)

            def f_b(arr, i=i):
                hp2 = HyperParams(list(hp.a), list(hp.b))
                hp2.b = list(hp.b)
                hp2.b[i] = arr
                return loss_of(hp2)

            assert_grad_close(ga[i], numeric_grad(f_a, hp.a[i].copy()))
            assert_grad_close(gb[i], numeric_grad(f_b, hp.b[i].copy()))


class TestMultipath:
    def test_gamma_zero_equals_bias_path(self, small):
        cfg, _ = small
        hp = init_hyperparams(cfg, m=1, seed=9, precision="double")
        x = Tensor(np.random.default_rng(10).normal(size=(1, 4, 8, 8)))
        got = multipath_equivalent(hp, np.array([0.0]), 0, x, cfg)
        w = generate_weights(hp, np.array([0.0]), cfg)
        ref = conv2d_forward(x, w.kernels[0], w.biases[0], cfg.layers[0].conv)
        np.testing.assert_allclose(got.data, ref.data, atol=1e-12)

    def test_gamma_one_equals_summed_kernels(self, small):
        cfg, _ = small
        hp = init_hyperparams(cfg, m=1, seed=11, precision="double")
        x = Tensor(np.random.default_rng(12).normal(size=(1, 4, 8, 8)))
        got = multipath_equivalent(hp, np.array([1.0]), 0, x, cfg)
        w = generate_weights(hp, np.array([1.0]), cfg)
        ref = conv2d_forward(x, w.kernels[0], w.biases[0], cfg.layers[0].conv)
        np.testing.assert_allclose(got.data, ref.data, atol=1e-12)

    def test_random_m2_double_precision(self, small):
        cfg, hp = small
        rng = np.random.default_rng(13)
        gamma = rng.uniform(0, 1, size=2)
        for layer_index in (1, 9, 17):
            ch = cfg.layers[layer_index].conv.in_channels
            size = 8 if not cfg.layers[layer_index].conv.transposed else 4
            x = Tensor(rng.normal(size=(1, ch, size, size)))
            got = multipath_equivalent(hp, gamma, layer_index, x, cfg)
            w = generate_weights(hp, gamma, cfg)
            spec = cfg.layers[layer_index].conv
            if spec.transposed:
                from opnet.tensor import conv_transpose2d_forward

                ref = conv_transpose2d_forward(x, w.kernels[layer_index], w.biases[layer_index], spec)
            else:
                ref = conv2d_forward(x, w.kernels[layer_index], w.biases[layer_index], spec)
            assert np.abs(got.data - ref.data).max() <= 1e-12

    def test_random_single_precision(self):
        cfg = BaseNetConfig.standard(channels=4)
        hp = init_hyperparams(cfg, m=2, seed=14, precision="single")
        rng = np.random.default_rng(15)
        gamma = rng.uniform(0, 1, size=2).astype(np.float32)
        x = Tensor(rng.normal(size=(1, 4, 8, 8)).astype(np.float32))
        got = multipath_equivalent(hp, gamma, 1, x, cfg)
        w = generate_weights(hp, gamma, cfg)
        ref = conv2d_forward(x, w.kernels[1], w.biases[1], cfg.layers[1].conv)
        denom = max(np.abs(ref.data).max(), 1e-6)
        assert np.abs(got.data - ref.data).max() / denom <= 1e-6


class TestAffineStructure:
    def test_endpoints_exact(self, small):
        cfg, hp = small
        ga, gb = np.array([0.1, 0.2]), np.array([0.9, 0.4])
        assert affine_structure_check(hp, ga, gb, 0.0, cfg) == 0.0
        assert affine_structure_check(hp, ga, gb, 1.0, cfg) == 0.0

    def test_midpoint_within_1e12(self, small):
        cfg, hp = small
        rng = np.random.default_rng(16)
        for _ in range(3):
            ga = rng.uniform(0, 1, size=2)
            gb = rng.uniform(0, 1, size=2)
            assert affine_structure_check(hp, ga, gb, 0.5, cfg) <= 1e-12

    def test_collinear_triple(self, small):
        cfg, hp = small
        ga = np.array([0.2, 0.2])
        gb = np.array([0.8, 0.8])
        for t in (0.25, 0.75):
            assert affine_structure_check(hp, ga, gb, t, cfg) <= 1e-12


class TestTrajectory:
    def test_single_point_grid(self, small):
        cfg, hp = small
        mat = export_weight_trajectory(hp, [np.array([0.3, 0.5])], 1, cfg)
        assert mat.shape == (1, total_weight_dims(cfg)[1])

    def test_fixed_id_varying_param_is_rank_one(self, small):
        cfg, hp = small
        grid = [np.array([0.3, t]) for t in np.linspace(0, 1, 12)]
        mat = export_weight_trajectory(hp, grid, 1, cfg)
        centered = mat - mat.mean(axis=0, keepdims=True)
        s = np.linalg.svd(centered, compute_uv=False)
        assert s[1] < 1e-8 * s[0]

    def test_planar_grid_pca_explains_everything(self, small):
        cfg, hp = small
        grid = [np.array([a, b]) for a in np.linspace(0.1, 1, 4) for b in np.linspace(0, 1, 4)]
        mat = export_weight_trajectory(hp, grid, 2, cfg)
        coords, ratio = pca_project(mat, dims=2)
        assert coords.shape == (16, 2)
        assert ratio.sum() > 1.0 - 1e-10

    def test_csv_export_format(self, small, tmp_path):
        cfg, hp = small
        grid = [np.array([0.1, t]) for t in (0.0, 0.5, 1.0)]
        mat = export_weight_trajectory(hp, grid, 1, cfg)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, grid, mat)
        with open(path) as f:
            rows = list(csv.reader(f))
        assert rows[0][:2] == ["gamma_0", "gamma_1"]
        assert len(rows) == 1 + len(grid)
        assert len(rows[1]) == 2 + mat.shape[1]
        assert float(rows[2][1]) == 0.5
