import numpy as np
import pytest

from diffusionx.core import default_grid
from diffusionx.errors import DimensionMismatch
from diffusionx.predictor import (
    DivergenceDetected,
    FormatVersionMismatch,
    MlpParams,
    ShapeMismatch,
    TrainingConfig,
    TrainingExample,
    cloud_default_dims,
    edge_default_dims,
    edge_features,
    fuse_multimodal,
    init_params,
    load_weights,
    mlp_forward,
    mlp_gradient,
    predict_cloud_strength,
    predict_edge_strength,
    save_weights,
    train,
    weight_norm,
)


class TestFeatures:
    def test_identical_prompts_zero_diff_block(self):
        v = np.array([0.3, -0.2, 0.5])
        feats = edge_features(v, v)
        assert np.array_equal(feats[6:], np.zeros(3))
        assert np.array_equal(feats[:3], v) and np.array_equal(feats[3:6], v)

    def test_small_arithmetic(self):
        feats = edge_features(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert np.array_equal(feats, [1.0, 0.0, 0.0, 1.0, -1.0, 1.0])

    def test_default_edge_length(self):
        rng = np.random.default_rng(0)
        feats = edge_features(rng.normal(size=384), rng.normal(size=384))
        assert len(feats) == 3 * 384 == 1152

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            edge_features(np.zeros(3), np.zeros(4))

    def test_fuse_lengths(self):
        fused = fuse_multimodal(np.zeros(768), np.zeros(512))
        assert len(fused) == 1280

    def test_fuse_order_matters(self):
        a, b = np.array([1.0, 2.0]), np.array([3.0, 4.0])
        assert not np.array_equal(fuse_multimodal(a, b), fuse_multimodal(b, a))

    def test_fuse_zero_image(self):
        h = np.array([1.0, -1.0])
        fused = fuse_multimodal(h, np.zeros(3))
        assert np.array_equal(fused, [1.0, -1.0, 0.0, 0.0, 0.0])

    def test_fuse_rejects_non_finite(self):
        with pytest.raises(ValueError):
            fuse_multimodal(np.array([np.inf]), np.zeros(2))


def _constant_net(bias, in_dim=4):
    return MlpParams(
        layer_dims=(in_dim, 1),
        weights=[np.zeros((1, in_dim))],
        biases=[np.array([bias])],
    )


class TestForward:
    def test_constant_network(self):
        net = _constant_net(0.6)
        for x in (np.zeros(4), np.ones(4), np.arange(4.0)):
            assert mlp_forward(net, x) == 0.6

    def test_single_layer_arithmetic(self):
        net = MlpParams(
            layer_dims=(2, 1),
            weights=[np.array([[0.5, -0.5]])],
            biases=[np.array([0.0])],
        )
        assert mlp_forward(net, np.array([1.0, 1.0])) == 0.0

    def test_input_length_checked(self):
        with pytest.raises(DimensionMismatch):
            mlp_forward(_constant_net(0.0), np.zeros(5))

    def test_shapes_must_chain(self):
        with pytest.raises(ShapeMismatch):
            MlpParams(layer_dims=(3, 2, 1), weights=[np.zeros((2, 3)), np.zeros((1, 3))],
                      biases=[np.zeros(2), np.zeros(1)])


class TestGradient:
    def test_perfect_fit_zero_loss_zero_grads(self):
        net = _constant_net(0.6)
        batch = [TrainingExample(np.ones(4), 0.6) for _ in range(3)]
        grads_w, grads_b, loss = mlp_gradient(net, batch, lam=0.0)
        assert loss == 0.0
        assert all(np.all(g == 0) for g in grads_w)
        assert all(np.all(g == 0) for g in grads_b)

    def test_squared_error_arithmetic(self):
        net = _constant_net(0.5)
        _, _, loss = mlp_gradient(net, [TrainingExample(np.zeros(4), 0.6)], lam=0.0)
        assert loss == pytest.approx(0.01, abs=1e-12)

    def test_lambda_zero_reduces_to_mse(self):
        rng = np.random.default_rng(1)
        net = init_params((6, 5, 1), seed=1)
        batch = [TrainingExample(rng.normal(size=6), float(rng.uniform(0.4, 0.9))) for _ in range(8)]
        _, _, plain = mlp_gradient(net, batch, lam=0.0)
        X = np.stack([b.features for b in batch])
        preds = np.array([mlp_forward(net, x) for x in X])
        labels = np.array([b.label for b in batch])
        assert plain == pytest.approx(float(np.mean((preds - labels) ** 2)), rel=1e-12)

    def test_penalty_excludes_biases(self):
        net = MlpParams(layer_dims=(2, 1), weights=[np.array([[1.0, 1.0]])], biases=[np.array([0.9])])
        _, _, with_pen = mlp_gradient(net, [TrainingExample(np.zeros(2), 0.9)], lam=0.5)
        # loss = (0.9-0.9)^2 + 0.5 * (1^2+1^2); bias magnitude must not contribute
        assert with_pen == pytest.approx(1.0, abs=1e-12)

    def test_label_range_enforced(self):
        with pytest.raises(ValueError):
            TrainingExample(np.zeros(2), 1.5)
        with pytest.raises(ValueError):
            TrainingExample(np.zeros(2), 0.1)


def _fd_run(dims, seed, lam, n_examples=16):
    from gradcheck import fd_check, reference_loss

    rng = np.random.default_rng(seed)
    params = init_params(dims, seed=seed)
    X = rng.normal(size=(n_examples, dims[0]))
    y = rng.uniform(0.4, 0.9, size=n_examples)
    batch = [TrainingExample(X[i], float(y[i])) for i in range(n_examples)]
    grads_w, grads_b, loss = mlp_gradient(params, batch, lam)
    # the oracle loss is an independent reimplementation
    assert loss == pytest.approx(reference_loss(params.weights, params.biases, X, y, lam), rel=1e-9)
    return fd_check(params, X, y, grads_w, grads_b, lam)


class TestGradientFiniteDifferences:
    def test_small_network_matches(self):
        worst, checked, skipped = _fd_run((10, 8, 1), seed=42, lam=1e-3)
        assert worst < 1e-4
        assert skipped <= 0.01 * (checked + skipped)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_multiple_seeds_both_shapes(self, seed):
        for dims in ((12, 16, 8, 1), (20, 32, 16, 8, 1)):
            worst, checked, skipped = _fd_run(dims, seed, lam=1e-4, n_examples=8)
            assert worst < 1e-4
            assert skipped <= 0.01 * (checked + skipped)


class TestTraining:
    def _toy_dataset(self, n=64, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 6))
        labels = np.clip(0.65 + 0.2 * np.tanh(X[:, 0] - X[:, 1]), 0.4, 0.9)
        return [TrainingExample(X[i], float(labels[i])) for i in range(n)]

    def test_loss_decreases(self):
        dataset = self._toy_dataset()
        params = init_params((6, 8, 1), seed=0)
        trained, history = train(params, dataset, TrainingConfig(epochs=50, seed=0))
        assert history[-1] <= history[0]

    def test_identical_examples_fit(self):
        dataset = [TrainingExample(np.ones(4), 0.7)] * 32
        params = init_params((4, 4, 1), seed=1)
        trained, history = train(params, dataset, TrainingConfig(epochs=100, seed=1))
        assert history[-1] < history[0]
        assert mlp_forward(trained, np.ones(4)) == pytest.approx(0.7, abs=0.02)

    def test_deterministic_bit_identical(self):
        dataset = self._toy_dataset()
        cfg = TrainingConfig(epochs=20, seed=5)
        a, _ = train(init_params((6, 8, 1), seed=5), dataset, cfg)
        b, _ = train(init_params((6, 8, 1), seed=5), dataset, cfg)
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a.weights, b.weights))
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a.biases, b.biases))

    def test_large_lambda_shrinks_weights(self):
        dataset = self._toy_dataset()
        base = init_params((6, 8, 1), seed=2)
        free, _ = train(base, dataset, TrainingConfig(epochs=40, lam=0.0, seed=2))
        shrunk, _ = train(base, dataset, TrainingConfig(epochs=40, lam=1e3 * 1e-3, seed=2))
        assert weight_norm(shrunk) < weight_norm(free)

    def test_monotone_regularization(self):
        dataset = self._toy_dataset()
        base = init_params((6, 8, 1), seed=3)
        norms = []
        for lam in (0.0, 1e-3, 1e-1):
            trained, _ = train(base, dataset, TrainingConfig(epochs=40, lam=lam, seed=3))
            norms.append(weight_norm(trained))
        assert norms[0] >= norms[1] >= norms[2]

    def test_divergence_detected(self):
        dataset = self._toy_dataset()
        params = init_params((6, 8, 1), seed=0)
        with np.errstate(all="ignore"), pytest.raises(DivergenceDetected):
            train(params, dataset, TrainingConfig(learning_rate=1e6, epochs=50, seed=0))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(init_params((4, 1), seed=0), [], TrainingConfig())


class TestPrediction:
    def test_clipping_applied(self):
        grid = default_grid()
        high = _constant_net(1.2, in_dim=6)
        assert predict_edge_strength(high, np.ones(2), np.zeros(2), grid) == 0.90
        low = _constant_net(-3.0, in_dim=6)
        assert predict_edge_strength(low, np.ones(2), np.zeros(2), grid) == 0.40

    def test_range_contract(self):
        grid = default_grid()
        params = init_params(edge_default_dims(8), seed=0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = predict_edge_strength(params, rng.normal(size=8), rng.normal(size=8), grid)
            assert 0.40 <= s <= 0.90

    def test_cloud_prediction_range(self):
        grid = default_grid()
        params = init_params(cloud_default_dims(16, 8), seed=1)
        rng = np.random.default_rng(1)
        s = predict_cloud_strength(params, rng.normal(size=16), rng.normal(size=8), grid)
        assert 0.40 <= s <= 0.90


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        params = init_params((10, 8, 1), seed=7)
        rng = np.random.default_rng(7)
        x = rng.normal(size=10)
        before = mlp_forward(params, x)
        path = tmp_path / "w.bin"
        save_weights(params, str(path))
        loaded = load_weights(str(path))
        assert mlp_forward(loaded, x) == before
        assert all(a.tobytes() == b.tobytes() for a, b in zip(params.weights, loaded.weights))

    def test_trained_round_trip_bit_exact(self, tmp_path):
        dataset = [TrainingExample(np.linspace(-1, 1, 6) * k, 0.5) for k in range(1, 33)]
        trained, _ = train(init_params((6, 4, 1), seed=0), dataset, TrainingConfig(epochs=5, seed=0))
        path = tmp_path / "w.bin"
        save_weights(trained, str(path))
        loaded = load_weights(str(path))
        x = np.linspace(-1, 1, 6)
        assert mlp_forward(loaded, x) == mlp_forward(trained, x)

    def test_truncated_file_rejected(self, tmp_path):
        params = init_params((10, 8, 1), seed=7)
        path = tmp_path / "w.bin"
        save_weights(params, str(path))
        blob = path.read_bytes()
        for cut in (4, len(blob) // 2, len(blob) - 3):
            (tmp_path / "trunc.bin").write_bytes(blob[:cut])
            with pytest.raises(FormatVersionMismatch):
                load_weights(str(tmp_path / "trunc.bin"))

    def test_corrupted_payload_rejected(self, tmp_path):
        params = init_params((4, 1), seed=0)
        path = tmp_path / "w.bin"
        save_weights(params, str(path))
        blob = bytearray(path.read_bytes())
        blob[-8] ^= 0xFF  # flip a payload byte under the checksum
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatVersionMismatch):
            load_weights(str(path))

    def test_hand_built_single_layer_file(self, tmp_path):
        # a 2->1 affine net with known weights: y = 0.25*x0 - 0.5*x1 + 0.125
        params = MlpParams(
            layer_dims=(2, 1),
            weights=[np.array([[0.25, -0.5]])],
            biases=[np.array([0.125])],
        )
        path = tmp_path / "hand.bin"
        save_weights(params, str(path))
        loaded = load_weights(str(path))
        assert mlp_forward(loaded, np.array([2.0, 1.0])) == 0.25 * 2.0 - 0.5 * 1.0 + 0.125

    def test_wrong_version_rejected(self, tmp_path):
        params = init_params((4, 1), seed=0)
        path = tmp_path / "w.bin"
        save_weights(params, str(path))
        blob = path.read_bytes()
        bad = blob.replace(b'"format_version": 1', b'"format_version": 9')
        path.write_bytes(bad)
        with pytest.raises(FormatVersionMismatch):
            load_weights(str(path))
