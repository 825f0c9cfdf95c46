import numpy as np
import pytest

from intent_admit.errors import FitFailure
from intent_admit.estimators.network import (
    Conv1D,
    Dense,
    Flatten,
    LSTM,
    Network,
    ReLU,
    Subsample,
    TrainConfig,
    analytic_gradient,
    max_relative_error,
    numeric_gradient,
    softmax,
    train_network,
)

TOL = 1e-4


def _check(net, x, y):
    a = analytic_gradient(net, x, y)
    n = numeric_gradient(net, x, y)
    err = max_relative_error(a, n)
    assert err < TOL, f"gradient mismatch {err:.3e}"


class TestGradients:
    def test_dense_softmax(self):
        rng = np.random.default_rng(0)
        net = Network([Dense(6, 5, rng), Dense(5, 3, rng)], loss="softmax_ce")
        _check(net, rng.standard_normal((7, 6)), rng.integers(0, 3, 7))

    def test_dense_relu_mse(self):
        rng = np.random.default_rng(1)
        net = Network([Dense(4, 8, rng), ReLU(), Dense(8, 1, rng)], loss="mse")
        _check(net, rng.standard_normal((9, 4)) + 0.1, rng.random(9))

    def test_conv1d(self):
        rng = np.random.default_rng(2)
        net = Network([Conv1D(2, 3, 4, rng), Flatten(), Dense(3 * 7, 1, rng)],
                      loss="mse")
        _check(net, rng.standard_normal((5, 10, 2)), rng.random(5))

    def test_conv_relu_subsample_stack(self):
        rng = np.random.default_rng(3)
        net = Network([
            Conv1D(2, 4, 3, rng), ReLU(), Subsample(2),
            Conv1D(4, 5, 3, rng), ReLU(), Flatten(),
            Dense(5 * 4, 6, rng), ReLU(), Dense(6, 1, rng),
        ], loss="mse")
        _check(net, rng.standard_normal((4, 13, 2)), rng.random(4))

    def test_lstm_classifier(self):
        rng = np.random.default_rng(4)
        net = Network([LSTM(3, 6, rng), Dense(6, 4, rng)], loss="softmax_ce")
        _check(net, rng.standard_normal((5, 9, 3)), rng.integers(0, 4, 5))

    def test_lstm_regressor(self):
        rng = np.random.default_rng(5)
        net = Network([LSTM(2, 5, rng), Dense(5, 1, rng)], loss="mse")
        _check(net, rng.standard_normal((6, 8, 2)), rng.random(6))

    def test_l2_regularized(self):
        rng = np.random.default_rng(6)
        net = Network([Dense(4, 5, rng), ReLU(), Dense(5, 2, rng)],
                      loss="softmax_ce", l2=1e-3)
        _check(net, rng.standard_normal((6, 4)), rng.integers(0, 2, 6))

    def test_l1_regularized(self):
        rng = np.random.default_rng(7)
        net = Network([Dense(4, 5, rng), Dense(5, 1, rng)], loss="mse", l1=1e-3)
        _check(net, rng.standard_normal((6, 4)), rng.random(6))

    def test_randomized_composites(self):
        # several random small nets mixing every layer kind
        for seed in range(4):
            rng = np.random.default_rng(100 + seed)
            net = Network([
                Conv1D(3, 4, 3, rng), ReLU(), Subsample(2),
                Flatten(), Dense(4 * 5, 7, rng), ReLU(), Dense(7, 3, rng),
            ], loss="softmax_ce")
            _check(net, rng.standard_normal((3, 11, 3)), rng.integers(0, 3, 3))


class TestForwardContracts:
    def test_softmax_sums_to_one(self):
        rng = np.random.default_rng(8)
        p = softmax(rng.standard_normal((50, 4)) * 10.0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p >= 0.0)

    def test_zero_weight_classifier_uniform(self):
        rng = np.random.default_rng(9)
        net = Network([Dense(5, 4, rng)], loss="softmax_ce")
        net.layers[0].w[...] = 0.0
        net.layers[0].b[...] = 0.0
        p = softmax(net.forward(rng.standard_normal((10, 5))))
        np.testing.assert_allclose(p, 0.25, atol=1e-12)

    def test_deterministic_forward(self):
        rng = np.random.default_rng(10)
        net = Network([LSTM(2, 4, rng), Dense(4, 1, rng)], loss="mse")
        x = rng.standard_normal((3, 6, 2))
        np.testing.assert_array_equal(net.forward(x), net.forward(x))

    def test_conv_output_length(self):
        rng = np.random.default_rng(11)
        conv = Conv1D(2, 16, 5, rng)
        out = conv.forward(rng.standard_normal((1, 125, 2)))
        assert out.shape == (1, 121, 16)
        sub = Subsample(2)
        assert sub.forward(out).shape == (1, 61, 16)


class TestTraining:
    def test_memorizes_tiny_set(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((10, 6))
        y = rng.random(10)
        net = Network([Dense(6, 32, rng), ReLU(), Dense(32, 1, rng)], loss="mse")
        cfg = TrainConfig(batch_size=2, learning_rate=1e-2, epochs=40,
                          val_fraction=0.0, patience=40, optimizer="adam", seed=0)
        train_network(net, x, y, cfg)
        loss, _ = net.data_loss(net.forward(x), y)
        assert loss < 1e-3

    def test_reproducible_training(self):
        rng_data = np.random.default_rng(13)
        x = rng_data.standard_normal((64, 5))
        y = rng_data.integers(0, 3, 64)
        outs = []
        for _ in range(2):
            rng = np.random.default_rng(33)
            net = Network([Dense(5, 8, rng), ReLU(), Dense(8, 3, rng)],
                          loss="softmax_ce")
            cfg = TrainConfig(batch_size=16, learning_rate=1e-3, epochs=5,
                              optimizer="adam", seed=4)
            train_network(net, x, y, cfg)
            outs.append(net.forward(x).copy())
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_lr_decay_and_early_stop(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((40, 4))
        y = rng.random(40)
        net = Network([Dense(4, 4, rng), Dense(4, 1, rng)], loss="mse")
        cfg = TrainConfig(batch_size=8, learning_rate=0.0, epochs=30,
                          patience=3, val_fraction=0.2, seed=1)
        hist = train_network(net, x, y, cfg)
        # zero LR: no improvement after epoch 0, stop at patience
        assert hist.stopped_epoch <= 4

    def test_nan_loss_aborts_with_diagnostics(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((16, 3))
        y = rng.random(16)
        net = Network([Dense(3, 4, rng), Dense(4, 1, rng)], loss="mse")
        net.layers[0].w[0, 0] = np.nan
        cfg = TrainConfig(batch_size=8, epochs=2, seed=0)
        with pytest.raises(FitFailure, match="non-finite loss"):
            train_network(net, x, y, cfg)

    def test_best_weights_restored(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((50, 4))
        y = rng.random(50)
        net = Network([Dense(4, 6, rng), ReLU(), Dense(6, 1, rng)], loss="mse")
        cfg = TrainConfig(batch_size=10, learning_rate=5e-2, epochs=25,
                          patience=25, val_fraction=0.2, optimizer="adam", seed=2)
        hist = train_network(net, x, y, cfg)
        assert hist.best_epoch >= 0
        assert min(hist.val_loss) == hist.val_loss[hist.best_epoch]
