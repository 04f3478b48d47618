"""Network construction, forward pass, backprop gradients, and training."""

import numpy as np
import pytest

import knitrect as kr
from knitrect.errors import DataError, TrainingDiverged


def _manual_model(layer_sizes, weights, biases):
    return kr.MlpModel(
        tuple(layer_sizes),
        [np.asarray(w, dtype=float) for w in weights],
        [np.asarray(b, dtype=float) for b in biases],
        seed=0,
    )


# --- construction ---------------------------------------------------------------


def test_mlp_new_is_deterministic():
    a = kr.mlp_new((7, 4, 2, 2, 1), seed=1)
    b = kr.mlp_new((7, 4, 2, 2, 1), seed=1)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(a.biases, b.biases):
        assert np.array_equal(ba, bb)


def test_mlp_new_seed_changes_weights():
    a = kr.mlp_new((7, 4, 2, 2, 1), seed=1)
    b = kr.mlp_new((7, 4, 2, 2, 1), seed=2)
    assert not np.array_equal(a.weights[0], b.weights[0])


def test_param_count_of_best_topology_is_51():
    model = kr.mlp_new((7, 4, 2, 2, 1), seed=0)
    assert model.param_count() == 51


def test_mlp_new_init_bounds_and_zero_biases():
    model = kr.mlp_new((7, 4, 2, 2, 1), seed=3)
    for w, (nin, nout) in zip(model.weights, zip(model.layer_sizes, model.layer_sizes[1:])):
        bound = np.sqrt(6.0 / (nin + nout))
        assert np.all(np.abs(w) <= bound)
    for b in model.biases:
        assert np.all(b == 0.0)


def test_mlp_new_rejects_bad_sizes():
    with pytest.raises(DataError):
        kr.mlp_new((7,), seed=0)
    with pytest.raises(DataError):
        kr.mlp_new((7, 4, 2), seed=0)  # output width must be 1
    with pytest.raises(DataError):
        kr.mlp_new((7, 1, 1), seed=0)  # hidden width below 2
    with pytest.raises(DataError):
        kr.mlp_new((0, 1), seed=0)


# --- forward --------------------------------------------------------------------


def test_forward_zero_weights_returns_output_bias():
    model = _manual_model((3, 2, 1), [np.zeros((3, 2)), np.zeros((2, 1))], [np.zeros(2), [4.5]])
    for x in ([0, 0, 0], [1, -2, 3], [100, 100, 100]):
        assert kr.forward(model, x) == 4.5


def test_forward_relu_clips_negative_preactivation():
    model = _manual_model((1, 1, 1), [[[1.0]], [[1.0]]], [[0.0], [0.0]])
    assert kr.forward(model, [-3.0]) == 0.0
    assert kr.forward(model, [2.0]) == 2.0


def test_forward_batch_shape_and_dimension_check():
    model = kr.mlp_new((3, 2, 1), seed=0)
    out = kr.forward_batch(model, np.zeros((5, 3)))
    assert out.shape == (5,)
    with pytest.raises(DataError):
        kr.forward_batch(model, np.zeros((5, 4)))
    with pytest.raises(DataError):
        kr.forward(model, np.zeros((2, 3)))


def test_forward_final_layer_is_positively_homogeneous():
    rng = np.random.default_rng(4)
    model = kr.mlp_new((4, 3, 2, 1), seed=4)
    X = rng.normal(size=(20, 4))
    base = kr.forward_batch(model, X)
    model.weights[-1] *= 2.0
    model.biases[-1] *= 2.0
    assert np.array_equal(kr.forward_batch(model, X), 2.0 * base)


# --- loss -----------------------------------------------------------------------


def test_loss_examples():
    ident = _manual_model((1, 1), [[[1.0]]], [[0.0]])
    X = np.array([[1.0], [2.0]])
    assert kr.mse_loss(ident, X, [1.0, 2.0]) == 0.0

    zero = _manual_model((1, 1), [[[0.0]]], [[0.0]])
    assert kr.mse_loss(zero, X, [1.0, -1.0]) == 1.0

    const3 = _manual_model((1, 1), [[[0.0]]], [[3.0]])
    assert kr.mse_loss(const3, np.array([[0.0]]), [1.0]) == 4.0

    with pytest.raises(DataError):
        kr.mse_loss(ident, np.empty((0, 1)), [])


# --- gradients ------------------------------------------------------------------


def _random_net_and_batch(seed, sizes=(5, 4, 2, 2, 1), n=8):
    """Random net with nonzero biases so the loss is differentiable at the point."""
    rng = np.random.default_rng(seed + 1000)
    model = kr.mlp_new(sizes, seed)
    for b in model.biases:
        b[:] = rng.uniform(-0.5, 0.5, size=b.shape)
    return model, rng.normal(size=(n, sizes[0])), rng.normal(size=n)


def _finite_difference_worst_error(model, X, y, eps=1e-5):
    gw, gb = kr.gradient(model, X, y)
    worst = 0.0
    for grads, params in ((gw, model.weights), (gb, model.biases)):
        for g, p in zip(grads, params):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = p[ix]
                p[ix] = orig + eps
                lp = kr.mse_loss(model, X, y)
                p[ix] = orig - eps
                lm = kr.mse_loss(model, X, y)
                p[ix] = orig
                fd = (lp - lm) / (2.0 * eps)
                worst = max(worst, abs(g[ix] - fd) / max(abs(g[ix]) + abs(fd), 1e-8))
    return worst


def test_gradient_matches_central_differences():
    model, X, y = _random_net_and_batch(0)
    assert _finite_difference_worst_error(model, X, y) < 1e-4


def test_gradient_zero_input_zero_bias_kills_first_layer():
    model = kr.mlp_new((3, 4, 2, 1), seed=2)
    X = np.zeros((6, 3))
    gw, _ = kr.gradient(model, X, np.ones(6))
    assert np.all(gw[0] == 0.0)


def test_gradient_mean_is_invariant_to_sample_duplication():
    model, X, y = _random_net_and_batch(5)
    one_w, one_b = kr.gradient(model, X[:1], y[:1])
    dup_w, dup_b = kr.gradient(model, np.repeat(X[:1], 4, axis=0), np.repeat(y[:1], 4))
    for a, b in zip(one_w + one_b, dup_w + dup_b):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_gradient_validates_batch():
    model = kr.mlp_new((3, 2, 1), seed=0)
    with pytest.raises(DataError):
        kr.gradient(model, np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(DataError):
        kr.gradient(model, np.zeros((4, 3)), np.zeros(5))


# --- training -------------------------------------------------------------------


def test_train_fits_linear_target():
    X = np.linspace(-1.0, 1.0, 64)[:, None]
    y = 2.0 * X[:, 0] + 1.0
    model = kr.mlp_new((1, 4, 2, 2, 1), seed=0)
    trained, report = kr.train(model, X, y, kr.TrainConfig(max_iter=2000, batch_size=16, tol=0.0, seed=0))
    assert report.best_loss < 1e-3
    assert report.epochs_run <= 2000
    assert kr.mse_loss(trained, X, y) < 1e-3


def test_train_memorizes_tiny_dataset():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(8, 2))
    y = rng.normal(size=8)
    model = kr.mlp_new((2, 16, 8, 1), seed=1)
    _, report = kr.train(model, X, y, kr.TrainConfig(max_iter=10000, tol=0.0, seed=1))
    assert report.best_loss < 1e-4


def test_train_is_deterministic_and_leaves_input_model_untouched():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -0.5, 0.25]
    model = kr.mlp_new((3, 4, 2, 1), seed=7)
    before = [w.copy() for w in model.weights]
    cfg = kr.TrainConfig(max_iter=50, seed=3)
    _, rep1 = kr.train(model, X, y, cfg)
    _, rep2 = kr.train(model, X, y, cfg)
    assert rep1.loss_history == rep2.loss_history
    for w0, w1 in zip(before, model.weights):
        assert np.array_equal(w0, w1)


def test_train_reports_best_observed_loss():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    model = kr.mlp_new((2, 4, 1), seed=2)
    _, report = kr.train(model, X, y, kr.TrainConfig(max_iter=40, seed=2))
    assert report.best_loss == min(report.loss_history)
    assert len(report.loss_history) == report.epochs_run


def test_train_divergence_raises_instead_of_returning_garbage():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(32, 3))
    y = rng.normal(size=32)
    model = kr.mlp_new((3, 4, 1), seed=0)
    with pytest.raises(TrainingDiverged):
        kr.train(model, X, y, kr.TrainConfig(max_iter=50, learning_rate=1e6, seed=0))


def test_train_early_stops_on_plateau():
    X = np.linspace(-1.0, 1.0, 32)[:, None]
    y = np.zeros(32)
    model = kr.mlp_new((1, 2, 1), seed=0)
    _, report = kr.train(model, X, y, kr.TrainConfig(max_iter=10000, tol=1e-3, patience=5, seed=0))
    assert report.converged
    assert report.epochs_run < 10000


def test_train_config_validation():
    with pytest.raises(DataError):
        kr.TrainConfig(max_iter=0)
    with pytest.raises(DataError):
        kr.TrainConfig(learning_rate=0.0)
    with pytest.raises(DataError):
        kr.TrainConfig(tol=-1.0)
    with pytest.raises(DataError):
        kr.TrainConfig(patience=0)
    with pytest.raises(DataError):
        kr.TrainConfig(batch_size=0)


def test_trained_parameters_stay_finite(small_bundle):
    for w in small_bundle.model.weights:
        assert np.all(np.isfinite(w))
    for b in small_bundle.model.biases:
        assert np.all(np.isfinite(b))
